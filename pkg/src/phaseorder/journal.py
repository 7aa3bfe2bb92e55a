"""Append-only campaign journal.

Layout::

    <root>/campaign.json        resolved configuration
    <root>/index.jsonl          one line per stored record, append-only
    <root>/records/<key>.json   one evaluation record per file
    <root>/state/*.json         derived artifacts (baseline, seeds, results)
    <root>/models/*.json        serialized transition graphs

Each record file is written atomically and fsynced before its index line is
appended, so an interrupted campaign never leaves a half-written record.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterator

from .catalog import PassCatalog
from .runner import EvaluationRecord

RECORD_SCHEMA = "phaseorder.record/1"


def record_key(**fields) -> str:
    blob = json.dumps(fields, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class Journal:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    @property
    def index_path(self) -> Path:
        return self.root / "index.jsonl"

    def exists(self) -> bool:
        return self.index_path.exists() or (self.root / "campaign.json").exists()

    def init(self) -> None:
        (self.root / "records").mkdir(parents=True, exist_ok=True)
        self.index_path.touch()

    def record_path(self, key: str) -> Path:
        return self.root / "records" / f"{key}.json"

    def has(self, key: str) -> bool:
        return self.record_path(key).exists()

    def load(self, key: str, catalog: PassCatalog) -> EvaluationRecord | None:
        p = self.record_path(key)
        if not p.exists():
            return None
        return EvaluationRecord.from_dict(json.loads(p.read_text()), catalog)

    def put(self, record: EvaluationRecord) -> None:
        if not record.key:
            raise ValueError("record has no key")
        doc = {"schema": RECORD_SCHEMA, **record.to_dict()}
        _atomic_write(self.record_path(record.key), json.dumps(doc, sort_keys=True, indent=1) + "\n")
        line = json.dumps({"key": record.key, "phase": record.phase, "kernel": record.kernel,
                           "status": record.status.value}, sort_keys=True)
        with open(self.index_path, "a") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    def repair(self) -> int:
        """Make the index consistent after an interruption.

        Drops a torn trailing index line and indexes record files that were
        written but not yet listed. Returns the number of records re-indexed.
        """
        if not self.index_path.exists():
            return 0
        text = self.index_path.read_text()
        if text and not text.endswith("\n"):
            text = text[: text.rfind("\n") + 1]
            _atomic_write(self.index_path, text)
        for tmp in (self.root / "records").glob("*.tmp"):
            tmp.unlink()
        listed = {e["key"] for e in self.index()}
        missing = sorted(p for p in (self.root / "records").glob("*.json") if p.stem not in listed)
        with open(self.index_path, "a") as f:
            for p in missing:
                doc = json.loads(p.read_text())
                f.write(json.dumps({"key": doc["key"], "phase": doc["phase"], "kernel": doc["kernel"],
                                    "status": doc["status"]}, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())
        return len(missing)

    def index(self) -> list[dict]:
        if not self.index_path.exists():
            return []
        out = []
        for line in self.index_path.read_text().splitlines():
            line = line.strip()
            if line:
                try:
                    out.append(json.loads(line))
                except ValueError:
                    continue  # torn trailing line from an interrupted append
        return out

    def records(self, catalog: PassCatalog, phase: str | None = None) -> Iterator[EvaluationRecord]:
        seen = set()
        for entry in self.index():
            key = entry["key"]
            if key in seen or (phase and entry.get("phase") != phase):
                continue
            seen.add(key)
            rec = self.load(key, catalog)
            if rec is not None:
                yield rec

    def write_json(self, name: str, obj) -> Path:
        path = self.root / name
        _atomic_write(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
        return path

    def read_json(self, name: str):
        path = self.root / name
        return json.loads(path.read_text()) if path.exists() else None
