"""Improvement ratios and report files.

Ratios are baseline / candidate, so values above 1 mean the candidate
improves on the kernel's best standard-level configuration. The
orientation is written into every file header.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import PassCatalog, load_catalog
from .explorer import BaselineRow, ExplorationResult
from .journal import Journal
from .runner import EvaluationRecord

REPORT_SCHEMA = "phaseorder.report/1"
ORIENTATION = "ratio = baseline / candidate (>1 means the candidate improves)"
FORMATS = ("table_csv", "record_json", "scatter_csv")
FILENAMES = {"table_csv": "table.csv", "record_json": "records.jsonl", "scatter_csv": "scatter.csv"}
TABLE_COLUMNS = ["kernel", "origin", "sequence_id", "level", "threads", "mean_energy_j",
                 "mean_time_ms", "mean_watts", "energy_ratio", "time_ratio", "energy_reduction_pct"]
SCATTER_COLUMNS = ["kernel", "sequence_id", "energy_ratio", "time_ratio"]
PHASE_ORDER = {"baseline": 0, "random": 1, "model": 2, "rescreen": 3}


class ReportError(RuntimeError):
    pass


@dataclass(frozen=True)
class RatioPoint:
    kernel: str
    sequence_id: str
    energy_ratio: float
    time_ratio: float
    energy_reduction_pct: float
    candidate_energy_j: float
    candidate_time_ms: float


def sequence_id(rec: EvaluationRecord) -> str:
    return rec.key[:16]


def ratio_point(baseline: BaselineRow, rec: EvaluationRecord) -> RatioPoint:
    e, t = rec.mean_energy_j, rec.mean_time_ms
    be, bt = baseline.mean_energy_j, baseline.mean_time_ms
    return RatioPoint(rec.kernel, sequence_id(rec), be / e, bt / t, (be - e) / be * 100.0, e, t)


def ratios(result: ExplorationResult) -> list[RatioPoint]:
    """One point per valid re-measured candidate."""
    if result.baseline is None:
        raise ReportError(f"no baseline for kernel {result.kernel}")
    return [ratio_point(result.baseline, r) for r in result.rescreened if r.valid]


# -- loading from a journal ---------------------------------------------------

def journal_provider_kind(journal_dir: str | os.PathLike) -> str:
    campaign = Journal(journal_dir).read_json("campaign.json") or {}
    return campaign.get("provider", {}).get("kind", "")


def journal_catalog(journal: Journal) -> PassCatalog:
    campaign = journal.read_json("campaign.json") or {}
    return load_catalog(campaign.get("catalog"))


def load_results(journal_dir: str | os.PathLike) -> tuple[list[ExplorationResult], list[EvaluationRecord], bool]:
    """Rebuild per-kernel results from a (possibly partial) journal.

    Returns ``(results, all_records, complete)``.
    """
    journal = Journal(journal_dir)
    if not journal.root.is_dir() or not journal.index():
        raise ReportError(f"journal {journal.root} is empty or missing")
    catalog = journal_catalog(journal)
    records = list(journal.records(catalog))
    by_key = {r.key: r for r in records}
    campaign = journal.read_json("campaign.json") or {}
    kernels = [k["name"] for k in campaign.get("kernels", [])] or sorted({r.kernel for r in records})
    results = []
    complete = bool(journal.read_json("state/complete.json"))
    for name in kernels:
        base = journal.read_json(f"state/baseline-{name}.json")
        row = None
        if base:
            grid = [by_key[k] for k in base["grid"] if k in by_key]
            best = by_key.get(base["best_key"])
            if best is not None:
                row = BaselineRow(name, grid, best)
        summary = journal.read_json(f"state/result-{name}.json") or {}
        res = ExplorationResult(name, row, complete=bool(summary.get("complete")))
        res.screened = [by_key[k] for k in summary.get("screened", []) if k in by_key]
        res.selected = [by_key[k] for k in summary.get("selected", []) if k in by_key]
        res.rescreened = sorted(
            (r for r in records if r.kernel == name and r.phase == "rescreen"),
            key=lambda r: (r.mean_energy_j if r.valid else float("inf"), r.index),
        )
        complete = complete and res.complete and row is not None
        results.append(res)
    return results, records, complete


# -- emitters -----------------------------------------------------------------

def energy_domains(records: Iterable[EvaluationRecord], provider_kind: str = "") -> list[str]:
    """Names of the energy domains summed into the reported joules."""
    names = sorted({d for r in records for s in r.samples for d in s.domains})
    return names or ([provider_kind] if provider_kind else [])


def _header(complete: bool, what: str, domains: Sequence[str] = ()) -> str:
    status = "complete" if complete else "partial"
    text = f"# {REPORT_SCHEMA} {what}\n# {ORIENTATION}\n# status: {status}\n"
    if domains:
        text += f"# energy domains: {' + '.join(domains)}\n"
    return text


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def table_csv(results: Sequence[ExplorationResult], complete: bool, domains: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(_header(complete, "table", domains))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for res in results:
        row = res.baseline
        if row is not None:
            for rec in row.grid:
                if not rec.valid:
                    continue
                p = ratio_point(row, rec)
                w.writerow(map(_fmt, [res.kernel, rec.origin, "", rec.level, rec.exec.label,
                                      rec.mean_energy_j, rec.mean_time_ms, rec.mean_watts,
                                      p.energy_ratio, p.time_ratio, p.energy_reduction_pct]))
        points = {p.sequence_id: p for p in ratios(res)} if row is not None else {}
        for rec in res.rescreened:
            if not rec.valid:
                continue
            p = points.get(sequence_id(rec))
            w.writerow(map(_fmt, [res.kernel, rec.origin, sequence_id(rec), "", rec.exec.label,
                                  rec.mean_energy_j, rec.mean_time_ms, rec.mean_watts,
                                  p.energy_ratio if p else None, p.time_ratio if p else None,
                                  p.energy_reduction_pct if p else None]))
    return buf.getvalue()


def scatter_csv(results: Sequence[ExplorationResult], complete: bool, domains: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(_header(complete, "scatter", domains))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCATTER_COLUMNS)
    for res in results:
        if res.baseline is None:
            continue
        for p in ratios(res):
            w.writerow(map(_fmt, [p.kernel, p.sequence_id, p.energy_ratio, p.time_ratio]))
    return buf.getvalue()


def record_json(records: Iterable[EvaluationRecord], complete: bool, domains: Sequence[str] = ()) -> str:
    ordered = sorted(records, key=lambda r: (r.kernel, PHASE_ORDER.get(r.phase, 9), r.index, r.key))
    lines = [json.dumps({"schema": REPORT_SCHEMA, "kind": "header", "orientation": ORIENTATION,
                         "status": "complete" if complete else "partial",
                         "energy_domains": list(domains)}, sort_keys=True)]
    lines += [json.dumps({"schema": REPORT_SCHEMA, "kind": "record", **r.to_dict()}, sort_keys=True)
              for r in ordered]
    return "\n".join(lines) + "\n"


def parse_record_json(text: str, catalog: PassCatalog) -> list[EvaluationRecord]:
    out = []
    for line in text.splitlines():
        doc = json.loads(line)
        if doc.get("kind") != "record":
            continue
        doc.pop("schema"), doc.pop("kind")
        out.append(EvaluationRecord.from_dict(doc, catalog))
    return out


def emit(results: Sequence[ExplorationResult], fmt: str, out_dir: str | os.PathLike,
         records: Iterable[EvaluationRecord] = (), complete: bool = True,
         domains: Sequence[str] = ()) -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "table_csv":
        text = table_csv(results, complete, domains)
    elif fmt == "scatter_csv":
        text = scatter_csv(results, complete, domains)
    else:
        text = record_json(records, complete, domains)
    out = Path(out_dir) / FILENAMES[fmt]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    return out


def point_count(results: Sequence[ExplorationResult]) -> int:
    return sum(len(ratios(r)) for r in results if r.baseline is not None)
