"""Output validation of optimized binaries against an unoptimized serial reference."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import _proc

DEFAULT_TOLERANCE = 0.001
VALIDATION_DATASET = "mini"


@dataclass(frozen=True)
class Verdict:
    correct: bool
    max_abs_diff: float
    compared_values: int
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "max_abs_diff": self.max_abs_diff,
            "compared_values": self.compared_values,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Verdict":
        return cls(d["correct"], d["max_abs_diff"], d["compared_values"], d.get("reason", ""))


def parse_values(text: str) -> list[float]:
    """Numeric tokens of an output dump; non-numeric tokens (labels, banners) are skipped."""
    values = []
    for tok in text.split():
        try:
            values.append(float(tok))
        except ValueError:
            continue
    return values


def compare(candidate: Sequence[float], reference: Sequence[float],
            tolerance: float = DEFAULT_TOLERANCE) -> Verdict:
    """Element-wise absolute comparison; a value passes when ``|a - b| <= tolerance``."""
    if len(candidate) != len(reference):
        return Verdict(False, math.inf, min(len(candidate), len(reference)),
                       f"output length {len(candidate)} != reference length {len(reference)}")
    worst = 0.0
    for a, b in zip(candidate, reference):
        d = abs(a - b)
        if math.isnan(d):
            return Verdict(False, math.nan, len(reference), "NaN in output")
        worst = max(worst, d)
    ok = worst <= tolerance
    return Verdict(ok, worst, len(reference), "" if ok else f"max |diff| {worst!r} > {tolerance!r}")


def run_outputs(binary: str | os.PathLike, env: Mapping[str, str] | None = None,
                timeout: float = 60.0, stream: str = "stdout") -> tuple[list[float] | None, str]:
    res = _proc.run([str(binary)], timeout, env=env)
    if res.timed_out:
        return None, f"timed out after {timeout:g} s"
    if res.returncode != 0:
        return None, _proc.excerpt(f"exit {res.returncode}: {res.stderr}", 500)
    return parse_values(getattr(res, stream)), ""


def validate(candidate_binary: str | os.PathLike, reference_output: str | os.PathLike,
             tolerance: float = DEFAULT_TOLERANCE, dataset: str = VALIDATION_DATASET,
             env: Mapping[str, str] | None = None, timeout: float = 60.0,
             stream: str = "stdout") -> Verdict:
    """Run *candidate_binary* (already built for *dataset*) and compare with the reference file."""
    reference = parse_values(Path(reference_output).read_text())
    values, reason = run_outputs(candidate_binary, env, timeout, stream)
    if values is None:
        return Verdict(False, math.inf, 0, reason)
    return compare(values, reference, tolerance)


class ReferenceCache:
    """Reference output files keyed by (kernel, dataset)."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path(self, kernel: str, dataset: str) -> Path:
        return self.root / f"{kernel}.{dataset}.ref.txt"

    def get(self, kernel: str, dataset: str) -> Path | None:
        p = self.path(kernel, dataset)
        return p if p.exists() else None

    def put(self, kernel: str, dataset: str, values: Iterable[float]) -> Path:
        p = self.path(kernel, dataset)
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_suffix(".tmp")
        tmp.write_text("".join(f"{v!r}\n" for v in values))
        os.replace(tmp, p)
        return p
