"""Campaign orchestration.

The protocol per kernel:

1. baseline sweep over standard levels x execution configs; the
   lowest-energy cell fixes the kernel's execution config;
2. screening of one shared batch of uniform random sequences (one run each);
3. a transition model trained on the other kernels' best random sequences
   (leave-one-out), sampled for new candidates, which are screened;
4. the lowest-energy fraction is re-measured with the full repetition count.

Every candidate is compiled, validated against the serial unoptimized
reference, and only then measured. Records go to the journal as soon as
they exist; a resumed campaign reuses every stored record.
"""

from __future__ import annotations

import logging
import math
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import model as seqmodel
from . import prng
from .catalog import Origin, PassCatalog, PassSequence, load_catalog
from .config import CampaignConfig, ConfigError, ExplorationPlan, KernelSpec
from .journal import Journal, record_key
from .meter import MeasurementLock, Provider, make_provider
from .runner import EvaluationRecord, ExecConfig, RecordStatus, evaluate
from .seqgen import generate_random
from .toolchain import CompileOutcome, CompileStatus, Toolchain, clean_scratch
from .validate import ReferenceCache, Verdict, run_outputs, validate

log = logging.getLogger(__name__)


class ExplorationError(RuntimeError):
    pass


class EmptySelectionError(ExplorationError):
    pass


class ReferenceBuildError(ExplorationError):
    pass


def _order_key(rec: EvaluationRecord):
    return (rec.mean_energy_j, rec.mean_time_ms, rec.index)


def select_top(records: Iterable[EvaluationRecord], fraction: float = 0.05) -> list[EvaluationRecord]:
    """The ``ceil(fraction * valid)`` lowest-energy valid records.

    Ties break on lower mean time, then on earlier generation index.
    """
    valid = [r for r in records if r.valid]
    if not valid:
        raise EmptySelectionError("no valid records to select from")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = math.ceil(Fraction(str(fraction)) * len(valid))
    return sorted(valid, key=_order_key)[:n]


@dataclass
class BaselineRow:
    kernel: str
    grid: list[EvaluationRecord]
    best: EvaluationRecord

    @property
    def best_exec(self) -> ExecConfig:
        return self.best.exec

    @property
    def best_level(self) -> str:
        return self.best.level

    @property
    def mean_energy_j(self) -> float:
        return self.best.mean_energy_j

    @property
    def mean_time_ms(self) -> float:
        return self.best.mean_time_ms

    def best_for_build(self, openmp: bool) -> EvaluationRecord | None:
        cells = [r for r in self.grid if r.valid and r.exec.openmp == openmp]
        return min(cells, key=_order_key) if cells else None

    def summary(self) -> dict:
        return {
            "kernel": self.kernel,
            "best_level": self.best_level,
            "best_threads": self.best_exec.threads,
            "best_label": f"{self.best_exec.label} -- {self.best_level}",
            "mean_energy_j": self.mean_energy_j,
            "mean_time_ms": self.mean_time_ms,
            "grid": [r.key for r in self.grid],
            "best_key": self.best.key,
        }


@dataclass
class ExplorationResult:
    kernel: str
    baseline: BaselineRow | None
    screened: list[EvaluationRecord] = field(default_factory=list)
    selected: list[EvaluationRecord] = field(default_factory=list)
    rescreened: list[EvaluationRecord] = field(default_factory=list)
    complete: bool = False

    def summary(self) -> dict:
        return {
            "kernel": self.kernel,
            "complete": self.complete,
            "screened": [r.key for r in self.screened],
            "selected": [r.key for r in self.selected],
            "rescreened": [r.key for r in self.rescreened],
            "valid_screened": sum(r.valid for r in self.screened),
        }


@dataclass
class Candidate:
    key: str
    phase: str
    index: int
    kernel: KernelSpec
    exec: ExecConfig
    reps: int
    sequence: PassSequence | None = None
    level: str | None = None


@dataclass
class Prepared:
    cand: Candidate
    binary: Path | None = None
    compile: CompileOutcome | None = None
    verdict: Verdict | None = None
    status: RecordStatus = RecordStatus.OK
    error: str = ""
    scratch: Path | None = None


class Campaign:
    """One exploration campaign bound to a journal directory."""

    def __init__(self, cfg: CampaignConfig, provider: Provider | None = None,
                 catalog: PassCatalog | None = None,
                 on_record: Callable[[EvaluationRecord], None] | None = None):
        self.cfg = cfg
        self.plan: ExplorationPlan = cfg.plan
        self.catalog = catalog or load_catalog(cfg.catalog)
        self.journal = Journal(cfg.journal)
        self.toolchain = Toolchain(cfg.toolchain, cache_dir=self.journal.root / "cache")
        self.provider = provider or make_provider(cfg.provider)
        self.lock = MeasurementLock(cfg.lock_path or self.journal.root / "measure.lock")
        self.refs = ReferenceCache(self.journal.root / "refs")
        self.on_record = on_record
        self.measured = 0
        self._ref_lock = threading.Lock()

    # -- candidate pipeline ---------------------------------------------------

    def _key(self, phase: str, kernel: str, exec: ExecConfig, reps: int, index: int,
             sequence: PassSequence | None = None, level: str | None = None, **extra) -> str:
        fields = dict(
            phase=phase, kernel=kernel, exec=exec.to_dict(), reps=reps, index=index,
            sequence=list(sequence.names) if sequence is not None else None, level=level,
            **extra,
        )
        if phase != "baseline":
            fields["seed"] = self.plan.seed
        return record_key(**fields)

    def reference(self, kernel: KernelSpec) -> Path:
        with self._ref_lock:
            return self._reference(kernel)

    def _reference(self, kernel: KernelSpec) -> Path:
        ds = self.plan.validation_dataset
        ref = self.refs.get(kernel.name, ds)
        if ref is not None:
            return ref
        scratch = self.journal.root / "scratch" / f"ref-{kernel.name}"
        tc = self.toolchain.with_openmp(False)
        out = tc.compile_standard(kernel.source, kernel.harness, "O0", scratch, dataset=ds)
        if not out.ok:
            raise ReferenceBuildError(
                f"reference build of {kernel.name} failed at {out.stage}: {out.log_excerpt}")
        values, reason = run_outputs(out.binary_path, ExecConfig().environment(), self.plan.run_timeout)
        if values is None:
            raise ReferenceBuildError(f"reference run of {kernel.name} failed: {reason}")
        clean_scratch(scratch)
        return self.refs.put(kernel.name, ds, values)

    def _compile(self, cand: Candidate, scratch: Path, dataset: str | None) -> CompileOutcome:
        tc = self.toolchain.with_openmp(cand.exec.openmp)
        src = cand.kernel.source_for(cand.exec.openmp)
        if cand.level is not None:
            return tc.compile_standard(src, cand.kernel.harness, cand.level, scratch, dataset)
        return tc.compile(src, cand.kernel.harness, cand.sequence, scratch, dataset)

    def _prepare(self, cand: Candidate) -> Prepared:
        """Compile, validate and build the measurement binary (safe to run concurrently)."""
        scratch = self.journal.root / "scratch" / cand.key
        prep = Prepared(cand, scratch=scratch)
        vds = self.plan.validation_dataset
        out = self._compile(cand, scratch / "validate", vds)
        prep.compile = out
        if not out.ok:
            prep.status = (RecordStatus.TOOL_TIMEOUT if out.status is CompileStatus.TOOL_TIMEOUT
                           else RecordStatus.COMPILE_FAILED)
            prep.error = f"{out.stage}: {out.log_excerpt}"
            return prep
        ref = self.reference(cand.kernel)
        with self.lock.shared():
            prep.verdict = validate(out.binary_path, ref, self.plan.tolerance, vds,
                                    env=cand.exec.environment(), timeout=cand.exec.run_timeout)
        if not prep.verdict.correct:
            prep.status = RecordStatus.INVALID
            prep.error = prep.verdict.reason
            return prep
        mds = cand.kernel.dataset
        if mds is None or mds == vds:
            prep.binary = out.binary_path
            return prep
        run_out = self._compile(cand, scratch / "run", mds)
        if not run_out.ok:
            prep.compile = run_out
            prep.status = (RecordStatus.TOOL_TIMEOUT if run_out.status is CompileStatus.TOOL_TIMEOUT
                           else RecordStatus.COMPILE_FAILED)
            prep.error = f"{run_out.stage}: {run_out.log_excerpt}"
            return prep
        prep.compile = CompileOutcome(CompileStatus.OK, run_out.binary_path,
                                      commands=out.commands + run_out.commands)
        prep.binary = run_out.binary_path
        return prep

    def _finish(self, prep: Prepared) -> EvaluationRecord:
        cand = prep.cand
        rec = EvaluationRecord(
            kernel=cand.kernel.name, exec=cand.exec, sequence=cand.sequence, level=cand.level,
            compile=prep.compile, verdict=prep.verdict, status=prep.status, error=prep.error,
            phase=cand.phase, index=cand.index, key=cand.key,
        )
        if prep.status is RecordStatus.OK:
            ev = evaluate(prep.binary, cand.exec, cand.reps, self.provider, self.lock,
                          warmup=self.plan.warmup_runs, pause=self.plan.inter_run_pause)
            self.measured += 1
            rec.samples, rec.status, rec.error = ev.samples, ev.status, ev.error
        self.journal.put(rec)
        if not self.cfg.toolchain.keep_artifacts and prep.scratch is not None:
            clean_scratch(prep.scratch)
        if self.on_record:
            self.on_record(rec)
        return rec

    def run_candidates(self, cands: Sequence[Candidate]) -> list[EvaluationRecord]:
        """Evaluate in order; compilation runs ahead on ``plan.jobs`` threads, measurement is serial."""
        results: list[EvaluationRecord | None] = [None] * len(cands)
        todo = []
        for n, c in enumerate(cands):
            rec = self.journal.load(c.key, self.catalog)
            if rec is not None:
                rec.index = c.index
                results[n] = rec
            else:
                todo.append(n)
        if todo:
            jobs = self.plan.jobs
            if jobs == 1:
                for n in todo:
                    results[n] = self._finish(self._prepare(cands[n]))
            else:
                with ThreadPoolExecutor(jobs) as pool:
                    window = deque()
                    it = iter(todo)
                    for n in it:
                        window.append((n, pool.submit(self._prepare, cands[n])))
                        if len(window) >= 2 * jobs:
                            break
                    while window:
                        n, fut = window.popleft()
                        nxt = next(it, None)
                        if nxt is not None:
                            window.append((nxt, pool.submit(self._prepare, cands[nxt])))
                        results[n] = self._finish(fut.result())
        return results  # type: ignore[return-value]

    # -- protocol stages ------------------------------------------------------

    def kernel(self, name: str) -> KernelSpec:
        for k in self.cfg.kernels:
            if k.name == name:
                return k
        raise ExplorationError(f"unknown kernel {name!r}")

    def exec_configs(self) -> list[ExecConfig]:
        return [ExecConfig(t, run_timeout=self.plan.run_timeout) for t in self.plan.thread_sets]

    def baseline_sweep(self, kernel: KernelSpec) -> BaselineRow:
        reps = self.plan.rescreen_reps
        cands = []
        for ex in self.exec_configs():
            for level in self.plan.levels:
                cands.append(Candidate(self._key("baseline", kernel.name, ex, reps, len(cands), level=level),
                                       "baseline", len(cands), kernel, ex, reps, level=level))
        grid = self.run_candidates(cands)
        valid = [r for r in grid if r.valid]
        if not valid:
            raise ExplorationError(f"no baseline configuration of {kernel.name} succeeded")
        row = BaselineRow(kernel.name, grid, min(valid, key=_order_key))
        self.journal.write_json(f"state/baseline-{kernel.name}.json", row.summary())
        return row

    def random_sequences(self) -> list[PassSequence]:
        rng = prng.derive(self.plan.seed, "random")
        seqs = generate_random(self.catalog, self.plan.random_count, self.plan.seq_length, rng)
        self.journal.write_json("state/random-sequences.json",
                                {"seed": self.plan.seed, "sequences": [list(s.names) for s in seqs]})
        return seqs

    def screen(self, kernel: KernelSpec, sequences: Sequence[PassSequence], exec: ExecConfig,
               phase: str) -> list[EvaluationRecord]:
        cands = [
            Candidate(self._key(phase, kernel.name, exec, 1, i, sequence=s), phase, i, kernel, exec, 1, sequence=s)
            for i, s in enumerate(sequences)
        ]
        return self.run_candidates(cands)

    def random_screen(self, kernel: KernelSpec, baseline: BaselineRow,
                      sequences: Sequence[PassSequence]) -> list[EvaluationRecord]:
        """Screen the shared random batch under the best config (and the best other-build config)."""
        records = self.screen(kernel, sequences, baseline.best_exec, "random")
        if self.plan.screen_both_builds:
            other = baseline.best_for_build(not baseline.best_exec.openmp)
            if other is not None:
                self.screen(kernel, sequences, other.exec, "random")
        return records

    @staticmethod
    def best_seed(records: Sequence[EvaluationRecord]) -> PassSequence | None:
        valid = [r for r in records if r.valid and r.sequence is not None and r.sequence.items]
        if not valid:
            return None
        return min(valid, key=_order_key).sequence

    def explore_kernel(self, kernel: KernelSpec, baseline: BaselineRow,
                       all_best_seeds: Sequence[tuple[str, PassSequence]]) -> ExplorationResult:
        labels = {label for label, _ in all_best_seeds}
        if kernel.name in labels:
            graph = seqmodel.leave_one_out(all_best_seeds, kernel.name)
        else:
            # This kernel found no valid random sequence, so every seed is already "other".
            if not all_best_seeds or len(self.cfg.kernels) < 2:
                raise seqmodel.ModelError("leave-one-out needs seeds from at least 2 kernels")
            graph = seqmodel.build(all_best_seeds)
        self.journal.write_json(f"models/{kernel.name}.json", graph.to_dict())

        rng = prng.derive(self.plan.seed, "model", kernel.name)
        seqs = seqmodel.sample(graph, self.plan.model_count, self.plan.seq_length, rng)
        result = ExplorationResult(kernel.name, baseline)
        result.screened = self.screen(kernel, seqs, baseline.best_exec, "model")
        self._write_result(result)
        result.selected = select_top(result.screened, self.plan.select_fraction)
        reps = self.plan.rescreen_reps
        cands = [
            Candidate(self._key("rescreen", kernel.name, r.exec, reps, r.index, sequence=r.sequence,
                                source=r.key),
                      "rescreen", r.index, kernel, r.exec, reps, sequence=r.sequence)
            for r in result.selected
        ]
        result.rescreened = self.run_candidates(cands)
        result.complete = True
        self._write_result(result)
        return result

    def _write_result(self, result: ExplorationResult) -> None:
        self.journal.write_json(f"state/result-{result.kernel}.json", result.summary())

    # -- whole campaign -------------------------------------------------------

    def start(self, resume: bool = False) -> None:
        if self.journal.exists() and not resume:
            if self.journal.index():
                raise ConfigError(
                    f"journal {self.journal.root} already has records; pass --resume to continue it")
        self.journal.init()
        fixed = self.journal.repair()
        if fixed:
            log.warning("re-indexed %d record(s) written before an interruption", fixed)
        previous = self.journal.read_json("campaign.json")
        current = self.cfg.to_dict()
        if previous and previous.get("plan", {}).get("seed") != current["plan"]["seed"]:
            log.warning("seed changed from %r to %r; records are keyed separately",
                        previous["plan"]["seed"], current["plan"]["seed"])
        self.journal.write_json("campaign.json", current)

    def run_baseline(self) -> dict[str, BaselineRow]:
        rows = {k.name: self.baseline_sweep(k) for k in self.cfg.kernels}
        self.journal.write_json("state/baseline.json", {n: r.summary() for n, r in rows.items()})
        return rows

    def run(self) -> dict[str, ExplorationResult]:
        if len(self.cfg.kernels) < 2:
            raise seqmodel.ModelError("leave-one-out needs at least 2 kernels")
        rows = self.run_baseline()
        seqs = self.random_sequences()
        seeds: list[tuple[str, PassSequence]] = []
        for k in self.cfg.kernels:
            recs = self.random_screen(k, rows[k.name], seqs)
            best = self.best_seed(recs)
            if best is None:
                log.warning("kernel %s has no valid random sequence; it contributes no seed", k.name)
            else:
                seeds.append((k.name, PassSequence(best.items, Origin.RANDOM)))
        self.journal.write_json("state/seeds.json", {l: list(s.names) for l, s in seeds})
        if not seeds:
            raise EmptySelectionError("no kernel produced a valid random sequence")
        results = {}
        for k in self.cfg.kernels:
            results[k.name] = self.explore_kernel(k, rows[k.name], seeds)
        self.journal.write_json("state/complete.json", {"complete": True, "kernels": list(results)})
        return results


def baseline_sweep(kernel: KernelSpec, campaign: Campaign) -> BaselineRow:
    return campaign.baseline_sweep(kernel)
