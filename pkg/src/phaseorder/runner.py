"""Repeated measured execution of one binary under one execution configuration."""

from __future__ import annotations

import enum
import logging
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import _proc
from .catalog import Origin, PassCatalog, PassSequence
from .meter import (
    MeasurementError,
    MeasurementLock,
    MeasurementSample,
    Provider,
    ProviderError,
    ProviderSpec,
    RunTimeout,
    make_provider,
)
from .toolchain import CompileOutcome
from .validate import Verdict

log = logging.getLogger(__name__)

THREADS_ENV = "OMP_NUM_THREADS"


@dataclass(frozen=True)
class ExecConfig:
    """``threads=None`` means the serial build compiled without OpenMP."""

    threads: int | None = None
    env_overrides: tuple[tuple[str, str], ...] = ()
    run_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be a positive integer")
        if isinstance(self.env_overrides, Mapping):
            object.__setattr__(self, "env_overrides", tuple(sorted(self.env_overrides.items())))

    @property
    def openmp(self) -> bool:
        return self.threads is not None

    @property
    def label(self) -> str:
        return "S" if self.threads is None else f"{self.threads}T"

    def environment(self, base: Mapping[str, str] | None = None) -> dict[str, str]:
        env = dict(os.environ if base is None else base)
        env.update(self.env_overrides)
        if self.threads is not None:
            env[THREADS_ENV] = str(self.threads)
        else:
            env.pop(THREADS_ENV, None)
        return env

    def to_dict(self) -> dict:
        return {"threads": self.threads, "env": dict(self.env_overrides), "run_timeout": self.run_timeout}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExecConfig":
        return cls(d.get("threads"), tuple(sorted(d.get("env", {}).items())), d.get("run_timeout", 60.0))


class RecordStatus(str, enum.Enum):
    OK = "ok"
    COMPILE_FAILED = "compile_failed"
    TOOL_TIMEOUT = "tool_timeout"
    INVALID = "invalid"
    RUN_FAILED = "run_failed"


@dataclass
class EvaluationRecord:
    kernel: str
    exec: ExecConfig
    sequence: PassSequence | None = None
    level: str | None = None
    compile: CompileOutcome | None = None
    verdict: Verdict | None = None
    samples: list[MeasurementSample] = field(default_factory=list)
    status: RecordStatus = RecordStatus.OK
    error: str = ""
    phase: str = ""
    index: int = 0
    key: str = ""

    def __post_init__(self) -> None:
        self.status = RecordStatus(self.status)
        if self.samples and not (self.compile and self.compile.ok and self.verdict and self.verdict.correct):
            raise ValueError("samples require a successful compile and a correct verdict")

    @property
    def valid(self) -> bool:
        return self.status is RecordStatus.OK and bool(self.samples)

    @property
    def mean_energy_j(self) -> float:
        return statistics.fmean(s.energy_joules for s in self.samples)

    @property
    def mean_time_ms(self) -> float:
        return statistics.fmean(s.elapsed_ms for s in self.samples)

    @property
    def mean_watts(self) -> float:
        return self.mean_energy_j / (self.mean_time_ms / 1000.0)

    @property
    def origin(self) -> str:
        if self.level is not None:
            return Origin.STANDARD_LEVEL.value
        return self.sequence.origin.value if self.sequence else Origin.MANUAL.value

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "phase": self.phase,
            "index": self.index,
            "kernel": self.kernel,
            "origin": self.origin,
            "sequence": list(self.sequence.names) if self.sequence is not None else None,
            "level": self.level,
            "exec": self.exec.to_dict(),
            "status": self.status.value,
            "error": self.error,
            "compile": self.compile.to_dict() if self.compile else None,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "samples": [s.to_dict() for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: Mapping, catalog: PassCatalog) -> "EvaluationRecord":
        seq = None
        if d.get("sequence") is not None:
            origin = d.get("origin", "manual")
            if origin == Origin.STANDARD_LEVEL.value:
                origin = Origin.MANUAL.value
            seq = catalog.sequence(d["sequence"], Origin(origin))
        return cls(
            kernel=d["kernel"],
            exec=ExecConfig.from_dict(d["exec"]),
            sequence=seq,
            level=d.get("level"),
            compile=CompileOutcome.from_dict(d["compile"]) if d.get("compile") else None,
            verdict=Verdict.from_dict(d["verdict"]) if d.get("verdict") else None,
            samples=[MeasurementSample.from_dict(s) for s in d.get("samples", [])],
            status=d["status"],
            error=d.get("error", ""),
            phase=d.get("phase", ""),
            index=d.get("index", 0),
            key=d.get("key", ""),
        )


@dataclass
class Evaluation:
    samples: list[MeasurementSample]
    status: RecordStatus = RecordStatus.OK
    error: str = ""
    env: dict[str, str] = field(default_factory=dict)


def evaluate(binary: str | os.PathLike, exec: ExecConfig, reps: int,
             provider: ProviderSpec | Provider, lock: MeasurementLock | None = None,
             base_env: Mapping[str, str] | None = None, warmup: int = 0,
             pause: float = 0.0) -> Evaluation:
    """Measure *binary* ``reps`` times back to back, holding the machine lock for the block.

    Any failing run taints the whole evaluation: status becomes ``run_failed``
    and no samples are kept. *warmup* unmeasured runs precede the block and
    *pause* seconds separate measured runs; both default to off.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if isinstance(provider, ProviderSpec):
        provider = make_provider(provider)
    env = exec.environment(base_env)
    logged_env = dict(exec.env_overrides)
    if exec.threads is not None:
        logged_env[THREADS_ENV] = str(exec.threads)
    samples: list[MeasurementSample] = []
    lock = lock or MeasurementLock()
    with lock.exclusive():
        for _ in range(warmup):
            res = _proc.run([str(binary)], exec.run_timeout, env=env)
            if not res.ok:
                return Evaluation([], RecordStatus.RUN_FAILED, "warm-up run failed", logged_env)
        for n in range(reps):
            if pause and n:
                time.sleep(pause)
            try:
                samples.append(provider.measure([str(Path(binary))], env, exec.run_timeout))
            except ProviderError:
                raise
            except RunTimeout as exc:
                return Evaluation([], RecordStatus.RUN_FAILED, f"timeout: {exc}", logged_env)
            except MeasurementError as exc:
                return Evaluation([], RecordStatus.RUN_FAILED, str(exc), logged_env)
    return Evaluation(samples, RecordStatus.OK, "", logged_env)
