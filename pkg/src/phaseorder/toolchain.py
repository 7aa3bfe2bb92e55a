"""Driver for the external front-end / optimizer / back-end / linker pipeline.

Only the kernel's IR passes through the optimizer. Harness sources go
front-end -> back-end directly, so their assembly is identical for every
candidate of one kernel; with a cache directory it is built once and reused.

Command templates are token lists. ``{input}``, ``{output}``, ``{cpu_flag}``
and ``{fp_contract_flag}`` are substituted inside tokens; a token that is
exactly ``{passes}``, ``{inputs}``, ``{openmp_flag}``, ``{dataset_flag}`` or
``{extra_frontend_args}`` expands to zero or more tokens.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import shutil
import sys
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import _proc
from .catalog import PassSequence, render_sequence

log = logging.getLogger(__name__)

LEVELS = ("O0", "O1", "O2", "O3")
_LIST_PLACEHOLDERS = ("passes", "inputs", "openmp_flag", "dataset_flag", "extra_frontend_args")
FAKE_DIR = Path(__file__).parent / "fake"


class CompileStatus(str, enum.Enum):
    OK = "ok"
    TOOL_ERROR = "tool_error"
    TOOL_TIMEOUT = "tool_timeout"


@dataclass
class ToolchainConfig:
    frontend_cmd: list[str]
    optimizer_cmd: list[str]
    backend_cmd: list[str]
    linker_cmd: list[str]
    cpu_flag: str = "-mcpu=native"
    fp_contract_flag: str = "-fp-contract=fast"
    tool_timeout: float = 10.0
    openmp: bool = False
    openmp_flag: list[str] = field(default_factory=lambda: ["-fopenmp"])
    extra_frontend_args: list[str] = field(default_factory=list)
    dataset_flag: str = "-D{DATASET}_DATASET"
    # O0 is the identity optimization: no optimizer flags at all.
    level_tokens: dict[str, list[str]] = field(
        default_factory=lambda: {"O0": [], "O1": ["-O1"], "O2": ["-O2"], "O3": ["-O3"]}
    )
    path_override: str | None = None
    keep_artifacts: bool = False

    def __post_init__(self) -> None:
        if self.tool_timeout <= 0:
            raise ValueError("tool_timeout must be > 0")
        for name in ("frontend_cmd", "optimizer_cmd", "backend_cmd", "linker_cmd"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        missing = set(LEVELS) - set(self.level_tokens)
        if missing:
            raise ValueError(f"level_tokens lacks {sorted(missing)}")

    def to_dict(self) -> dict:
        return asdict(self)


def profile(name: str, **overrides) -> ToolchainConfig:
    """Named toolchain profiles.

    ``llvm`` is the Clang/opt/llc triple with a 10 s tool limit (workstation);
    ``llvm-board`` the same with 60 s (slow boards); ``fake`` runs the bundled
    emulation scripts for hermetic testing.
    """
    if name in ("llvm", "llvm-board"):
        cfg = dict(
            frontend_cmd=[
                "clang", "-S", "-emit-llvm", "-O0", "-Xclang", "-disable-O0-optnone",
                "{openmp_flag}", "{dataset_flag}", "{extra_frontend_args}",
                "{input}", "-o", "{output}",
            ],
            optimizer_cmd=["opt", "-S", "{passes}", "{input}", "-o", "{output}"],
            backend_cmd=["llc", "{cpu_flag}", "{fp_contract_flag}", "{input}", "-o", "{output}"],
            linker_cmd=["clang", "{openmp_flag}", "{inputs}", "-o", "{output}", "-lm"],
            tool_timeout=10.0 if name == "llvm" else 60.0,
        )
    elif name == "fake":
        py = [sys.executable, "-S", "-E"]
        cfg = dict(
            frontend_cmd=[*py, str(FAKE_DIR / "cc.py"), "-emit-ir", "{openmp_flag}",
                          "{dataset_flag}", "{extra_frontend_args}", "{input}", "-o", "{output}"],
            optimizer_cmd=[*py, str(FAKE_DIR / "opt.py"), "{passes}", "{input}", "-o", "{output}"],
            backend_cmd=[*py, str(FAKE_DIR / "llc.py"), "{cpu_flag}", "{fp_contract_flag}",
                         "{input}", "-o", "{output}"],
            linker_cmd=[*py, str(FAKE_DIR / "cc.py"), "-link", "{openmp_flag}", "{inputs}",
                        "-o", "{output}"],
            tool_timeout=10.0,
        )
    else:
        raise ValueError(f"unknown toolchain profile {name!r}")
    cfg.update(overrides)
    return ToolchainConfig(**cfg)


def expand(template: Sequence[str], values: dict) -> list[str]:
    """Resolve one command template into an argument vector."""
    argv: list[str] = []
    scalars = {k: v for k, v in values.items() if k not in _LIST_PLACEHOLDERS}
    for tok in template:
        key = tok[1:-1] if tok.startswith("{") and tok.endswith("}") else None
        if key in _LIST_PLACEHOLDERS:
            argv.extend(str(v) for v in values.get(key, ()))
        else:
            argv.append(tok.format(**scalars))
    return argv


@dataclass
class CompileOutcome:
    status: CompileStatus
    binary_path: Path | None = None
    stage: str | None = None
    log_excerpt: str = ""
    commands: list[list[str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.status = CompileStatus(self.status)
        if (self.status is CompileStatus.OK) != (self.binary_path is not None):
            raise ValueError("binary_path must be present exactly when status is ok")

    @property
    def ok(self) -> bool:
        return self.status is CompileStatus.OK

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "binary_path": str(self.binary_path) if self.binary_path else None,
            "stage": self.stage,
            "log_excerpt": self.log_excerpt,
            "commands": self.commands,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompileOutcome":
        bp = d.get("binary_path")
        return cls(d["status"], Path(bp) if bp else None, d.get("stage"),
                   d.get("log_excerpt", ""), d.get("commands", []))


class _StageFailed(Exception):
    def __init__(self, outcome: CompileOutcome):
        self.outcome = outcome


class Toolchain:
    """Compiles kernels with a given config; optionally caches pass-independent steps."""

    def __init__(self, cfg: ToolchainConfig, cache_dir: str | os.PathLike | None = None):
        self.cfg = cfg
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _env(self) -> dict[str, str]:
        env = dict(os.environ)
        if self.cfg.path_override:
            env["PATH"] = self.cfg.path_override
        return env

    def _values(self, dataset: str | None) -> dict:
        cfg = self.cfg
        return {
            "cpu_flag": cfg.cpu_flag,
            "fp_contract_flag": cfg.fp_contract_flag,
            "openmp_flag": cfg.openmp_flag if cfg.openmp else [],
            "extra_frontend_args": cfg.extra_frontend_args,
            "dataset_flag": [cfg.dataset_flag.format(DATASET=dataset.upper(), dataset=dataset)]
            if dataset else [],
        }

    def _step(self, stage: str, template, values: dict, commands: list, cwd: Path) -> None:
        argv = expand(template, values)
        commands.append(argv)
        log.debug("%s: %s", stage, " ".join(argv))
        res = _proc.run(argv, self.cfg.tool_timeout, cwd=cwd, env=self._env())
        if res.timed_out:
            raise _StageFailed(CompileOutcome(
                CompileStatus.TOOL_TIMEOUT, stage=stage, commands=commands,
                log_excerpt=f"killed after {self.cfg.tool_timeout:g} s"))
        if res.returncode != 0:
            raise _StageFailed(CompileOutcome(
                CompileStatus.TOOL_ERROR, stage=stage, commands=commands,
                log_excerpt=_proc.excerpt(f"exit {res.returncode}\n{res.stderr}")))
        if not Path(values["output"]).exists():
            raise _StageFailed(CompileOutcome(
                CompileStatus.TOOL_ERROR, stage=stage, commands=commands,
                log_excerpt=f"{stage} exited 0 but produced no output"))

    def _lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def _cached(self, kind: str, source: Path, steps, dataset, commands, scratch: Path) -> Path:
        """Run pass-independent *steps* for *source*, reusing a cached result if possible."""
        values = self._values(dataset)
        out_name = f"{source.stem}.{kind}"
        if self.cache_dir is None:
            return self._run_chain(source, steps, values, commands, scratch, out_name)
        h = hashlib.sha256()
        h.update(source.read_bytes())
        h.update(json.dumps([kind, [t for _, t in steps], values], sort_keys=True).encode())
        key = h.hexdigest()[:24]
        target = self.cache_dir / key / out_name
        with self._lock(key):
            if not target.exists():
                work = self.cache_dir / key
                work.mkdir(parents=True, exist_ok=True)
                self._run_chain(source, steps, values, commands, work, out_name)
            else:
                commands.append(["#cached", str(target)])
        return target

    def _run_chain(self, source, steps, values, commands, workdir: Path, out_name: str) -> Path:
        current = source
        for n, (stage, template) in enumerate(steps):
            out = workdir / (out_name if n == len(steps) - 1 else f"{source.stem}.{stage}.tmp")
            self._step(stage, template, {**values, "input": current, "output": out}, commands, workdir)
            current = out
        return current

    def _build(self, kernel_source, harness_sources, opt_tokens, scratch, dataset) -> CompileOutcome:
        kernel_source = Path(kernel_source)
        harness_sources = [Path(h) for h in ([harness_sources] if isinstance(harness_sources, (str, os.PathLike)) else harness_sources)]
        for src in [kernel_source, *harness_sources]:
            if not src.is_file():
                raise FileNotFoundError(f"source not found: {src}")
        scratch = Path(scratch)
        scratch.mkdir(parents=True, exist_ok=True)
        cfg = self.cfg
        commands: list[list[str]] = []
        values = self._values(dataset)
        try:
            kernel_ir = self._cached("ll", kernel_source, [("frontend", cfg.frontend_cmd)],
                                     dataset, commands, scratch)
            harness_asm = [
                self._cached("s", h, [("frontend", cfg.frontend_cmd), ("backend", cfg.backend_cmd)],
                             dataset, commands, scratch)
                for h in harness_sources
            ]
            opt_ir = scratch / "kernel.opt.ll"
            self._step("optimizer", cfg.optimizer_cmd,
                       {**values, "passes": opt_tokens, "input": kernel_ir, "output": opt_ir},
                       commands, scratch)
            kernel_asm = scratch / "kernel.s"
            self._step("backend", cfg.backend_cmd,
                       {**values, "input": opt_ir, "output": kernel_asm}, commands, scratch)
            binary = scratch / "kernel.bin"
            self._step("linker", cfg.linker_cmd,
                       {**values, "inputs": [kernel_asm, *harness_asm], "output": binary},
                       commands, scratch)
        except _StageFailed as exc:
            return exc.outcome
        return CompileOutcome(CompileStatus.OK, binary_path=binary, commands=commands)

    def compile(self, kernel_source, harness_sources, seq: PassSequence, scratch,
                dataset: str | None = None) -> CompileOutcome:
        return self._build(kernel_source, harness_sources, render_sequence(seq), scratch, dataset)

    def compile_standard(self, kernel_source, harness_sources, level: str, scratch,
                         dataset: str | None = None) -> CompileOutcome:
        if level not in LEVELS:
            raise ValueError(f"unknown optimization level {level!r}")
        return self._build(kernel_source, harness_sources, self.cfg.level_tokens[level], scratch, dataset)

    def with_openmp(self, enabled: bool) -> "Toolchain":
        if enabled == self.cfg.openmp:
            return self
        tc = Toolchain(replace(self.cfg, openmp=enabled), self.cache_dir)
        tc._locks, tc._locks_guard = self._locks, self._locks_guard
        return tc


def compile(kernel_source, harness_source, seq: PassSequence, cfg: ToolchainConfig,
            scratch, dataset: str | None = None) -> CompileOutcome:
    return Toolchain(cfg).compile(kernel_source, harness_source, seq, scratch, dataset)


def compile_standard(kernel_source, harness_source, level: str, cfg: ToolchainConfig,
                     scratch, dataset: str | None = None) -> CompileOutcome:
    return Toolchain(cfg).compile_standard(kernel_source, harness_source, level, scratch, dataset)


def clean_scratch(path: str | os.PathLike) -> None:
    shutil.rmtree(path, ignore_errors=True)
