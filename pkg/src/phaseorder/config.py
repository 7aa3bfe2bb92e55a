"""Campaign configuration file (JSON).

Relative paths resolve against the directory holding the config file.
Command-line flags override the matching fields; see ``apply_overrides``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .meter import ProviderSpec
from .toolchain import LEVELS, ToolchainConfig, profile

PLATFORM_THREADS = {
    "workstation": [None, 1, 2, 4, 8, 16, 32],
    "board": [None, 1, 2, 4],
}


class ConfigError(ValueError):
    pass


@dataclass
class KernelSpec:
    name: str
    source: Path
    harness: list[Path]
    openmp_source: Path | None = None
    dataset: str | None = None

    def source_for(self, openmp: bool) -> Path:
        return self.openmp_source if openmp and self.openmp_source else self.source

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "source": str(self.source),
            "harness": [str(h) for h in self.harness],
            "openmp_source": str(self.openmp_source) if self.openmp_source else None,
            "dataset": self.dataset,
        }


@dataclass
class ExplorationPlan:
    thread_sets: list[int | None] = field(default_factory=lambda: list(PLATFORM_THREADS["workstation"]))
    levels: tuple[str, ...] = LEVELS
    random_count: int = 1000
    seq_length: int = 128
    model_count: int = 1000
    select_fraction: float = 0.05
    rescreen_reps: int = 25
    seed: str = "phaseorder"
    screen_both_builds: bool = True
    validation_dataset: str = "mini"
    tolerance: float = 0.001
    run_timeout: float = 60.0
    jobs: int = 1
    warmup_runs: int = 0
    inter_run_pause: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.select_fraction <= 1:
            raise ConfigError("select_fraction must be in (0, 1]")
        for name in ("random_count", "seq_length", "model_count", "rescreen_reps", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.seed:
            raise ConfigError("seed must be a non-empty string")
        if len(self.seed.encode()) > 200:
            raise ConfigError("seed must be at most 200 bytes")
        if not self.thread_sets:
            raise ConfigError("thread_sets must not be empty")
        for t in self.thread_sets:
            if t is not None and (not isinstance(t, int) or t < 1):
                raise ConfigError(f"invalid thread count {t!r}")
        bad = set(self.levels) - set(LEVELS)
        if bad:
            raise ConfigError(f"unknown levels {sorted(bad)}")
        self.levels = tuple(self.levels)

    @property
    def fraction(self) -> Fraction:
        return Fraction(str(self.select_fraction))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["thread_sets"] = ["serial" if t is None else t for t in self.thread_sets]
        d["levels"] = list(self.levels)
        return d


def _threads(values) -> list[int | None]:
    out = []
    for v in values:
        if v in ("serial", "S", None):
            out.append(None)
        elif isinstance(v, int) and not isinstance(v, bool):
            out.append(v)
        else:
            raise ConfigError(f"invalid thread set entry {v!r}")
    return out


@dataclass
class CampaignConfig:
    kernels: list[KernelSpec]
    toolchain: ToolchainConfig
    provider: ProviderSpec
    plan: ExplorationPlan
    journal: Path
    catalog: Path | None = None
    lock_path: Path | None = None
    source: Path | None = None

    def to_dict(self) -> dict:
        return {
            "kernels": [k.to_dict() for k in self.kernels],
            "toolchain": self.toolchain.to_dict(),
            "provider": self.provider.to_dict(),
            "plan": self.plan.to_dict(),
            "journal": str(self.journal),
            "catalog": str(self.catalog) if self.catalog else None,
        }


def parse_config(data: Mapping[str, Any], base_dir: Path) -> CampaignConfig:
    def path(p) -> Path:
        return (base_dir / p).resolve()

    try:
        kernels = []
        for k in data["kernels"]:
            harness = k.get("harness", [])
            if isinstance(harness, str):
                harness = [harness]
            kernels.append(KernelSpec(
                name=k["name"],
                source=path(k["source"]),
                harness=[path(h) for h in harness],
                openmp_source=path(k["openmp_source"]) if k.get("openmp_source") else None,
                dataset=k.get("dataset"),
            ))
        if not kernels:
            raise ConfigError("no kernels configured")
        names = [k.name for k in kernels]
        if len(set(names)) != len(names):
            raise ConfigError("kernel names must be unique")

        tc = dict(data.get("toolchain", {"profile": "llvm"}))
        tc_profile = tc.pop("profile", "llvm")
        toolchain = profile(tc_profile, **tc)

        provider = ProviderSpec.from_dict(data["provider"], base_dir)

        plan_data = dict(data.get("plan", {}))
        platform = plan_data.pop("platform", data.get("platform", "workstation"))
        if platform not in PLATFORM_THREADS:
            raise ConfigError(f"unknown platform {platform!r}")
        plan_data["thread_sets"] = _threads(plan_data.get("thread_sets", PLATFORM_THREADS[platform]))
        if "seed" in data:
            plan_data.setdefault("seed", str(data["seed"]))
        plan = ExplorationPlan(**plan_data)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc!r}") from exc

    return CampaignConfig(
        kernels=kernels,
        toolchain=toolchain,
        provider=provider,
        plan=plan,
        journal=path(data.get("journal", "journal")),
        catalog=path(data["catalog"]) if data.get("catalog") else None,
        lock_path=path(data["lock"]) if data.get("lock") else None,
    )


def load_config(path: str | os.PathLike) -> CampaignConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = parse_config(data, path.parent.resolve())
    cfg.source = path.resolve()
    return cfg


def apply_overrides(cfg: CampaignConfig, *, seed: str | None = None, journal: str | None = None,
                    jobs: int | None = None, keep_artifacts: bool | None = None) -> CampaignConfig:
    """Flags win over file values."""
    if seed is not None:
        cfg.plan.seed = seed
        cfg.plan.__post_init__()
    if journal is not None:
        cfg.journal = Path(journal).resolve()
    if jobs is not None:
        cfg.plan.jobs = jobs
        cfg.plan.__post_init__()
    if keep_artifacts:
        cfg.toolchain.keep_artifacts = True
    return cfg
