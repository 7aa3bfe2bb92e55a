"""Energy and time measurement of a single command execution.

Providers:

* ``rapl`` -- cumulative energy counters (Package + DRAM per socket) read
  from the powercap tree, or through ``perf stat`` power events.
* ``sensor_files`` -- instantaneous wattage files polled at the device
  update period and integrated with the rectangle rule.
* ``mock`` -- deterministic model for hermetic runs.

Elapsed time always comes from the monotonic clock, except for the mock
provider, whose time is part of its model.
"""

from __future__ import annotations

import contextlib
import enum
import fcntl
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import _proc

log = logging.getLogger(__name__)

RUN_TIMEOUT = 60.0
POWERCAP_ROOT = "/sys/class/powercap"
RAPL_UPDATE_PERIOD_US = 1000
SENSOR_UPDATE_PERIOD_US = 263_808
LOW_CONFIDENCE_PERIODS = 4
GPU_DOMAINS = ("g3d", "gpu")


class MeasurementError(Exception):
    pass


class ProviderError(MeasurementError):
    pass


class RunFailed(MeasurementError):
    def __init__(self, returncode: int | None, detail: str = ""):
        super().__init__(f"command exited with status {returncode}: {detail}".rstrip(": "))
        self.returncode = returncode


class RunTimeout(MeasurementError):
    pass


@dataclass(frozen=True)
class MeasurementSample:
    energy_joules: float
    elapsed_ms: float
    low_confidence: bool = False
    domains: Mapping[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.energy_joules >= 0:
            raise ValueError(f"energy must be >= 0, got {self.energy_joules}")
        if not self.elapsed_ms > 0:
            raise ValueError(f"elapsed time must be > 0, got {self.elapsed_ms}")

    @property
    def watts(self) -> float:
        return self.energy_joules / (self.elapsed_ms / 1000.0)

    def to_dict(self) -> dict:
        d = {"energy_j": self.energy_joules, "time_ms": self.elapsed_ms}
        if self.low_confidence:
            d["low_confidence"] = True
        if self.domains:
            d["domains"] = dict(self.domains)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "MeasurementSample":
        return cls(d["energy_j"], d["time_ms"], d.get("low_confidence", False), d.get("domains", {}))


def counter_delta(before: int, after: int, wrap_range: int) -> int:
    """Increment of a counter that wraps to 0 after ``wrap_range - 1`` (at most one wrap)."""
    if wrap_range <= 0:
        raise ValueError("wrap_range must be positive")
    return (after - before) % wrap_range


class ProviderKind(str, enum.Enum):
    RAPL = "rapl"
    SENSOR_FILES = "sensor_files"
    MOCK = "mock"


@dataclass
class ProviderSpec:
    kind: ProviderKind
    domains: list = field(default_factory=list)
    mock_model: str | dict | None = None
    root: str = POWERCAP_ROOT
    backend: str = "powercap"
    rapl_zones: tuple[str, ...] = ("package", "dram")
    sensor_period_us: int = SENSOR_UPDATE_PERIOD_US
    include_gpu: bool = False

    def __post_init__(self) -> None:
        self.kind = ProviderKind(self.kind)
        if self.kind is ProviderKind.RAPL and not self.domains:
            raise ValueError("rapl provider needs at least one socket in domains")
        if self.kind is ProviderKind.SENSOR_FILES and not self.domains:
            raise ValueError("sensor_files provider needs at least one device path")
        if self.kind is ProviderKind.MOCK and self.mock_model is None:
            raise ValueError("mock provider needs mock_model")
        if self.backend not in ("powercap", "perf"):
            raise ValueError(f"unknown rapl backend {self.backend!r}")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Path | None = None) -> "ProviderSpec":
        d = dict(d)
        model = d.get("mock_model")
        if isinstance(model, str) and base_dir is not None:
            d["mock_model"] = str((base_dir / model).resolve())
        if d.get("kind") == "sensor_files" and base_dir is not None:
            d["domains"] = [str((base_dir / p).resolve()) for p in d.get("domains", [])]
        if "rapl_zones" in d:
            d["rapl_zones"] = tuple(d["rapl_zones"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "domains": list(self.domains),
            "mock_model": self.mock_model,
            "root": self.root,
            "backend": self.backend,
            "rapl_zones": list(self.rapl_zones),
            "sensor_period_us": self.sensor_period_us,
            "include_gpu": self.include_gpu,
        }
        return d


@dataclass
class DomainStatus:
    name: str
    available: bool
    reason: str = ""
    resolution: str = ""
    update_period_us: int | None = None


@dataclass
class ProbeReport:
    kind: str
    available: bool
    domains: list[DomainStatus] = field(default_factory=list)
    reason: str = ""

    def lines(self) -> list[str]:
        out = [f"provider {self.kind}: {'available' if self.available else 'unavailable'}"
               + (f" ({self.reason})" if self.reason else "")]
        for d in self.domains:
            status = "ok" if d.available else f"unavailable: {d.reason}"
            extra = []
            if d.resolution:
                extra.append(f"resolution {d.resolution}")
            if d.update_period_us:
                extra.append(f"period {d.update_period_us} us")
            out.append(f"  {d.name}: {status}" + (f" [{', '.join(extra)}]" if extra else ""))
        return out


def _check_run(res: _proc.ProcResult, timeout: float) -> None:
    if res.timed_out:
        raise RunTimeout(f"command exceeded {timeout:g} s")
    if res.returncode != 0:
        raise RunFailed(res.returncode, _proc.excerpt(res.stderr, 300))


class Provider:
    spec: ProviderSpec

    def measure(self, command: Sequence[str], env: Mapping[str, str] | None = None,
                timeout: float = RUN_TIMEOUT) -> MeasurementSample:
        raise NotImplementedError

    def probe(self) -> ProbeReport:
        raise NotImplementedError


# -- mock -------------------------------------------------------------------

_COST_RE = re.compile(r"MOCK-COST energy_j=(\S+) time_ms=(\S+)")


class MockProvider(Provider):
    """Runs the command for real but takes energy and time from a model.

    Model forms: ``{"mode": "constant", "energy_j": J, "time_ms": ms}`` or
    ``{"mode": "reported"}`` (parse ``MOCK-COST`` from the command's stderr).
    Optional ``"scale"`` multiplies both energy and time.
    """

    def __init__(self, spec: ProviderSpec):
        self.spec = spec
        model = spec.mock_model
        if isinstance(model, (str, os.PathLike)):
            try:
                model = json.loads(Path(model).read_text())
            except (OSError, ValueError) as exc:
                raise ProviderError(f"cannot load mock model {spec.mock_model}: {exc}") from exc
        self.model = dict(model)
        mode = self.model.setdefault("mode", "constant")
        if mode not in ("constant", "reported"):
            raise ProviderError(f"unknown mock mode {mode!r}")

    def measure(self, command, env=None, timeout=RUN_TIMEOUT):
        res = _proc.run(command, timeout, env=env)
        _check_run(res, timeout)
        scale = float(self.model.get("scale", 1.0))
        if self.model["mode"] == "constant":
            energy, ms = float(self.model["energy_j"]), float(self.model["time_ms"])
        else:
            m = _COST_RE.search(res.stderr)
            if not m:
                raise ProviderError("command did not report MOCK-COST")
            energy, ms = float(m.group(1)), float(m.group(2))
        return MeasurementSample(energy * scale, ms * scale)

    def probe(self):
        return ProbeReport("mock", True, [DomainStatus("mock", True, resolution="exact")])


# -- RAPL -------------------------------------------------------------------

@dataclass
class RaplCounter:
    name: str
    energy_file: Path
    wrap_range: int

    def read(self) -> int:
        return int(self.energy_file.read_text().strip())


class RaplProvider(Provider):
    def __init__(self, spec: ProviderSpec):
        self.spec = spec
        self.root = Path(spec.root)

    def _zones(self, socket: int) -> list[tuple[str, Path | None, str]]:
        """(label, zone dir or None, reason) for each requested zone of *socket*."""
        top = self.root / f"intel-rapl:{socket}"
        found: list[tuple[str, Path | None, str]] = []
        if not top.is_dir():
            return [(f"{z}-{socket}", None, f"{top} missing (unsupported CPU or intel_rapl not loaded)")
                    for z in self.spec.rapl_zones]
        candidates = [top, *sorted(top.glob(f"intel-rapl:{socket}:*"))]
        names = {}
        for c in candidates:
            try:
                names[c] = (c / "name").read_text().strip()
            except OSError:
                continue
        for z in self.spec.rapl_zones:
            match = next((c for c, n in names.items() if n == z or n.startswith(f"{z}-")), None)
            found.append((f"{z}-{socket}", match, "" if match else f"no '{z}' zone under {top}"))
        return found

    def counters(self) -> list[RaplCounter]:
        out = []
        for socket in self.spec.domains:
            for label, zone, reason in self._zones(int(socket)):
                if zone is None:
                    raise ProviderError(reason)
                try:
                    max_range = int((zone / "max_energy_range_uj").read_text().strip())
                except (OSError, ValueError) as exc:
                    raise ProviderError(f"cannot read {zone}/max_energy_range_uj: {exc}") from exc
                out.append(RaplCounter(label, zone / "energy_uj", max_range + 1))
        return out

    def measure(self, command, env=None, timeout=RUN_TIMEOUT):
        if self.spec.backend == "perf":
            return self._measure_perf(command, env, timeout)
        counters = self.counters()
        try:
            before = [c.read() for c in counters]
        except (OSError, ValueError) as exc:
            raise ProviderError(f"cannot read RAPL counters: {exc}") from exc
        t0 = time.monotonic_ns()
        res = _proc.run(command, timeout, env=env)
        t1 = time.monotonic_ns()
        try:
            after = [c.read() for c in counters]
        except (OSError, ValueError) as exc:
            raise ProviderError(f"cannot read RAPL counters: {exc}") from exc
        _check_run(res, timeout)
        domains = {
            c.name: counter_delta(b, a, c.wrap_range) / 1e6
            for c, b, a in zip(counters, before, after)
        }
        elapsed_ms = max((t1 - t0) / 1e6, 1e-6)
        return MeasurementSample(sum(domains.values()), elapsed_ms, False, domains)

    _PERF_EVENTS = {"package": "power/energy-pkg/", "dram": "power/energy-ram/"}

    def _measure_perf(self, command, env, timeout):
        events = [self._PERF_EVENTS[z] for z in self.spec.rapl_zones if z in self._PERF_EVENTS]
        with tempfile.NamedTemporaryFile("r", suffix=".perf") as out:
            argv = ["perf", "stat", "-a", "-x,", "-o", out.name]
            for e in events:
                argv += ["-e", e]
            t0 = time.monotonic_ns()
            res = _proc.run([*argv, "--", *command], timeout, env=env)
            t1 = time.monotonic_ns()
            _check_run(res, timeout)
            domains = parse_perf_energy(Path(out.name).read_text())
        if not domains:
            raise ProviderError("perf reported no energy events")
        return MeasurementSample(sum(domains.values()), max((t1 - t0) / 1e6, 1e-6), False, domains)

    def probe(self):
        statuses = []
        for socket in self.spec.domains:
            for label, zone, reason in self._zones(int(socket)):
                if zone is None:
                    statuses.append(DomainStatus(label, False, reason))
                    continue
                try:
                    int((zone / "energy_uj").read_text())
                    statuses.append(DomainStatus(label, True, resolution="1 uJ counter unit",
                                                 update_period_us=RAPL_UPDATE_PERIOD_US))
                except PermissionError:
                    statuses.append(DomainStatus(label, False, "permission denied (needs root)"))
                except (OSError, ValueError) as exc:
                    statuses.append(DomainStatus(label, False, str(exc)))
        ok = bool(statuses) and all(s.available for s in statuses)
        reason = "" if ok else "; ".join(s.reason for s in statuses if not s.available)
        return ProbeReport("rapl", ok, statuses, reason)


def parse_perf_energy(text: str) -> dict[str, float]:
    """Joules per event from ``perf stat -x,`` output."""
    out = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 3 or "energy" not in parts[2]:
            continue
        try:
            value = float(parts[0])
        except ValueError:
            continue
        unit = parts[1].strip()
        if unit in ("mJ", "millijoules"):
            value /= 1e3
        out[parts[2]] = value
    return out


# -- board sensor files -----------------------------------------------------

class SensorFileProvider(Provider):
    """Integrates polled wattage readings over the lifetime of the command."""

    def __init__(self, spec: ProviderSpec):
        self.spec = spec
        self.period = spec.sensor_period_us / 1e6

    def _paths(self) -> list[Path]:
        paths = [Path(p) for p in self.spec.domains]
        if not self.spec.include_gpu:
            paths = [p for p in paths if not any(g in p.name.lower() for g in GPU_DOMAINS)]
        return paths

    @staticmethod
    def _read_watts(path: Path) -> float:
        return float(path.read_text().split()[0])

    def measure(self, command, env=None, timeout=RUN_TIMEOUT):
        paths = self._paths()
        try:
            [self._read_watts(p) for p in paths]
        except (OSError, ValueError, IndexError) as exc:
            raise ProviderError(f"cannot read sensor files: {exc}") from exc
        readings: list[tuple[int, list[float]]] = []
        done = threading.Event()

        def poll():
            while True:
                t = time.monotonic_ns()
                try:
                    readings.append((t, [self._read_watts(p) for p in paths]))
                except (OSError, ValueError, IndexError):
                    pass
                if done.wait(self.period):
                    return

        poller = threading.Thread(target=poll, daemon=True)
        t0 = time.monotonic_ns()
        poller.start()
        res = _proc.run(command, timeout, env=env)
        t1 = time.monotonic_ns()
        done.set()
        poller.join()
        _check_run(res, timeout)
        domains = integrate_rectangles(readings, t0, t1, [p.name for p in paths])
        elapsed_ms = max((t1 - t0) / 1e6, 1e-6)
        low = elapsed_ms < LOW_CONFIDENCE_PERIODS * self.period * 1e3
        return MeasurementSample(sum(domains.values()), elapsed_ms, low, domains)

    def probe(self):
        statuses = []
        for p in [Path(x) for x in self.spec.domains]:
            gpu = any(g in p.name.lower() for g in GPU_DOMAINS)
            if gpu and not self.spec.include_gpu:
                statuses.append(DomainStatus(p.name, False, "GPU domain excluded"))
                continue
            try:
                self._read_watts(p)
                statuses.append(DomainStatus(p.name, True, resolution="instantaneous W",
                                             update_period_us=self.spec.sensor_period_us))
            except (OSError, ValueError, IndexError) as exc:
                statuses.append(DomainStatus(p.name, False, f"unreadable: {exc}"))
        usable = [s for s in statuses if s.available]
        wanted = [s for s in statuses if s.reason != "GPU domain excluded"]
        if not usable:
            reason = "no readable sensor files"
        elif len(usable) < len(wanted):
            reason = f"partial: {len(usable)} of {len(wanted)} sensors readable"
        else:
            reason = ""
        return ProbeReport("sensor_files", bool(usable), statuses, reason)


def integrate_rectangles(readings, t0_ns: int, t1_ns: int, names: Sequence[str]) -> dict[str, float]:
    """Left-rectangle integral of piecewise-constant wattage over ``[t0, t1]`` (joules)."""
    energy = dict.fromkeys(names, 0.0)
    pts = sorted(r for r in readings if r[0] <= t1_ns)
    for k, (t, watts) in enumerate(pts):
        start = max(t, t0_ns)
        end = pts[k + 1][0] if k + 1 < len(pts) else t1_ns
        dt = max(end - start, 0) / 1e9
        for name, w in zip(names, watts):
            energy[name] += w * dt
    return energy


# -- factory / lock ---------------------------------------------------------

def make_provider(spec: ProviderSpec) -> Provider:
    if spec.kind is ProviderKind.MOCK:
        return MockProvider(spec)
    if spec.kind is ProviderKind.RAPL:
        return RaplProvider(spec)
    return SensorFileProvider(spec)


def measure(command: Sequence[str], provider: ProviderSpec | Provider,
            env: Mapping[str, str] | None = None, timeout: float = RUN_TIMEOUT) -> MeasurementSample:
    if isinstance(provider, ProviderSpec):
        provider = make_provider(provider)
    return provider.measure(command, env, timeout)


def probe(provider: ProviderSpec | Provider) -> ProbeReport:
    if isinstance(provider, ProviderSpec):
        try:
            provider = make_provider(provider)
        except ProviderError as exc:
            return ProbeReport(provider.kind.value, False, [], str(exc))
    return provider.probe()


class MeasurementLock:
    """Machine-wide file lock.

    Measurements take it exclusively; validation runs take it shared, so
    they may overlap each other but never a measurement.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path or Path(tempfile.gettempdir()) / "phaseorder-measure.lock")

    @contextlib.contextmanager
    def _hold(self, mode: int):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, mode)
            yield
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def exclusive(self):
        return self._hold(fcntl.LOCK_EX)

    def shared(self):
        return self._hold(fcntl.LOCK_SH)
