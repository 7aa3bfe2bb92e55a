from __future__ import annotations

import json
import shutil
from importlib import resources
from pathlib import Path

import pytest

from phaseorder.catalog import PassCatalog
from phaseorder.prng import _arc4_py

FIXTURES = Path(str(resources.files("phaseorder.data") / "fixtures"))

try:
    from phaseorder.prng import _arc4 as _arc4_ext
except ImportError:  # extension not built
    _arc4_ext = None

ARC4_IMPLS = [pytest.param(_arc4_py.Arc4, id="python")]
if _arc4_ext is not None:
    ARC4_IMPLS.append(pytest.param(_arc4_ext.Arc4, id="cython"))


@pytest.fixture(scope="session", params=ARC4_IMPLS)
def arc4_cls(request):
    return request.param


@pytest.fixture
def catalog136() -> PassCatalog:
    return PassCatalog.from_names([f"-pass{i:03d}" for i in range(136)], "synthetic-136")


@pytest.fixture
def fixture_dir(tmp_path) -> Path:
    """A writable copy of the bundled fake kernels and campaign config."""
    d = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, d)
    return d


def write_config(directory: Path, **changes) -> Path:
    cfg = json.loads((directory / "campaign.json").read_text())
    plan = changes.pop("plan", {})
    cfg.update(changes)
    cfg.setdefault("plan", {}).update(plan)
    path = directory / "campaign.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


# -- acceptance reporting -----------------------------------------------------

_acceptance: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if rep.skipped:
            _acceptance[name] = "SKIP"
        elif rep.failed:
            _acceptance[name] = "FAIL"
        else:
            _acceptance.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _acceptance.items():
        terminalreporter.write_line(f"{verdict:4s}  {name}")
