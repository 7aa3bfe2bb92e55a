import json
import os
import shutil
import subprocess
import time

import pytest

from phaseorder.catalog import Origin, PassCatalog
from phaseorder.toolchain import (CompileOutcome, CompileStatus, Toolchain, clean_scratch, compile,
                                  compile_standard, expand, profile)

CAT = PassCatalog.from_names(["-a", "-b", "-hang", "-boom", "-late"])


@pytest.fixture
def kernel(tmp_path):
    spec = {"kernel": "k", "outputs": [1.0, 2.0], "hang_passes": ["-hang"],
            "crash_passes": ["-boom"], "crash_leading": ["-late"], "crash_window": 2}
    src = tmp_path / "k.json"
    src.write_text(json.dumps(spec))
    harness = tmp_path / "harness.c"
    harness.write_text("/* harness */\n")
    return src, harness


def seq(*names):
    return CAT.sequence(list(names), Origin.MANUAL)


def test_fake_pipeline_builds_runnable_binary(tmp_path, kernel):
    src, harness = kernel
    out = compile(src, harness, seq("-a", "-b"), profile("fake"), tmp_path / "s")
    assert out.ok and out.status is CompileStatus.OK
    res = subprocess.run([str(out.binary_path)], capture_output=True, text=True, timeout=30)
    assert res.returncode == 0
    assert res.stdout.split() == ["1.0", "2.0"]
    assert "MOCK-COST" in res.stderr
    stages = [argv for argv in out.commands]
    assert any("-a" in argv and "-b" in argv for argv in stages)


def test_tool_error_reports_optimizer_stage(tmp_path, kernel):
    src, harness = kernel
    out = compile(src, harness, seq("-a", "-boom"), profile("fake"), tmp_path / "s")
    assert out.status is CompileStatus.TOOL_ERROR
    assert out.stage == "optimizer" and out.binary_path is None
    assert "-boom" in out.log_excerpt


def test_crash_window(tmp_path, kernel):
    src, harness = kernel
    assert not compile(src, harness, seq("-a", "-late"), profile("fake"), tmp_path / "x").ok
    assert compile(src, harness, seq("-a", "-b", "-late"), profile("fake"), tmp_path / "y").ok


def test_timeout_kills_hung_optimizer(tmp_path, kernel):
    src, harness = kernel
    cfg = profile("fake", tool_timeout=1.0)
    t0 = time.monotonic()
    out = compile(src, harness, seq("-a", "-hang"), cfg, tmp_path / "s")
    assert time.monotonic() - t0 < cfg.tool_timeout + 1.0
    assert out.status is CompileStatus.TOOL_TIMEOUT and out.stage == "optimizer"


def test_harness_identical_across_candidates(tmp_path, kernel):
    src, harness = kernel
    tc = Toolchain(profile("fake"), cache_dir=tmp_path / "cache")
    a = tc.compile(src, harness, seq("-a"), tmp_path / "a")
    b = tc.compile(src, harness, seq("-b", "-a"), tmp_path / "b")
    assert a.ok and b.ok
    asm = sorted((tmp_path / "cache").rglob("harness.s"))
    assert len(asm) == 1
    link_a = [argv for argv in a.commands if "-link" in argv][0]
    link_b = [argv for argv in b.commands if "-link" in argv][0]
    assert link_a[-3] == link_b[-3] == str(asm[0])
    # second build reused the cache
    assert any(argv[0] == "#cached" for argv in b.commands)


def test_harness_identical_without_cache(tmp_path, kernel):
    src, harness = kernel
    tc = Toolchain(profile("fake"))
    tc.compile(src, harness, seq("-a"), tmp_path / "a")
    tc.compile(src, harness, seq("-b"), tmp_path / "b")
    assert (tmp_path / "a/harness.s").read_bytes() == (tmp_path / "b/harness.s").read_bytes()


def test_standard_levels(tmp_path, kernel):
    src, harness = kernel
    cfg = profile("fake")
    o0 = compile_standard(src, harness, "O0", cfg, tmp_path / "o0")
    o2 = compile_standard(src, harness, "O2", cfg, tmp_path / "o2")
    assert o0.ok and o2.ok
    opt0 = [argv for argv in o0.commands if argv[3].endswith("opt.py")][0]
    opt2 = [argv for argv in o2.commands if argv[3].endswith("opt.py")][0]
    assert "-O2" in opt2 and not any(t.startswith("-O") for t in opt0[4:])
    with pytest.raises(ValueError):
        compile_standard(src, harness, "O4", cfg, tmp_path / "bad")


def test_missing_source(tmp_path, kernel):
    _, harness = kernel
    with pytest.raises(FileNotFoundError):
        compile(tmp_path / "absent.json", harness, seq("-a"), profile("fake"), tmp_path / "s")


def test_dataset_and_openmp_flags(tmp_path, kernel):
    src, harness = kernel
    tc = Toolchain(profile("fake", openmp=False)).with_openmp(True)
    out = tc.compile(src, harness, seq("-a"), tmp_path / "s", dataset="mini")
    front = out.commands[0]
    assert "-DMINI_DATASET" in front and "-fopenmp" in front


def test_llvm_argv_determinism():
    cfg = profile("llvm")
    values = {"passes": ["-licm", "-gvn"], "input": "k.ll", "output": "k.opt.ll"}
    a = expand(cfg.optimizer_cmd, values)
    assert a == expand(cfg.optimizer_cmd, values) == ["opt", "-S", "-licm", "-gvn", "k.ll", "-o", "k.opt.ll"]
    back = expand(cfg.backend_cmd, {"cpu_flag": "-mcpu=native", "fp_contract_flag": "-fp-contract=fast",
                                    "input": "x.ll", "output": "x.s"})
    assert back == ["llc", "-mcpu=native", "-fp-contract=fast", "x.ll", "-o", "x.s"]
    assert cfg.tool_timeout == 10.0 and profile("llvm-board").tool_timeout == 60.0


def test_config_validation():
    with pytest.raises(ValueError):
        profile("fake", tool_timeout=0)
    with pytest.raises(ValueError):
        profile("nope")
    with pytest.raises(ValueError):
        CompileOutcome(CompileStatus.OK)


def test_outcome_round_trip(tmp_path, kernel):
    src, harness = kernel
    out = compile(src, harness, seq("-a"), profile("fake"), tmp_path / "s")
    again = CompileOutcome.from_dict(json.loads(json.dumps(out.to_dict())))
    assert again.status is out.status and again.binary_path == out.binary_path


def test_clean_scratch(tmp_path):
    d = tmp_path / "scratch"
    (d / "x").mkdir(parents=True)
    clean_scratch(d)
    assert not d.exists()
    clean_scratch(d)


@pytest.mark.skipif(not (shutil.which("opt") and shutil.which("llc") and shutil.which("clang")),
                    reason="LLVM opt/llc not installed")
def test_real_llvm_pipeline(tmp_path):
    k = tmp_path / "k.c"
    k.write_text("double f(double x){return x*2;}\n")
    h = tmp_path / "main.c"
    h.write_text('#include <stdio.h>\ndouble f(double);\nint main(void){printf("%f\\n", f(2));return 0;}\n')
    out = compile(k, h, PassCatalog.from_names(["-mem2reg"]).sequence(["-mem2reg"]),
                  profile("llvm"), tmp_path / "s")
    assert out.ok, out.log_excerpt
    assert os.access(out.binary_path, os.X_OK)
