"""Body of every fake binary (appended verbatim by the fake linker).

Kernel spec keys (all optional except ``kernel``):

``outputs``            values printed one per line
``base_energy_j``      energy of the serial -O0 build
``base_time_ms``       time of the serial -O0 build
``level_factors``      {"O1": [energy_factor, time_factor], ...}
``pass_effect``        [lo, hi] per-pass multiplicative effect range
``pair_effect``        [lo, hi] effect range for adjacent pass pairs
``strong_passes``      {"-pass": [energy_factor, time_factor]} applied once
                       when the pass occurs anywhere in the sequence
``omp``                {"overhead", "speedup_exp", "power_per_thread"}
``dataset_scale``      {"MINI": 0.001, ...}
``miscompile_leading`` passes that corrupt outputs when in the first
                       ``crash_window`` positions
``runfail_passes``     passes that make the binary exit non-zero
``hang_run_passes``    passes that make the binary never terminate
"""

import hashlib
import json
import os
import sys
import time


def _unit(*parts):
    h = hashlib.sha256("|".join(parts).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2.0**64


def cost(spec, passes, level, threads, dataset):
    energy = float(spec.get("base_energy_j", 10.0))
    time_ms = float(spec.get("base_time_ms", 1000.0))
    name = spec["kernel"]
    if level is not None:
        fe, ft = spec.get("level_factors", {}).get(level, [1.0, 1.0])
    else:
        fe = ft = 1.0
        lo, hi = spec.get("pass_effect", [0.985, 1.012])
        strong = spec.get("strong_passes", {})
        seen = set()
        for p in passes:
            if p in seen:
                continue
            seen.add(p)
            if p in strong:
                fe *= strong[p][0]
                ft *= strong[p][1]
                continue
            fe *= lo + (hi - lo) * _unit(name, "e", p)
            ft *= lo + (hi - lo) * _unit(name, "t", p)
        plo, phi = spec.get("pair_effect", [0.997, 1.002])
        for a, b in zip(passes, passes[1:]):
            fe *= plo + (phi - plo) * _unit(name, "pe", a, b)
            ft *= plo + (phi - plo) * _unit(name, "pt", a, b)
        floor = spec.get("floor", 0.3)
        fe, ft = max(fe, floor), max(ft, floor)
    energy *= fe
    time_ms *= ft
    if threads is not None:
        omp = spec.get("omp", {})
        tt = omp.get("overhead", 1.15) / threads ** omp.get("speedup_exp", 0.8)
        power = 1.0 + omp.get("power_per_thread", 0.3) * (threads - 1)
        time_ms *= tt
        energy *= tt * power
    scale = spec.get("dataset_scale", {}).get(dataset or "", 1.0)
    return energy * scale, time_ms * scale


def main(program):
    prog = json.loads(program)
    spec = prog["spec"]
    passes = prog["passes"]
    threads = None
    if prog["openmp"]:
        threads = max(1, int(os.environ.get("OMP_NUM_THREADS", "1")))
    if any(p in spec.get("hang_run_passes", ()) for p in passes):
        while True:
            time.sleep(3600)
    if any(p in spec.get("runfail_passes", ()) for p in passes):
        sys.stderr.write("segmentation fault (simulated)\n")
        sys.exit(139)
    outputs = [float(v) for v in spec.get("outputs", [1.0, 2.0, 3.0])]
    window = spec.get("crash_window", 8)
    if any(p in spec.get("miscompile_leading", ()) for p in passes[:window]):
        outputs[0] += spec.get("miscompile_delta", 0.01)
    for v in outputs:
        sys.stdout.write(repr(v) + "\n")
    energy, time_ms = cost(spec, passes, prog["level"], threads, prog["dataset"])
    sys.stderr.write("MOCK-COST energy_j=%r time_ms=%r\n" % (energy, time_ms))
