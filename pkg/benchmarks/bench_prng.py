"""Compare the compiled ARC4 core with the pure-Python fallback.

    python benchmarks/bench_prng.py [--repeat N]

Only the generator and the sampling loops built on it run in-process; a real
campaign spends nearly all of its time in the external compiler tools and in
the measured binaries, so these numbers bound the in-process share only.
"""

from __future__ import annotations

import argparse
import timeit

from phaseorder import model
from phaseorder.catalog import PassCatalog, load_catalog
from phaseorder.prng import _arc4_py
from phaseorder.seqgen import generate_random

try:
    from phaseorder.prng import _arc4
except ImportError:
    _arc4 = None


def workloads(cls):
    catalog = PassCatalog.from_names([f"-pass{i:03d}" for i in range(136)])
    llvm = load_catalog()
    seeds = generate_random(llvm, 11, 128, cls(b"seeds"))
    graph = model.build((f"k{i}", s) for i, s in enumerate(seeds))
    return {
        "keystream 1 MiB": lambda: cls(b"bench").keystream(1 << 20),
        "next_below x 100k": lambda: [r.next_below(136) for r in [cls(b"bench")] for _ in range(100_000)],
        "below_many 128k": lambda: cls(b"bench").below_many(136, 128_000),
        "generate 1000x128": lambda: generate_random(catalog, 1000, 128, cls(b"bench")),
        "model sample 1000": lambda: model.sample(graph, 1000, 128, cls(b"bench")),
    }


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    py = workloads(_arc4_py.Arc4)
    ext = workloads(_arc4.Arc4) if _arc4 else {}
    print(f"{'workload':22s} {'python (s)':>11s} {'cython (s)':>11s} {'speedup':>8s}")
    for name, fn in py.items():
        tp = best_of(fn, args.repeat)
        if name in ext:
            tc = best_of(ext[name], args.repeat)
            print(f"{name:22s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x")
        else:
            print(f"{name:22s} {tp:11.4f} {'n/a':>11s} {'':>8s}")
    if _arc4 is None:
        print("compiled core not built; reinstall without PHASEORDER_NO_EXT to compare")


if __name__ == "__main__":
    main()
