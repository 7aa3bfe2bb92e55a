"""Fake optimizer: records the pass list, honoring hang/crash triggers."""

import os
import sys
import time

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import _ir  # noqa: E402

LEVELS = {"-O1": "O1", "-O2": "O2", "-O3": "O3"}


def main(argv):
    flags, inputs, output = _ir.split_io(argv)
    if len(inputs) != 1:
        sys.exit("error: expected one input")
    doc = _ir.read(inputs[0])
    spec = doc.get("spec") or {}
    passes = [f for f in flags if f not in ("-S",)]
    window = spec.get("crash_window", 8)
    for pos, p in enumerate(passes):
        if p in spec.get("hang_passes", ()):
            while True:
                time.sleep(3600)
        if p in spec.get("crash_passes", ()) or (
            pos < window and p in spec.get("crash_leading", ())
        ):
            sys.stderr.write("opt: Assertion failed while running pass %s\n" % p)
            sys.exit(134)
    levels = [LEVELS[p] for p in passes if p in LEVELS]
    doc["level"] = levels[-1] if levels else doc.get("level")
    doc["passes"] = doc["passes"] + [p for p in passes if p not in LEVELS]
    _ir.write(output, doc)


if __name__ == "__main__":
    main(sys.argv[1:])
