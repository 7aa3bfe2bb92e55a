"""Fake static compiler: marks the unit as target assembly."""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import _ir  # noqa: E402


def main(argv):
    flags, inputs, output = _ir.split_io(argv)
    if len(inputs) != 1:
        sys.exit("error: expected one input")
    doc = _ir.read(inputs[0])
    doc["stage"] = "asm"
    doc["codegen_flags"] = sorted(flags)
    _ir.write(output, doc)


if __name__ == "__main__":
    main(sys.argv[1:])
