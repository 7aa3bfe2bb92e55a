"""Fake front-end (``-emit-ir``) and linker driver (``-link``)."""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import _ir  # noqa: E402


def emit_ir(flags, inputs, output):
    if len(inputs) != 1:
        sys.exit("error: expected one input")
    with open(inputs[0]) as f:
        text = f.read()
    try:
        spec = json.loads(text)
    except ValueError:
        spec = None
    dataset = None
    for fl in flags:
        if fl.startswith("-D") and fl.endswith("_DATASET"):
            dataset = fl[2:-len("_DATASET")]
    doc = {
        "kind": "kernel" if isinstance(spec, dict) and "kernel" in spec else "harness",
        "spec": spec if isinstance(spec, dict) else None,
        "openmp": "-fopenmp" in flags,
        "dataset": dataset,
        "passes": [],
        "level": None,
    }
    if doc["kind"] == "kernel" and spec.get("frontend_fail"):
        sys.exit("error: front-end rejected kernel")
    _ir.write(output, doc)


def link(flags, inputs, output):
    units = [_ir.read(p) for p in inputs]
    kernels = [u for u in units if u["kind"] == "kernel"]
    if len(kernels) != 1 or len(units) < 2:
        sys.exit("error: link needs exactly one kernel object and a harness")
    if any(u.get("stage") != "asm" for u in units):
        sys.exit("error: link inputs must be assembly")
    program = dict(kernels[0])
    program["openmp"] = program["openmp"] and "-fopenmp" in flags
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "runtime.py")) as f:
        runtime = f.read()
    with open(output, "w") as f:
        f.write("#!%s -SE\n" % sys.executable)
        f.write("PROGRAM = %r\n" % json.dumps(program, sort_keys=True))
        f.write(runtime)
        f.write("\nif __name__ == '__main__':\n    main(PROGRAM)\n")
    os.chmod(output, 0o755)


def main(argv):
    mode, rest = argv[0], argv[1:]
    flags, inputs, output = _ir.split_io(rest)
    if mode == "-emit-ir":
        emit_ir(flags, inputs, output)
    elif mode == "-link":
        link(flags, inputs, output)
    else:
        sys.exit("error: unknown mode %s" % mode)


if __name__ == "__main__":
    main(sys.argv[1:])
