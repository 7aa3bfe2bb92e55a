import json
import sys


def read(path):
    with open(path) as f:
        return json.load(f)


def write(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)


def split_io(argv):
    """Return (flags, inputs, output) from a clang-like argument vector."""
    flags, inputs, output = [], [], None
    it = iter(argv)
    for tok in it:
        if tok == "-o":
            output = next(it)
        elif tok.startswith("-"):
            flags.append(tok)
        else:
            inputs.append(tok)
    if output is None:
        sys.exit("error: no output file")
    return flags, inputs, output
