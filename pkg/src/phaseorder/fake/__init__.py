"""Scripts emulating clang / opt / llc for hermetic campaigns.

A fake kernel "source" is a JSON document describing outputs, a cost model
and failure triggers; see ``runtime.py`` for the semantics. Anything else
is treated as harness code. The linker emits a self-contained Python
program that prints the kernel outputs on stdout and its synthetic cost on
stderr as ``MOCK-COST energy_j=<J> time_ms=<ms>``.
"""
