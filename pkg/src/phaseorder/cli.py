"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 toolchain error, 3 provider error,
4 empty selection / empty report.

Precedence: command-line flags > config file > built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from . import prng
from .catalog import CatalogError, load_catalog, render_sequence
from .config import ConfigError, apply_overrides, load_config
from .explorer import Campaign, EmptySelectionError, ExplorationError, ReferenceBuildError
from .meter import MeasurementError, ProviderError, probe
from .model import ModelError
from .report import (FORMATS, ReportError, emit, energy_domains, journal_provider_kind, load_results,
                     point_count)
from .seqgen import generate_random

EXIT_OK, EXIT_CONFIG, EXIT_TOOLCHAIN, EXIT_PROVIDER, EXIT_EMPTY = 0, 1, 2, 3, 4

log = logging.getLogger("phaseorder")


def _print_config(cfg) -> None:
    resolved = cfg.to_dict()
    resolved["prng"] = prng.IMPLEMENTATION
    print("resolved config:")
    print(json.dumps(resolved, indent=2, sort_keys=True))
    sys.stdout.flush()


def _load(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, seed=getattr(args, "seed", None), journal=getattr(args, "journal", None),
                           jobs=getattr(args, "jobs", None),
                           keep_artifacts=getattr(args, "keep_artifacts", None))


def _progress(rec) -> None:
    log.info("%s %s %s %s %s", rec.kernel, rec.phase, rec.index, rec.exec.label, rec.status.value)


def cmd_baseline(args) -> int:
    cfg = _load(args)
    _print_config(cfg)
    camp = Campaign(cfg, on_record=_progress)
    camp.start(resume=True)
    rows = camp.run_baseline()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kernel", "level", "threads", "mean_energy_j", "mean_time_ms", "mean_watts", "best"])
    for name, row in rows.items():
        for rec in row.grid:
            if rec.valid:
                w.writerow([name, rec.level, rec.exec.label, repr(rec.mean_energy_j),
                            repr(rec.mean_time_ms), repr(rec.mean_watts), int(rec is row.best)])
    path = camp.journal.root / "baseline.csv"
    path.write_text(buf.getvalue())
    for name, row in rows.items():
        print(f"{name}: best {row.best_exec.label} -- {row.best_level} "
              f"({row.mean_energy_j:.6g} J, {row.mean_time_ms:.6g} ms)")
    print(f"baseline table written to {path}")
    return EXIT_OK


def cmd_explore(args) -> int:
    cfg = _load(args)
    _print_config(cfg)
    camp = Campaign(cfg, on_record=_progress)
    camp.start(resume=args.resume)
    results = camp.run()
    for name, res in results.items():
        print(f"{name}: screened {len(res.screened)}, valid {sum(r.valid for r in res.screened)}, "
              f"rescreened {len(res.rescreened)}")
    print(f"journal complete at {camp.journal.root} ({camp.measured} new evaluations)")
    return EXIT_OK


def cmd_report(args) -> int:
    print(f"resolved config: journal={args.journal} formats={args.format or list(FORMATS)} out={args.out}")
    try:
        results, records, complete = load_results(args.journal)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or f"{args.journal}/report"
    domains = energy_domains(records, journal_provider_kind(args.journal))
    for fmt in args.format or FORMATS:
        print(f"wrote {emit(results, fmt, out, records, complete, domains)}")
    if not complete:
        print("note: journal is partial; files are flagged 'partial'")
    if point_count(results) == 0:
        print("error: no re-measured candidates to report", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_probe(args) -> int:
    cfg = _load(args)
    _print_config(cfg)
    report = probe(cfg.provider)
    print("\n".join(report.lines()))
    return EXIT_OK if report.available else EXIT_PROVIDER


def cmd_generate(args) -> int:
    print(f"resolved config: seed={args.seed!r} count={args.count} length={args.length} "
          f"catalog={args.catalog or 'bundled'} prng={prng.IMPLEMENTATION}", file=sys.stderr)
    catalog = load_catalog(args.catalog)
    for seq in generate_random(catalog, args.count, args.length, prng.seed(args.seed)):
        print(" ".join(render_sequence(seq)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phaseorder", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def campaign_flags(sp):
        sp.add_argument("config", help="campaign config file (JSON)")
        sp.add_argument("--seed", help="override the campaign seed")
        sp.add_argument("--journal", help="override the journal directory")
        sp.add_argument("--jobs", type=int, help="parallel compile/validate workers")
        sp.add_argument("--keep-artifacts", action="store_true", default=None,
                        help="keep per-candidate scratch directories")

    sp = sub.add_parser("baseline", help="sweep standard levels x thread configs")
    campaign_flags(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("explore", help="run the full exploration protocol")
    campaign_flags(sp)
    sp.add_argument("--resume", action="store_true", help="continue an existing journal")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("report", help="emit ratio tables and scatter data from a journal")
    sp.add_argument("journal")
    sp.add_argument("--format", action="append", choices=FORMATS)
    sp.add_argument("--out", help="output directory (default: <journal>/report)")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("probe", help="report measurement provider capabilities")
    campaign_flags(sp)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("generate", help="print uniform random phase orders")
    sp.add_argument("--seed", required=True)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--length", type=int, default=128)
    sp.add_argument("--catalog")
    sp.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, CatalogError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReferenceBuildError, FileNotFoundError) as exc:
        print(f"toolchain error: {exc}", file=sys.stderr)
        return EXIT_TOOLCHAIN
    except (ProviderError, MeasurementError) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except EmptySelectionError as exc:
        print(f"empty selection: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ExplorationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOOLCHAIN


if __name__ == "__main__":
    sys.exit(main())
