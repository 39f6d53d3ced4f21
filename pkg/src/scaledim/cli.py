"""Command line interface: ``scaledim {analyze,nulls,generate,plot-data}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ScaleDimError
from .io import load_report, write_csv, write_plot_tables
from .nulls import CACHE_ENV, NullProvider, default_cache_dir
from .pipeline import AnalysisConfig, run_analyze
from .scales import MODES
from .synthetic import FAMILIES, GeneratorSpec

log = logging.getLogger("scaledim")

EXIT_CODES = """\
exit codes:
  0  success
  1  unexpected internal error
  2  usage error (unknown flag, bad argument syntax)
  3  input error (unreadable or malformed CSV, too few points, NaN)
  4  parameter out of range
  5  degenerate geometry (identical points, single distinct distance)
  6  required null table missing from the cache
  7  corrupt null cache file
  8  numeric escape in a generator
"""


def _add_grid_args(p):
    p.add_argument("--step", type=float, default=5.0, help="grid step in percent of pairwise distances (default 5)")
    p.add_argument("--mode", choices=MODES, default="max-pairwise", help="scale standardization")
    p.add_argument("--alpha", type=float, default=0.05, help="test level (default 0.05)")
    p.add_argument("--replicates", type=int, default=1000, help="null replicates (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="null generator seed (default 0)")
    p.add_argument("--cache-dir", default=None, help=f"null cache directory (default ${CACHE_ENV})")


def _add_generator_args(p, required_family=False):
    p.add_argument("--family", choices=FAMILIES, required=required_family)
    p.add_argument("--n", type=int, default=None, help="sample size (family default if omitted)")
    p.add_argument("--sigma", type=float, default=0.0, help="noise standard deviation")
    p.add_argument("--ambient", type=int, default=None, help="ambient dimension (circle: 2 or 6; gaussian)")
    p.add_argument("--data-seed", type=int, default=0, help="generator seed")
    p.add_argument("--burn-in", type=int, default=100, help="henon burn-in iterates")


_FAMILY_N = {"line-toy": 100, "circle": 100, "swiss-roll": 1000, "henon": 1000, "gaussian": 100}


def _generator_spec(args) -> dict:
    spec = {
        "family": args.family,
        "n": args.n if args.n is not None else _FAMILY_N[args.family],
        "sigma": args.sigma,
        "d": args.ambient if args.ambient is not None else 2,
        "seed": args.data_seed,
        "params": {},
    }
    if args.family == "henon":
        spec["params"]["burn_in"] = args.burn_in
    return spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaledim",
        description="Effective dimension of a point cloud at every scale.",
        epilog=EXIT_CODES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="test a CSV or synthetic dataset at every scale", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input", nargs="?", help="CSV file (rows = observations)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="skip one header row")
    _add_generator_args(p)
    _add_grid_args(p)
    p.add_argument("--k-max", type=int, default=None, help="highest order tried (default min(d-1, n-2, 10))")
    p.add_argument("--generate-nulls", action="store_true", help="simulate null tables missing from the cache")
    p.add_argument("--bonferroni", action="store_true", help="divide alpha by the number of grid labels")
    p.add_argument("--report", default="-", help="JSON report path ('-' for stdout)")
    p.add_argument("--plot-dir", default=None, help="also write flat plot tables here")
    p.add_argument("--no-timing", action="store_true", help="omit the runtime section from the report")

    p = sub.add_parser("nulls", help="pre-generate and cache null tables", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--k", type=int, nargs="+", required=True, help="orders")
    p.add_argument("--n", type=int, nargs="+", required=True, help="sample sizes")
    _add_grid_args(p)

    p = sub.add_parser("generate", help="write a synthetic dataset as CSV", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_generator_args(p, required_family=True)
    p.add_argument("--output", "-o", default="-", help="CSV path ('-' for stdout)")

    p = sub.add_parser("plot-data", help="re-emit a stored report as flat plot tables", epilog=EXIT_CODES,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("report", help="JSON report written by `analyze`")
    p.add_argument("--out-dir", required=True)
    return parser


def _write(text: str, dest: str):
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def cmd_analyze(args):
    if (args.input is None) == (args.family is None):
        raise SystemExit(_usage_error("analyze needs exactly one of INPUT or --family"))
    config = AnalysisConfig(
        input=args.input,
        generator=_generator_spec(args) if args.family else None,
        delimiter=args.delimiter,
        header=args.header,
        step_percent=args.step,
        mode=args.mode,
        alpha=args.alpha,
        replicates=args.replicates,
        k_max=args.k_max,
        seed=args.seed,
        cache_dir=args.cache_dir,
        generate_nulls=args.generate_nulls,
        bonferroni=args.bonferroni,
    )
    report = run_analyze(config)
    _write(report.to_json(timing=not args.no_timing), args.report)
    if args.plot_dir:
        write_plot_tables(report.data, args.plot_dir)


def cmd_nulls(args):
    cache = args.cache_dir if args.cache_dir is not None else default_cache_dir()
    if cache is None:
        raise SystemExit(_usage_error(f"nulls needs --cache-dir or ${CACHE_ENV}"))
    provider = NullProvider(cache_dir=cache, replicates=args.replicates, seed=args.seed, generate=True)
    for k in args.k:
        for n in args.n:
            provider.get(k, n, args.step, args.mode, args.alpha)
            log.info("null table ready: k=%d n=%d", k, n)


def cmd_generate(args):
    cloud = GeneratorSpec(**_generator_spec(args)).generate()
    _write(write_csv(cloud), args.output)


def cmd_plot_data(args):
    for path in write_plot_tables(load_report(args.report), args.out_dir):
        log.info("wrote %s", path)


def _usage_error(message):
    sys.stderr.write(f"scaledim: error: {message}\n")
    return 2


COMMANDS = {"analyze": cmd_analyze, "nulls": cmd_nulls, "generate": cmd_generate, "plot-data": cmd_plot_data}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ScaleDimError as exc:
        sys.stderr.write(f"scaledim: error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
