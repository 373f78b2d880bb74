"""Command line entry point: ``nfmmse run|locate|validate``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

import argparse
import dataclasses
import logging
import sys
import warnings

import numpy as np

from .config import ExperimentConfig, desk_scale, load_config
from .correlation import build_correlation, spread_from_elevation
from .errors import ConfigError, NFMMSEError
from .harness import default_threads, run_sweep, trial_seed
from .music import locate, split_snapshots, write_spectrum_csv
from .simulation import generate_snapshots

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# Above this many elements `run` needs --full-scale.
FULL_SCALE_ELEMENTS = 512

log = logging.getLogger("nfmmse")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="nfmmse", description="Near-field parametric MMSE channel estimation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="experiment config file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--desk-scale", action="store_true",
                       help="substitute a 16x8 array and proportionally scaled grid")

    run = sub.add_parser("run", help="execute a sweep and write CSV files")
    common(run)
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: NFMMSE_THREADS or 1)")
    run.add_argument("--trials", type=int, help="override run.trials")
    run.add_argument("--cache", help="directory for cached correlation models")
    run.add_argument("--full-scale", action="store_true",
                     help=f"allow arrays above {FULL_SCALE_ELEMENTS} elements")

    loc = sub.add_parser("locate", help="single MUSIC localization")
    common(loc)
    loc.add_argument("--trial", type=int, default=0, help="trial index for the snapshot draw")
    loc.add_argument("--spectrum", metavar="CSV", help="also dump the MUSIC spectrum")

    val = sub.add_parser("validate", help="run the invariant suite at desk scale")
    common(val, config=False)
    return parser


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "trials", None):
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.desk_scale:
        cfg = desk_scale(cfg)
    return cfg


def cmd_run(args):
    cfg = _prepare(args)
    n = cfg.geometry.n_elements
    if n > FULL_SCALE_ELEMENTS:
        if not args.full_scale:
            raise ConfigError(
                f"{n} elements exceeds {FULL_SCALE_ELEMENTS}; pass --full-scale or --desk-scale",
                "geometry.n_horizontal")
        warnings.warn(f"full-scale run with N={n} and {cfg.grid.size} grid points; "
                      "expect hours of compute", RuntimeWarning, stacklevel=2)
    threads = args.threads or default_threads()

    def progress(pt):
        log.info("point %s done: failures %s", pt.value, pt.failures or 0)

    result = run_sweep(cfg, threads=threads, cache_dir=args.cache, progress=progress)
    paths = result.write(args.out)
    for row in result.summary_rows():
        print("{:>10} {:>6} median {:.4g} mean {:.4g} trials {} failures {}".format(*row))
    print(f"wrote {paths['nmse']}")
    return EXIT_OK


def format_location(p):
    r, az, el = p.as_degrees()
    return f"({round(r, 6)!r}, {round(az, 6)!r}, {round(el, 6)!r})"


def cmd_locate(args):
    cfg = _prepare(args)
    spreads = spread_from_elevation(cfg.ue.r, cfg.ue.elevation, cfg.ue_delta_theta)
    truth = build_correlation(cfg.geometry, cfg.ue, spreads, cfg.quadrature)
    hist = generate_snapshots(truth, cfg.power, cfg.snapshots, trial_seed(cfg.seed, args.trial, 0))
    split = split_snapshots(hist)
    found = locate(split, cfg.geometry, cfg.grid, cfg.coarse_factor)
    print(format_location(found))
    if args.spectrum:
        write_spectrum_csv(args.spectrum, split, cfg.geometry, cfg.grid)
    return EXIT_OK


def cmd_validate(args):
    from .validation import run_invariants

    cfg = desk_scale(ExperimentConfig())
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    results = run_invariants(cfg)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} invariants hold")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "locate": cmd_locate, "validate": cmd_validate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NFMMSEError, np.linalg.LinAlgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
