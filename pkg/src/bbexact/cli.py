"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numeric non-convergence, 4 oracle state cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from bbexact import __version__
from bbexact.design import build_design, model_matrix
from bbexact.glm import NonConvergenceError, chisq_sf, fit
from bbexact.io import DataError, design_csv, design_json, histogram_csv, read_counts, resolve_data_path
from bbexact.moves import CLASSES, enumerate_basis, export_moves
from bbexact.oracle import DEFAULT_CAP, FiberTooLargeError, check_connectivity, enumerate_fiber, exact_p, fibers_by_total
from bbexact.sampler import ChainConfig, run_test

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGENCE, EXIT_CAP = 0, 1, 2, 3, 4

log = logging.getLogger("bbexact")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _factors(value: str) -> int:
    m = int(value)
    if m < 3:
        raise argparse.ArgumentTypeError("need at least 3 factors")
    return m


def _positive(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonnegative(value: str) -> int:
    v = int(value)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _classes(value: str) -> list[str]:
    out = [c.strip().strip("()").lower() for c in value.split(",") if c.strip()]
    bad = [c for c in out if c not in CLASSES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown move classes {bad}; choose from {','.join(CLASSES)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bbexact", description="Exact conditional tests for Box-Behnken count data.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="print the Box-Behnken run table")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("moves", help="print the Markov basis")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--include-viii", action="store_true")
    p.add_argument("--format", choices=("4ti2", "json"), default="4ti2")

    p = sub.add_parser("fit", help="fit the first-order Poisson model")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("test", help="Monte Carlo conditional goodness-of-fit test")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--samples", type=_positive, required=True)
    p.add_argument("--burn-in", type=_nonnegative, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--statistic", choices=("lr", "pearson"), default="lr")
    p.add_argument("--include-viii", action="store_true")
    p.add_argument("--chains", type=_positive, default=1)
    p.add_argument("--workers", type=_positive, default=1, help="processes used for --chains")
    p.add_argument("--thin", type=_positive, default=1)
    p.add_argument("--bins", type=_positive, default=30)
    p.add_argument("--out", help="also write the JSON report to this path")
    p.add_argument("--hist-csv", help="write the statistic histogram as CSV")

    p = sub.add_parser("exact", help="exact conditional p-value by fiber enumeration")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--statistic", choices=("lr", "pearson"), default="lr")
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP)

    p = sub.add_parser("connectivity", help="check every fiber of a given total for connectivity")
    p.add_argument("--factors", type=_factors, required=True)
    p.add_argument("--total", type=_nonnegative, required=True)
    p.add_argument("--include-viii", action="store_true")
    p.add_argument("--restrict-classes", type=_classes, help="comma separated, e.g. iv or i,ii,iii")
    return parser


def _load(args):
    design = build_design(args.factors)
    y = read_counts(resolve_data_path(args.data), design)
    return design, model_matrix(design), y


def _cmd_design(args, out):
    design = build_design(args.factors)
    out.write(design_csv(design) if args.format == "csv" else design_json(design) + "\n")


def _cmd_moves(args, out):
    ms = enumerate_basis(args.factors, args.include_viii)
    text = export_moves(ms, args.format)
    out.write(text if text.endswith("\n") else text + "\n")


def _cmd_fit(args, out):
    _, mm, y = _load(args)
    res = fit(mm, y)
    payload = res.to_dict()
    payload["asymptotic_p"] = chisq_sf(res.lr, res.df)
    if args.format == "json":
        out.write(json.dumps(payload) + "\n")
        return
    out.write("beta: " + " ".join(f"{b:.6f}" for b in res.beta) + "\n")
    out.write("run,count,fitted\n")
    for r, (c, lam) in enumerate(zip(y.tolist(), res.fitted.tolist()), start=1):
        out.write(f"{r},{c},{lam:.4f}\n")
    out.write(f"lr: {res.lr:.6f}\npearson: {res.pearson:.6f}\ndf: {res.df}\n")
    out.write(f"asymptotic_p: {payload['asymptotic_p']:.6f}\n")


def _cmd_test(args, out):
    _, mm, y = _load(args)
    cfg = ChainConfig(
        samples=args.samples,
        burn_in=args.burn_in,
        seed=args.seed,
        statistic=args.statistic,
        include_viii=args.include_viii,
        thin=args.thin,
        chains=args.chains,
        bins=args.bins,
    )
    ms = enumerate_basis(args.factors, args.include_viii)
    report = run_test(mm, y, ms, cfg, workers=args.workers)
    payload = report.to_dict()
    payload["config"] = {
        "factors": args.factors,
        "data": args.data,
        "samples": cfg.samples,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "statistic": cfg.statistic,
        "include_viii": cfg.include_viii,
        "thin": cfg.thin,
        "chains": cfg.chains,
        "bins": cfg.bins,
        "rng": "numpy PCG64 via SeedSequence",
    }
    text = json.dumps(payload, indent=2)
    out.write(text + "\n")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.hist_csv:
        with open(args.hist_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(histogram_csv(report.histogram))


def _cmd_exact(args, out):
    _, mm, y = _load(args)
    res = fit(mm, y)
    fiber = enumerate_fiber(mm, mm.sufficient_statistic(y), cap=args.cap)
    p = exact_p(fiber, res, y, args.statistic)
    observed = res.lr if args.statistic == "lr" else res.pearson
    payload = {
        "exact_p": p,
        "fiber_size": len(fiber),
        "log_normalizer": fiber.log_normalizer,
        "sufficient_statistic": list(fiber.sufficient_stat),
        "observed_statistic": observed,
        "statistic": args.statistic,
        "asymptotic_p": chisq_sf(observed, res.df),
        "df": res.df,
    }
    out.write(json.dumps(payload, indent=2) + "\n")


def _cmd_connectivity(args, out):
    design = build_design(args.factors)
    mm = model_matrix(design)
    ms = enumerate_basis(args.factors, args.include_viii)
    if args.restrict_classes:
        ms = ms.restrict(args.restrict_classes)
    out.write("sufficient_statistic,states,components\n")
    disconnected = 0
    fibers = fibers_by_total(mm, args.total)
    for t, fiber in fibers.items():
        _, comps = check_connectivity(fiber, ms)
        disconnected += comps > 1
        out.write(f"{' '.join(map(str, t))},{len(fiber)},{comps}\n")
    log.info("%d fibers, %d disconnected", len(fibers), disconnected)


COMMANDS = {
    "design": _cmd_design,
    "moves": _cmd_moves,
    "fit": _cmd_fit,
    "test": _cmd_test,
    "exact": _cmd_exact,
    "connectivity": _cmd_connectivity,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    try:
        COMMANDS[args.command](args, out)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except FiberTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
