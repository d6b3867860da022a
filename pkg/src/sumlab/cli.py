"""Command-line interface: run experiments, self-verify, print bound
constants, and emit the standard figure datasets."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .bounds import ProbBudget, constants
from .harness import (
    ExperimentConfig,
    config_from_mapping,
    default_grid,
    parse_config_text,
    run_experiment,
    write_csv,
)
from .verify import core_suites

_CONFIG_KEYS = (
    "experiment", "n", "t", "t_hi", "block", "modes", "trials", "dist",
    "dist_a", "dist_b", "dist_mu", "dist_sigma", "delta", "eta", "seed",
    "out", "tree",
)

# the four standard datasets; one CSV each, experiments share a file
_FIGURES = {
    "tree": (("seq", "pairwise"), {}),
    "shifted": (("shifted-seq", "shifted-pairwise"), {}),
    "compensated": (("compensated",), {}),
    "fabsum": (("fabsum",), {"block": "32", "t": "11", "t_hi": "24"}),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sumlab",
        description="Floating-point summation error laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write CSV rows")
    run_p.add_argument("--config", help="flat key = value config file")
    for key in _CONFIG_KEYS:
        run_p.add_argument(f"--{key.replace('_', '-')}", dest=key)

    verify_p = sub.add_parser("verify", help="run the oracle and invariant suites")
    verify_p.add_argument("--coverage-trials", type=int, default=1000)

    const_p = sub.add_parser("constants", help="print the bound constants table")
    const_p.add_argument("--n", default="1e5")
    const_p.add_argument("--n-tilde", dest="n_tilde", default=None)
    const_p.add_argument("--h", default=None)
    const_p.add_argument("--t", type=int, default=11)
    const_p.add_argument("--delta", type=float, default=1e-2)
    const_p.add_argument("--eta", type=float, default=1e-3)

    fig_p = sub.add_parser("figures", help="emit the standard figure datasets as CSV")
    fig_p.add_argument(
        "--which", choices=sorted(_FIGURES) + ["all"], default="all"
    )
    fig_p.add_argument("--out-dir", default=".")
    fig_p.add_argument("--nmax", default="1e5")
    fig_p.add_argument("--trials", type=int, default=100)
    fig_p.add_argument("--seed", type=int, default=12345)
    fig_p.add_argument(
        "--full-scale",
        action="store_true",
        help="extend the blocked-summation dataset to n = 10^6",
    )
    return parser


def _cmd_run(args) -> int:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(parse_config_text(Path(args.config).read_text()))
    for key in _CONFIG_KEYS:
        value = getattr(args, key)
        if value is not None:
            mapping[key] = value
    cfg = config_from_mapping(mapping)
    out = cfg.out or "-"
    if out == "-":
        count = write_csv(run_experiment(cfg), sys.stdout)
    else:
        with open(out, "w") as fh:
            count = write_csv(run_experiment(cfg), fh)
    print(f"wrote {count} rows to {out}", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    results = core_suites(coverage_trials=args.coverage_trials)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def _size(text: str) -> int:
    value = int(float(text))
    if value < 1:
        raise ValueError(f"size must be positive, got {text!r}")
    return value


def _cmd_constants(args) -> int:
    n = _size(args.n)
    h = _size(args.h) if args.h is not None else n
    n_tilde = _size(args.n_tilde) if args.n_tilde is not None else n
    u = 2.0 ** -args.t
    c = constants(n, n_tilde, h, u, ProbBudget(args.delta, args.eta))
    print(f"u                      = {c.u:.6e}  (t = {args.t})")
    print(f"n                      = {c.n}")
    print(f"n_tilde                = {c.n_tilde}")
    print(f"h                      = {c.h}")
    print(f"lambda_h = (1+u)^h     = {c.lambda_h:.6g}")
    print(f"sqrt(2 ln(2/delta))    = {c.sqrt_2ln2_delta:.6g}")
    print(f"lambda(n, eta)         = {c.lambda_n:.6g}")
    print(f"lambda(n_tilde, eta)   = {c.lambda_n_tilde:.6g}")
    print(f"phi(n)                 = {c.phi_n:.6g}  (1 + phi = {1.0 + c.phi_n:.6g})")
    print(f"phi(n_tilde)           = {c.phi_n_tilde:.6g}  (1 + phi = {1.0 + c.phi_n_tilde:.6g})")
    print(f"alpha(u)               = {c.alpha:.6g}")
    print(f"gamma(n, eta, u)       = {c.gamma:.6g}")
    return 0


def _cmd_figures(args) -> int:
    which = sorted(_FIGURES) if args.which == "all" else [args.which]
    nmax = _size(args.nmax)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in which:
        experiments, extra = _FIGURES[name]
        path = out_dir / f"{name}.csv"
        t0 = time.perf_counter()
        with open(path, "w") as fh:
            count = 0
            first = True
            for experiment in experiments:
                grids = [(default_grid(100, nmax), args.trials)]
                if args.full_scale and name == "fabsum":
                    # full-scale points are costly; cap their trials
                    extension = tuple(
                        n for n in default_grid(100, 1_000_000) if n > nmax
                    )
                    if extension:
                        grids.append((extension, min(args.trials, 25)))
                for grid, trials in grids:
                    mapping = {
                        "experiment": experiment,
                        "n": ",".join(str(n) for n in grid),
                        "trials": str(trials),
                        "seed": str(args.seed),
                        **extra,
                    }
                    cfg = config_from_mapping(mapping)
                    count += write_csv(run_experiment(cfg), fh, header=first)
                    first = False
        print(
            f"{path}: {count} rows in {time.perf_counter() - t0:.1f}s",
            file=sys.stderr,
        )
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "verify": _cmd_verify,
        "constants": _cmd_constants,
        "figures": _cmd_figures,
    }[args.command]
    try:
        return handler(args)
    except (ValueError, OSError) as exc:
        print(f"sumlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
