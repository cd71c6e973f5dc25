"""Command-line sweeps over density: coverage, ASE, Monte Carlo validation and
the regime thresholds, written as CSV with ``#`` provenance lines."""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from densecell import __version__, config as cfg
from densecell.analytic import ase, coverage_values
from densecell.errors import DenseCellError, NotFoundError, ParameterError, UsageError
from densecell.model import is_case1
from densecell.simulator import SimulationConfig, simulate
from densecell.thresholds import DEFAULT_BRACKET, DEFAULT_SLOPE_THRESHOLD, find_lambda0, find_lambda1

MODES = ("coverage", "ase", "validate", "lambda0", "lambda1")
HEADERS = {
    "coverage": ("lambda", "gamma", "p_cov_analytic", "p_cov_closed_form"),
    "ase": ("lambda", "gamma0", "ase_analytic"),
    "validate": ("lambda", "gamma", "analytic", "empirical", "std_err", "abs_diff", "pass"),
    "lambda0": ("gamma", "lambda0", "bracket_lo", "bracket_hi", "iterations", "derivative_residual"),
    "lambda1": ("gamma0", "lambda1", "lambda0", "slope_threshold"),
}
#: Absolute floor of the analytic/empirical agreement bound.
AGREEMENT_FLOOR = 0.01

EXIT_VALIDATION_FAILED = 1
EXIT_USAGE = 2
EXIT_PARAMETER = 3
EXIT_NUMERICAL = 4


def density_grid(start, stop, points_per_decade):
    """Log-spaced densities from ``start`` to ``stop`` inclusive."""
    if not (start > 0 and stop > 0):
        raise UsageError("density grid bounds must be positive")
    if not start < stop:
        raise UsageError(f"empty density grid: start {start} is not below stop {stop}")
    if points_per_decade < 1:
        raise UsageError("points-per-decade must be at least 1")
    decades = math.log10(stop / start)
    n = max(int(round(decades * points_per_decade)), 1) + 1
    return 10.0 ** np.linspace(math.log10(start), math.log10(stop), n)


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.9g}"


def point_seed(seed, index):
    """Independent 63-bit seed for grid point ``index`` of a run seeded with ``seed``."""
    state = np.random.SeedSequence([seed, index]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def build_parser():
    p = argparse.ArgumentParser(prog="densecell", description=__doc__)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--lambda-start", type=float, default=1.0, help="first density (BSs/km^2)")
    p.add_argument("--lambda-stop", type=float, default=1e4, help="last density (BSs/km^2)")
    p.add_argument("--points-per-decade", type=int, default=5)
    p.add_argument("--gamma", type=float, nargs="+", default=[1.0], help="SINR thresholds (linear)")
    p.add_argument("--gamma0", type=float, nargs="+", default=[1.0], help="ASE thresholds (linear)")
    p.add_argument("--trials", type=int, default=10_000, help="Monte Carlo trials per density (validate)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path; standard output when omitted")
    p.add_argument("--config", help="key=value model file; the 3GPP Case 1 preset when omitted")
    p.add_argument("--workers", type=int, default=1, help="parallel processes (never changes the output)")
    p.add_argument("--slope-threshold", type=float, default=DEFAULT_SLOPE_THRESHOLD,
                   help="log-log ASE slope that marks near-linear growth (lambda1)")
    p.add_argument("--bracket", type=float, nargs=2, default=list(DEFAULT_BRACKET), metavar=("LO", "HI"),
                   help="density bracket of the coverage peak search (lambda0)")
    return p


# row producers, one grid point each, so they can be farmed out to processes


def _coverage_rows(env, gammas, lam):
    general, _ = coverage_values(env, lam, gammas, "general")
    closed = coverage_values(env, lam, gammas, "case1")[0] if is_case1(env.model) else [None] * len(gammas)
    return [(lam, g, a, c) for g, a, c in zip(gammas, general, closed)]


def _ase_rows(env, gammas0, lam):
    return [(lam, g0, ase(env, lam, g0).value) for g0 in gammas0]


def _validate_rows(env, args, item):
    index, lam = item
    sim = simulate(SimulationConfig(lam, args.trials, point_seed(args.seed, index), tuple(args.gamma)), env,
                   workers=args.workers)
    analytic, _ = coverage_values(env, lam, args.gamma)
    rows = []
    for g, a in zip(args.gamma, analytic):
        est, se = sim.coverage[g]
        diff = abs(est - a)
        rows.append((lam, g, a, est, se, diff, bool(diff <= max(3.0 * se, AGREEMENT_FLOOR))))
    return rows


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def run(args, env, model_config):
    """Compute the rows of ``args.mode``; returns ``(rows, extra_metadata, exit_status)``."""
    mode = args.mode
    extra = []
    status = 0
    if mode in ("coverage", "ase", "validate", "lambda1"):
        grid = density_grid(args.lambda_start, args.lambda_stop, args.points_per_decade)
    if mode == "coverage":
        rows = sum(_map(partial(_coverage_rows, env, args.gamma), list(grid), args.workers), [])
    elif mode == "ase":
        rows = sum(_map(partial(_ase_rows, env, args.gamma0), list(grid), args.workers), [])
    elif mode == "validate":
        # grid points run in sequence; trials inside each point are spread over the workers
        rows = []
        for item in enumerate(grid):
            rows += _validate_rows(env, args, item)
        if not all(r[-1] for r in rows):
            status = EXIT_VALIDATION_FAILED
    elif mode == "lambda0":
        rows = []
        for g in args.gamma:
            rep = find_lambda0(env, g, tuple(args.bracket))
            rows.append((g, rep.lambda0, rep.bracket[0], rep.bracket[1], rep.iterations, rep.derivative_residual))
    else:
        rows = []
        for g0 in args.gamma0:
            try:
                rep = find_lambda1(env, g0, grid, args.slope_threshold, workers=args.workers)
            except NotFoundError as exc:
                extra.append(f"lambda1 not found at gamma0={fmt(g0)}: {exc}")
                extra += [f"profile lambda={fmt(l)} ase={fmt(v)} slope={fmt(s)}" for l, v, s in exc.profile]
                status = EXIT_NUMERICAL
                continue
            rows.append((g0, rep.lambda1, rep.lambda0, rep.slope_threshold))
            extra += [f"profile gamma0={fmt(g0)} lambda={fmt(l)} ase={fmt(v)} slope={fmt(s)}"
                      for l, v, s in zip(rep.grid, rep.ase, rep.slopes)]
    rows.sort(key=lambda r: tuple(-math.inf if v is None else float(v) for v in r[:2]))
    return rows, extra, status


def render(args, model_config, rows, extra):
    lines = [f"# densecell {__version__}", f"# mode={args.mode}"]
    lines += [f"# config {k}={v if k == 'model' else repr(float(v))}" for k, v in model_config.items()]
    if args.mode in ("coverage", "ase", "validate", "lambda1"):
        lines.append(f"# grid start={fmt(args.lambda_start)} stop={fmt(args.lambda_stop)} "
                     f"points_per_decade={args.points_per_decade}")
    if args.mode in ("coverage", "validate", "lambda0"):
        lines.append("# gamma=" + " ".join(fmt(g) for g in args.gamma))
    if args.mode in ("ase", "lambda1"):
        lines.append("# gamma0=" + " ".join(fmt(g) for g in args.gamma0))
    if args.mode == "validate":
        lines.append(f"# trials={args.trials} seed={args.seed}")
    if args.mode == "lambda0":
        lines.append(f"# bracket={fmt(args.bracket[0])} {fmt(args.bracket[1])}")
    if args.mode == "lambda1":
        lines.append(f"# slope_threshold={fmt(args.slope_threshold)}")
    lines += [f"# {e}" for e in extra]
    lines.append(",".join(HEADERS[args.mode]))
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.workers < 1:
            raise UsageError("workers must be at least 1")
        if args.trials < 1:
            raise UsageError("trials must be at least 1")
        try:
            model_config = cfg.load(args.config) if args.config else cfg.PRESET
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        # builds and checks the model before any computation
        env = model_config.to_environment()
        rows, extra, status = run(args, env, model_config)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"densecell: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"densecell: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except DenseCellError as exc:
        print(f"densecell: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render(args, model_config, rows, extra)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status
