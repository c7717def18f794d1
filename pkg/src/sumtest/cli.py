"""Command-line entry point: ``sumtest {curves,simulate,localize}``.

Exit status is 0 on success, 2 for invalid arguments or guarded inputs and 1
for failures during a run.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from pathlib import Path

import numpy as np

from sumtest import grid, policies, sim
from sumtest.measure import Prior, load_prior
from sumtest.posterior import PosteriorState, refine

CSV_SCHEMAS = """\
CSV outputs (floats printed with 17 significant digits):
  curves    k, benchmark1, sb_mean, dyadic, lower_bound
  simulate  trajectories: rep, n, X_n, H_bits  (n = 0 row holds H(p_0), X_n empty)
            summary:      rep, final_entropy, rate
  localize  M, k, algorithm, rep, oracle_calls

Environment: SUMTEST_THREADS caps worker processes for simulate (0 = one per CPU).
"""


class UsageError(Exception):
    pass


def _positive(name):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return v

    return conv


def _seed(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sumtest",
        description="Locate k objects from answers counting how many lie in a queried set.",
        epilog=CSV_SCHEMAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curves", help="question counts needed per policy",
                       epilog=CSV_SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("--k-min", type=_positive("k-min"), default=1)
    c.add_argument("--k-max", type=_positive("k-max"), default=16)
    c.add_argument("--bits", type=_positive("bits"), default=20, help="entropy to remove per object")
    c.add_argument("--sb-reps", type=_positive("sb-reps"), default=100)
    c.add_argument("--sb-stop", choices=("entropy", "precision"), default="entropy")
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--out", default="-")

    s = sub.add_parser("simulate", help="replicated policy runs",
                       epilog=CSV_SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--k", type=_positive("k"), required=True)
    s.add_argument("--n", type=_positive("n"), required=True, help="questions per run")
    s.add_argument("--policy", choices=("dyadic", "greedy", "sb"), default="dyadic")
    s.add_argument("--reps", type=_positive("reps"), default=1)
    s.add_argument("--prior", help="prior JSON file (default: uniform on (0, 1])")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--target-bits", type=_positive("target-bits"), default=20, help="sb only")
    s.add_argument("--out", default="-", help="trajectory CSV")
    s.add_argument("--summary", help="summary CSV (default: <out stem>_summary.csv, or stderr for stdout)")
    s.add_argument("--dump-state", help="write the final posterior of replication 0 as JSON")

    g = sub.add_parser("localize", help="pixel search after dyadic screening",
                       epilog=CSV_SCHEMAS, formatter_class=argparse.RawDescriptionHelpFormatter)
    g.add_argument("--m", type=_positive("m"), required=True, help="image side, a power of two")
    g.add_argument("--k", type=_positive("k"), required=True)
    g.add_argument("--algos", default="ir,pr,ipr,ep")
    g.add_argument("--reps", type=_positive("reps"), default=100)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out", default="-")
    g.add_argument("--dump-scene", help="write the scene of replication 0 as JSON")
    return p


@contextlib.contextmanager
def _open_out(path, stream=None):
    if path == "-":
        yield stream or sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _fmt(x: float) -> str:
    return f"{x + 0.0:.17g}"  # no negative zero


def cmd_curves(a) -> None:
    if a.k_min > a.k_max:
        raise UsageError("--k-min must not exceed --k-max")
    with _open_out(a.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "benchmark1", "sb_mean", "dyadic", "lower_bound"])
        for k in range(a.k_min, a.k_max + 1):
            pt = policies.question_count_curves(k, a.bits, a.sb_reps, a.seed, stop=a.sb_stop)
            w.writerow([pt.k, pt.benchmark1, _fmt(pt.sb_mean), pt.dyadic, pt.lower_bound])


def _final_state(cfg: sim.SimConfig, traj: sim.Trajectory) -> PosteriorState:
    state = PosteriorState.initial(cfg.prior, cfg.k)
    for n, x in enumerate(traj.answers, start=1):
        if isinstance(cfg.policy, policies.Dyadic):
            q = policies.dyadic_question(cfg.prior, n)
        else:
            q, _ = policies.greedy_question(state, cfg.policy.params)
        state = refine(state, q, int(x))
    return state


def cmd_simulate(a) -> None:
    try:
        prior = load_prior(a.prior) if a.prior else Prior.uniform()
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load prior: {exc}") from None
    if a.policy == "dyadic":
        policy = policies.Dyadic()
    elif a.policy == "greedy":
        policy = policies.Greedy()
    else:
        policy = policies.SequentialBifurcation(a.target_bits)
    if a.dump_state and a.policy == "sb":
        raise UsageError("--dump-state is available for the dyadic and greedy policies")
    if a.dump_state and a.policy == "dyadic" and a.n > 24:
        raise UsageError("--dump-state with the dyadic policy needs --n <= 24")
    try:
        workers = sim.worker_count()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = sim.SimConfig(prior, a.k, a.n, policy, a.reps, a.seed)
    trajs = sim.run(cfg, workers)

    if a.out == "-":
        sim.write_trajectories(sys.stdout, trajs)
        summary = a.summary or sys.stderr
    else:
        sim.write_trajectories(a.out, trajs)
        out = Path(a.out)
        summary = a.summary or str(out.with_name(out.stem + "_summary.csv"))
    sim.write_summary(summary, trajs)
    if a.dump_state:
        _final_state(cfg, trajs[0]).dump(a.dump_state)


def cmd_localize(a) -> None:
    algos = [s.strip() for s in a.algos.split(",") if s.strip()]
    if not algos:
        raise UsageError("--algos is empty")
    unknown = set(algos) - set(grid.ALGORITHMS)
    if unknown:
        raise UsageError(f"unknown algorithms: {', '.join(sorted(unknown))}")
    if a.m & (a.m - 1):
        raise UsageError("--m must be a power of two")
    if a.k > a.m * a.m:
        raise UsageError("--k exceeds the number of pixels")
    if "ep" in algos:
        try:
            grid.check_ep_limits(a.m, a.k)
        except grid.EPTooLarge as exc:
            raise UsageError(str(exc)) from None
    if a.dump_scene:
        grid.random_scene(a.m, a.k, np.random.default_rng([a.seed, 0])).dump(a.dump_scene)
    rows = grid.localize(a.m, a.k, algos, a.reps, a.seed)
    with _open_out(a.out) as fh:
        grid.write_localize(fh, rows)


COMMANDS = {"curves": cmd_curves, "simulate": cmd_simulate, "localize": cmd_localize}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UsageError, grid.EPTooLarge) as exc:
        print(f"sumtest: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any failure during a run maps to status 1
        print(f"sumtest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
