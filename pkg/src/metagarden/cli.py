"""Command line: run sweeps, plot results, solve PDDL tasks, replay trials."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import experiment as ex
from .garden import ProblemSpec, generate_problem
from .pddl import PDDLError, parse_domain, parse_problem
from .planner import SearchConfig, SearchLimitExceeded, ground, plan

logger = logging.getLogger(__name__)

SEED_ENV = "METAGARDEN_SEED"


def _goal_range(text: str) -> List[int]:
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":", 1))
            counts = list(range(lo, hi + 1))
        else:
            counts = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad goal range {text!r}; use LO:HI or a comma list") from None
    if not counts or min(counts) < 1 or max(counts) > 36:
        raise argparse.ArgumentTypeError("goal counts must lie in 1..36")
    return counts


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _ratio(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("ratio must lie strictly between 0 and 1")
    return v


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV}={raw!r} is not an integer")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metagarden",
                                description="Plant-protection agents that learn their spray model.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run a seeded sweep and write a CSV of trial rows")
    run.add_argument("--agent", choices=["standard", "learning", "both"], default="learning")
    run.add_argument("--ratio", type=_ratio, default=0.75, help="fraction of goals that are natives")
    run.add_argument("--goals", type=_goal_range, default=list(range(1, 21)), help="LO:HI or comma list")
    run.add_argument("--trials", type=_positive, default=100, help="trials per goal count")
    run.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    run.add_argument("--out", required=True, help="CSV output path")

    plot = sub.add_parser("plot", help="render an SVG from a results CSV")
    plot.add_argument("--in", dest="inp", required=True, help="results CSV")
    plot.add_argument("--kind", choices=["curve", "box"], default="curve")
    plot.add_argument("--goals", type=int, default=None, help="goal count for box plots")
    plot.add_argument("--ratio", type=_ratio, default=None, help="only rows with this ratio")
    plot.add_argument("--out", required=True, help="SVG output path")

    solve = sub.add_parser("solve", help="plan for a PDDL domain and problem")
    solve.add_argument("--domain", required=True)
    solve.add_argument("--problem", required=True)
    solve.add_argument("--node-cap", type=_positive, default=SearchConfig().node_cap)

    replay = sub.add_parser("replay", help="re-run one seeded trial and dump snapshots and trace")
    replay.add_argument("--agent", choices=["standard", "learning"], default="learning")
    replay.add_argument("--ratio", type=_ratio, default=0.75)
    replay.add_argument("--goals", type=_positive, required=True, help="goal count of the trial")
    replay.add_argument("--trial", type=int, default=0)
    replay.add_argument("--seed", type=int, default=None)
    replay.add_argument("--warmup", type=_positive, default=None, metavar="TRIALS",
                        help="first replay the sweep (goal counts 1..GOALS at TRIALS per count) "
                             "that precedes this trial, so a learning agent arrives with its model")
    replay.add_argument("--out", required=True, help="output directory")
    return p


def _cmd_run(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    agents = ["standard", "learning"] if args.agent == "both" else [args.agent]
    rows = []
    for a in agents:
        cfg = ex.ExperimentConfig(a, args.ratio, tuple(args.goals), args.trials, seed)
        rows.extend(ex.iter_trials(cfg))
    Path(args.out).write_text(ex.rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_plot(args) -> int:
    from .plots import box_svg, curve_svg, write_svg

    rows = ex.read_rows(args.inp)
    if args.ratio is not None:
        rows = [r for r in rows if abs(r.ratio - args.ratio) < 1e-9]
    if not rows:
        print("error: no rows to plot", file=sys.stderr)
        return 1
    if args.kind == "curve":
        table = ex.aggregate(rows)
        series = {a: ex.curve(table, a) for a in sorted({a for a, _ in table})}
        text = curve_svg(series)
    else:
        n = args.goals if args.goals is not None else max(r.n_goals for r in rows)
        stats = {}
        for a in sorted({r.agent for r in rows}):
            counts = ex.achieved_counts(rows, a, n)
            if counts:
                stats[a] = ex.boxplot_stats(counts)
        if not stats:
            print(f"error: no rows with {n} goals", file=sys.stderr)
            return 1
        text = box_svg(stats, title=f"Goals achieved in {n}-goal problems")
    write_svg(text, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_solve(args) -> int:
    domain = parse_domain(Path(args.domain).read_text())
    problem = parse_problem(Path(args.problem).read_text(), domain)
    try:
        result = plan(ground(domain, problem), SearchConfig(node_cap=args.node_cap))
    except SearchLimitExceeded as exc:
        print(f"search limit reached after {exc.expanded} expansions", file=sys.stderr)
        return 3
    if result is None:
        print("unsolvable")
        return 1
    for step in result:
        print(step)
    return 0


def _cmd_replay(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    agent = ex.make_agent(args.agent)
    if args.warmup:
        counts = tuple(range(1, args.goals))
        if counts:
            list(ex.iter_trials(ex.ExperimentConfig(args.agent, args.ratio, counts, args.warmup, seed), agent))
        for t in range(args.trial):
            s = ex.trial_seed(seed, args.goals, t)
            agent.run_episode(*generate_problem(ProblemSpec(s, args.goals, args.ratio)))
    s = ex.trial_seed(seed, args.goals, args.trial)
    world, goals = generate_problem(ProblemSpec(s, args.goals, args.ratio))
    result = agent.run_episode(world, goals)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "worlds.jsonl", "w") as fh:
        for w in agent.worlds:
            fh.write(json.dumps(w.to_json()) + "\n")
    (out / "trace.json").write_text(result.trace.dumps())
    summary = {"seed": s, "goals_total": result.total, "goals_achieved": result.achieved,
               "goals_rejected": result.rejected, "steps": result.steps, "capped": result.capped}
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(json.dumps(summary))
    return 0


COMMANDS = {"run": _cmd_run, "plot": _cmd_plot, "solve": _cmd_solve, "replay": _cmd_replay}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (OSError, PDDLError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
