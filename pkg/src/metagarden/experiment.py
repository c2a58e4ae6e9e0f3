"""Seeded trial sweeps, CSV results, aggregate curves and box-plot statistics."""

from __future__ import annotations

import csv
import io
import logging
import os
import statistics
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .cognition import CognitiveAgent
from .garden import ProblemSpec, derive_seed, generate_problem
from .meta import MetaCycle, load_domain

logger = logging.getLogger(__name__)

AGENTS = ("standard", "learning")


class ExperimentIOError(OSError):
    def __init__(self, message: str, completed: int):
        super().__init__(f"{message} (after {completed} completed rows)")
        self.completed = completed


@dataclass(frozen=True)
class ExperimentConfig:
    agent: str = "learning"
    ratio: float = 0.75
    goal_counts: Tuple[int, ...] = tuple(range(1, 21))
    trials: int = 100
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self) -> None:
        if self.agent not in AGENTS:
            raise ValueError(f"agent must be one of {AGENTS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie strictly between 0 and 1")
        if not self.goal_counts or any(n < 1 for n in self.goal_counts):
            raise ValueError("goal counts must be positive")
        object.__setattr__(self, "goal_counts", tuple(sorted(set(self.goal_counts))))


@dataclass(frozen=True)
class TrialRow:
    agent: str
    ratio: float
    n_goals: int
    trial: int
    seed: int
    goals_total: int
    goals_achieved: int
    goals_rejected: int
    steps: int
    learn_events: int

    @property
    def percentage(self) -> float:
        return 100.0 if self.goals_total == 0 else 100.0 * self.goals_achieved / self.goals_total


HEADER = [f.name for f in fields(TrialRow)]


def make_agent(kind: str) -> CognitiveAgent:
    """A fresh agent holding the unrepaired garden model."""
    domain = load_domain("garden.pddl")
    if kind == "standard":
        return CognitiveAgent(domain, "standard")
    if kind == "learning":
        return CognitiveAgent(domain, "learning", MetaCycle())
    raise ValueError(f"unknown agent kind {kind!r}")


def trial_seed(master: int, n_goals: int, trial: int) -> int:
    return derive_seed(master, n_goals, trial)


def iter_trials(cfg: ExperimentConfig, agent: Optional[CognitiveAgent] = None) -> Iterator[TrialRow]:
    """Run the sweep in ascending goal count, then trial index.

    The learning agent is one object for the whole sweep; the standard
    agent never changes its model, so sharing it is equivalent to a fresh
    agent per trial.
    """
    agent = agent if agent is not None else make_agent(cfg.agent)
    for n in cfg.goal_counts:
        for t in range(cfg.trials):
            seed = trial_seed(cfg.seed, n, t)
            world, goals = generate_problem(ProblemSpec(seed, n, cfg.ratio))
            r = agent.run_episode(world, goals)
            yield TrialRow(cfg.agent, cfg.ratio, n, t, seed, r.total, r.achieved, r.rejected,
                           r.steps, r.learn_events)


def run_trials(cfg: ExperimentConfig, agent: Optional[CognitiveAgent] = None
               ) -> Tuple[List[TrialRow], CognitiveAgent]:
    agent = agent if agent is not None else make_agent(cfg.agent)
    return list(iter_trials(cfg, agent)), agent


def _format(row: TrialRow) -> List[str]:
    return [str(getattr(row, h)) for h in HEADER]


def rows_to_csv(rows: Iterable[TrialRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(_format(r))
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, agent: Optional[CognitiveAgent] = None) -> List[TrialRow]:
    """Run the sweep, streaming rows to ``cfg.out`` when set."""
    rows: List[TrialRow] = []
    if cfg.out is None:
        return list(iter_trials(cfg, agent))
    try:
        fh = open(cfg.out, "w", newline="")
    except OSError as exc:
        raise ExperimentIOError(f"cannot open {cfg.out}: {exc.strerror}", 0) from exc
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        try:
            w.writerow(HEADER)
            for row in iter_trials(cfg, agent):
                w.writerow(_format(row))
                rows.append(row)
        except OSError as exc:
            raise ExperimentIOError(f"writing {cfg.out} failed: {exc.strerror}", len(rows)) from exc
    logger.info("wrote %d rows to %s", len(rows), cfg.out)
    return rows


def parse_rows(text: str) -> List[TrialRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for rec in reader:
        out.append(TrialRow(rec["agent"], float(rec["ratio"]),
                            *(int(rec[h]) for h in HEADER[2:])))
    return out


def read_rows(path: os.PathLike) -> List[TrialRow]:
    return parse_rows(Path(path).read_text())


def aggregate(rows: Iterable[TrialRow]) -> Dict[Tuple[str, int], float]:
    """Mean percentage of goals achieved per (agent, n_goals)."""
    groups: Dict[Tuple[str, int], List[float]] = {}
    for r in rows:
        groups.setdefault((r.agent, r.n_goals), []).append(r.percentage)
    return {k: statistics.fmean(v) for k, v in sorted(groups.items())}


def curve(table: Dict[Tuple[str, int], float], agent: str) -> List[Tuple[int, float]]:
    return sorted((n, v) for (a, n), v in table.items() if a == agent)


def smooth(values: Sequence[float], window: int = 3) -> List[float]:
    """Centred moving average; the window shrinks at the ends."""
    half = window // 2
    out = []
    for i in range(len(values)):
        chunk = values[max(0, i - half): i + half + 1]
        out.append(sum(chunk) / len(chunk))
    return out


@dataclass(frozen=True)
class BoxStats:
    q1: float
    median: float
    q3: float
    lower: float
    upper: float
    outliers: Tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def boxplot_stats(samples: Sequence[float]) -> BoxStats:
    """Quartiles by linear interpolation between order statistics; whiskers at
    1.5 IQR beyond the box; outliers are the samples outside the whiskers."""
    if not samples:
        raise ValueError("boxplot_stats needs at least one sample")
    data = sorted(float(x) for x in samples)
    if len(data) == 1:
        q1 = med = q3 = data[0]
    else:
        q1, med, q3 = statistics.quantiles(data, n=4, method="inclusive")
    iqr = q3 - q1
    lower, upper = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    return BoxStats(q1, med, q3, lower, upper, tuple(x for x in data if x < lower or x > upper))


def achieved_counts(rows: Iterable[TrialRow], agent: str, n_goals: int) -> List[int]:
    return [r.goals_achieved for r in rows if r.agent == agent and r.n_goals == n_goals]
