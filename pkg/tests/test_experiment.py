import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metagarden.experiment import (HEADER, ExperimentConfig, ExperimentIOError, TrialRow, achieved_counts,
                                   aggregate, boxplot_stats, curve, make_agent, parse_rows, read_rows,
                                   rows_to_csv, run_experiment, run_trials, smooth, trial_seed)
from metagarden.garden import ProblemSpec, generate_problem
from metagarden.plots import box_svg, curve_svg, write_svg


def _row(agent="standard", n=4, achieved=2, total=4, trial=0):
    return TrialRow(agent, 0.75, n, trial, 1, total, achieved, 0, 3, 0)


@pytest.fixture(scope="module")
def small_rows():
    cfg = ExperimentConfig("learning", 0.75, (1, 2, 3), 3, seed=5)
    rows, _ = run_trials(cfg)
    return rows


# -- box statistics ----------------------------------------------------------------

def test_box_one_to_nine():
    s = boxplot_stats(range(1, 10))
    assert (s.q1, s.median, s.q3) == (3.0, 5.0, 7.0)
    assert (s.lower, s.upper) == (-3.0, 13.0)
    assert s.outliers == ()


def test_box_constant():
    s = boxplot_stats([4, 4, 4, 4])
    assert s.iqr == 0 and s.lower == s.upper == 4.0 and s.outliers == ()


def test_box_outlier():
    s = boxplot_stats([0, 0, 0, 0, 10])
    assert s.outliers == (10.0,)


def test_box_single_and_empty():
    s = boxplot_stats([7])
    assert (s.q1, s.median, s.q3, s.outliers) == (7.0, 7.0, 7.0, ())
    with pytest.raises(ValueError):
        boxplot_stats([])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=2, max_size=120))
def test_box_quartiles_match_numpy(xs):
    s = boxplot_stats(xs)
    q1, med, q3 = np.percentile(xs, [25, 50, 75], method="linear")
    assert s.q1 == pytest.approx(q1) and s.median == pytest.approx(med) and s.q3 == pytest.approx(q3)
    assert s.lower <= s.q1 <= s.median <= s.q3 <= s.upper
    assert all(x < s.lower or x > s.upper for x in s.outliers)
    assert len(s.outliers) == sum(1 for x in xs if x < s.lower or x > s.upper)


# -- aggregation ---------------------------------------------------------------------

def test_aggregate_single_row():
    assert aggregate([_row()]) == {("standard", 4): 50.0}


def test_aggregate_all_full():
    rows = [_row(n=n, achieved=n, total=n, trial=t) for n in (1, 2) for t in range(3)]
    assert set(aggregate(rows).values()) == {100.0}


def test_aggregate_empty():
    assert aggregate([]) == {}


def test_zero_goal_row_scores_full():
    assert _row(achieved=0, total=0).percentage == 100.0


def test_curve_and_counts():
    rows = [_row(n=2, achieved=1, total=2), _row(n=1, achieved=1, total=1), _row("learning", 1, 0, 1)]
    assert curve(aggregate(rows), "standard") == [(1, 100.0), (2, 50.0)]
    assert achieved_counts(rows, "learning", 1) == [0]


def test_smooth():
    assert smooth([0, 3, 6, 9]) == [1.5, 3.0, 6.0, 7.5]
    assert smooth([]) == []
    assert smooth([5.0], window=5) == [5.0]


# -- CSV and sweeps --------------------------------------------------------------------

def test_csv_header_exact():
    assert rows_to_csv([]) == ",".join(HEADER) + "\n"
    assert HEADER == ["agent", "ratio", "n_goals", "trial", "seed", "goals_total", "goals_achieved",
                      "goals_rejected", "steps", "learn_events"]


def test_csv_round_trip(small_rows):
    assert parse_rows(rows_to_csv(small_rows)) == small_rows


def test_parse_rejects_header():
    with pytest.raises(ValueError, match="header"):
        parse_rows("a,b\n1,2\n")


def test_sweep_order_and_seeds(small_rows):
    assert [(r.n_goals, r.trial) for r in small_rows] == [(n, t) for n in (1, 2, 3) for t in range(3)]
    assert all(r.seed == trial_seed(5, r.n_goals, r.trial) for r in small_rows)
    assert all(r.goals_total == r.n_goals for r in small_rows)
    assert all(0 <= r.goals_achieved + r.goals_rejected <= r.goals_total for r in small_rows)


def test_sweep_byte_identical(tmp_path):
    cfg = ExperimentConfig("learning", 0.6, (2, 4), 3, seed=9)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(ExperimentConfig(**{**cfg.__dict__, "out": str(a)}))
    run_experiment(ExperimentConfig(**{**cfg.__dict__, "out": str(b)}))
    assert a.read_bytes() == b.read_bytes()
    assert read_rows(a) == run_experiment(cfg)


def test_one_row_sweep(tmp_path):
    out = tmp_path / "one.csv"
    rows = run_experiment(ExperimentConfig("standard", 0.75, (1,), 1, out=str(out)))
    assert len(rows) == 1
    assert out.read_text().count("\n") == 2


def test_unwritable_output(tmp_path):
    with pytest.raises(ExperimentIOError) as info:
        run_experiment(ExperimentConfig("standard", 0.75, (1,), 1, out=str(tmp_path / "no" / "x.csv")))
    assert info.value.completed == 0


@pytest.mark.parametrize("kw", [dict(agent="clever"), dict(trials=0), dict(ratio=1.0), dict(ratio=0.0),
                                dict(goal_counts=()), dict(goal_counts=(0, 3))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_sorts_counts():
    assert ExperimentConfig(goal_counts=(3, 1, 3)).goal_counts == (1, 3)


def test_standard_agent_is_stateless():
    # a shared standard agent gives the same rows as a fresh agent per trial
    cfg = ExperimentConfig("standard", 0.75, (3, 5), 4, seed=2)
    shared, _ = run_trials(cfg)
    for row in shared:
        world, goals = generate_problem(ProblemSpec(row.seed, row.n_goals, row.ratio))
        r = make_agent("standard").run_episode(world, goals)
        assert (r.achieved, r.rejected, r.steps) == (row.goals_achieved, row.goals_rejected, row.steps)


def test_learning_agent_keeps_model_across_trials():
    cfg = ExperimentConfig("learning", 0.75, (6,), 5, seed=1)
    rows, agent = run_trials(cfg)
    assert sum(r.learn_events for r in rows) >= 1
    assert len(agent.model.domain.schema("spray").cond_effects) > 0


def test_make_agent_rejects_unknown():
    with pytest.raises(ValueError):
        make_agent("psychic")


# -- SVG output --------------------------------------------------------------------------

def test_curve_svg():
    series = {"standard": [(1, 100.0), (2, 50.0)], "learning": [(1, 100.0), (2, 75.0)]}
    text = curve_svg(series)
    assert text == curve_svg(dict(reversed(list(series.items()))))
    assert re.findall(r'<polyline class="series" data-name="(\w+)"', text) == ["learning", "standard"]
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")


def test_box_svg(tmp_path):
    text = box_svg({"learning": boxplot_stats(range(1, 10)), "standard": boxplot_stats([0, 0, 0, 0, 10])})
    assert 'data-name="learning" data-q1="3" data-q3="7"' in text
    assert text.count('class="outlier"') == 1
    path = write_svg(text, tmp_path / "b.svg")
    assert path.read_text() == text


@pytest.mark.parametrize("fn, arg", [(curve_svg, {}), (curve_svg, {"a": []}), (box_svg, {})])
def test_svg_empty_input(fn, arg):
    with pytest.raises(ValueError):
        fn(arg)
