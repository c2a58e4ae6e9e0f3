"""Plant-protection agents whose metacognitive layer repairs their spray model."""

from .cognition import CognitiveAgent, EpisodeResult
from .experiment import ExperimentConfig, TrialRow, aggregate, boxplot_stats, run_experiment
from .garden import GardenWorld, ProblemSpec, env_step, generate_problem, observe, safe_kill_oracle
from .learning import FoilConfig, HornClause, RuleLearner, foil, foil_gain
from .logic import Atom, GoalFormula, Literal, diff_states, entails, substitute
from .meta import MetaCycle, load_domain
from .pddl import Domain, Problem, parse_domain, parse_problem, render_domain
from .planner import SearchConfig, ground, plan, successor, validate

__all__ = [
    "Atom", "CognitiveAgent", "Domain", "EpisodeResult", "ExperimentConfig", "FoilConfig",
    "GardenWorld", "GoalFormula", "HornClause", "Literal", "MetaCycle", "Problem", "ProblemSpec",
    "RuleLearner", "SearchConfig", "TrialRow", "aggregate", "boxplot_stats", "diff_states",
    "entails", "env_step", "foil", "foil_gain", "generate_problem", "ground", "load_domain",
    "observe", "parse_domain", "parse_problem", "plan", "render_domain", "run_experiment",
    "safe_kill_oracle", "substitute", "successor", "validate",
]
