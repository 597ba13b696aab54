"""Planning with probabilistic external events.

Parse a domain and problem, find an event-free plan, measure how likely it
is to succeed once random events are allowed to fire, and repair it.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (
    FAILED,
    Domain,
    GroundEvent,
    GroundStep,
    Literal,
    Problem,
    State,
    grounding,
    initial_state,
)
from .parser import parse_domain, parse_plan, parse_problem, serialize_plan, validate
from .timeline import Branch, Plan, schedule
from .planner import PlannerLimits, iter_plans, plan, replan, validate_plan
from .beliefnet import BeliefNet, build_net, build_stage1, build_stage2, export_dot
from .inference import enumerate_outcomes, evaluate_net, event_marginal, net_success
from .failures import FailureMode, analyze_plan, find_failures, persistence_survival, two_state_flip
from .montecarlo import replay, run_trials, simulate_once
from .repair import RepairReport, repair_branch, repair_protect, repair_reschedule, solve
from .fixtures import load_fixture
