"""The bundled logistics domain used by the demos and tests."""
from __future__ import annotations

from importlib import resources

from .parser import parse_domain, parse_plan, parse_problem

DOMAIN_FILE = "logistics.evd"
PROBLEM_FILE = "logistics.evp"
PLAN_FILE = "logistics-initial.evplan"


def data_path(name: str):
    return resources.files("eventplan") / "data" / name


def read_data(name: str) -> str:
    return data_path(name).read_text()


def load_fixture(with_plan: bool = False):
    """``(domain, problem)`` for the logistics example, plus the initial plan if asked."""
    domain = parse_domain(read_data(DOMAIN_FILE))
    problem = parse_problem(read_data(PROBLEM_FILE))
    if not with_plan:
        return domain, problem
    return domain, problem, parse_plan(read_data(PLAN_FILE), domain, problem)
