"""
A domain of your own
====================

Text in, analysis out.  Here waiting first leaves the tool exposed for
three ticks; doing the work first removes the risk.
"""

from eventplan import analyze_plan, parse_domain, parse_plan, parse_problem, solve

DOMAIN = """
(domain chores
  (:types tool - object)
  (:predicates (have ?t - tool) (waited) (done))
  (:operator wait :params () :duration 3 :pre (and) :final-add ((waited)))
  (:operator use :params (?t - tool) :duration 0 :pre (have ?t) :add ((done)))
  (:event drop :params (?t - tool) :probability 0.3 :pre (have ?t) :del ((have ?t))))
"""
PROBLEM = """
(problem tidy (:domain chores) (:objects hammer - tool)
  (:init (have hammer)) (:goal (and (waited) (done))))
"""

domain, problem = parse_domain(DOMAIN), parse_problem(PROBLEM)
lazy = parse_plan("(plan (wait) (use hammer))", domain, problem)
print("wait first:", analyze_plan(lazy, domain, problem).success)   # 0.7 ** 3

report = solve(domain, problem, threshold=0.99)
print([a.method for a in report.accepted], report.probability)
print([str(s) for s in report.plan.steps])
