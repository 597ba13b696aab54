"""
Repairing the plan
==================

The loop repairs the most likely failure first.  A repair is kept only when
the exact success probability goes up.
"""

from eventplan import analyze_plan, load_fixture, serialize_plan, solve

domain, problem, initial = load_fixture(with_plan=True)

report = solve(domain, problem, threshold=0.95, budget=20)
for a in report.log:
    verdict = "kept" if a.accepted else "dropped"
    print(f"[{a.iteration}] {a.method:10s} {verdict:8s} {a.before:.7f} -> {a.after}")
print(report.reason, report.probability)

# first a branch on the taxi having wandered off, then a locker for the package
print(serialize_plan(report.plan))
print("failure modes left:", len(analyze_plan(report.plan, domain, problem).failures))
