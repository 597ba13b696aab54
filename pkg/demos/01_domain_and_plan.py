"""
Reading a domain and finding a plan
===================================

The bundled logistics example: one package travels from the Pittsburgh post
office to the Seattle post office by taxi, airplane and taxi again.
"""

from eventplan import load_fixture, plan, schedule, serialize_plan, validate

# domain, problem and the event-free plan shipped with the package
domain, problem, bundled = load_fixture(with_plan=True)
print(sorted(domain.operators))
print(sorted(domain.events))
print("diagnostics:", validate(domain, problem) or "none")

# the regression planner finds the same ten steps
found = plan(domain, problem)
assert found == bundled
print(serialize_plan(found))

# durative steps advance the clock; instantaneous ones only the stage
sched = schedule(found.paths()[0])
for e in sched.entries:
    print(f"t={e.time} s={e.stage}  {e.step}")
print("total duration:", sched.total_duration, "ticks")
