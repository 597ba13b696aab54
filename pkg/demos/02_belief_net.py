"""
Belief net of a plan
====================

Stage 1 is the deterministic skeleton of the plan.  Stage 2 adds event
nodes wherever some event could be enabled, until nothing new appears.
"""

from eventplan import build_stage1, build_stage2, export_dot, load_fixture
from eventplan.inference import event_marginal, node_marginal

domain, problem, initial = load_fixture(with_plan=True)
path = initial.paths()[0]

s1 = build_stage1(path, domain, problem)
print("stage 1:", s1.summary()["nodes"], "deterministic:", s1.is_deterministic())

s2 = build_stage2(s1, domain, max_chain=3)
print("stage 2:", s2.summary()["nodes"], "rounds:", s2.rounds, "fixpoint:", s2.fixpoint)

# the seattle taxi as seen by its drive at tick 6
fid = s2.feature(("location", "seattle-taxi"), (6, 1, 1))
print("taxi location at the drive:", node_marginal(s2, fid))

# one event node per tick at which the taxi could wander off
there = ("taxi-moves", ("seattle-taxi", "seattle-po", "seattle-airport"))
for t in range(6):
    print(f"  tick {t}: P(taxi leaves) = {event_marginal(s2, (there, t)):.6f}")

# graphviz text; render with `dot -Tpdf logistics.dot -o logistics.pdf`
with open("logistics.dot", "w") as fh:
    fh.write(export_dot(s2, "logistics"))
