"""
Exact success probability and failure modes
===========================================

The oracle enumerates every event history of the plan; the failure modes
name the step, the literal and the event chain responsible.
"""

from eventplan import analyze_plan, load_fixture, persistence_survival, two_state_flip

domain, problem, initial = load_fixture(with_plan=True)
result = analyze_plan(initial, domain, problem, max_chain=3)

print(f"success: {result.success:.7f}")
for outcome, p in result.outcomes:
    print(f"  {p:.7f}  {outcome}")

for mode in result.failures:
    print(mode.describe())
    print("   chain:", " -> ".join(str(e) for e in mode.chain))
    print(f"   conditional {mode.probability:.6f}, joint {mode.path_mass:.7f}")

# the taxi mode is a two-state chain; the closed form agrees
print("two_state_flip(0.2, 6) =", two_state_flip(0.2, 6))
# a fact that some event keeps trying to destroy
print("persistence_survival(0.1, 3) =", persistence_survival(0.1, 3))
