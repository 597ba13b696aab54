"""
Monte Carlo execution
=====================

Trials draw every event at every tick.  Results depend only on the master
seed, never on the number of worker threads.
"""

from eventplan import load_fixture, run_trials, simulate_once
from eventplan.montecarlo import convergence_series

domain, problem, initial = load_fixture(with_plan=True)

stats = run_trials(initial, problem, domain, 20000, seed=1, threads=2)
r = stats.success_rate
print(f"success {r:.4f} +/- {stats.stderr(r):.4f}  (exact 0.4709952)")
for key, rate in stats.failure_rates.items():
    print(f"  {rate:.4f}  {key}")

# a single trial can be rerun from (seed, index) alone
trace = simulate_once(initial, problem, domain, 1, 7)
print(trace.text())

# convergence rows for plotting elsewhere
series = convergence_series(initial, problem, domain, 5000, 500, seed=1)
print(series.to_csv())
