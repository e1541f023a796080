"""Stage timings against the number of subdomains.

Each task's CPU time is measured on its own thread; the parallel time is
the busiest worker when tasks are dealt round-robin, one worker per
subdomain. This is what a machine with enough cores would see, and it is
independent of how many cores the current one has.
"""

# %%
from pdd import KppSpec, PddConfig
from pdd.orchestrator import benchmark

config = PddConfig(KppSpec(-200.0, 200.0), samples=500, levels=11, dx=1e-2, dt_solver=2e-3)
runs = benchmark(config, counts=(1, 2, 4, 8), repeats=5)

# %% [markdown]
# The solve stage should shrink like 1/p. The Monte Carlo stage has one
# cut per worker pair, so its parallel time should stay flat.

# %%
t1 = runs[1].solve_model()
print(" p   solve (s)   T1/p (s)   speedup   MC (s)")
for p, t in runs.items():
    solve = t.solve_model()
    print(f"{p:2d}   {solve:9.4f}   {t1 / p:8.4f}   {t1 / solve:7.2f}   {t.mc_model():6.3f}")
