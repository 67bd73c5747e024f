"""Fit a Cox proportional hazards model and inspect the Newton iterations."""
import numpy as np

from survscreen import ScenarioSpec, fit_cox, generate_dataset

ds = generate_dataset(ScenarioSpec(n=2000, censoring_rate=0.5, rho=0.0, master_seed=5), 0)
cols = ds.true_columns
fit = fit_cox(ds.X[:, cols], ds.time, ds.event)

# Five of the ten true features are never observed, so the fitted log hazard
# ratios are heavily attenuated.  Their order still follows the effects.
for effect, b, se, p in zip(ds.observed_effects, fit.coefficients, fit.std_errors, fit.p_values):
    print(f"effect {effect:4.0f}: beta={b:7.3f}  se={se:.3f}  p={p:.2e}")

print(f"converged={fit.converged} after {fit.iterations} iterations")
print("log partial likelihood per iteration:")
print(np.round(fit.loglik_history, 4))
