"""Gaussian-first screening followed by a joint Cox refit, on a CSV file.

Any file with a header ``time,event,<features...>`` works.  Here the input
is a simulated dataset written by ``dump_dataset``.
"""
from survscreen import ScenarioSpec, dump_dataset, generate_dataset, ingest_csv, recommended_pipeline

path = dump_dataset(generate_dataset(ScenarioSpec(n=800, censoring_rate=0.5, rho=0.8, master_seed=3), 0),
                    "demo_pipeline.csv")
ds = ingest_csv(path)
res = recommended_pipeline(ds, correlated=True)

print("selected:", [ds.feature_names[f - 1] for f in res.selected_features])
print("gaussian ranking:", [ds.feature_names[f - 1] for f in res.gaussian_ranking])
if res.cox_refit_error is None:
    print("cox refit ranking:", [ds.feature_names[f - 1] for f in res.cox_refit_ranking])
else:
    print("cox refit failed:", res.cox_refit_error.message)
print("primary ranking:", res.primary)
