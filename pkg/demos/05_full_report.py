"""One call, every stage: the asymptotic report.

Run with ``python3 demos/05_full_report.py``.  From the command line the
report is the ``asymptotic_report`` analysis of a scenario file, for example
``slowvec run scenarios/diag-fixture.json``.
"""

# %% Three operators, three outcomes
import json

import numpy as np

import slowvec as sv
from slowvec._jsonutil import to_jsonable

cases = {
    "diag(0.5, 1) with hull(e2)": (sv.Operator(np.diag([0.5, 1.0])), sv.Compactum(np.array([[0.0, 1.0]]))),
    "left shift with a tiny hull": (sv.make_truncated_shift(8, "left"), sv.Compactum(0.01 * np.eye(8)[:1])),
    "rotation with a tiny hull": (sv.make_cyclic_shift(4), sv.Compactum(0.1 * np.eye(4)[:1])),
}
config = sv.AnalysisConfig(sample_count=8, net_samples=256)
for name, (T, K) in cases.items():
    rep = sv.asymptotic_report(T, K, 0.5, config)
    print(f"{name:<30} status {rep.status:<13} codim X0 = {rep.codim}, largest slow subspace {rep.max_slow_dimension}")

# %% What a report contains
rep = sv.asymptotic_report(*cases["diag(0.5, 1) with hull(e2)"], 0.5, config)
print(json.dumps(to_jsonable(rep.verdicts), indent=2))
print("stages:", ", ".join(rep.stages))
