"""Radial feeder: closed form against sequential Monte Carlo.

Run with ``python3 demos/01_radial_feeder_mcs.py``.
"""
# %%
import numpy as np

from relgrid.indices import customer_indices, load_point_analytic
from relgrid.mcs import McsConfig, run_sequential
from relgrid.scenario_engine import ScenarioSet, constant_scenario
from relgrid.system_model import Component, ComponentKind, LoadPoint, SystemModel

HOURS = 8760.0

# %% [markdown]
# Three line sections in series feed one load point. Failure rates are per
# year and repair rates are 8760 / mean repair hours.

# %%
sections = [("S1", 0.1, 10.0), ("S2", 0.2, 5.0), ("S3", 0.3, 20.0)]
comps = tuple(Component(cid, ComponentKind.LINE, lam, HOURS / r) for cid, lam, r in sections)
lp = LoadPoint("LP", customer_count=250, peak_load=40.0, supply_paths=(frozenset(c.id for c in comps),))
feeder = SystemModel(comps, (lp,))

closed = load_point_analytic(feeder)
print("closed form:", closed.to_dict())

# %% [markdown]
# The simulator samples failure and repair times chronologically. Each
# iteration gets its own seeded stream, so the answer is the same for any
# thread count.

# %%
flat = ScenarioSet((constant_scenario(24),))
for n in (1_000, 10_000, 50_000):
    logs, est = run_sequential(feeder, flat, None, McsConfig(iterations=n, seed=1))
    print(f"N={n:>6}: lambda {est.lambda_i[0]:.4f} +- {est.lambda_hw[0]:.4f} /yr, "
          f"U {est.u_i[0]:.3f} +- {est.u_hw[0]:.3f} h/yr, r {est.r_i[0]:.2f} h")

# %% [markdown]
# The same logs give the customer-weighted indices. With one load point
# SAIFI equals lambda and CAIDI equals r.

# %%
ci = customer_indices(logs, feeder)
print({k: round(v, 4) if isinstance(v, float) else v for k, v in ci.to_dict().items()})

# %% [markdown]
# Which section causes most interruption hours?

# %%
hours = {cid: 0.0 for cid, _, _ in sections}
for log in logs:
    for it in log.interruptions:
        hours[it.cause] += it.duration
share = {k: v / sum(hours.values()) for k, v in hours.items()}
print("share of outage hours by section:", {k: f"{v:.1%}" for k, v in share.items()})
print("expected shares:", {cid: f"{lam * r / 8.0:.1%}" for cid, lam, r in sections})
print("mean unserved energy per iteration:", np.mean([sum(i.unserved_energy for i in g.interruptions) for g in logs]))
