"""
Capacity of two hulls and Loewner evolution
===========================================

Mapping out a small hull at x shrinks the capacity of a hull at y by the
factor 1 - 4 eps/(x - y)^2 to first order.  Then a few Loewner evolutions
driven by the two-point partition function.
"""

# %%
from sle_coulomb.hulls import check_capacity_corollary

rep = check_capacity_corollary(0.0, 1.0, (2e-3, 1e-3, 5e-4), 1.0)
for e, got, want in zip(rep.eps, rep.measured, rep.predicted):
    print(f"eps={e:g}: measured {got:.10f}  first order {want:.10f}  defect {got - want:.2e}")
print(f"defect ratio under halving {rep.richardson_ratio:.3f} (4 for an eps^2 defect)")

# %%
import numpy as np

from sle_coulomb import ScreeningFunction, enumerate_link_patterns, make_kappa_params
from sle_coulomb.loewner import driftless_moments, evolve, gap_drift_check, measured_hcap, sample_traces
from sle_coulomb.operators import DriftField

kappa = 3.0
drift = DriftField(ScreeningFunction(make_kappa_params(kappa), enumerate_link_patterns(2, 1)[0]), kappa, 2)
state = evolve((0.0, 1.0), kappa, 1e-3, 60, seed=1, drift=drift)
print(f"time {state.time:.3f}, hcap {state.total_hcap:.6f}, read off the map {measured_hcap(state):.6f}")
for cid, trace in enumerate(sample_traces(state, resolution=10)):
    print(f"curve {cid}: tips", np.round([z for _, z in trace], 3))

# %%
m = driftless_moments(kappa, 0.1, 1e-2, 2000, seed=0)
print(f"driftless variance {m.variance:.4f} vs kappa t = {m.variance_expected:.4f} (z = {m.variance_z:+.2f})")
gap = gap_drift_check(kappa, drift, samples=2000, seed=3)
print(f"gap drift {gap.empirical:.3f} +/- {gap.standard_error:.3f}, expected {gap.expected:.3f}")
