"""
Commuting generators and the Calogero-Moser conjugation
=======================================================

The generators M_i with drift kappa d_i log psi satisfy
[M_i, M_j] = 4/(x_i - x_j)^2 (M_j - M_i) when psi solves the null-vector
equations.  Conjugating sum_j L_j by prod |x_j - x_k|^(-2/kappa) gives a
free Laplacian plus an inverse-square potential with coupling 4 - 16/kappa.
"""

# %%
import numpy as np

from sle_coulomb import ScreeningFunction, enumerate_link_patterns, make_kappa_params
from sle_coulomb.operators import DriftField, cm_conjugation_residual, cm_coupling, commutator_residual_M

g = lambda y: float(np.sin(y[0]) * np.cos(0.5 * y[1]) + y[0] * y[1])
x = np.array([0.0, 1.3])
for kappa in (3.0, 6.0):
    psi = ScreeningFunction(make_kappa_params(kappa), enumerate_link_patterns(2, 1)[0])
    with_drift = commutator_residual_M(DriftField(psi, kappa, 2), 0, 1, g, x)
    no_drift = commutator_residual_M(None, 0, 1, g, x, kappa=kappa)
    print(f"kappa={kappa:g}: residual with drift {with_drift:.1e}, without drift {no_drift:.1e}")

# %%
rng = np.random.default_rng(0)
for kappa in (8 / 3, 4.0, 6.0):
    worst = 0.0
    for _ in range(20):
        c = rng.normal(size=3)
        worst = max(worst, cm_conjugation_residual(3, kappa, lambda y, c=c: float(c @ y ** 2 + np.prod(y)),
                                                   np.array([0.0, 1.1, 2.5])))
    print(f"kappa={kappa:.4g}: coupling {cm_coupling(kappa):+.4f}, worst residual {worst:.1e}")
