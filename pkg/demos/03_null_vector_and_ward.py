"""
Null-vector equations and Ward identities
=========================================

Every screening solution is annihilated by the second-order operators L_j.
Residuals are normalized by |psi| / gap^2 so they are dimensionless.
"""

# %%
import warnings

from sle_coulomb import (BoundaryConfig, DegenerateNormalizationWarning, ScreeningFunction, enumerate_link_patterns,
                         lambda_ground_closed, make_kappa_params)
from sle_coulomb.operators import nullvec_residual_system, ward_residuals

warnings.simplefilter("ignore", DegenerateNormalizationWarning)
points = (0.0, 1.0, 2.2)
for kappa in (2.0, 8 / 3, 4.0, 6.0):
    params = make_kappa_params(kappa)
    for p in enumerate_link_patterns(3, 1):
        rep = nullvec_residual_system(ScreeningFunction(params, p), points, kappa)
        print(f"kappa={kappa:.4g} {p.to_text()}: " + " ".join(f"{r:.1e}" for r in rep.residuals))

# %%
# With a finite marked point u the ground solution satisfies the three
# Ward identities with lambda at u.  A wrong lambda is caught at once.
kappa = 3.0
at = BoundaryConfig(points, 4.1)
lam = lambda_ground_closed(kappa, 3, 1)
psi = ScreeningFunction(make_kappa_params(kappa), enumerate_link_patterns(3, 1)[0], finite_u=True)
print("correct lambda:", ward_residuals(psi, at, kappa, lam).residuals)
print("lambda + 1:    ", ward_residuals(psi, at, kappa, lam + 1).residuals)
