"""
Link patterns and charge bookkeeping
====================================

Each screening solution is labelled by a planar link pattern: m arcs joining
pairs of the n boundary points, the remaining points sending rays to u.
"""

# %%
# Enumerate the patterns for six points and three arcs, and compare the count
# with the ballot number and with C(n, m+1) - C(n, m).
from sle_coulomb.linkpatterns import count_link_patterns, enumerate_link_patterns

for p in enumerate_link_patterns(6, 3):
    print(p.to_text())
for n, m in ((4, 1), (4, 2), (5, 2), (6, 3)):
    print(count_link_patterns(n, m, detailed=True).as_row())

# %%
# Charges: boundary points carry a, screening charges -2a, and the marked
# point takes whatever charge restores neutrality.  Its dimension
# lambda(sigma) = sigma^2/2 - sigma b matches the closed forms.
from sle_coulomb.params import make_kappa_params, verify_charge_conventions

for kappa in (8 / 3, 3.0, 6.0):
    params = make_kappa_params(kappa)
    rep = verify_charge_conventions(params, 5, 2)
    print(f"kappa={kappa:.4g}: a={params.a:.4f} b={params.b:+.4f} "
          f"lambda_ground={rep.lambda_ground:+.4f} lambda_excited={rep.lambda_excited:+.4f}")
