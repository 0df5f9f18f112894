import math

import numpy as np
import pytest

from sle_coulomb import hulls
from sle_coulomb.errors import DomainError


def sc_coefficient_oracle(alpha, radius=5.0, nodes=4096):
    """Slit length and 1/w coefficient of f(w) = (w - p)^alpha (w - q)^(1 - alpha),
    p = 1 - alpha, q = -alpha, read off by the trapezoid rule on a large circle."""
    p, q = 1 - alpha, -alpha
    th = 2 * np.pi * np.arange(nodes) / nodes
    w = radius * np.exp(1j * th)
    # the product has no cut outside [q, p]; use logs continued from the positive axis
    f = np.exp(alpha * np.log(w - p) + (1 - alpha) * np.log(w - q))
    f = np.where(np.abs(np.angle(f / w)) < np.pi / 2, f, -f)
    c_minus1 = np.mean(f * w)
    w_tip = alpha * q + (1 - alpha) * p
    tip = abs(w_tip - p) ** alpha * abs(w_tip - q) ** (1 - alpha)
    return tip, c_minus1.real


@pytest.mark.parametrize("alpha", [0.5, 0.3, 0.7, 0.15])
def test_tilted_slit_capacity_matches_coefficient_oracle(alpha):
    tip, c = sc_coefficient_oracle(alpha)
    # f = g^{-1}, so g(z) = z + hcap/z means f(w) = w - hcap/w + ...
    spec = hulls.HullSpec(0.0, 2.0, alpha * math.pi)
    np.testing.assert_allclose(hulls.hcap_of_slit(spec), -c * (2.0 / tip) ** 2, rtol=1e-10)


def test_vertical_slit_capacity():
    assert hulls.hcap_of_slit(hulls.HullSpec.vertical(3.0, 2.0)) == pytest.approx(2.0)
    assert hulls.HullSpec.from_time(0.0, 0.25).length == pytest.approx(1.0)
    assert hulls.HullSpec.from_time(0.0, 0.25).capacity == pytest.approx(0.25)
    assert hulls.hcap_of_slit(hulls.HullSpec(0.0, 0.0)) == 0.0


def test_hull_spec_validation():
    with pytest.raises(DomainError):
        hulls.HullSpec(0.0, -1.0)
    with pytest.raises(DomainError):
        hulls.HullSpec(0.0, 1.0, 0.0)


def test_vertical_slit_map_properties():
    base, t = 0.7, 0.3
    tip = base + 2j * math.sqrt(t)
    np.testing.assert_allclose(hulls.vertical_slit_map(tip, base, t), base, atol=1e-12)
    z = np.array([3 + 1j, -2 + 0.5j, 0.1 + 4j])
    g = hulls.vertical_slit_map(z, base, t)
    assert np.all(g.imag > 0)
    np.testing.assert_allclose(hulls.inverse_vertical_slit_map(g, base, t), z, rtol=1e-12)
    big = 1e6 + 1e6j
    np.testing.assert_allclose((hulls.vertical_slit_map(big, base, t) - big) * (big - base), 2 * t, rtol=1e-5)
    h = 1e-6
    fd = (hulls.vertical_slit_map(2.0 + h, base, t) - hulls.vertical_slit_map(2.0 - h, base, t)).real / (2 * h)
    np.testing.assert_allclose(hulls.vertical_slit_map_derivative(2.0, base, t), fd, rtol=1e-8)


def test_two_slits_bounds_and_far_limit():
    h1, h2 = 0.4, 0.3
    single = h1 ** 2 / 2 + h2 ** 2 / 2
    near = hulls.solve_two_slits(0.0, h1, 0.5, h2)
    assert max(h1, h2) ** 2 / 2 < near.hcap < single
    assert near.balance_defect < 1e-8
    far = hulls.hcap_two_slits(0.0, h1, 200.0, h2)
    np.testing.assert_allclose(far, single, rtol=1e-5)


def test_two_slits_translation_invariant():
    a = hulls.hcap_two_slits(0.0, 0.3, 1.0, 0.2)
    b = hulls.hcap_two_slits(5.0, 0.3, 6.0, 0.2)
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_two_slits_reject_bad_input():
    with pytest.raises(DomainError):
        hulls.solve_two_slits(1.0, 0.3, 0.0, 0.3)


def test_capacity_corollary():
    rep = hulls.check_capacity_corollary(0.0, 1.0, (1e-3, 5e-4), 1.0)
    assert 0.8 * 4 < rep.richardson_ratio < 1.2 * 4
    np.testing.assert_allclose(rep.measured, rep.predicted, atol=1e-4)
    # the explicit single-slit derivative also agrees to first order
    assert max(abs(d) for d in rep.derivative_defects) < 1e-4
    with pytest.raises(DomainError):
        hulls.check_capacity_corollary(1.0, 1.0)
