import csv
import math
import warnings

import numpy as np
import pytest
from scipy import integrate as spi

from sle_coulomb import coulomb
from sle_coulomb.coulomb import (DegenerateNormalizationWarning, ScreeningFunction, eval_J, eval_K,
                                 homogeneity_exponent, log_gradient_psi, make_master_spec, master_excited,
                                 master_ground, scaling_exponent_about_u, scaling_exponent_d, screening_integral,
                                 zeta_residue_integral)
from sle_coulomb.errors import DomainError, UnsupportedConfigurationError
from sle_coulomb.linkpatterns import parse_arcs
from sle_coulomb.params import BoundaryConfig, make_kappa_params

ARC12 = parse_arcs("(1,2)", 2)


def test_exponent_table_is_charge_products():
    kappa = 3.0
    p = make_kappa_params(kappa)
    a, b = p.a, p.b
    cfg = BoundaryConfig((0.0, 1.0, 2.2), 4.0)
    ex = make_master_spec(p, cfg, 1).exponents
    sigma = 2 * b - (3 - 2) * a
    np.testing.assert_allclose(ex["x-x"], 2 / kappa)
    np.testing.assert_allclose(ex["x-xi"], -4 / kappa)
    np.testing.assert_allclose(ex["xi-xi"], 8 / kappa)
    np.testing.assert_allclose(ex["x-u"], a * sigma)
    np.testing.assert_allclose(ex["xi-u"], -2 * a * sigma)
    exc = make_master_spec(p, cfg, 1, "excited")
    assert exc.exponents["zeta-u"] == 2 * 1 - 3 - 2
    assert exc.exponents["x-zeta"] == 1
    assert abs(exc.neutrality_defect) < 1e-12


def test_unknown_kind_rejected():
    with pytest.raises(UnsupportedConfigurationError):
        make_master_spec(make_kappa_params(3.0), BoundaryConfig((0.0, 1.0)), 1, "q=2")


def test_master_ground_point_value():
    p = make_kappa_params(6.0)
    spec = make_master_spec(p, BoundaryConfig((0.0, 1.0)), 1)
    xi = 0.5 + 0.5j
    expected = 1.0 ** (1 / 3) * xi ** (-2 / 3) * (xi - 1) ** (-2 / 3)
    np.testing.assert_allclose(master_ground(spec, [0.0, 1.0], [xi]), expected, rtol=1e-13)


def test_master_excited_multiplies_zeta_factors():
    p = make_kappa_params(3.0)
    cfg = BoundaryConfig((0.0, 1.0), 3.0)
    spec = make_master_spec(p, cfg, 1, "excited")
    xi, zeta = 0.5 + 0.4j, 3.0 + 0.2j
    ratio = master_excited(spec, cfg.points, [xi], zeta) / master_ground(spec, cfg.points, [xi])
    np.testing.assert_allclose(ratio, (zeta - 3.0) ** -2 * zeta * (zeta - 1.0), rtol=1e-13)


@pytest.mark.parametrize("kappa", [6.0, 7.0, 5.0])
def test_two_point_value_matches_beta_oracle(kappa):
    p = make_kappa_params(kappa)
    x1, x2 = 0.3, 2.0
    val, err = screening_integral(p, BoundaryConfig((x1, x2)), ARC12)
    q = -4 / kappa
    beta, _ = spi.quad(lambda t: 1.0, 0, 1, weight="alg", wvar=(q, q), epsabs=1e-15, epsrel=1e-14)
    phase = abs(1 - np.exp(2j * np.pi * q)) ** 2
    np.testing.assert_allclose(abs(val), (x2 - x1) ** (1 - 6 / kappa) * phase * beta, rtol=1e-9)


@pytest.mark.parametrize("kappa", [3.0, 6.0, 8 / 3])
def test_two_point_scaling(kappa):
    p = make_kappa_params(kappa)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateNormalizationWarning)
        rep = scaling_exponent_d(p, BoundaryConfig((0.0, 1.0)), ARC12)
    np.testing.assert_allclose(2.0 ** rep.exponents[0], 2.0 ** (1 - 6 / kappa), rtol=1e-6)
    assert rep.defect < 1e-6


def test_vanishing_family_returns_kappa_derivative():
    p = make_kappa_params(8 / 3)
    with pytest.warns(DegenerateNormalizationWarning):
        val, _ = screening_integral(p, BoundaryConfig((0.0, 1.0)), ARC12)
    assert abs(val) > 1e-3
    assert coulomb.vanishes_identically(p, ARC12)


def test_degenerate_kappa_warns_and_is_nonzero():
    p = make_kappa_params(4.0)
    with pytest.warns(DegenerateNormalizationWarning):
        val, _ = screening_integral(p, BoundaryConfig((0.0, 1.0, 2.2)), parse_arcs("(1,2)", 3))
    assert abs(val) > 1e-3


def test_translation_invariance():
    p = make_kappa_params(3.0)
    pat = parse_arcs("(2,3)", 3)
    cfg = BoundaryConfig((0.0, 1.0, 2.2))
    v0, _ = screening_integral(p, cfg, pat)
    v1, _ = screening_integral(p, cfg.shifted(-7.3), pat)
    np.testing.assert_allclose(v1, v0, rtol=1e-10)


def test_reflection_preserves_modulus():
    p = make_kappa_params(2.5)
    a, _ = screening_integral(p, BoundaryConfig((0.0, 1.0, 2.2, 3.7)), parse_arcs("(1,2)(3,4)", 4))
    b, _ = screening_integral(p, BoundaryConfig((-3.7, -2.2, -1.0, 0.0)), parse_arcs("(1,2)(3,4)", 4))
    np.testing.assert_allclose(abs(a), abs(b), rtol=1e-10)


def test_log_gradient_two_points():
    kappa = 3.0
    p = make_kappa_params(kappa)
    cfg = BoundaryConfig((0.0, 1.5))
    grad = log_gradient_psi(p, cfg, ARC12)
    c = (1 - 6 / kappa) / 1.5
    np.testing.assert_allclose(grad, [-c, c], rtol=1e-8)


def test_eval_J_and_K_interfaces():
    p = make_kappa_params(3.0)
    ev = eval_J(p, BoundaryConfig((0.0, 1.0)), ARC12, with_gradient=True)
    assert ev.log_gradient.shape == (2,) and ev.kind == "ground"
    with pytest.raises(UnsupportedConfigurationError):
        eval_K(p, BoundaryConfig((0.0, 1.0)), ARC12)
    evk = eval_K(p, BoundaryConfig((0.0, 1.0), 3.0), ARC12)
    assert evk.kind == "excited" and abs(evk.value) > 0


def test_pattern_size_mismatch():
    with pytest.raises(DomainError):
        screening_integral(make_kappa_params(3.0), BoundaryConfig((0.0, 1.0, 2.0)), ARC12)


def test_zeta_residue_oracle_and_radius_independence():
    p = make_kappa_params(3.0)
    cfg = BoundaryConfig((0.0, 1.0), 3.0)
    spec = make_master_spec(p, cfg, 1, "excited")
    # (zeta - u)^-2 (zeta - x1)(zeta - x2): residue is (u - x1) + (u - x2)
    expected = 2j * np.pi * (2 * 3.0 - 0.0 - 1.0)
    v1 = zeta_residue_integral(spec, cfg)
    v2 = zeta_residue_integral(spec, cfg, radius=0.25)
    np.testing.assert_allclose(v1, expected, rtol=1e-13)
    assert abs(v1 - v2) < 10 * 1e-12


def test_homogeneity_degree_matches_u_at_infinity_scaling():
    p = make_kappa_params(3.0)
    rep = scaling_exponent_d(p, BoundaryConfig((0.0, 1.0, 2.2)), parse_arcs("(1,2)", 3))
    np.testing.assert_allclose(rep.measured, homogeneity_exponent(p, 3, 1), atol=1e-6)
    np.testing.assert_allclose(rep.homogeneity_prediction, homogeneity_exponent(p, 3, 1), atol=1e-12)


def test_joint_scaling_about_finite_u_for_ground():
    p = make_kappa_params(3.0)
    cfg = BoundaryConfig((0.0, 1.0, 2.2), 4.1)
    rep = scaling_exponent_about_u(p, cfg, parse_arcs("(1,2)", 3), kind="ground")
    assert rep.defect < 1e-6


def test_screening_function_caches():
    psi = ScreeningFunction(make_kappa_params(3.0), ARC12)
    a = psi([0.0, 1.0])
    assert psi([0.0, 1.0]) == a and len(psi._cache) == 1


def test_batch_csv(tmp_path):
    jobs = [{"kappa": "3", "n": 2, "m": 1, "pattern": "(1,2)", "points": [0.0, 1.0]},
            {"kappa": 6, "n": 2, "m": 1, "pattern": "(1,2)", "points": [0.0, 2.0]}]
    rows = [coulomb.run_job(j, i) for i, j in enumerate(jobs)]
    path = tmp_path / "out.csv"
    coulomb.write_results_csv(rows, path)
    with open(path) as fh:
        read = list(csv.DictReader(fh))
    assert list(read[0])[:4] == ["job_id", "re_value", "im_value", "abs_error"]
    assert list(read[0])[-2:] == ["d_measured", "d_closed_form"]
    np.testing.assert_allclose(float(read[1]["d_measured"]), 0.0, atol=1e-6)
    with pytest.raises(DomainError):
        coulomb.run_job({"kappa": 3, "n": 3, "m": 1, "pattern": "(1,2)", "points": [0.0, 1.0]})


def test_exponent_report_lists_used_and_alternative_xi_u():
    p = make_kappa_params(3.0)
    spec = make_master_spec(p, BoundaryConfig((0.0, 1.0, 2.2)), 1)
    rep = coulomb.exponent_report(spec)
    assert rep["exponents_used"]["xi-u"] == spec.exponents["xi-u"]
    assert rep["xi-u_displayed_variant"] == pytest.approx(spec.exponents["xi-u"] - 2)
