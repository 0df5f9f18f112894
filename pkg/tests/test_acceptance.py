"""Acceptance checks, one test per criterion, at the stated tolerances."""

import math
import time
import warnings
from itertools import combinations

import numpy as np
import pytest

from sle_coulomb import coulomb, hulls, loewner, operators
from sle_coulomb.coulomb import DegenerateNormalizationWarning, ScreeningFunction
from sle_coulomb.linkpatterns import count_link_patterns, enumerate_link_patterns
from sle_coulomb.params import (BoundaryConfig, d_closed_form, lambda_excited_closed, make_kappa_params,
                                verify_charge_conventions)

SWEEP_NM = ((2, 1), (3, 1), (4, 1), (4, 2))
SWEEP_KAPPA = (2.0, 8 / 3, 4.0, 6.0)
# generic positions: symmetric ones can sit on isolated zeros of a pattern's integral
POINTS = {2: (0.0, 1.0), 3: (0.0, 1.0, 2.2), 4: (0.0, 1.0, 2.2, 3.7)}


def kappa_label(kappa):
    return "8/3" if abs(kappa - 8 / 3) < 1e-12 else f"{kappa:g}"


@pytest.fixture(autouse=True)
def quiet_degenerate():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateNormalizationWarning)
        yield


@pytest.mark.criterion(1, "charge conventions reproduce both closed forms (1e-12, < 1 s)")
def test_criterion_01_charge_conventions(record):
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for kappa in (2.0, 8 / 3, 3.0, 4.0, 6.0, 8.0):
        params = make_kappa_params(kappa)
        for n in range(2, 7):
            for m in range(1, n // 2 + 1):
                worst = max(worst, verify_charge_conventions(params, n, m).max_defect)
                cases += 1
    elapsed = time.perf_counter() - start
    record(f"{cases} cases, max defect {worst:.1e}, {elapsed:.3f} s")
    assert worst < 1e-12
    assert elapsed < 1.0


def brute_force(n, m):
    pairs = list(combinations(range(1, n + 1), 2))
    found = 0
    for arcs in combinations(pairs, m):
        used = {i for a in arcs for i in a}
        if len(used) != 2 * m:
            continue
        if any(i < k < j < l for (i, j) in arcs for (k, l) in arcs):
            continue
        if any(i < r < j for (i, j) in arcs for r in range(1, n + 1) if r not in used):
            continue
        found += 1
    return found


@pytest.mark.criterion(2, "link-pattern counts match a brute-force planarity filter (n <= 10, < 1 s)")
def test_criterion_02_link_patterns(record):
    start = time.perf_counter()
    counts = {(n, m): count_link_patterns(n, m) for n in range(1, 11) for m in range(1, n // 2 + 1)}
    elapsed = time.perf_counter() - start
    mismatches = [key for key, c in counts.items() if c != brute_force(*key)]
    for n, m in ((4, 1), (4, 2), (6, 3)):
        record(count_link_patterns(n, m, detailed=True).as_row())
    record(f"brute-force mismatches: {mismatches or 'none'}, {elapsed:.3f} s")
    assert not mismatches
    assert (count_link_patterns(4, 1), count_link_patterns(4, 2), count_link_patterns(6, 3)) == (3, 2, 5)
    assert elapsed < 1.0


@pytest.mark.criterion(3, "null-vector residuals < 1e-4 for every pattern of the sweep; control > 1e-2 (< 10 min)")
def test_criterion_03_null_vector(record):
    start = time.perf_counter()
    worst, failures, count = 0.0, [], 0
    for n, m in SWEEP_NM:
        at = POINTS[n]
        for kappa in SWEEP_KAPPA:
            params = make_kappa_params(kappa)
            for pattern in enumerate_link_patterns(n, m):
                rep = operators.nullvec_residual_system(ScreeningFunction(params, pattern), at, kappa)
                count += 1
                worst = max(worst, rep.max_residual)
                if not rep.passed:
                    failures.append((pattern.to_text(), kappa_label(kappa), rep.max_residual))
    control = operators.nullvec_residual_system(lambda y: math.exp(0.3 * y[0]) * (2 + y[1] ** 2) + y[2],
                                                POINTS[3], 3.0)
    elapsed = time.perf_counter() - start
    record(f"{count} (pattern, kappa) cases, max residual {worst:.1e}; control {control.max_residual:.2e}; "
           f"{elapsed:.0f} s")
    assert not failures, failures
    assert control.max_residual > 1e-2
    assert elapsed < 600


@pytest.mark.criterion(4, "measured dilatation exponent equals the closed form d within 1e-4; (2,1) scales as 2^(1-6/kappa)")
def test_criterion_04_dilatation(record):
    failures = []
    for n, m in SWEEP_NM:
        cfg = BoundaryConfig(POINTS[n])
        for kappa in SWEEP_KAPPA:
            params = make_kappa_params(kappa)
            for pattern in enumerate_link_patterns(n, m):
                rep = coulomb.scaling_exponent_d(params, cfg, pattern)
                if rep.defect >= 1e-4:
                    failures.append(f"{pattern.to_text()} kappa={kappa_label(kappa)}: measured {rep.measured:.6f} "
                                    f"closed form {rep.closed_form:.6f} charge-count degree "
                                    f"{rep.homogeneity_prediction:.6f}")
                if (n, m) == (2, 1):
                    ratio = 2.0 ** rep.exponents[0]
                    if abs(ratio / 2.0 ** (1 - 6 / kappa) - 1) >= 1e-4:
                        failures.append(f"(2,1) kappa={kappa_label(kappa)}: ratio {ratio:.8f}")
    record(f"{len(failures)} case(s) off the closed form")
    for line in failures:
        record(line)
    assert not failures


@pytest.mark.criterion(5, "Ward residuals < 1e-4 for K on (2,1), (3,1) with finite u at kappa 4, 6; wrong lambda fails by >= 100x")
def test_criterion_05_ward(record):
    failures, controls = [], []
    for n, m in ((2, 1), (3, 1)):
        at = BoundaryConfig(POINTS[n], POINTS[n][-1] + 1.7)
        for kappa in (4.0, 6.0):
            params = make_kappa_params(kappa)
            lam = lambda_excited_closed(kappa, n, m)
            for pattern in enumerate_link_patterns(n, m):
                psi = ScreeningFunction(params, pattern, "excited", finite_u=True)
                rep = operators.ward_residuals(psi, at, kappa, lam)
                wrong = operators.ward_residuals(psi, at, kappa, lam + 1.0)
                controls.append(wrong.max_residual)
                line = (f"{pattern.to_text()} kappa={kappa_label(kappa)}: residuals "
                        + ", ".join(f"{r:.2e}" for r in rep.residuals) + f"; wrong lambda {wrong.max_residual:.2e}")
                record(line)
                if not rep.passed:
                    failures.append(line)
    assert not failures
    assert min(controls) >= 100 * 1e-4


@pytest.mark.criterion(6, "Calogero-Moser conjugation residual < 1e-5 over 20 random test functions (< 1 min)")
def test_criterion_06_calogero_moser(record):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for kappa in (8 / 3, 4.0, 6.0):
        for n in (2, 3, 4):
            for _ in range(20):
                x = np.cumsum(np.r_[rng.uniform(-1, 1), rng.uniform(0.6, 1.5, n - 1)])
                coef = rng.normal(size=(n, 4))
                mix = rng.normal()
                g = lambda y, coef=coef, mix=mix: float(
                    sum(np.polyval(coef[j], y[j]) for j in range(n)) + mix * np.prod(y))
                worst = max(worst, operators.cm_conjugation_residual(n, kappa, g, x))
    elapsed = time.perf_counter() - start
    record(f"max residual {worst:.1e}; coupling at kappa=4 is {operators.cm_coupling(4.0)}; {elapsed:.1f} s")
    assert worst < 1e-5
    assert operators.cm_coupling(4.0) == 0.0
    assert elapsed < 60


@pytest.mark.criterion(7, "[M_i, M_j] residual < 1e-3 with drift from J on (2,1), (4,2); rational [L_j, L_k] < 1e-3")
def test_criterion_07_commutators(record):
    rng = np.random.default_rng(7)
    results = []
    cases = [(2, 1, 3.0), (2, 1, 6.0), (4, 2, 3.0)]
    for n, m, kappa in cases:
        params = make_kappa_params(kappa)
        for pattern in enumerate_link_patterns(n, m):
            drift = operators.DriftField(ScreeningFunction(params, pattern), kappa, n)
            coef = rng.normal(size=(n, 3))
            g = lambda y, coef=coef: float(sum(np.polyval(coef[j], y[j]) for j in range(len(coef))) + np.prod(y))
            r = operators.commutator_residual_M(drift, 0, 1, g, np.array(POINTS[n]))
            results.append(r)
            record(f"[M_1, M_2] {pattern.to_text()} kappa={kappa_label(kappa)}: {r:.2e}")
    g = lambda y: float(np.sin(y[0]) + y[0] * y[1] ** 2 + np.cos(0.7 * y[2]))
    rational, trig = operators.commutator_residual_L(0, 1, g, np.array(POINTS[3]), 8 / 3)
    record(f"[L_1, L_2] rational {rational:.2e}; trigonometric {trig:.2e} (reported only)")
    assert max(results) < 1e-3
    assert rational < 1e-3


@pytest.mark.criterion(8, "capacity corollary: defect O(eps^2), Richardson ratio 4 +/- 20% (< 10 s)")
def test_criterion_08_capacity(record):
    start = time.perf_counter()
    rep = hulls.check_capacity_corollary(0.0, 1.0, (1e-3, 5e-4), 1.0)
    elapsed = time.perf_counter() - start
    for e, got, want in zip(rep.eps, rep.measured, rep.predicted):
        record(f"eps={e:g}: measured {got:.10f}, predicted {want:.10f}")
    record(f"Richardson ratio {rep.richardson_ratio:.3f}, {elapsed:.2f} s")
    assert 3.2 <= rep.richardson_ratio <= 4.8
    # defect stays a bounded multiple of eps^2
    assert all(abs(d) < 100 * e ** 2 for d, e in zip(rep.defects, rep.eps))
    assert elapsed < 10


@pytest.mark.criterion(9, "drift transforms as a pre-Schwarzian form: affine exact, Moebius family converges")
def test_criterion_09_coordinate_change(record):
    affine = [loewner.coordinate_change_check(0.3, b, loewner.ConformalMap.affine(a, c), kappa)
              for a, c in ((2.0, -1.0), (0.5, 3.0)) for b in (-1.0, 1.7) for kappa in (3.0, 6.0)]
    record(f"affine: max correction {max(abs(r.correction) for r in affine)}, "
           f"max defect {max(r.defect for r in affine):.1e}")
    defects = []
    for R in (5.0, 10.0, 20.0, 40.0):
        rec = loewner.coordinate_change_check(0.1, 0.4, loewner.ConformalMap.mobius_pole(R), 3.0)
        defects.append(rec.defect)
        record(f"Moebius R={R:g}: correction {rec.correction:.3e}, defect {rec.defect:.1e}")
    assert all(r.correction == 0.0 for r in affine)
    assert max(r.defect for r in affine) < 1e-12
    assert max(defects) < 1e-6


@pytest.mark.criterion(10, "simulation: driftless variance and (2,1) gap drift within 3 sigma; bit-identical seeds (< 5 min)")
def test_criterion_10_simulation(record):
    start = time.perf_counter()
    kappa = 3.0
    moments = loewner.driftless_moments(kappa, 0.1, 1e-2, 10_000, seed=0)
    record(f"variance {moments.variance:.5f} vs kappa t = {moments.variance_expected:.5f} (z = {moments.variance_z:+.2f})")
    params = make_kappa_params(kappa)
    pattern = enumerate_link_patterns(2, 1)[0]
    drift = operators.DriftField(ScreeningFunction(params, pattern), kappa, 2)
    gap = loewner.gap_drift_check(kappa, drift, (0.0, 1.0), dt=1e-2, samples=10_000, seed=1)
    record(f"gap drift {gap.empirical:.4f} +/- {gap.standard_error:.4f} vs {gap.expected:.4f} (z = {gap.z:+.2f})")
    runs = [loewner.evolve((0.0, 1.0), kappa, 1e-3, 100, seed=42, drift=drift) for _ in range(2)]
    identical = (runs[0].driving.tobytes() == runs[1].driving.tobytes() and runs[0].map_stack == runs[1].map_stack)
    elapsed = time.perf_counter() - start
    record(f"reproducible: {identical}; {elapsed:.1f} s")
    assert abs(moments.variance_z) < 3
    assert abs(gap.z) < 3
    assert identical
    assert elapsed < 300
