"""Finite-difference residuals of the null-vector, Ward, commutator and
Calogero-Moser identities.

Functions act on a coordinate vector ``(x_1, ..., x_n)`` or, with a finite
marked point, ``(x_1, ..., x_n, u)``.  Steps are a fixed fraction of each
coordinate's distance to its nearest neighbour.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, StencilError
from .params import BoundaryConfig

FD1 = {2: ((1, 1 / 2),), 4: ((1, 2 / 3), (2, -1 / 12)), 6: ((1, 3 / 4), (2, -3 / 20), (3, 1 / 60))}
FD2 = {
    2: (-2.0, ((1, 1.0),)),
    4: (-5 / 2, ((1, 4 / 3), (2, -1 / 12))),
    6: (-49 / 18, ((1, 3 / 2), (2, -3 / 20), (3, 1 / 90))),
}
OUTER_FACTOR = 4.0


@dataclass(frozen=True)
class StencilSpec:
    order: int = 4
    step_scale: float = 1e-2
    max_mixed_order: int = 2

    def __post_init__(self):
        if self.order not in FD1:
            raise DomainError(f"stencil order must be 2, 4 or 6, got {self.order}")
        if not self.step_scale > 0:
            raise DomainError("step_scale must be positive")

    @property
    def reach(self) -> int:
        return self.order // 2

    def outer(self) -> "StencilSpec":
        return StencilSpec(self.order, OUTER_FACTOR * self.step_scale, self.max_mixed_order)


@dataclass(frozen=True)
class OperatorResidualReport:
    operator_name: str
    residuals: tuple
    scale: float
    passed: bool
    tolerance: float
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def _gaps(coords):
    c = np.asarray(coords, dtype=float)
    d = np.abs(c[:, None] - c[None, :])
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)


def _steps(coords, stencil: StencilSpec):
    gaps = _gaps(coords)
    steps = stencil.step_scale * gaps
    for j, g in enumerate(gaps):
        while stencil.reach * steps[j] >= 0.5 * g:
            steps[j] *= 0.5
        if steps[j] < 1e-12 * max(1.0, abs(coords[j])):
            raise StencilError(f"step for coordinate {j} fell below the machine-precision floor")
    return steps


class Stencil:
    """Cached central differences of ``f`` around ``coords``."""

    def __init__(self, f: Callable, coords, stencil: StencilSpec):
        self.f = f
        self.coords = np.asarray(coords, dtype=float)
        self.spec = stencil
        self.steps = _steps(self.coords, stencil)
        self._cache = {}

    def at(self, j=None, k=0):
        key = (None, 0) if (j is None or k == 0) else (j, k)
        if key not in self._cache:
            y = self.coords.copy()
            if key[0] is not None:
                y[j] += k * self.steps[j]
            self._cache[key] = self.f(y)
        return self._cache[key]

    def value(self):
        return self.at()

    def d1(self, j):
        acc = 0
        for k, c in FD1[self.spec.order]:
            acc = acc + c * (self.at(j, k) - self.at(j, -k))
        return acc / self.steps[j]

    def d2(self, j):
        c0, rest = FD2[self.spec.order]
        acc = c0 * self.at()
        for k, c in rest:
            acc = acc + c * (self.at(j, k) + self.at(j, -k))
        return acc / self.steps[j] ** 2


def _split(coords, n):
    coords = np.asarray(coords, dtype=float)
    if len(coords) not in (n, n + 1):
        raise DomainError(f"expected {n} or {n + 1} coordinates, got {len(coords)}")
    return coords[:n], (coords[n] if len(coords) == n + 1 else None)


def _coords_of(at) -> np.ndarray:
    if isinstance(at, BoundaryConfig):
        return np.array(list(at.points) + ([at.marked] if at.has_finite_u else []), dtype=float)
    return np.asarray(at, dtype=float)


def _L_from_stencil(st: Stencil, j, n, kappa, lambda_u=0.0):
    x, u = _split(st.coords, n)
    out = 0.5 * kappa * st.d2(j)
    val = st.value()
    for k in range(n):
        if k != j:
            dx = x[k] - x[j]
            out = out + 2 / dx * st.d1(k) + (1 - 6 / kappa) / dx ** 2 * val
    if u is not None:
        du = u - x[j]
        out = out + 2 / du * st.d1(n) - 2 * lambda_u / du ** 2 * val
    return out


def apply_L(j: int, f: Callable, at, stencil: StencilSpec = StencilSpec(), kappa: float = 4.0, n: int | None = None,
            lambda_u: float = 0.0):
    """Null-vector operator L_j applied to ``f`` (0-based ``j``).

    L_j = (kappa/2) d_j^2 + sum_{k != j} [2/(x_k - x_j) d_k + (1 - 6/kappa)/(x_k - x_j)^2],
    plus 2/(u - x_j) d_u - 2 lambda_u/(u - x_j)^2 when a finite u is present.
    """
    coords = _coords_of(at)
    n = at.n if isinstance(at, BoundaryConfig) else (n or len(coords))
    return _L_from_stencil(Stencil(f, coords, stencil), j, n, kappa, lambda_u)


def _scale(coords, value, power=2):
    return abs(value) / float(np.min(_gaps(coords))) ** power


def nullvec_residual_system(psi: Callable, at, kappa: float, lambda_u: float = 0.0,
                            stencil: StencilSpec = StencilSpec(), tol: float = 1e-4) -> OperatorResidualReport:
    """Relative residuals |L_j psi| / (|psi| / gap^2) for every j.

    ``extras['h']`` holds the back-solved h_j = -(L_j psi)/psi times gap^2,
    which vanishes for a solution.
    """
    coords = _coords_of(at)
    n = at.n if isinstance(at, BoundaryConfig) else len(coords)
    st = Stencil(psi, coords, stencil)
    val = st.value()
    scale = _scale(coords, val)
    if scale == 0:
        raise DomainError("psi vanishes at the configuration")
    residuals, hs = [], []
    g2 = float(np.min(_gaps(coords))) ** 2
    for j in range(n):
        lj = _L_from_stencil(st, j, n, kappa, lambda_u)
        residuals.append(float(abs(lj) / scale))
        hs.append(complex(-lj / val * g2))
    res = tuple(residuals)
    return OperatorResidualReport("null-vector", res, scale, max(res) < tol, tol,
                                  {"h": tuple(hs), "summed": float(abs(sum(_L_from_stencil(st, j, n, kappa, lambda_u)
                                                                           for j in range(n))) / scale)})


def ward_residuals(psi: Callable, at: BoundaryConfig, kappa: float, lambda_u: float,
                   stencil: StencilSpec = StencilSpec(), tol: float = 1e-4) -> OperatorResidualReport:
    """Residuals of the translation, dilatation and special conformal operators.

    Normalization: |psi|/gap, |psi| and |psi| R, with R the largest
    coordinate modulus, so each residual is dimensionless.
    """
    if not at.has_finite_u:
        raise DomainError("Ward residuals need a finite marked point")
    coords = _coords_of(at)
    n = at.n
    st = Stencil(psi, coords, stencil)
    val = st.value()
    grad = [st.d1(j) for j in range(n + 1)]
    x, u = coords[:n], coords[n]
    h = (6 - kappa) / (2 * kappa)
    w1 = sum(grad)
    w2 = sum(x[i] * grad[i] for i in range(n)) + n * h * val + u * grad[n] + lambda_u * val
    w3 = (sum(x[i] ** 2 * grad[i] for i in range(n)) + 2 * h * float(np.sum(x)) * val + u ** 2 * grad[n]
          + 2 * lambda_u * u * val)
    mag = abs(val)
    radius = float(np.max(np.abs(coords)))
    gap = float(np.min(_gaps(coords)))
    res = (abs(w1) / (mag / gap), abs(w2) / mag, abs(w3) / (mag * max(radius, gap)))
    res = tuple(float(r) for r in res)
    return OperatorResidualReport("ward", res, mag, max(res) < tol, tol)


@dataclass
class DriftField:
    """b_j = kappa d_j log|psi| on the open chamber, by central differences."""

    psi: Callable
    kappa: float
    n: int
    stencil: StencilSpec = field(default_factory=lambda: StencilSpec(4, 1e-3))

    def __call__(self, coords) -> np.ndarray:
        st = Stencil(lambda y: math.log(abs(self.psi(y))), coords, self.stencil)
        return np.array([self.kappa * st.d1(j) for j in range(self.n)])


def _M_apply(i, g, coords, n, kappa, drift, stencil):
    st = Stencil(g, coords, stencil)
    x, u = _split(coords, n)
    b = drift(coords) if drift is not None else np.zeros(n)
    out = 0.5 * kappa * st.d2(i) + b[i] * st.d1(i)
    for k in range(n):
        if k != i:
            out = out + 2 / (x[k] - x[i]) * st.d1(k)
    if u is not None:
        out = out + 2 / (u - x[i]) * st.d1(n)
    return out


def _commutator(op, i, j, g, coords, stencil, coefficient):
    """|([A_i, A_j] - c (A_j - A_i)) g| / (sum of the term magnitudes)."""
    if i == j:
        return 0.0
    inner = stencil

    def ai(y):
        return op(i, g, y, inner)

    def aj(y):
        return op(j, g, y, inner)

    outer = stencil.outer()
    ij = op(i, aj, coords, outer)
    ji = op(j, ai, coords, outer)
    a_i, a_j = op(i, g, coords, inner), op(j, g, coords, inner)
    c = coefficient(coords)
    rhs = c * (a_j - a_i)
    scale = abs(ij) + abs(ji) + abs(rhs) + abs(g(coords)) / float(np.min(_gaps(coords))) ** 4
    return float(abs(ij - ji - rhs) / scale)


def commutator_residual_M(drift: DriftField | None, i: int, j: int, g: Callable, at, kappa: float | None = None,
                          stencil: StencilSpec = StencilSpec()) -> float:
    """Residual of [M_i, M_j] = 4/(x_i - x_j)^2 (M_j - M_i) on ``g`` (0-based indices).

    M_i = (kappa/2) d_i^2 + b_i d_i + sum_{k != i} 2/(x_k - x_i) d_k.  Pass
    ``drift=None`` for b = 0, in which case ``kappa`` is required.
    """
    coords = _coords_of(at)
    n = drift.n if drift is not None else (at.n if isinstance(at, BoundaryConfig) else len(coords))
    kap = drift.kappa if drift is not None else kappa
    if kap is None:
        raise DomainError("kappa is required when no drift is given")

    def op(k, f, y, st):
        return _M_apply(k, f, y, n, kap, drift, st)

    return _commutator(op, i, j, g, coords, stencil, lambda y: 4 / (y[i] - y[j]) ** 2)


def commutator_residual_L(j: int, k: int, g: Callable, at, kappa: float,
                          stencil: StencilSpec = StencilSpec()):
    """Residuals of [L_j, L_k] g against the rational right-hand side
    4/(x_j - x_k)^2 (L_k - L_j) g and the trigonometric one with
    1/sin^2((x_j - x_k)/2)."""
    coords = _coords_of(at)
    n = at.n if isinstance(at, BoundaryConfig) else len(coords)

    def op(idx, f, y, st):
        return _L_from_stencil(Stencil(f, y, st), idx, n, kappa)

    rational = _commutator(op, j, k, g, coords, stencil, lambda y: 4 / (y[j] - y[k]) ** 2)
    trig = _commutator(op, j, k, g, coords, stencil, lambda y: 1 / math.sin((y[j] - y[k]) / 2) ** 2)
    return rational, trig


def cm_prefactor(coords, r: float) -> float:
    """Phi_r = prod_{j<k} |x_j - x_k|^(-2r)."""
    x = np.asarray(coords, dtype=float)
    d = np.abs(x[:, None] - x[None, :])[np.triu_indices(len(x), 1)]
    return float(np.prod(d ** (-2 * r)))


def cm_potential(coords) -> float:
    x = np.asarray(coords, dtype=float)
    d = (x[:, None] - x[None, :])[np.triu_indices(len(x), 1)]
    return float(np.sum(d ** -2.0))


def cm_coupling(kappa: float) -> float:
    """Coefficient of sum_{j<k} (x_j - x_k)^-2 after conjugating sum_j L_j by Phi_{1/kappa}."""
    return 4 - 16 / kappa


def cm_conjugation_residual(n: int, kappa: float, g: Callable, at, stencil: StencilSpec = StencilSpec()) -> float:
    """Relative residual of Phi^{-1} L (Phi g) - [(kappa/2) lap + (4 - 16/kappa) V] g.

    L = sum_j L_j, Phi = Phi_{1/kappa}, V = sum_{j<k} (x_j - x_k)^-2.
    """
    coords = _coords_of(at)
    if len(coords) != n:
        raise DomainError(f"expected {n} coordinates")
    r = 1 / kappa

    def phig(y):
        return cm_prefactor(y, r) * g(y)

    st = Stencil(phig, coords, stencil)
    lhs = sum(_L_from_stencil(st, j, n, kappa) for j in range(n)) / cm_prefactor(coords, r)
    sg = Stencil(g, coords, stencil)
    lap = sum(sg.d2(j) for j in range(n))
    pot = cm_coupling(kappa) * cm_potential(coords) * sg.value()
    rhs = 0.5 * kappa * lap + pot
    scale = abs(0.5 * kappa * lap) + abs(pot) + abs(sg.value()) / float(np.min(_gaps(coords))) ** 2
    return float(abs(lhs - rhs) / scale)


REPORT_COLUMNS = ("check", "n", "m", "kappa", "pattern", "indices", "residual", "scale", "passed")


def write_operator_report(rows, path) -> None:
    """Rows are dicts keyed by REPORT_COLUMNS."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, restval="")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r.get(k, "") for k in REPORT_COLUMNS})
