"""Half-plane capacity of slit hulls and the two-hull capacity corollary.

Capacity convention: a hull grown for Loewner time t has hcap = 2t, so a
vertical slit of height h has t = h^2/4 and hcap = h^2/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError

QUAD_OPTS = dict(epsabs=1e-17, epsrel=1e-14, limit=400)


@dataclass(frozen=True)
class HullSpec:
    """Straight slit at ``base``.  ``angle`` is measured from the positive real
    axis (pi/2 for a vertical slit) and ``length`` is the slit length."""

    base: float
    length: float
    angle: float = math.pi / 2

    def __post_init__(self):
        if self.length < 0:
            raise DomainError("slit length must be non-negative")
        if not 0 < self.angle < math.pi:
            raise DomainError("slit angle must lie in (0, pi)")

    @classmethod
    def vertical(cls, base: float, height: float) -> "HullSpec":
        return cls(base, height)

    @classmethod
    def from_time(cls, base: float, t: float) -> "HullSpec":
        """Vertical slit grown for Loewner time t (height 2 sqrt(t))."""
        return cls(base, 2 * math.sqrt(t))

    @property
    def capacity(self) -> float:
        """Loewner time t = hcap / 2."""
        return hcap_of_slit(self) / 2

    @property
    def tip(self) -> complex:
        return self.base + self.length * complex(math.cos(self.angle), math.sin(self.angle))


def hcap_of_slit(spec: HullSpec) -> float:
    """Exact hcap of a straight slit.

    The slit at angle alpha*pi is the image of H under
    f(w) = (w - p)^alpha (w - q)^(1 - alpha) with alpha p + (1 - alpha) q = 0,
    whose expansion f(w) = w - alpha (1 - alpha)(p - q)^2 / (2w) + ... gives the
    capacity.  The vertical case reduces to h^2 / 2.
    """
    if spec.length == 0:
        return 0.0
    alpha = spec.angle / math.pi
    # unit prevertex separation, then rescale by the slit length
    p, q = 1 - alpha, -alpha
    w_tip = alpha * q + (1 - alpha) * p
    unit_length = abs(w_tip - p) ** alpha * abs(w_tip - q) ** (1 - alpha)
    return alpha * (1 - alpha) / 2 * (spec.length / unit_length) ** 2


def vertical_slit_map(z, base: float, t: float):
    """Normalized map removing the vertical slit of Loewner time t at ``base``:
    g(z) = base + sqrt((z - base)^2 + 4t), branch with g(z) ~ z at infinity."""
    z = np.asarray(z, dtype=complex)
    d = z - base
    root = np.sqrt(d * d + 4 * t)
    flip = (root.real * d.real + root.imag * d.imag) < 0
    return base + np.where(flip, -root, root)


def vertical_slit_map_derivative(x, base: float, t: float) -> float:
    """g'(x) for real x off the slit base."""
    d = x - base
    return d / math.sqrt(d * d + 4 * t)


def inverse_vertical_slit_map(w, base: float, t: float):
    """Inverse of ``vertical_slit_map`` with values in the closed upper half-plane."""
    w = np.asarray(w, dtype=complex)
    d = w - base
    root = np.sqrt(d * d - 4 * t)
    root = np.where(root.imag < 0, -root, root)
    # on the real axis outside the slit image keep the side of w
    real_out = (np.abs(root.imag) < 1e-300) & (root.real * d.real < 0)
    return base + np.where(real_out, -root, root)


@dataclass(frozen=True)
class TwoSlitSolution:
    prevertices: tuple
    hcap: float
    balance_defect: float


def _abs_fprime(w, pre, skip):
    a1, c1, b1, a2, c2, b2 = pre
    val = abs(w - c1) * abs(w - c2)
    for k, p in enumerate((a1, b1, a2, b2)):
        if k not in skip:
            val /= math.sqrt(abs(w - p))
    return val


def _seg(pre, lo, hi, skip, wvar, extra=None):
    def f(w):
        v = _abs_fprime(w, pre, skip)
        return v * extra(w) if extra else v
    with warnings.catch_warnings():
        # the requested tolerance sits at the round-off floor on purpose
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, lo, hi, weight="alg", wvar=wvar, **QUAD_OPTS)
    return val


def _two_slit_integrals(pre):
    a1, c1, b1, a2, c2, b2 = pre
    # skip indices refer to (a1, b1, a2, b2) whose square-root factor is in the weight
    up1 = _seg(pre, a1, c1, {0}, (-0.5, 0.0))
    down1 = _seg(pre, c1, b1, {1}, (0.0, -0.5))
    gap = _seg(pre, b1, a2, {1, 2}, (-0.5, -0.5))
    up2 = _seg(pre, a2, c2, {2}, (-0.5, 0.0))
    down2 = _seg(pre, c2, b2, {3}, (0.0, -0.5))
    return up1, down1, gap, up2, down2


def solve_two_slits(x1: float, h1: float, x2: float, h2: float) -> TwoSlitSolution:
    """Schwarz-Christoffel prevertices for two vertical slits x1 < x2.

    f'(w) = (w - c1)(w - c2) / sqrt(prod (w - p)) over a1 < c1 < b1 < a2 < c2 < b2,
    normalized so f(w) - w stays bounded (c1 + c2 = sum(p) / 2) and fixed by
    c1 + c2 = 0.  Unknowns are parametrized by log-gaps to keep the order.
    """
    if not x1 < x2 or h1 <= 0 or h2 <= 0:
        raise DomainError("need x1 < x2 and positive heights")
    mid = 0.5 * (x1 + x2)
    # isolated-slit prevertices, narrowed so close slits keep their order
    r1, r2 = min(h1, 0.4 * (x2 - x1)), min(h2, 0.4 * (x2 - x1))
    guess = np.array([x1 - r1, x1, x1 + r1, x2 - r2, x2, x2 + r2]) - mid

    def unpack(v):
        a1 = v[0]
        steps = np.exp(v[1:])
        return tuple(np.concatenate([[a1], a1 + np.cumsum(steps)]))

    def pack(pre):
        return np.concatenate([[pre[0]], np.log(np.diff(pre))])

    def residual(v):
        pre = unpack(v)
        up1, down1, gap, up2, _ = _two_slit_integrals(pre)
        s1 = pre[0] + pre[2] + pre[3] + pre[5]
        return [up1 / h1 - 1, down1 / h1 - 1, gap / (x2 - x1) - 1, up2 / h2 - 1,
                (pre[1] + pre[4]) - 0.5 * s1, (pre[1] + pre[4])]

    sol = optimize.root(residual, pack(guess), method="hybr", options={"xtol": 1e-15})
    pre = unpack(sol.x)
    res = np.max(np.abs(residual(sol.x)))
    if res > 1e-10:
        raise ConvergenceError(f"two-slit prevertex solve failed (residual {res:.2e})")
    up1, down1, gap, up2, down2 = _two_slit_integrals(pre)
    a1, c1, b1, a2, c2, b2 = pre
    total = 0.0
    for a, c, b, ka, kb in ((a1, c1, b1, 0, 1), (a2, c2, b2, 2, 3)):
        total += _seg(pre, a, c, {ka}, (-0.5, 0.0), lambda w, c=c: c - w)
        total += _seg(pre, c, b, {kb}, (0.0, -0.5), lambda w, c=c: w - c)
    return TwoSlitSolution(tuple(p + mid for p in pre), total / math.pi, abs(down2 / h2 - 1))


def hcap_two_slits(x1: float, h1: float, x2: float, h2: float) -> float:
    return solve_two_slits(x1, h1, x2, h2).hcap


@dataclass(frozen=True)
class CapacityReport:
    eps: tuple
    measured: tuple
    predicted: tuple
    defects: tuple
    richardson_ratio: float
    derivative_defects: tuple

    @property
    def limit_ratio(self) -> float:
        """measured / (c eps) at the smallest eps."""
        return self.measured[-1]


def check_capacity_corollary(x: float = 0.0, y: float = 1.0, eps=(1e-3, 5e-4), c: float = 1.0) -> CapacityReport:
    """Capacity of the hull at y seen after mapping out the hull at x.

    For each eps: the hull at x has Loewner time eps, the hull at y time
    c eps.  The time of the image hull is hcap(union)/2 - eps, and
    measured = that / (c eps) is compared with 1 - 4 eps/(x - y)^2.  The
    defect ratio between consecutive eps is about 4 for an O(eps^2) defect.
    ``derivative_defects`` compare h'(y)^2 of the explicit slit map with the
    same linear prediction (an O(eps^2) quantity as well).
    """
    if x == y:
        raise DomainError("hulls must start at distinct points")
    eps = tuple(float(e) for e in eps)
    lo, hi = sorted((x, y))
    measured, predicted, defects, dder = [], [], [], []
    for e in eps:
        hx, hy = 2 * math.sqrt(e), 2 * math.sqrt(c * e)
        h_lo, h_hi = (hx, hy) if x < y else (hy, hx)
        union = hcap_two_slits(lo, h_lo, hi, h_hi)
        tilde = union / 2 - e
        pred = 1 - 4 * e / (x - y) ** 2
        measured.append(tilde / (c * e))
        predicted.append(pred)
        defects.append(tilde / (c * e) - pred)
        dder.append(vertical_slit_map_derivative(y, x, e) ** 2 - pred)
    ratio = defects[0] / defects[1] if len(defects) > 1 and defects[1] != 0 else math.nan
    return CapacityReport(eps, tuple(measured), tuple(predicted), tuple(defects), ratio, tuple(dder))
