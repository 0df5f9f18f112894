"""Coulomb-gas constants derived from kappa, and boundary configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ChargeConventionError, DomainError

INF = math.inf


@dataclass(frozen=True)
class KappaParams:
    """kappa with the boundary charge ``a``, background charge ``b``,
    Calogero-Moser coupling ``beta`` and central charge."""

    kappa: float
    a: float
    b: float
    beta: float
    central_charge: float

    @property
    def h_boundary(self) -> float:
        """Conformal weight (6 - kappa) / (2 kappa) of a boundary point."""
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    def dimension(self, sigma: float) -> float:
        """lambda(sigma) = sigma^2 / 2 - sigma b."""
        return 0.5 * sigma * sigma - sigma * self.b


def parse_kappa(value) -> float:
    """Accept a float, an int or a rational string such as ``"8/3"``."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def make_kappa_params(kappa) -> KappaParams:
    kappa = parse_kappa(kappa)
    if not (kappa > 0 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be positive and finite, got {kappa!r}")
    a = math.sqrt(2.0 / kappa)
    b = a * (kappa - 4.0) / 4.0
    c = (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)
    return KappaParams(kappa=kappa, a=a, b=b, beta=8.0 / kappa, central_charge=c)


def sigma_u_ground(params: KappaParams, n: int, m: int) -> float:
    return 2.0 * params.b - (n - 2 * m) * params.a


def sigma_u_excited(params: KappaParams, n: int, m: int) -> float:
    return sigma_u_ground(params, n, m) - 2.0 * (params.a + params.b)


def lambda_ground_closed(kappa: float, n: int, m: int) -> float:
    k = 2 * m - n
    return k * k / kappa - 2.0 * k / kappa + k / 2.0


def lambda_excited_closed(kappa: float, n: int, m: int) -> float:
    k = 2 * m - n
    return k * (k - 2) / kappa - (k - 2) / 2.0


def d_closed_form(kappa: float, n: int, m: int, kind: str = "ground") -> float:
    """Dilatation constant n(kappa-6)/(2 kappa) - lambda_(b)(u) as tabulated
    for the ground (J) and excited (K) screening families."""
    lam = lambda_ground_closed(kappa, n, m) if kind == "ground" else lambda_excited_closed(kappa, n, m)
    return n * (kappa - 6.0) / (2.0 * kappa) - lam


@dataclass(frozen=True)
class ChargeReport:
    sigma_u_ground: float
    lambda_ground: float
    sigma_u_excited: float
    lambda_excited: float
    lambda_ground_closed: float
    lambda_excited_closed: float

    @property
    def max_defect(self) -> float:
        return max(abs(self.lambda_ground - self.lambda_ground_closed),
                   abs(self.lambda_excited - self.lambda_excited_closed))


def verify_charge_conventions(params: KappaParams, n: int, m: int, atol: float = 1e-12) -> ChargeReport:
    """Compare lambda(sigma_u) for both charge assignments with the closed forms.

    Raises ChargeConventionError when they disagree by more than ``atol``.
    """
    if not (1 <= m and 2 * m <= n):
        raise DomainError(f"need 1 <= m <= n/2, got n={n}, m={m}")
    sg = sigma_u_ground(params, n, m)
    se = sigma_u_excited(params, n, m)
    report = ChargeReport(
        sigma_u_ground=sg,
        lambda_ground=params.dimension(sg),
        sigma_u_excited=se,
        lambda_excited=params.dimension(se),
        lambda_ground_closed=lambda_ground_closed(params.kappa, n, m),
        lambda_excited_closed=lambda_excited_closed(params.kappa, n, m),
    )
    if report.max_defect > atol:
        raise ChargeConventionError(
            f"lambda mismatch {report.max_defect:.3e} at kappa={params.kappa}, n={n}, m={m}")
    return report


@dataclass(frozen=True)
class BoundaryConfig:
    """Ordered boundary points x_1 < ... < x_n and the marked point u.

    ``marked`` is ``math.inf`` for u = infinity.  A finite u must lie outside
    [x_1, x_n] so that rays reach it without crossing arcs.
    """

    points: tuple
    marked: float = INF
    n: int = field(init=False)

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "marked", float(self.marked))
        object.__setattr__(self, "n", len(pts))
        if not pts:
            raise DomainError("at least one boundary point is required")
        if not all(np.isfinite(pts)):
            raise DomainError("boundary points must be finite")
        if any(q <= p for p, q in zip(pts, pts[1:])):
            raise DomainError(f"points must be strictly increasing: {pts}")
        u = self.marked
        if math.isnan(u) or u == -INF:
            raise DomainError(f"invalid marked point {u!r}")
        if self.has_finite_u and pts[0] <= u <= pts[-1]:
            raise DomainError(f"finite marked point {u} must lie outside [{pts[0]}, {pts[-1]}]")

    @property
    def has_finite_u(self) -> bool:
        return math.isfinite(self.marked)

    @property
    def x(self) -> np.ndarray:
        return np.array(self.points)

    def min_gap(self) -> float:
        """Smallest distance between two marked points (u included if finite)."""
        pts = list(self.points) + ([self.marked] if self.has_finite_u else [])
        pts.sort()
        if len(pts) < 2:
            return 1.0
        return float(min(q - p for p, q in zip(pts, pts[1:])))

    def with_points(self, points, marked=None) -> "BoundaryConfig":
        return BoundaryConfig(tuple(points), self.marked if marked is None else marked)

    def scaled(self, s: float, center: float = 0.0) -> "BoundaryConfig":
        u = self.marked if not self.has_finite_u else center + s * (self.marked - center)
        return BoundaryConfig(tuple(center + s * (p - center) for p in self.points), u)

    def shifted(self, t: float) -> "BoundaryConfig":
        u = self.marked + t if self.has_finite_u else self.marked
        return BoundaryConfig(tuple(p + t for p in self.points), u)
