"""Closed contours for multivalued integrands, with branch tracking.

A plan is a chain of analytic segments (straight lines and circular arcs).
Each segment is cut into panels and integrated with Gauss-Legendre rules;
refinement doubles the per-panel order, so consecutive levels give an
embedded error estimate.  Because every segment is analytic and stays away
from the singularities, convergence is geometric in the order.

Branches of ``(z - c)^p`` are fixed by the principal value at the first node
and continued node to node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import ContourGeometryError, ConvergenceError, DomainError

BASE_ORDER = 8
MAX_DEPTH = 5


@dataclass(frozen=True)
class BranchedFactor:
    """The factor ``(z - base_point) ** exponent``."""

    base_point: complex
    exponent: float

    def __post_init__(self):
        bp = complex(self.base_point)
        if not (math.isfinite(bp.real) and math.isfinite(bp.imag)):
            raise DomainError("branch point must be finite")
        if not math.isfinite(self.exponent):
            raise DomainError("exponent must be finite")
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "exponent", float(self.exponent))


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    abs_error_estimate: float
    nodes_used: int

    def __post_init__(self):
        if self.abs_error_estimate < 0:
            raise ValueError("error estimate must be non-negative")


@lru_cache(maxsize=None)
def _gauss(q: int):
    return np.polynomial.legendre.leggauss(q)


@dataclass(frozen=True)
class Line:
    start: complex
    end: complex
    # distance from each end to the nearest singularity; used to grade panels
    start_gap: float = math.inf
    end_gap: float = math.inf

    def panels(self):
        length = abs(self.end - self.start)
        cuts = _graded_cuts(length, self.start_gap, self.end_gap)
        d = (self.end - self.start) / length
        return [("line", self.start + d * s0, self.start + d * s1) for s0, s1 in zip(cuts, cuts[1:])]


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    sweep: float

    def panels(self, per_turn: int = 4):
        k = max(1, int(math.ceil(abs(self.sweep) / (2 * math.pi) * per_turn - 1e-9)))
        th = self.theta0 + self.sweep * np.arange(k + 1) / k
        return [("arc", self.center, self.radius, a, b) for a, b in zip(th, th[1:])]

    def point(self, theta):
        return self.center + self.radius * np.exp(1j * theta)


def _graded_cuts(length, gap0, gap1):
    """Panel breakpoints on [0, length] refined geometrically toward ends that
    sit ``gap`` away from a singularity."""
    cuts = {0.0, length}
    for gap, from_end in ((gap0, False), (gap1, True)):
        if not math.isfinite(gap):
            continue
        s = gap
        while s < 0.5 * length:
            cuts.add(length - s if from_end else s)
            s *= 2.0
    out = sorted(cuts)
    return [c for i, c in enumerate(out) if i == 0 or c - out[i - 1] > 1e-12 * length]


def _panel_nodes(panel, q):
    x, w = _gauss(q)
    if panel[0] == "line":
        _, a, b = panel
        z = 0.5 * (a + b) + 0.5 * (b - a) * x
        dz = np.full(q, 0.5 * (b - a)) * w
    else:
        _, c, r, t0, t1 = panel
        th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * x
        z = c + r * np.exp(1j * th)
        dz = 1j * r * np.exp(1j * th) * 0.5 * (t1 - t0) * w
    return z, dz


@dataclass(frozen=True)
class ContourPlan:
    """A closed discretized contour.

    ``kind`` is ``"pochhammer"`` (anchors = (left, right)) or ``"circle"``
    (anchors = (center,)).  ``loops`` lists, for a Pochhammer plan, the
    (anchor index, orientation) of its four keyhole loops in traversal order.
    """

    kind: str
    anchors: tuple
    radii: tuple
    segments: tuple
    loops: tuple = ()
    loop_segments: tuple = ()
    refinement_depth: int = 0
    base_order: int = BASE_ORDER

    @property
    def order(self) -> int:
        return self.base_order * 2 ** self.refinement_depth

    def refined(self, depth: int | None = None) -> "ContourPlan":
        depth = self.refinement_depth + 1 if depth is None else depth
        return ContourPlan(self.kind, self.anchors, self.radii, self.segments, self.loops,
                           self.loop_segments, depth, self.base_order)

    @cached_property
    def _discretization(self):
        zs, ws, seg_id = [], [], []
        for k, seg in enumerate(self.segments):
            for panel in seg.panels():
                z, dz = _panel_nodes(panel, self.order)
                zs.append(z)
                ws.append(dz)
                seg_id.append(np.full(len(z), k))
        return np.concatenate(zs), np.concatenate(ws), np.concatenate(seg_id)

    @property
    def nodes(self) -> np.ndarray:
        return self._discretization[0]

    @property
    def weights(self) -> np.ndarray:
        """Complex weights dz so that sum(f(nodes) * weights) integrates f."""
        return self._discretization[1]

    @property
    def start(self) -> complex:
        return complex(_segment_start(self.segments[0]))

    @property
    def is_closed(self) -> bool:
        end = _segment_end(self.segments[-1])
        return abs(end - self.start) <= 1e-12 * max(1.0, abs(self.start))

    def phases(self, factors) -> np.ndarray:
        """Continuous argument of each factor's base difference at every node.

        Row k holds arg(z - c_k), principal at the first node.
        """
        z = self.nodes
        out = np.empty((len(factors), len(z)))
        for k, f in enumerate(factors):
            d = z - f.base_point
            _check_branch_steps(z, d)
            out[k] = np.unwrap(np.angle(d))
        return out

    def winding(self, point: complex) -> float:
        """Discrete winding number of the closed path around ``point``."""
        path = self._dense_path()
        ang = np.unwrap(np.angle(path - point))
        return float((ang[-1] - ang[0]) / (2 * math.pi))

    def loop_windings(self, point: complex) -> list:
        """Winding of each keyhole loop (Pochhammer plans) around ``point``."""
        out = []
        for lo, hi in self.loop_segments:
            path = self._dense_path(self.segments[lo:hi])
            ang = np.unwrap(np.angle(path - point))
            out.append(round(float((ang[-1] - ang[0]) / (2 * math.pi)), 6))
        return out

    def _dense_path(self, segments=None, per_segment=64):
        pts = []
        for seg in segments or self.segments:
            s = np.linspace(0.0, 1.0, per_segment)
            if isinstance(seg, Line):
                pts.append(seg.start + (seg.end - seg.start) * s)
            else:
                pts.append(seg.point(seg.theta0 + seg.sweep * s))
        return np.concatenate(pts)

    def min_distance(self, point: complex) -> float:
        return float(np.min(np.abs(self._dense_path(per_segment=256) - point)))

    def to_json(self, factors=()) -> str:
        """Node list with per-factor accumulated phases, for debugging."""
        ph = self.phases(list(factors)) if factors else np.zeros((0, len(self.nodes)))
        doc = {
            "kind": self.kind,
            "anchors": [[a.real, a.imag] for a in map(complex, self.anchors)],
            "radii": list(self.radii),
            "refinement_depth": self.refinement_depth,
            "order": self.order,
            "nodes": [[z.real, z.imag] for z in self.nodes],
            "factors": [{"base_point": [f.base_point.real, f.base_point.imag], "exponent": f.exponent,
                         "phase": ph[k].tolist()} for k, f in enumerate(factors)],
        }
        return json.dumps(doc)


def _segment_start(seg):
    return seg.start if isinstance(seg, Line) else seg.point(seg.theta0)


def _segment_end(seg):
    return seg.end if isinstance(seg, Line) else seg.point(seg.theta0 + seg.sweep)


def _check_branch_steps(z, d):
    # consecutive nodes must subtend an angle well below pi from the branch point
    step = np.abs(np.diff(z))
    near = np.minimum(np.abs(d[:-1]), np.abs(d[1:]))
    if np.any(near <= 0) or np.any(step >= near):
        raise ContourGeometryError("nodes too coarse for continuous branch tracking")


def _keyhole(base, anchor, radius, orientation, gaps):
    """Line from ``base`` to the circle around ``anchor``, one full turn, and back."""
    theta = math.atan2((base - anchor).imag, (base - anchor).real)
    entry = anchor + radius * np.exp(1j * theta)
    gap_base, gap_entry = gaps
    return [
        Line(base, entry, gap_base, gap_entry),
        Arc(anchor, radius, theta, orientation * 2 * math.pi),
        Line(entry, base, gap_entry, gap_base),
    ]


def build_pochhammer(left: complex, right: complex, clearance: float, avoid=(), lift=None,
                     radii=None, base_order: int = BASE_ORDER) -> ContourPlan:
    """Double loop encircling ``left`` then ``right`` positively, then each negatively.

    The base point sits at the midpoint lifted by ``lift`` (default half the
    anchor separation) into the upper half-plane.  ``radii`` overrides the
    per-anchor loop radius (default ``clearance``).  Every point in ``avoid``
    must stay at least ``clearance`` away from the path.
    """
    left, right = complex(left), complex(right)
    span = abs(right - left)
    if span == 0:
        raise DomainError("Pochhammer anchors must differ")
    if not 0 < clearance < span / 4:
        raise ContourGeometryError(f"clearance {clearance} must lie in (0, |left-right|/4)")
    ra, rb = radii if radii is not None else (clearance, clearance)
    if not (0 < ra < span / 2 and 0 < rb < span / 2):
        raise ContourGeometryError("loop radii must be below half the anchor separation")
    lift = 0.5 * span if lift is None else float(lift)
    base = 0.5 * (left + right) + 1j * lift
    segs, loops, bounds = [], [], []
    for idx, orient in ((0, 1), (1, 1), (0, -1), (1, -1)):
        anchor, r = (left, ra) if idx == 0 else (right, rb)
        lo = len(segs)
        segs += _keyhole(base, anchor, r, orient, (abs(base - anchor), r))
        loops.append((idx, orient))
        bounds.append((lo, len(segs)))
    plan = ContourPlan("pochhammer", (left, right), (ra, rb), tuple(segs), tuple(loops), tuple(bounds),
                       0, base_order)
    for p in avoid:
        dist = plan.min_distance(complex(p))
        if dist < clearance:
            raise ContourGeometryError(f"contour passes within {dist:.3g} of singularity {p}")
    return plan


def build_circle(center: complex, radius: float, avoid=(), base_order: int = BASE_ORDER,
                 start_angle: float = math.pi / 2) -> ContourPlan:
    """Positively oriented circle, starting at its top point."""
    center = complex(center)
    if radius <= 0:
        raise ContourGeometryError("circle radius must be positive")
    for p in avoid:
        if abs(abs(complex(p) - center) - radius) < 1e-12 * max(1.0, radius):
            raise ContourGeometryError(f"singularity {p} lies on the circle")
    arc = Arc(center, float(radius), start_angle, 2 * math.pi)
    return ContourPlan("circle", (center,), (float(radius),), (arc,), (), (), 0, base_order)


def _log_factor(z, factors, phases):
    out = np.zeros(z.shape, dtype=complex)
    for k, f in enumerate(factors):
        out += f.exponent * (np.log(np.abs(z - f.base_point)) + 1j * phases[k])
    return out


def _one_level(plan, factors, smooth_part):
    z, w = plan.nodes, plan.weights
    for f in factors:
        if np.min(np.abs(z - f.base_point)) == 0:
            raise ContourGeometryError(f"singularity {f.base_point} lies on the contour")
    vals = np.exp(_log_factor(z, factors, plan.phases(factors)))
    if smooth_part is not None:
        vals = vals * smooth_part(z)
    return complex(np.sum(vals * w)), len(z)


def integrate(plan: ContourPlan, factors, smooth_part=None, tol: float = 1e-8, rtol: float = 0.0,
              max_depth: int = MAX_DEPTH) -> IntegralResult:
    """Integrate ``smooth_part(z) * prod (z - c_k)^p_k`` along ``plan``.

    Refines until two consecutive levels agree to ``max(tol, rtol*|value|)``.
    """
    factors = list(factors)
    for f in factors:
        if plan.min_distance(f.base_point) <= 0:
            raise ContourGeometryError(f"singularity {f.base_point} lies on the contour")
    return _refine(lambda ps: _one_level(ps[0], factors, smooth_part), [plan], tol, rtol, max_depth)


def _refine(evaluate, plans, tol, rtol, max_depth):
    prev, used = evaluate(plans)
    total = used
    depth = plans[0].refinement_depth
    err = math.inf
    while depth < max_depth:
        depth += 1
        refined = [p.refined(depth) for p in plans]
        cur, used = evaluate(refined)
        total += used
        err = abs(cur - prev)
        if err <= max(tol, rtol * abs(cur)):
            return IntegralResult(cur, err, total)
        prev = cur
    best = IntegralResult(prev, err if math.isfinite(err) else abs(prev), total)
    raise ConvergenceError(f"tolerance {tol:g} not reached (estimate {best.abs_error_estimate:.3e})", best)


def _pair_phase(zr, zs):
    """Continuous arg(zr[i] - zs[j]) on the product of two closed contours.

    Seeded with the exchange-symmetric value Arg((zr0 - zs0)^2) / 2 and
    continued first along contour r, then along contour s.
    """
    d0 = zr[0] - zs[0]
    seed = 0.5 * np.angle(d0 * d0)
    col = np.unwrap(np.angle(zr - zs[0]))
    col += seed - col[0]
    grid = np.unwrap(np.angle(zr[:, None] - zs[None, :]), axis=1)
    return grid - grid[:, :1] + col[:, None]


def nested_level(plans, single_factors, couplings, extra=None, absolute=False):
    """Tensor-product quadrature of one refinement level.

    ``single_factors[r]`` are the factors in variable r, ``couplings`` holds
    triples (r, s, exponent) for ``(z_r - z_s) ** exponent`` and ``extra`` an
    optional callable of the broadcast node arrays returning a complex factor.
    With ``absolute`` the sum of moduli is returned, a scale for cancellation.
    """
    m = len(plans)
    nodes = [p.nodes for p in plans]
    weights = [p.weights for p in plans]

    def shaped(arr, axis):
        shape = [1] * m
        shape[axis] = len(arr)
        return arr.reshape(shape)

    logs = []
    for r in range(m):
        ph = plans[r].phases(single_factors[r]) if single_factors[r] else None
        lf = _log_factor(nodes[r], single_factors[r], ph) if ph is not None else np.zeros(len(nodes[r]), complex)
        logs.append(shaped(lf + np.log(weights[r]), r))
    pair_terms = []
    for r, s, p in couplings:
        zr, zs = nodes[r], nodes[s]
        dist = np.abs(zr[:, None] - zs[None, :])
        near_r = np.minimum(dist[:-1, :], dist[1:, :])
        near_s = np.minimum(dist[:, :-1], dist[:, 1:])
        if (np.any(np.abs(np.diff(zr))[:, None] >= near_r)
                or np.any(np.abs(np.diff(zs))[None, :] >= near_s)):
            raise ContourGeometryError("contours too close for continuous branch tracking")
        term = p * (np.log(np.abs(zr[:, None] - zs[None, :])) + 1j * _pair_phase(zr, zs))
        shape = [1] * m
        shape[r], shape[s] = len(zr), len(zs)
        pair_terms.append(term.reshape(shape))
    total = sum(logs) + sum(pair_terms) if pair_terms else sum(logs)
    vals = np.exp(total)
    if extra is not None:
        grids = [shaped(nodes[r], r) for r in range(m)]
        vals = vals * extra(*grids)
    total = np.sum(np.abs(vals)) if absolute else np.sum(vals)
    return complex(total), int(np.prod([len(z) for z in nodes]))


def integrate_nested(plans, single_factors, couplings=(), extra=None, tol: float = 1e-8,
                     rtol: float = 0.0, max_depth: int = MAX_DEPTH) -> IntegralResult:
    """Iterated integral over several non-intersecting contours, refined jointly."""
    plans = list(plans)
    return _refine(lambda ps: nested_level(ps, single_factors, couplings, extra), plans, tol, rtol, max_depth)


def reduce_to_slit(left: float, right: float, exponents) -> complex:
    """Phase relating a Pochhammer integral of (z-left)^p (right-z)^q to the
    real integral over [left, right]: (1 - e^{2 pi i p})(1 - e^{2 pi i q})."""
    p, q = exponents
    if p <= -1 or q <= -1:
        raise DomainError("slit reduction requires p > -1 and q > -1; use the full Pochhammer plan")
    return (1 - np.exp(2j * np.pi * p)) * (1 - np.exp(2j * np.pi * q))
