"""Metric profiles phi(r, s), the (x, y) -> (r, s) reduction, verification
grids, and the Finsler positivity margins."""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import jets
from .errors import DomainError, NanEncountered, ZeroTangent

_CS_SLACK = 1e-14  # Cauchy-Schwarz overshoot tolerated before rejection


class _RsBase(NamedTuple):
    r: float
    s: float


class RsPoint(_RsBase):
    """Reduced coordinates r = |x|, s = <x,y>/|y| with |s| <= r.

    Values overshooting Cauchy-Schwarz by at most 1e-14 (floating-point dot
    products) are clamped to |s| = r; anything beyond is rejected.
    """

    __slots__ = ()

    def __new__(cls, r, s):
        if r < 0.0:
            raise DomainError(f"RsPoint: r must be >= 0, got {r}")
        if abs(s) > r:
            if abs(s) > r * (1.0 + _CS_SLACK) + _CS_SLACK:
                raise DomainError(f"RsPoint: |s| <= r violated: r={r}, s={s}")
            s = math.copysign(r, s)
        return super().__new__(cls, float(r), float(s))


@dataclass(frozen=True)
class DomainSpec:
    """Validity region: an r-interval plus named excluded loci.

    Each excluded locus is a (name, predicate) pair; predicate(r, s) True
    means the point is excluded.  Grid generators never emit excluded
    points, and profile evaluation refuses them.
    """

    r_min: float
    r_max: float
    excluded: tuple = ()

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise DomainError(f"DomainSpec: need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")

    def contains(self, r, s):
        if not (self.r_min <= r <= self.r_max and abs(s) <= r):
            return False
        return all(not pred(r, s) for _, pred in self.excluded)


@dataclass(eq=False)
class MetricProfile:
    """An evaluable profile phi(r, s) with its validity domain.

    jet_eval returns the full order-4 jet of phi; value_eval is the cheap
    float path used by finite-difference oracles and geodesic integration.
    Instances are immutable after construction and safe to evaluate
    concurrently (builders may keep internal per-line quadrature caches,
    which are not thread safe; see families module).
    """

    name: str
    params: dict
    domain: DomainSpec
    jet_eval: Callable[[float, float], jets.Jet2]
    value_eval: Callable[[float, float], float]
    provenance: str = "closed_form"
    grid_range: tuple | None = None  # default verification range, else domain

    def phi_jet(self, r, s):
        if not self.domain.contains(r, s):
            raise DomainError(f"{self.name}: (r={r}, s={s}) outside domain")
        j = self.jet_eval(r, s)
        if not j.is_finite():
            raise NanEncountered(f"{self.name}: non-finite jet at (r={r}, s={s})")
        return j

    def phi(self, r, s):
        if not self.domain.contains(r, s):
            raise DomainError(f"{self.name}: (r={r}, s={s}) outside domain")
        return self.value_eval(r, s)


def profile_from_expr(name, params, domain, expr, provenance="closed_form", grid_range=None):
    """Profile backed by one generic expression expr(r, s, **params).

    expr must be written against the numeric-context functions in
    finslerlab.jets (sqrt, exp, ...), so it serves floats and jets alike.
    """
    def jet_eval(r, s):
        jr, js = jets.lift_rs(r, s)
        return expr(jr, js, **params)

    def value_eval(r, s):
        return expr(float(r), float(s), **params)

    return MetricProfile(name, dict(params), domain, jet_eval, value_eval,
                         provenance=provenance, grid_range=grid_range)


def to_rs(x, y):
    """Reduce a tangent vector (x, y) to (r, s) = (|x|, <x,y>/|y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        raise ZeroTangent("to_rs: |y| = 0")
    r = float(np.linalg.norm(x))
    s = float(np.dot(x, y)) / ny
    return RsPoint(r, s)


def eval_F(profile, x, y):
    """Metric value F(x, y) = |y| * phi(r, s)."""
    y = np.asarray(y, dtype=float)
    pt = to_rs(x, y)
    return float(np.linalg.norm(y)) * profile.phi(pt.r, pt.s)


# -- verification grids -------------------------------------------------


def chebyshev_nodes(lo, hi, n):
    """n Chebyshev points of the first kind mapped to [lo, hi], ascending."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return [mid + half * math.cos(math.pi * (2 * k + 1) / (2 * n)) for k in range(n - 1, -1, -1)]


@dataclass(frozen=True)
class Grid:
    """Tensor verification grid: per-r lines of s values."""

    lines: tuple  # ((r, (s, ...)), ...)

    def points(self):
        return [RsPoint(r, s) for r, ss in self.lines for s in ss]

    def __len__(self):
        return sum(len(ss) for _, ss in self.lines)

    def describe(self):
        rs = [r for r, _ in self.lines]
        return {
            "n_lines": len(self.lines),
            "n_points": len(self),
            "r_min": min(rs) if rs else None,
            "r_max": max(rs) if rs else None,
        }


def default_grid(domain, n_r=24, n_sigma=24, r_range=None, sigma_max=0.95, sigma_min=0.05):
    """Default verification grid for a domain.

    r: Chebyshev-spaced in [lo + d, hi - d], d = 1e-2 (hi - lo);
    s = sigma * r with sigma Chebyshev-spaced in [-sigma_max, sigma_max],
    |sigma| < sigma_min excluded (the constructions divide by s and the
    proofs exclude |s| = r).  Excluded loci of the domain are filtered out.
    """
    lo, hi = r_range if r_range is not None else (domain.r_min, domain.r_max)
    delta = 1e-2 * (hi - lo)
    rs = chebyshev_nodes(lo + delta, hi - delta, n_r)
    sigmas = [sig for sig in chebyshev_nodes(-sigma_max, sigma_max, n_sigma)
              if abs(sig) >= sigma_min]
    lines = []
    for r in rs:
        ss = tuple(sig * r for sig in sigmas if domain.contains(r, sig * r))
        if ss:
            lines.append((r, ss))
    return Grid(tuple(lines))


def grid_from_points(points):
    """Group a flat point list into r-lines (exact r equality)."""
    by_r = {}
    for p in points:
        by_r.setdefault(p.r, []).append(p.s)
    lines = tuple((r, tuple(sorted(ss))) for r, ss in sorted(by_r.items()))
    return Grid(lines)


# -- positivity ----------------------------------------------------------


@dataclass(frozen=True)
class PositivityReport:
    """Minima of the three Finsler positivity margins over a grid.

    m0 = phi, m1 = phi - s phi_s, m2 = phi - s phi_s + (r^2 - s^2) phi_ss.
    The m2 condition certifies dimension n >= 2 and m1 additionally n >= 3;
    both are always checked and reported separately.
    """

    n_points: int
    min_m0: float
    min_m1: float
    min_m2: float
    argmin: dict = field(default_factory=dict)
    violations: tuple = ()

    @property
    def verdict(self):
        return self.min_m0 > 0.0 and self.min_m1 > 0.0 and self.min_m2 > 0.0


def positivity_margins(profile, r, s):
    j = profile.phi_jet(r, s)
    m0 = j.value
    m1 = m0 - s * j.partial(0, 1)
    m2 = m1 + (r * r - s * s) * j.partial(0, 2)
    return m0, m1, m2


def positivity_check(profile, grid_points):
    """Evaluate the three positivity margins on grid points."""
    mins = [math.inf] * 3
    argmin = [None] * 3
    violations = []
    count = 0
    for p in grid_points:
        m = positivity_margins(profile, p.r, p.s)
        count += 1
        for k in range(3):
            if m[k] < mins[k]:
                mins[k] = m[k]
                argmin[k] = (p.r, p.s)
            if m[k] <= 0.0:
                violations.append((f"m{k}", p.r, p.s, m[k]))
    return PositivityReport(
        n_points=count,
        min_m0=mins[0], min_m1=mins[1], min_m2=mins[2],
        argmin={"m0": argmin[0], "m1": argmin[1], "m2": argmin[2]},
        violations=tuple(violations),
    )
