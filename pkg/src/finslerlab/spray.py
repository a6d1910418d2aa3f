"""Spray scalars Q, P of a profile, geodesic spray coefficients, and
fixed-step geodesic integration.

The geodesic field is xdot = y, ydot = -2G with
G^i = |y| P y^i + |y|^2 Q x^i.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import jets
from .errors import DomainError, NonpositivePhi, SingularDenominator, ZeroRadius
from .metrics import RsPoint, to_rs
from .odes import integrate_fixed

_R_EXIT = 1e-6  # trajectories flag DomainExit below this radius


@dataclass(frozen=True)
class SprayData:
    """Q, P (and phi) as jets at one point; partials to total order 2."""

    at: RsPoint
    phi: jets.Jet2
    Q: jets.Jet2
    P: jets.Jet2


def _q_from_phi(phi, jr, js):
    phi_s = phi.d_s()
    phi_ss = phi_s.d_s()
    denom = phi - js * phi_s + (jr * jr - js * js) * phi_ss
    if denom.value <= 0.0:
        raise SingularDenominator(
            f"Q denominator (m2 margin) not positive: {denom.value}", margin=denom.value)
    numer = jr * phi_ss - phi.d_r() + js * phi.d_r().d_s()
    return numer / denom / (2.0 * jr)


def compute_Q(profile, at):
    """Jet of Q = (r phi_ss - phi_r + s phi_rs) / (2r (phi - s phi_s + (r^2-s^2) phi_ss))."""
    r, s = at
    if r == 0.0:
        raise ZeroRadius("compute_Q: r = 0")
    phi = profile.phi_jet(r, s)
    jr, js = jets.lift_rs(r, s)
    return _q_from_phi(phi, jr, js)


def _p_from_phi(phi, q, jr, js):
    if phi.value <= 0.0:
        raise NonpositivePhi(f"phi = {phi.value} <= 0")
    phi_s = phi.d_s()
    first = (jr * phi_s + js * phi.d_r()) / (2.0 * jr * phi)
    return first - (q / phi) * (js * phi + (jr * jr - js * js) * phi_s)


def compute_P(profile, at):
    """Jet of P = (r phi_s + s phi_r)/(2 r phi) - (Q/phi)[s phi + (r^2-s^2) phi_s]."""
    r, s = at
    if r == 0.0:
        raise ZeroRadius("compute_P: r = 0")
    phi = profile.phi_jet(r, s)
    jr, js = jets.lift_rs(r, s)
    q = _q_from_phi(phi, jr, js)
    return _p_from_phi(phi, q, jr, js)


def spray_data(profile, at):
    """phi, Q, P jets at one point in a single profile evaluation."""
    r, s = at
    if r == 0.0:
        raise ZeroRadius("spray_data: r = 0")
    phi = profile.phi_jet(r, s)
    jr, js = jets.lift_rs(r, s)
    q = _q_from_phi(phi, jr, js)
    p = _p_from_phi(phi, q, jr, js)
    return SprayData(RsPoint(r, s), phi, q, p)


def spray_coefficients(profile, x, y):
    """G^i = |y| P y^i + |y|^2 Q x^i; positively 2-homogeneous in y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pt = to_rs(x, y)
    data = spray_data(profile, pt)
    ny = float(np.linalg.norm(y))
    return ny * data.P.value * y + ny * ny * data.Q.value * x


class GeodesicState(NamedTuple):
    t: float
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class GeodesicResult:
    states: tuple
    exited: bool
    error_estimate: float

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)


def integrate_geodesic(profile, x0, y0, t_end, step):
    """Classical RK4 march of the geodesic ODE with a step-halving error estimate.

    Terminates early (exited=True) when the state leaves the profile domain
    or r drops below 1e-6; the partial trajectory is returned.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    n = x0.size
    pt0 = to_rs(x0, y0)
    if not profile.domain.contains(pt0.r, pt0.s):
        raise DomainError(f"{profile.name}: initial state outside domain (r={pt0.r}, s={pt0.s})")

    def field(t, z):
        x, y = z[:n], z[n:]
        pt = to_rs(x, y)
        if pt.r < _R_EXIT or not profile.domain.contains(pt.r, pt.s):
            raise DomainError("left domain")
        data = spray_data(profile, pt)
        ny = float(np.linalg.norm(y))
        g = ny * data.P.value * y + ny * ny * data.Q.value * x
        return np.concatenate([y, -2.0 * g])

    z0 = np.concatenate([x0, y0])
    ts, zs, exited = integrate_fixed(field, 0.0, z0, t_end, step)
    ts2, zs2, exited2 = integrate_fixed(field, 0.0, z0, t_end, 0.5 * step)
    if not exited and not exited2:
        err = float(np.linalg.norm(zs[-1][:n] - zs2[-1][:n])) / 15.0
    else:
        err = math.nan
    states = tuple(GeodesicState(t, z[:n].copy(), z[n:].copy()) for t, z in zip(ts, zs))
    return GeodesicResult(states, exited or exited2, err)


def straightness_deviation(traj):
    """Max distance from x(t) to the line through x(0) along y(0), over path length."""
    states = list(traj)
    if len(states) < 3:
        raise DomainError("straightness_deviation: need at least 3 states")
    x0 = states[0].x
    d = states[0].y / np.linalg.norm(states[0].y)
    length = 0.0
    worst = 0.0
    prev = x0
    for st in states[1:]:
        length += float(np.linalg.norm(st.x - prev))
        prev = st.x
        v = st.x - x0
        off = v - np.dot(v, d) * d
        worst = max(worst, float(np.linalg.norm(off)))
    return worst / length if length > 0.0 else 0.0


def trajectory_csv(traj):
    """CSV export: t, x_1..x_n, y_1..y_n, deviation (per-point, length-normalized)."""
    states = list(traj)
    n = states[0].x.size
    x0 = states[0].x
    d = states[0].y / np.linalg.norm(states[0].y)
    length = 0.0
    prev = x0
    for st in states[1:]:
        length += float(np.linalg.norm(st.x - prev))
        prev = st.x
    header = ["t"] + [f"x_{i+1}" for i in range(n)] + [f"y_{i+1}" for i in range(n)] + ["deviation"]
    rows = [",".join(header)]
    for st in states:
        v = st.x - x0
        off = float(np.linalg.norm(v - np.dot(v, d) * d))
        dev = off / length if length > 0.0 else 0.0
        cells = [st.t, *st.x.tolist(), *st.y.tolist(), dev]
        rows.append(",".join(f"{c:.17g}" for c in cells))
    return "\n".join(rows) + "\n"
