"""Metric families from generator data.

Builds profiles phi(r, s) by the three construction routes:

* a non-Douglas scalar-curvature family driven by one constant k, whose
  transport invariant mixes arctan and a square-root denominator;
* the Douglas scalar-curvature family driven by a radial generator g(r)
  through the integral transforms T(r), T_bar(r);
* the constant-curvature route that integrates the logarithmic gradient
  system of phi from compatible spray data (P, Q) after checking the
  integrability condition on U.

Also hosts the characteristic-curve solver used to verify that transport
invariants are constant along characteristics, and the generator/eta/h
registries that make family specs expressible in a JSON config.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .errors import (CompatibilityFailure, ConfigError, DomainError,
                     PositivityFailure, QuadratureFailure, SingularDenominator,
                     SingularIntegrand)
from .metrics import (DomainSpec, MetricProfile, RsPoint, default_grid,
                      positivity_check)
from .odes import integrate_fixed
from .quadrature import adaptive_simpson
from .spray import spray_data

_BINOM = [[math.comb(n, t) for t in range(n + 1)] for n in range(5)]


# -- generator registries ------------------------------------------------


@dataclass(frozen=True)
class Generator:
    """A named scalar function usable on floats and jets alike."""

    name: str
    params: dict
    fn: Callable

    def __call__(self, x):
        return self.fn(x)


def _need(params, allowed, name):
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigError(f"{name}: unknown parameters {sorted(unknown)}")


def make_g(name, **params):
    """Radial generators g(r) for the Douglas family."""
    if name == "zero":
        _need(params, (), "g zero")
        return Generator("zero", {}, lambda r: 0.0 * r)
    if name == "const":
        _need(params, ("c",), "g const")
        c = float(params.get("c", 0.5))
        return Generator("const", {"c": c}, lambda r: c + 0.0 * r)
    if name == "half":
        _need(params, (), "g half")
        return Generator("half", {}, lambda r: 0.5 + 0.0 * r)
    if name == "inv_r_neg":
        _need(params, (), "g inv_r_neg")
        return Generator("inv_r_neg", {}, lambda r: -1.0 / r)
    if name == "minus2":
        _need(params, (), "g minus2")
        return Generator("minus2", {}, lambda r: -2.0 + 0.0 * r)
    raise ConfigError(f"unknown g generator {name!r}")


def make_eta(name, **params):
    """Generators eta(u) applied to the transport invariant u.

    For the Douglas family the invariant is negative on the working domain
    (u = -(r^2-s^2)/D with D > 0); the *_flip and *_gen shapes therefore
    take t = -u internally.
    """
    c = float(params.get("c", 1.0))
    eps = float(params.get("eps", 1.0))
    gamma = float(params.get("gamma", 1.0))
    m = int(params.get("m", 1))
    if name == "identity":
        _need(params, ("c",), "eta identity")
        return Generator("identity", {"c": c}, lambda u: c * u)
    if name == "sqrt":
        _need(params, ("c",), "eta sqrt")
        return Generator("sqrt", {"c": c}, lambda u: c * jets.sqrt(u))
    if name == "sqrt_flip":
        _need(params, ("c",), "eta sqrt_flip")
        return Generator("sqrt_flip", {"c": c}, lambda u: c * jets.sqrt(-u))
    if name == "power_flip":
        _need(params, ("m", "eps", "gamma"), "eta power_flip")

        def fn(u, m=m, eps=eps, gamma=gamma):
            t = -u
            return jets.sqrt(t) * (gamma * jets.powi(t, m) + eps)
        return Generator("power_flip", {"m": m, "eps": eps, "gamma": gamma}, fn)
    if name == "erf_gen":
        _need(params, ("m", "eps", "gamma"), "eta erf_gen")

        def fn(u, m=m, eps=eps, gamma=gamma):
            t = -u
            return jets.sqrt(t) * (gamma * jets.powi(t, m) + eps) * jets.exp(t)
        return Generator("erf_gen", {"m": m, "eps": eps, "gamma": gamma}, fn)
    if name == "artanh_gen":
        _need(params, ("eps", "gamma"), "eta artanh_gen")

        def fn(u, eps=eps, gamma=gamma):
            t = -u
            return jets.sqrt(t) * (gamma * jets.artanh_ext(t) + eps)
        return Generator("artanh_gen", {"eps": eps, "gamma": gamma}, fn)
    if name == "ex001":
        _need(params, ("eps",), "eta ex001")

        def fn(u, eps=eps):
            t = -u
            base = jets.sqrt(t) / (jets.powi(1.0 - t, 1) * jets.sqrt(1.0 - t))
            return jets.powi(base, 3) + eps * base
        return Generator("ex001", {"eps": eps}, fn)
    if name == "poly":
        coeffs = tuple(float(a) for a in params.get("coeffs", (0.0, 1.0)))
        _need(params, ("coeffs",), "eta poly")

        def fn(u, coeffs=coeffs):
            acc = 0.0 * u
            for a in reversed(coeffs):
                acc = acc * u + a
            return acc
        return Generator("poly", {"coeffs": coeffs}, fn)
    if name == "zero":
        _need(params, (), "eta zero")
        return Generator("zero", {}, lambda u: 0.0 * u)
    raise ConfigError(f"unknown eta generator {name!r}")


def make_h(name, **params):
    """Gauge terms h(r); the additive s*h(r) freedom of the constructions."""
    if name == "zero":
        _need(params, (), "h zero")
        return Generator("zero", {}, lambda r: 0.0 * r)
    if name == "one":
        _need(params, (), "h one")
        return Generator("one", {}, lambda r: 1.0 + 0.0 * r)
    if name == "const":
        _need(params, ("v",), "h const")
        v = float(params.get("v", 1.0))
        return Generator("const", {"v": v}, lambda r: v + 0.0 * r)
    if name == "exs1_special":
        _need(params, ("c",), "h exs1_special")
        c = float(params.get("c", 1.0))
        return Generator("exs1_special", {"c": c},
                         lambda r: 2.0 * c / ((1.0 + 2.0 * r) * (1.0 + 4.0 * r)))
    if name == "berwald":
        _need(params, ("sign",), "h berwald")
        sg = float(params.get("sign", 1.0))
        return Generator("berwald", {"sign": sg},
                         lambda r: sg * 2.0 / jets.powi(1.0 - r * r, 2))
    if name == "ex10_h":
        # gauge of the spray scalar P of the constant-curvature examples
        _need(params, ("c",), "h ex10_h")
        c = float(params.get("c", 1.0))
        return Generator("ex10_h", {"c": c},
                         lambda r: -2.0 * c * (1.0 + 3.0 * r) / (r * (1.0 + 2.0 * r) * (1.0 + 4.0 * r)))
    raise ConfigError(f"unknown h generator {name!r}")


# -- T / T_bar transforms ------------------------------------------------


class TransformPair:
    """The integral transforms T(r), T_bar(r) of a generator g.

    Closed-form pairs carry generic callables; quadrature pairs integrate

        T(r)     = exp(-Int_{r0}^r 4 u g/(1 - 2u^2 g) du) / (1 - 2r^2 g)^2
        T_bar(r) = 4 Int_{r0}^r (g' + 2ug^2)/(1 - 2u^2 g) T(u) du

    with checkpoint caching, and recover derivatives from the closed
    logarithmic-derivative recurrences, so T(jet) is analytic-quality.
    """

    def __init__(self, g, provenance, T=None, T_bar=None, r0=None, tol=1e-10):
        self.g = g
        self.provenance = provenance
        self._T = T
        self._Tbar = T_bar
        self.r0 = r0
        self.tol = tol
        self._a_cache = [(r0, 0.0)] if r0 is not None else None
        self._tb_cache = [(r0, 0.0)] if r0 is not None else None

    # closed-form path -------------------------------------------------
    def T(self, r):
        if self.provenance == "closed_form":
            return self._T(r)
        if isinstance(r, jets.Jet2):
            return self._quad_T_jet(r)
        return self._quad_T_value(float(r))

    def T_bar(self, r):
        if self.provenance == "closed_form":
            return self._Tbar(r)
        if isinstance(r, jets.Jet2):
            return self._quad_Tbar_jet(r)
        return self._quad_Tbar_value(float(r))

    # quadrature path ----------------------------------------------------
    def _denom(self, r):
        d = 1.0 - 2.0 * r * r * self.g(r)
        if abs(d) < 1e-10:
            raise SingularIntegrand(f"1 - 2 r^2 g vanished at r = {r}")
        return d

    def _a_integrand(self, u):
        return 4.0 * u * self.g(u) / self._denom(u)

    def _incremental(self, cache, integrand, r):
        r_near, v_near = min(cache, key=lambda t: abs(t[0] - r))
        if r_near == r:
            return v_near
        v = v_near + adaptive_simpson(integrand, r_near, r, self.tol)
        cache.append((r, v))
        return v

    def _quad_T_value(self, r):
        a = self._incremental(self._a_cache, self._a_integrand, r)
        return math.exp(-a) / self._denom(r) ** 2

    def _tb_integrand(self, u):
        ju = jets.lift_var("r", u)
        gj = self.g(ju)
        gp = gj.partial(1, 0) if isinstance(gj, jets.Jet2) else 0.0
        gv = gj.value if isinstance(gj, jets.Jet2) else gj
        return 4.0 * (gp + 2.0 * u * gv * gv) / self._denom(u) * self._quad_T_value(u)

    def _quad_Tbar_value(self, r):
        return self._incremental(self._tb_cache, self._tb_integrand, r)

    def _log_deriv_jet(self, jr):
        # (ln T)' = (4 r g + 4 r^2 g')/(1 - 2 r^2 g) as a jet in r
        gj = self.g(jr)
        gp = gj.d_r() if isinstance(gj, jets.Jet2) else jets.constant(0.0, jr.base)
        if not isinstance(gj, jets.Jet2):
            gj = jets.constant(gj, jr.base)
        return (4.0 * jr * gj + 4.0 * jr * jr * gp) / (1.0 - 2.0 * jr * jr * gj)

    @staticmethod
    def _from_value_and_derivative(value, deriv_jet, base):
        """Jet of F with F(r0)=value and jet of F' given (pure r-dependence)."""
        out = np.zeros(jets.NC)
        out[0] = value
        for i in range(1, 5):
            out[jets.IDX[(i, 0)]] = deriv_jet.partial(i - 1, 0)
        return jets.Jet2(base, out)

    def _quad_T_jet(self, jr):
        v = self._quad_T_value(jr.value)
        ell = self._log_deriv_jet(jr)
        # T' = T * ell: propagate as exp of an integrated log-jet
        ln_t = self._from_value_and_derivative(math.log(abs(v)), ell, jr.base)
        tj = jets.exp(ln_t)
        return tj if v > 0 else -tj

    def _quad_Tbar_jet(self, jr):
        v = self._quad_Tbar_value(jr.value)
        gj = self.g(jr)
        gp = gj.d_r() if isinstance(gj, jets.Jet2) else jets.constant(0.0, jr.base)
        if not isinstance(gj, jets.Jet2):
            gj = jets.constant(gj, jr.base)
        m = 4.0 * (gp + 2.0 * jr * gj * gj) / (1.0 - 2.0 * jr * jr * gj)
        deriv = m * self._quad_T_jet(jr)
        return self._from_value_and_derivative(v, deriv, jr.base)


_CLOSED_PAIRS = {
    "zero": (lambda r: 1.0 + 0.0 * r, lambda r: 0.0 * r),
    "inv_r_neg": (lambda r: 1.0 + 0.0 * r, lambda r: -4.0 / r),
    "half": (lambda r: 1.0 / (1.0 - r * r), lambda r: 1.0 / (1.0 - r * r)),
    "minus2": (lambda r: 1.0 / (1.0 + 4.0 * r * r), lambda r: -4.0 / (1.0 + 4.0 * r * r)),
}


def closed_pair_for(g):
    """Closed-form transform pair matching the worked examples, when known."""
    if g.name in _CLOSED_PAIRS:
        T, Tb = _CLOSED_PAIRS[g.name]
        return TransformPair(g, "closed_form", T=T, T_bar=Tb)
    if g.name == "const":
        c = g.params["c"]
        return TransformPair(
            g, "closed_form",
            T=lambda r: 1.0 / (1.0 - 2.0 * c * r * r),
            T_bar=lambda r: 2.0 * c / (1.0 - 2.0 * c * r * r),
        )
    return None


def build_T(g, r_range, r0, tol=1e-10):
    """Quadrature transform pair on r_range, normalized at r0.

    T(r0) = 1/(1 - 2 r0^2 g(r0))^2 and T_bar(r0) = 0; this differs from a
    closed-form pair by the admissible change (T, T_bar) -> (cT, cT_bar + d),
    under which the transport invariant stays an invariant.
    """
    lo, hi = r_range
    pair = TransformPair(g, "quadrature", r0=r0, tol=tol)
    # fail fast if the structural denominator vanishes on the range
    for u in np.linspace(lo, hi, 64):
        pair._denom(float(u))
    return pair


# -- family specs --------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """Recipe for a family build; see family_from_config for the JSON shape."""

    kind: str
    g: Generator | None = None
    eta: Generator | None = None
    h: Generator | None = None
    k: float = 0.0
    r_range: tuple = (0.5, 2.0)
    r0: float | None = None
    s0_fraction: float = 0.5
    s_base: float | None = None
    quadrature_tol: float = 1e-10
    transform: str = "closed"  # "closed" when available, else "quadrature"
    p_source: dict | None = None  # theorem3 spray data
    pair: TransformPair | None = field(default=None, compare=False)

    def base_r0(self):
        return self.r0 if self.r0 is not None else 0.5 * (self.r_range[0] + self.r_range[1])

    def resolved_pair(self):
        if self.pair is not None:
            return self.pair
        if self.kind not in ("theorem2", "theorem3"):
            raise ConfigError(f"{self.kind} spec has no transform pair")
        if self.transform == "closed":
            pair = closed_pair_for(self.g)
            if pair is not None:
                return pair
        return build_T(self.g, self.r_range, self.base_r0(), self.quadrature_tol)


def _domain_for(spec):
    lo, hi = spec.r_range
    excluded = (("zero_s", lambda r, s: abs(s) < 1e-6 * r),)
    return DomainSpec(lo, hi, excluded)


# -- transport invariants ------------------------------------------------


def _douglas_invariant_expr(pair):
    def inv(r, s):
        w = r * r - s * s
        den = w * pair.T_bar(r) - pair.T(r)
        return w / den
    return inv


def _phibar_expr(k):
    """Invariant of the non-Douglas family (constant k != 0 allowed to be 0)."""
    def inv(r, s):
        w = r * r - s * s
        W = jets.sqrt(w)
        den = k * k * s * s - 2.0 * k * s * W + r * r
        num = jets.fpow(r, 2.0 * (k * k + 1.0)) * w * jets.exp(
            2.0 * k * jets.atan(k - (1.0 + k * k) * s / W))
        return num / den
    return inv


def transport_invariant(spec, at):
    """Value of the family's transport invariant at (r, s).

    Douglas builds: (r^2-s^2)/((r^2-s^2) T_bar(r) - T(r)); the non-Douglas
    family returns the arctan-exponential invariant of its constant k.
    """
    r, s = at
    if r * r - s * s <= 0.0:
        raise DomainError(f"transport_invariant: need |s| < r, got (r={r}, s={s})")
    if spec.kind == "theorem1":
        expr = _phibar_expr(spec.k)
        W = math.sqrt(r * r - s * s)
        if abs(spec.k * spec.k * s * s - 2.0 * spec.k * s * W + r * r) < 1e-14:
            raise SingularDenominator("transport_invariant: denominator ~ 0")
        return expr(float(r), float(s))
    pair = spec.resolved_pair()
    den = (r * r - s * s) * pair.T_bar(float(r)) - pair.T(float(r))
    if abs(den) < 1e-14:
        raise SingularDenominator("transport_invariant: (r^2-s^2) T_bar - T ~ 0")
    return (r * r - s * s) / den


# -- transport-equation profile builders ---------------------------------


def _build_transport_profile(name, params, spec, inv_expr):
    """Profile phi = s (h(r) - Int_{s0(r)}^{s} eta(inv(r,u)) / (u^2 sqrt(r^2-u^2)) du).

    The s0(r) = s0_fraction * r base point is sign-matched to s, so the
    integration path never crosses u = 0.  Jets are produced by
    differentiating under the integral sign: the r-derivative columns of
    the integrand are integrated in one adaptive pass (with the boundary
    terms of the moving base point), while all s-derivatives come from the
    integrand evaluated at the endpoint.
    """
    eta, h = spec.eta, spec.h
    s0f = spec.s0_fraction
    tol = spec.quadrature_tol
    if not (0.0 < s0f < 1.0):
        raise ConfigError(f"s0_fraction must be in (0, 1), got {s0f}")

    def g_point(r, u):
        return eta(inv_expr(r, u)) / (u * u * jets.sqrt(r * r - u * u))

    def g_rcol(r, u):
        jr = jets.lift_var("r", r, other=u)
        gj = g_point(jr, float(u))
        return np.array([gj.partial(i, 0) for i in range(5)])

    vec_cache = {}
    val_cache = {}

    def _check_path(r, s):
        if s == 0.0 or abs(s) >= r:
            raise QuadratureFailure(
                f"{name}: integration path would cross u = 0 or |u| = r at (r={r}, s={s})")

    def _i_vec(r, s):
        _check_path(r, s)
        sign = 1.0 if s > 0 else -1.0
        b = s0f * r * sign
        pts = vec_cache.setdefault((r, sign), [(b, np.zeros(5))])
        r_near = min(pts, key=lambda t: abs(t[0] - s))
        if r_near[0] == s:
            return r_near[1], b, sign
        v = r_near[1] + adaptive_simpson(lambda u: g_rcol(r, u), r_near[0], s, tol)
        pts.append((s, v))
        return v, b, sign

    def _i_val(r, s):
        _check_path(r, s)
        sign = 1.0 if s > 0 else -1.0
        b = s0f * r * sign
        pts = val_cache.setdefault((r, sign), [(b, 0.0)])
        r_near = min(pts, key=lambda t: abs(t[0] - s))
        if r_near[0] == s:
            return r_near[1]
        v = r_near[1] + adaptive_simpson(lambda u: g_point(float(r), float(u)), r_near[0], s, tol)
        pts.append((s, v))
        return v

    def jet_eval(r, s):
        vec, b, sign = _i_vec(r, s)
        jr, js = jets.lift_rs(r, s)
        g_end = g_point(jr, js)
        jrb = jets.lift_var("r", r, other=b)
        jub = jets.lift_var("s", b, other=r)
        g_bnd = g_point(jrb, jub)
        bp = s0f * sign
        coeffs = np.zeros(jets.NC)
        coeffs[0] = vec[0]
        for i in range(1, 5):
            total = vec[i]
            for t in range(1, i + 1):
                total -= _BINOM[i][t] * bp ** t * g_bnd.partial(i - t, t - 1)
            coeffs[jets.IDX[(i, 0)]] = total
        for (i, j) in jets.PAIRS:
            if j >= 1:
                coeffs[jets.IDX[(i, j)]] = g_end.partial(i, j - 1)
        i_jet = jets.Jet2((r, s), coeffs)
        return js * (h(jr) - i_jet)

    def value_eval(r, s):
        return s * (h(float(r)) - _i_val(r, s))

    return MetricProfile(name, params, _domain_for(spec), jet_eval, value_eval,
                         provenance="quadrature")


def build_theorem2_profile(spec):
    """Douglas-family build from (g, eta, h)."""
    if spec.kind != "theorem2":
        raise ConfigError(f"build_theorem2_profile: spec kind is {spec.kind}")
    pair = spec.resolved_pair()
    inv = _douglas_invariant_expr(pair)
    name = f"theorem2[g={spec.g.name},eta={spec.eta.name},h={spec.h.name}]"
    params = {"g": spec.g.params, "eta": spec.eta.params, "h": spec.h.params,
              "s0_fraction": spec.s0_fraction}
    return _build_transport_profile(name, params, spec, inv)


def build_theorem1_profile(spec):
    """Non-Douglas scalar-curvature build from (k, eta, h); k = 0 collapses
    to the Douglas g = 0 case."""
    if spec.kind != "theorem1":
        raise ConfigError(f"build_theorem1_profile: spec kind is {spec.kind}")
    inv = _phibar_expr(spec.k)
    name = f"theorem1[k={spec.k},eta={spec.eta.name},h={spec.h.name}]"
    params = {"k": spec.k, "eta": spec.eta.params, "h": spec.h.params,
              "s0_fraction": spec.s0_fraction}
    return _build_transport_profile(name, params, spec, inv)


# -- eta positivity route -------------------------------------------------


@dataclass(frozen=True)
class EtaReport:
    """Pointwise minima of the two positivity conditions on eta."""

    n_points: int
    min_slope: float   # -(sqrt(r^2-s^2)/s) d/ds eta(inv) > 0
    min_ratio: float   # eta(inv)/sqrt(r^2-s^2) > 0
    violations: tuple = ()

    @property
    def verdict(self):
        return self.min_slope > 0.0 and self.min_ratio > 0.0


def eta_monotonicity_check(spec, grid_points):
    """Equivalent positivity route for transport-family builds."""
    if spec.kind == "theorem1":
        inv = _phibar_expr(spec.k)
    else:
        inv = _douglas_invariant_expr(spec.resolved_pair())
    eta = spec.eta
    mins = [math.inf, math.inf]
    violations = []
    count = 0
    for p in grid_points:
        jr, js = jets.lift_rs(p.r, p.s)
        ej = eta(inv(jr, js))
        w = math.sqrt(p.r * p.r - p.s * p.s)
        slope = -(w / p.s) * ej.partial(0, 1)
        ratio = ej.value / w
        count += 1
        if slope < mins[0]:
            mins[0] = slope
        if ratio < mins[1]:
            mins[1] = ratio
        if slope <= 0.0:
            violations.append(("slope", p.r, p.s, slope))
        if ratio <= 0.0:
            violations.append(("ratio", p.r, p.s, ratio))
    return EtaReport(count, mins[0], mins[1], tuple(violations))


# -- constant-curvature route (spray-data compatibility) -------------------


def douglas_q_jet(g, jr, js):
    """Jet of the Douglas spray scalar Q = g + (g' + 2rg^2)/(r - 2r^3 g) s^2."""
    gj = g(jr)
    if not isinstance(gj, jets.Jet2):
        gj = jets.constant(gj, jr.base)
    gp = gj.d_r()
    den = jr - 2.0 * jets.powi(jr, 3) * gj
    if abs(den.value) < 1e-12:
        raise SingularDenominator(f"r - 2 r^3 g ~ 0 at r = {jr.value}")
    return gj + (gp + 2.0 * jr * gj * gj) / den * js * js


def _u_jet(p_jet, q_jet, jr, js):
    w = jr * jr - js * js
    p_s = p_jet.d_s()
    q_s = q_jet.d_s()
    num = w * (js * p_s - 2.0 * p_jet) - js * (1.0 + js * p_jet)
    den = w * (2.0 * q_jet - js * q_s) - js * p_jet - 1.0
    if abs(den.value) < 1e-12:
        raise SingularDenominator(f"U denominator ~ 0 at {jr.value, js.value}",
                                  margin=den.value)
    return num / den


def _pq_jets(p_profile, g, r, s):
    jr, js = jets.lift_rs(r, s)
    return p_profile.phi_jet(r, s), douglas_q_jet(g, jr, js), jr, js


def compute_U(p_profile, g, at):
    """U from spray data: P given as a profile (theorem-2 shape), Q from g."""
    p, q, jr, js = _pq_jets(p_profile, g, at[0], at[1])
    return _u_jet(p, q, jr, js).value


def condU_residual(p_profile, g, at):
    """Residual of the integrability identity for U; zero certifies that the
    logarithmic gradient system for phi is solvable."""
    r, s = at
    p, q, jr, js = _pq_jets(p_profile, g, r, s)
    u = _u_jet(p, q, jr, js)
    w = r * r - s * s
    qv, qs = q.value, q.partial(0, 1)
    pv, ps = p.value, p.partial(0, 1)
    lhs = s * (s * u.partial(1, 0) + (1.0 - w * 2.0 * qv) * r * u.partial(0, 1))
    rhs = r * (1.0 + w * 2.0 * (s * qs - qv)) * u.value + 2.0 * r * w * (s * ps - pv)
    return lhs - rhs


def ex10_p_data(sign=1, c=1.0):
    """Closed-form spray data P for the constant-curvature examples built on
    g = -1/r: P = h(r) s +/- c sqrt(r(r+4(r^2-s^2)))/(r(1+4r)) with
    h = -2c(1+3r)/(r(1+2r)(1+4r)).  Matches the spray scalar of the
    constant-curvature metric with gauge h = 2c/((1+2r)(1+4r)) exactly.
    """
    if sign not in (1, -1):
        raise ConfigError("ex10_p_data: sign must be +1 or -1")
    h = make_h("ex10_h", c=c)

    def expr(r, s, sign=float(sign), c=c, h=h):
        base = c * jets.sqrt(r * (r + 4.0 * (r * r - s * s))) / (r * (1.0 + 4.0 * r))
        return h(r) * s + sign * base

    from .metrics import profile_from_expr
    return profile_from_expr(f"ex10_pdata[sign={sign:+d}]", {"sign": sign, "c": c},
                             DomainSpec(0.05, 4.0), expr)


def build_theorem3_profile(p_profile, g, s_base, r_range, r0=None,
                           quadrature_tol=1e-12, residual_tol=1e-4):
    """Constant-curvature profile from compatible spray data (P, Q).

    Integrates the closed logarithmic gradient of phi:

        (ln phi)_s = (U - s)/(r^2 - s^2)
        (ln phi)_r = (W - r(U - s)/(r^2 - s^2)) / s,   W = 2r (P + U Q)

    along the two-leg path (r0, s_base) -> (r, s_base) -> (r, s), normalized
    to phi(r0, s_base) = sqrt(r0^2 - s_base^2).  Only the value of ln phi
    needs quadrature; every jet coefficient comes from the closed gradient
    expressions, so the output supports full curvature classification.

    Refuses (CompatibilityFailure) when the integrability residual of U
    exceeds residual_tol on a probe grid; the returned profile has passed
    the positivity margins on its default grid (PositivityFailure otherwise).
    """
    lo, hi = r_range
    r0 = r0 if r0 is not None else 0.5 * (lo + hi)
    if not (abs(s_base) < lo):
        raise ConfigError(f"need |s_base| < r_min, got s_base={s_base}, r_min={lo}")

    probe = [RsPoint(r, sig * r) for r in np.linspace(lo * 1.01, hi * 0.99, 5)
             for sig in (-0.8, -0.3, 0.4, 0.9)]
    worst = max(abs(condU_residual(p_profile, g, pt)) for pt in probe)
    if worst > residual_tol:
        raise CompatibilityFailure(
            f"integrability residual {worst:.3e} exceeds {residual_tol:.1e}")

    def u_jet_at(r, s):
        p, q, jr, js = _pq_jets(p_profile, g, r, s)
        return _u_jet(p, q, jr, js), p, q, jr, js

    def b_jet(r, s):
        u, _, _, jr, js = u_jet_at(r, s)
        return (u - js) / (jr * jr - js * js)

    def a_jet(r, s):
        u, p, q, jr, js = u_jet_at(r, s)
        w_big = 2.0 * jr * (p + u * q)
        return (w_big - jr * (u - js) / (jr * jr - js * js)) / js

    l0 = 0.5 * math.log(r0 * r0 - s_base * s_base)
    rleg_cache = [(r0, 0.0)]
    sleg_cache = {}

    def _rleg(r):
        near = min(rleg_cache, key=lambda t: abs(t[0] - r))
        if near[0] == r:
            return near[1]
        v = near[1] + adaptive_simpson(lambda rho: a_jet(rho, s_base).value,
                                       near[0], r, quadrature_tol)
        rleg_cache.append((r, v))
        return v

    def _sleg(r, s):
        pts = sleg_cache.setdefault(r, [(s_base, 0.0)])
        near = min(pts, key=lambda t: abs(t[0] - s))
        if near[0] == s:
            return near[1]
        v = near[1] + adaptive_simpson(lambda u: b_jet(r, u).value, near[0], s, quadrature_tol)
        pts.append((s, v))
        return v

    def _l_value(r, s):
        return l0 + _rleg(r) + _sleg(r, s)

    def jet_eval(r, s):
        bj = b_jet(r, s)
        aj = a_jet(r, s)
        coeffs = np.zeros(jets.NC)
        coeffs[0] = _l_value(r, s)
        for (i, j) in jets.PAIRS:
            if j >= 1:
                coeffs[jets.IDX[(i, j)]] = bj.partial(i, j - 1)
            elif i >= 1:
                coeffs[jets.IDX[(i, 0)]] = aj.partial(i - 1, 0)
        return jets.exp(jets.Jet2((r, s), coeffs))

    def value_eval(r, s):
        return math.exp(_l_value(r, s))

    name = f"theorem3[P={p_profile.name},g={g.name}]"
    params = {"s_base": s_base, "r0": r0, "P": dict(p_profile.params), "g": g.params}
    prof = MetricProfile(name, params, DomainSpec(lo, hi), jet_eval, value_eval,
                         provenance="quadrature")
    pos = positivity_check(prof, default_grid(prof.domain, n_r=8, n_sigma=8).points())
    if not pos.verdict:
        raise PositivityFailure(
            f"{name}: margins not positive (m0={pos.min_m0:.3e}, "
            f"m1={pos.min_m1:.3e}, m2={pos.min_m2:.3e})")
    return prof


# -- characteristic curves -------------------------------------------------


@dataclass(frozen=True)
class FlowResult:
    points: tuple
    exited: bool
    branch_flagged: bool  # arctan argument jumped by more than pi/2

    def __iter__(self):
        return iter(self.points)


def _f_of_g_jets(g, r):
    jr = jets.lift_var("r", r)
    gj = g(jr)
    if not isinstance(gj, jets.Jet2):
        gj = jets.constant(gj, jr.base)
    gv, gp = gj.value, gj.partial(1, 0)
    den = r - 2.0 * r ** 3 * gv
    if abs(den) < 1e-12:
        raise SingularIntegrand(f"r - 2 r^3 g vanished at r = {r}")
    return gv, (2.0 * gp + 4.0 * r * gv * gv) / den


def characteristic_flow(spec, start, r_end, step):
    """Integrate the characteristic ODE dX/dr = v(r, X) of the family's
    transport equation; the transport invariant is constant along the
    returned curve."""
    r_start, x_start = start
    if not (0.0 < abs(x_start) < r_start):
        raise DomainError(f"characteristic start must satisfy 0 < |s| < r, got {start}")

    if spec.kind == "theorem1":
        k = spec.k

        def v(r, x):
            w = r * r - x * x
            return (r / x) * (1.0 - (w / r ** 4) * (w - (k * x - math.sqrt(w)) ** 2))

        def atan_arg(r, x):
            return k - (1.0 + k * k) * x / math.sqrt(r * r - x * x)
    else:
        def v(r, x):
            gv, fv = _f_of_g_jets(spec.g, r)
            return (r / x) * (1.0 - (r * r - x * x) * (2.0 * gv + fv * x * x))

        atan_arg = None

    def field(r, y):
        x = float(y[0])
        if x * x >= r * r or x == 0.0:
            raise DomainError("characteristic left 0 < |X| < r")
        return np.array([v(r, x)])

    def guard(r, y):
        x = float(y[0])
        return x * x >= r * r * (1.0 - 1e-12) or x * x < 1e-24

    ts, ys, exited = integrate_fixed(field, r_start, np.array([x_start]), r_end, step, guard)
    points = tuple(RsPoint(r, float(y[0])) for r, y in zip(ts, ys))
    flagged = False
    if atan_arg is not None and len(points) > 1:
        prev = atan_arg(points[0].r, points[0].s)
        for p in points[1:]:
            cur = atan_arg(p.r, p.s)
            if abs(cur - prev) > 0.5 * math.pi:
                flagged = True
                break
            prev = cur
    return FlowResult(points, exited, flagged)


def kappa_relation(k, r, x):
    """Conserved combination along the non-Douglas characteristics:
    ln sqrt((1+k^2) kap^2 + 2 kap + 1) + k arctan(((1+k^2) kap + 1)/k)
    - (1+k^2) ln r, with kap = k X/sqrt(r^2 - X^2) - 1."""
    kap = k * x / math.sqrt(r * r - x * x) - 1.0
    disc = (1.0 + k * k) * kap * kap + 2.0 * kap + 1.0
    return (0.5 * math.log(disc)
            + k * math.atan(((1.0 + k * k) * kap + 1.0) / k)
            - (1.0 + k * k) * math.log(r))


def qss_invariant(profile, at):
    """(r^2-s^2)^(3/2) (Q_s - s Q_ss): the non-Douglas family's constant k,
    identically zero for Douglas profiles (Q quadratic in s)."""
    from .spray import compute_Q
    q = compute_Q(profile, at)
    r, s = at
    return (r * r - s * s) ** 1.5 * (q.partial(0, 1) - s * q.partial(0, 2))


# -- config ----------------------------------------------------------------


def _generator_from(cfg, maker, what):
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ConfigError(f"{what}: expected an object with a 'name' key, got {cfg!r}")
    params = {k: v for k, v in cfg.items() if k != "name"}
    return maker(cfg["name"], **params)


def family_from_config(cfg):
    """Validate a JSON config dict into a FamilySpec (unknown keys rejected)."""
    if not isinstance(cfg, dict):
        raise ConfigError("family config must be a JSON object")
    allowed = {"kind", "g", "eta", "h", "k", "r_range", "base_points",
               "quadrature_tol", "transform", "P", "s_base"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kind = cfg.get("kind")
    if kind not in ("theorem1", "theorem2", "theorem3"):
        raise ConfigError(f"kind must be theorem1|theorem2|theorem3, got {kind!r}")
    base = cfg.get("base_points", {})
    if not isinstance(base, dict) or set(base) - {"r0", "s0_fraction"}:
        raise ConfigError(f"base_points: expected r0/s0_fraction, got {base!r}")
    tol = float(cfg.get("quadrature_tol", 1e-10))
    if tol < 1e-14:
        raise ConfigError("quadrature_tol below 1e-14")
    common = dict(
        r_range=tuple(float(v) for v in cfg.get("r_range", (0.5, 2.0))),
        r0=base.get("r0"),
        s0_fraction=float(base.get("s0_fraction", 0.5)),
        quadrature_tol=tol,
        transform=cfg.get("transform", "closed"),
    )
    if kind == "theorem1":
        if "g" in cfg:
            raise ConfigError("theorem1 takes k, not g")
        return FamilySpec(kind="theorem1", k=float(cfg.get("k", 1.0)),
                          eta=_generator_from(cfg.get("eta", {"name": "identity"}), make_eta, "eta"),
                          h=_generator_from(cfg.get("h", {"name": "zero"}), make_h, "h"),
                          **common)
    g = _generator_from(cfg.get("g", {"name": "zero"}), make_g, "g")
    if kind == "theorem2":
        return FamilySpec(kind="theorem2", g=g,
                          eta=_generator_from(cfg.get("eta", {"name": "sqrt_flip"}), make_eta, "eta"),
                          h=_generator_from(cfg.get("h", {"name": "zero"}), make_h, "h"),
                          **common)
    p_cfg = cfg.get("P", {"data": "ex10", "sign": 1})
    if not isinstance(p_cfg, dict):
        raise ConfigError("theorem3 P must be an object")
    return FamilySpec(kind="theorem3", g=g, p_source=p_cfg,
                      s_base=float(cfg.get("s_base", 0.5 * common["r_range"][0])),
                      **common)


def build_family(spec):
    """Dispatch a FamilySpec to its builder; returns the profile."""
    if spec.kind == "theorem1":
        return build_theorem1_profile(spec)
    if spec.kind == "theorem2":
        return build_theorem2_profile(spec)
    # theorem3
    p_cfg = dict(spec.p_source or {"data": "ex10", "sign": 1})
    if p_cfg.get("data") == "ex10":
        p_profile = ex10_p_data(int(p_cfg.get("sign", 1)), float(p_cfg.get("c", 1.0)))
    elif "entry" in p_cfg:
        from . import catalog
        p_profile = catalog.get(p_cfg["entry"], p_cfg.get("params", {})).profile
    else:
        raise ConfigError(f"theorem3 P source not understood: {p_cfg!r}")
    s_base = spec.s_base if spec.s_base is not None else 0.5 * spec.r_range[0]
    return build_theorem3_profile(p_profile, spec.g, s_base, spec.r_range,
                                  r0=spec.r0, quadrature_tol=min(spec.quadrature_tol, 1e-12))
