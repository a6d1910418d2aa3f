"""Truncated bivariate Taylor arithmetic in (r, s) to total order 4.

A ``Jet2`` carries the raw partial derivatives d^(i+j)f/dr^i ds^j, i+j <= 4,
of a scalar function at a base point.  Arithmetic propagates them exactly
(truncated product/quotient/composition rules), so every formula evaluated
on lifted variables yields analytic partials with no differencing error.

The elementwise kernels (Leibniz product, univariate Taylor composition)
live in a compiled extension when available; a pure-Python fallback with the
same API is selected at import time otherwise.  Set FINSLERLAB_JET_BACKEND
to "python" or "cython" to force a choice.

The module-level functions ``sqrt``, ``exp``, ``ln``, ... accept either a
``Jet2`` or a plain float, so a single closed-form expression serves both
the jet evaluator and a cheap value-only path.
"""

import math
import os

import numpy as np

from . import _jettables as _t
from .errors import BasePointMismatch, DivisionByZeroJet, DomainError

_requested = os.environ.get("FINSLERLAB_JET_BACKEND", "").strip().lower()
if _requested == "python":
    from . import _jetcore_py as _core
else:
    try:
        from . import _jetcore as _core
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "FINSLERLAB_JET_BACKEND=cython but the compiled kernel is "
                "not built; run `pip install -e . --no-build-isolation`"
            )
        from . import _jetcore_py as _core

BACKEND = _core.BACKEND

NC = _t.NC
IDX = _t.IDX
PAIRS = _t.PAIRS

_DIV_TOL = 1e-14


def _join_base(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a != b:
        raise BasePointMismatch(f"jet base points differ: {a} vs {b}")
    return a


class Jet2:
    """Order-4 bivariate jet: base point plus 15 raw partial derivatives.

    Treat instances as immutable values; all operations return new jets.
    """

    __slots__ = ("base", "c")

    def __init__(self, base, c):
        self.base = base
        self.c = c

    @property
    def value(self):
        return self.c[0]

    def partial(self, i, j):
        """Raw partial d^(i+j)/dr^i ds^j at the base point."""
        return self.c[IDX[(i, j)]]

    def d_r(self):
        """Jet of df/dr. The order-4 row is unknown and set to zero."""
        out = np.zeros(NC)
        for k, src in enumerate(_t.SHIFT_R):
            if src >= 0:
                out[k] = self.c[src]
        return Jet2(self.base, out)

    def d_s(self):
        """Jet of df/ds. The order-4 row is unknown and set to zero."""
        out = np.zeros(NC)
        for k, src in enumerate(_t.SHIFT_S):
            if src >= 0:
                out[k] = self.c[src]
        return Jet2(self.base, out)

    def is_finite(self):
        return bool(np.isfinite(self.c).all())

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(_join_base(self.base, other.base), self.c + other.c)
        out = self.c.copy()
        out[0] += other
        return Jet2(self.base, out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return Jet2(_join_base(self.base, other.base), self.c - other.c)
        out = self.c.copy()
        out[0] -= other
        return Jet2(self.base, out)

    def __rsub__(self, other):
        out = -self.c
        out[0] += other
        return Jet2(self.base, out)

    def __neg__(self):
        return Jet2(self.base, -self.c)

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(_join_base(self.base, other.base), _core.mul(self.c, other.c))
        return Jet2(self.base, self.c * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            return self * _recip(other)
        return Jet2(self.base, self.c / other)

    def __rtruediv__(self, other):
        return _recip(self) * other

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("jet exponent must be an integer; use sqrt() for halves")
        return powi(self, n)

    def __repr__(self):
        return f"Jet2(base={self.base}, value={self.value!r})"


def constant(value, base=None):
    out = np.zeros(NC)
    out[0] = value
    return Jet2(base, out)


def lift_var(which, value, other=0.0):
    """Variable lift: value plus a unit first partial in `which` ('r' or 's')."""
    if not math.isfinite(value):
        raise DomainError(f"lift_var: value must be finite, got {value}")
    out = np.zeros(NC)
    out[0] = value
    if which == "r":
        out[IDX[(1, 0)]] = 1.0
        base = (value, other)
    elif which == "s":
        out[IDX[(0, 1)]] = 1.0
        base = (other, value)
    else:
        raise ValueError(f"unknown variable {which!r}")
    return Jet2(base, out)


def lift_rs(r, s):
    """Both variable lifts at the common base point (r, s)."""
    return lift_var("r", r, other=s), lift_var("s", s, other=r)


def from_partials(base, partials):
    """Jet with explicitly given raw partials {(i, j): value} (rest zero)."""
    out = np.zeros(NC)
    for key, val in partials.items():
        out[IDX[key]] = val
    return Jet2(base, out)


def _recip(a):
    x = a.value
    if abs(x) <= _DIV_TOL:
        raise DivisionByZeroJet(f"division by jet with value {x}")
    x2 = x * x
    derivs = np.array([1.0 / x, -1.0 / x2, 2.0 / (x2 * x), -6.0 / (x2 * x2), 24.0 / (x2 * x2 * x)])
    return Jet2(a.base, _core.compose(derivs, a.c))


def powi(x, n):
    """Integer power for jets or floats (negative n via reciprocal)."""
    if not isinstance(x, Jet2):
        return float(x) ** n
    if n < 0:
        return _recip(powi(x, -n))
    result = constant(1.0, x.base)
    acc = x
    while n:
        if n & 1:
            result = result * acc
        n >>= 1
        if n:
            acc = acc * acc
    return result


def fpow(x, p):
    """Real power x**p for x > 0 (jets via exp(p ln x); integers via powi)."""
    if isinstance(p, int) or float(p).is_integer():
        return powi(x, int(p))
    return exp(p * ln(x))


def arith(op, a, b):
    """Spec-shaped dispatcher: op in {add, sub, mul, div, pow_int}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow_int":
        return powi(a, b)
    raise ValueError(f"unknown arith op {op!r}")


# -- univariate derivative tables for composition ----------------------

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _d_sqrt(x):
    if x <= 0.0:
        raise DomainError(f"sqrt: argument must be > 0, got {x}")
    v = math.sqrt(x)
    return np.array([v, 0.5 / v, -0.25 / (v * x), 0.375 / (v * x * x), -0.9375 / (v * x ** 3)])


def _d_exp(x):
    v = math.exp(x)
    return np.array([v, v, v, v, v])


def _d_ln(x):
    if x <= 0.0:
        raise DomainError(f"ln: argument must be > 0, got {x}")
    return np.array([math.log(x), 1.0 / x, -1.0 / x ** 2, 2.0 / x ** 3, -6.0 / x ** 4])


def _d_atan(x):
    t = 1.0 + x * x
    return np.array([
        math.atan(x),
        1.0 / t,
        -2.0 * x / t ** 2,
        (6.0 * x * x - 2.0) / t ** 3,
        (24.0 * x - 24.0 * x ** 3) / t ** 4,
    ])


def _artanh_derivs(x):
    m = 1.0 - x * x
    return (1.0 / m, 2.0 * x / m ** 2, (2.0 + 6.0 * x * x) / m ** 3,
            (24.0 * x + 24.0 * x ** 3) / m ** 4)


def _d_artanh(x):
    if abs(x) >= 1.0:
        raise DomainError(f"artanh: |argument| must be < 1, got {x}")
    return np.array([math.atanh(x), *_artanh_derivs(x)])


def _artanh_ext_value(x):
    if x == 1.0 or x == -1.0:
        raise DomainError(f"artanh_ext: |argument| must differ from 1, got {x}")
    return 0.5 * math.log(abs((1.0 + x) / (1.0 - x)))


def _d_artanh_ext(x):
    return np.array([_artanh_ext_value(x), *_artanh_derivs(x)])


def _d_erf(x):
    e = _TWO_OVER_SQRT_PI * math.exp(-x * x)
    return np.array([
        math.erf(x), e, -2.0 * x * e, (4.0 * x * x - 2.0) * e, (12.0 * x - 8.0 * x ** 3) * e,
    ])


def _d_sin(x):
    s, c = math.sin(x), math.cos(x)
    return np.array([s, c, -s, -c, s])


def _d_cos(x):
    s, c = math.sin(x), math.cos(x)
    return np.array([c, -s, -c, s, c])


def _compose(table, a):
    return Jet2(a.base, _core.compose(table(a.value), a.c))


def sqrt(x):
    if isinstance(x, Jet2):
        return _compose(_d_sqrt, x)
    if x <= 0.0:
        raise DomainError(f"sqrt: argument must be > 0, got {x}")
    return math.sqrt(x)


def exp(x):
    if isinstance(x, Jet2):
        return _compose(_d_exp, x)
    return math.exp(x)


def ln(x):
    if isinstance(x, Jet2):
        return _compose(_d_ln, x)
    if x <= 0.0:
        raise DomainError(f"ln: argument must be > 0, got {x}")
    return math.log(x)


def atan(x):
    if isinstance(x, Jet2):
        return _compose(_d_atan, x)
    return math.atan(x)


def artanh(x):
    if isinstance(x, Jet2):
        return _compose(_d_artanh, x)
    if abs(x) >= 1.0:
        raise DomainError(f"artanh: |argument| must be < 1, got {x}")
    return math.atanh(x)


def artanh_ext(x):
    """Real-branch inverse hyperbolic tangent, 0.5*ln|(1+x)/(1-x)|, |x| != 1.

    Same derivative 1/(1-x^2) as the principal branch; needed by metrics
    whose closed forms take artanh arguments on both sides of 1.
    """
    if isinstance(x, Jet2):
        return _compose(_d_artanh_ext, x)
    return _artanh_ext_value(x)


def erf(x):
    if isinstance(x, Jet2):
        return _compose(_d_erf, x)
    return math.erf(x)


def sin(x):
    if isinstance(x, Jet2):
        return _compose(_d_sin, x)
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet2):
        return _compose(_d_cos, x)
    return math.cos(x)


_TRANSCEND = {
    "sqrt": sqrt, "exp": exp, "ln": ln, "atan": atan,
    "artanh": artanh, "artanh_ext": artanh_ext, "erf": erf, "sin": sin, "cos": cos,
}


def transcend(fn, a):
    """Spec-shaped dispatcher for the univariate special functions."""
    try:
        f = _TRANSCEND[fn]
    except KeyError:
        raise ValueError(f"unknown transcend function {fn!r}") from None
    return f(a)
