"""Pure-Python jet kernel, API-compatible with the compiled extension.

Used automatically when the Cython module is unavailable; also importable
directly for benchmarking the two backends against each other.
"""

import numpy as np

from ._jettables import INV_FACT, MUL_A, MUL_B, MUL_O, MUL_W, NC, NT

BACKEND = "python"


def mul(a, b):
    """Leibniz product of two raw-partial coefficient arrays."""
    al = a.tolist()
    bl = b.tolist()
    out = [0.0] * NC
    for t in range(NT):
        out[MUL_O[t]] += MUL_W[t] * al[MUL_A[t]] * bl[MUL_B[t]]
    return np.array(out)


def compose(derivs, a):
    """Univariate Taylor composition f(a) from raw derivatives of f at a[0].

    derivs holds f(a0), f'(a0), ..., f''''(a0). Horner evaluation in the
    deviation jet (a - a0), which is nilpotent at order 5.
    """
    dg = a.tolist()
    dg[0] = 0.0
    acc = [0.0] * NC
    acc[0] = derivs[4] * INV_FACT[4]
    for k in (3, 2, 1, 0):
        nxt = [0.0] * NC
        for t in range(NT):
            nxt[MUL_O[t]] += MUL_W[t] * acc[MUL_A[t]] * dg[MUL_B[t]]
        nxt[0] += derivs[k] * INV_FACT[k]
        acc = nxt
    return np.array(acc)
