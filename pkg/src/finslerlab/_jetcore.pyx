# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled jet kernel: Leibniz products and Taylor composition on flat
length-15 coefficient arrays (order-4 bivariate jets, raw partials)."""

import numpy as np

from . import _jettables as _t

BACKEND = "cython"

cdef int NC = _t.NC
cdef int NT = _t.NT

cdef int[::1] MA = np.asarray(_t.MUL_A, dtype=np.intc)
cdef int[::1] MB = np.asarray(_t.MUL_B, dtype=np.intc)
cdef int[::1] MO = np.asarray(_t.MUL_O, dtype=np.intc)
cdef double[::1] MW = np.asarray(_t.MUL_W, dtype=np.float64)
cdef double[::1] IFACT = np.asarray(_t.INV_FACT, dtype=np.float64)


cdef inline void _mul_into(double* a, double* b, double* out) noexcept nogil:
    cdef int t
    for t in range(15):
        out[t] = 0.0
    for t in range(NT):
        out[MO[t]] += MW[t] * a[MA[t]] * b[MB[t]]


def mul(double[::1] a, double[::1] b):
    out_np = np.empty(15)
    cdef double[::1] out = out_np
    _mul_into(&a[0], &b[0], &out[0])
    return out_np


def compose(double[::1] derivs, double[::1] a):
    cdef double dg[15]
    cdef double acc[15]
    cdef double nxt[15]
    cdef int i, k
    for i in range(15):
        dg[i] = a[i]
    dg[0] = 0.0
    for i in range(15):
        acc[i] = 0.0
    acc[0] = derivs[4] * IFACT[4]
    for k in range(3, -1, -1):
        _mul_into(&acc[0], &dg[0], &nxt[0])
        nxt[0] += derivs[k] * IFACT[k]
        for i in range(15):
            acc[i] = nxt[i]
    out_np = np.empty(15)
    cdef double[::1] out = out_np
    for i in range(15):
        out[i] = acc[i]
    return out_np
