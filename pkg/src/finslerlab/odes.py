"""Classical fixed-step RK4 with an optional guard predicate.

Fixed step keeps trajectories bit-reproducible across platforms; callers
attach a Richardson (step-halving) error estimate where they need one.
"""

import numpy as np

from .errors import FinslerlabError


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fixed(f, t0, y0, t_end, step, guard=None):
    """March y' = f(t, y) from t0 to t_end with |step| > 0.

    guard(t, y), when given, is evaluated on each accepted state; a truthy
    return (or a FinslerlabError raised inside f) stops the march early.

    Returns (ts, ys, exited): the accepted states and an early-exit flag.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    h = step if t_end >= t0 else -step
    n = max(1, int(round(abs(t_end - t0) / step)))
    ts = [t0]
    ys = [np.asarray(y0, dtype=float)]
    exited = False
    t, y = t0, ys[0]
    for _ in range(n):
        if abs(t_end - t) < 0.5 * abs(h):
            break
        hh = h if abs(t_end - t) > abs(h) else t_end - t
        try:
            y_next = rk4_step(f, t, y, hh)
        except FinslerlabError:
            exited = True
            break
        t_next = t + hh
        if guard is not None and guard(t_next, y_next):
            exited = True
            break
        t, y = t_next, y_next
        ts.append(t)
        ys.append(y)
    return ts, ys, exited
