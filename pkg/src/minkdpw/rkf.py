"""Embedded Runge-Kutta-Fehlberg 4(5) stepper for complex array ODEs."""
import numpy as np

_C = np.array([0, 1 / 4, 3 / 8, 12 / 13, 1, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8, 3680 / 513, -845 / 4104],
    [-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B5 = np.array([16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_B4 = np.array([25 / 216, 0, 1408 / 2565, 2197 / 4104, -1 / 5, 0])


def _stages(f, t, y, h):
    k = []
    for i in range(6):
        yi = y
        for a, kj in zip(_A[i], k):
            yi = yi + (h * a) * kj
        k.append(f(t + _C[i] * h, yi))
    return k


def rkf45(f, y0, t0, t1, rtol=1e-10, atol=1e-12, h0=None, max_step=np.inf,
          fixed_steps=None, max_iter=100000):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1`` and return ``y(t1)``.

    The fifth-order solution is propagated (local extrapolation) and the
    embedded fourth-order one drives step control.  With ``fixed_steps``
    the interval is split into that many equal steps and no error control
    is applied.
    """
    y = np.array(y0, dtype=complex)
    span = t1 - t0
    if span == 0:
        return y
    if fixed_steps is not None:
        h = span / fixed_steps
        t = t0
        for _ in range(int(fixed_steps)):
            k = _stages(f, t, y, h)
            y = y + h * sum(b * kk for b, kk in zip(_B5, k) if b)
            t += h
        return y
    direction = np.sign(span)
    h = abs(span) if h0 is None else abs(h0)
    h = min(h, max_step, abs(span))
    t = t0
    for _ in range(max_iter):
        rest = abs(t1 - t)
        if rest <= 1e-14 * abs(span):
            return y
        h = min(h, rest)
        k = _stages(f, t, y, direction * h)
        y5 = y + (direction * h) * sum(b * kk for b, kk in zip(_B5, k) if b)
        err = (direction * h) * sum((b5 - b4) * kk for b5, b4, kk in zip(_B5, _B4, k) if b5 != b4)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        e = float(np.max(np.abs(err) / scale))
        if e <= 1.0:
            t = t + direction * h
            y = y5
        fac = 0.9 * (1.0 / max(e, 1e-10)) ** 0.2
        h = min(h * min(5.0, max(0.2, fac)), max_step)
    raise RuntimeError("rkf45: too many steps")
