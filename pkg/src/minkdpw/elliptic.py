"""Jacobi elliptic functions by the arithmetic-geometric mean.

Parameter convention: ``m = k^2`` (as in scipy.special.ellipj).
"""
import numpy as np

from .errors import ModulusRange


def _check_m(m):
    m = float(m)
    if not 0.0 <= m <= 1.0:
        raise ModulusRange(f"parameter m = {m} outside [0, 1]")
    return m


def agm(a, b, tol=1e-16, maxiter=64):
    for _ in range(maxiter):
        if abs(a - b) <= tol * abs(a):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return 0.5 * (a + b)


def ellipk(m) -> float:
    """Complete elliptic integral ``K(m)``."""
    m = _check_m(m)
    if m == 1.0:
        return np.inf
    return np.pi / (2 * agm(1.0, np.sqrt(1.0 - m)))


def jacobi_ellip(u, m):
    """``(sn, cn, dn)`` by descending Landen transformations.

    The AGM sequence ``a_n, b_n, c_n`` is run until ``c_N`` vanishes, then
    the amplitude is recovered from ``phi_N = 2^N a_N u`` by the backward
    recursion ``2 phi_{n-1} = phi_n + arcsin(c_n sin(phi_n) / a_n)``.
    """
    m = _check_m(m)
    u = np.asarray(u, dtype=float)
    if m == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    if m == 1.0:
        s = 1.0 / np.cosh(u)
        return np.tanh(u), s, s.copy()
    a, b, c = [1.0], [np.sqrt(1.0 - m)], [np.sqrt(m)]
    while abs(c[-1]) > 1e-17 and len(a) < 64:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(np.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * u
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[k] * np.sin(phi) / a[k]))
    sn, cn = np.sin(phi), np.cos(phi)
    return sn, cn, np.sqrt(1.0 - m * sn * sn)


def jacobi_sn(u, m):
    """Jacobi ``sn(u | m)``."""
    return jacobi_ellip(u, m)[0]
