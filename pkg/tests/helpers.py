"""Seeded generators shared by the test modules."""
import numpy as np

from minkdpw.loopcore import MatrixLoop, twisted_isigma1


def random_sl2c(rng, scale=1.0):
    X = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) * scale
    return X / np.sqrt(np.linalg.det(X))


def real_form_factor(z, k):
    """``(1 - |z|^2)^{-1/2} [[1, conj(z) lam^k], [z lam^-k, 1]]`` with ``k`` odd, ``|z| < 1``."""
    s = 1 / np.sqrt(1 - abs(z) ** 2)
    return MatrixLoop.from_entries({(0, 0, 0): s, (1, 1, 0): s, (0, 1, k): s * np.conj(z),
                                    (1, 0, -k): s * z})


def random_real_form(rng, n, sign=1):
    """Twisted ``F`` with ``tau(F) = sign F`` and band ``[-n, n]``.

    Products of the elementary factors above with odd powers summing to at
    most ``n``, times a constant diagonal unitary; ``sign = -1`` multiplies
    by the twisted image of ``i sigma1`` (one extra band step).
    """
    m = n - 1 if sign < 0 else n
    ks = []
    while sum(ks) < m:
        k = int(rng.choice([1, 3]))
        ks.append(k if sum(ks) + k <= m else 1)
    a = rng.uniform(0, 2 * np.pi)
    F = MatrixLoop.constant(np.diag([np.exp(1j * a), np.exp(-1j * a)]))
    for k in ks:
        z = 0.8 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        F = F @ real_form_factor(z, k)
    if sign < 0:
        F = twisted_isigma1() @ F
    return F


def random_plus(rng, n):
    """Twisted plus loop with band ``[0, n]``, ``det = 1`` and ``B(0)`` upper triangular, ``r > 0``."""
    r = np.exp(rng.uniform(-0.5, 0.5))
    beta = 0.0
    B = MatrixLoop.constant(np.array([[r, beta], [0, 1 / r]]))
    used = 0
    lower = True
    while used < n:
        k = int(rng.choice([1, 3])) if n - used >= 3 else 1
        c = 0.7 * (rng.normal() + 1j * rng.normal())
        key = (1, 0, k) if lower else (0, 1, k)
        B = B @ MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, key: c})
        used += k
        lower = not lower
    return B
