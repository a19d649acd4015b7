"""Truncated Laurent loops of 2x2 complex matrices.

A loop is stored as a dense coefficient array ``coeffs`` of shape
``(q - p + 1, 2, 2)`` together with its lowest power ``p``, so that

    X(lam) = sum_j coeffs[j - p] * lam**j.

All operations return new objects; loops are never mutated in place.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandOverflow, NonUnimodular, NotInvertible, NotTwisted

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
ISIGMA3 = 1j * SIGMA3

_DIAG = np.array([[True, False], [False, True]])


@dataclass(frozen=True)
class LoopBandPolicy:
    """Working band ``[-max_band, max_band]`` and allowed relative tail mass."""

    max_band: int = 40
    tail_tol: float = 1e-13


class MatrixLoop:
    """A finite Laurent polynomial with 2x2 complex matrix coefficients."""

    __slots__ = ("coeffs", "low")

    def __init__(self, coeffs, low: int = 0):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1:] != (2, 2):
            raise ValueError(f"coefficients must have shape (n, 2, 2), got {c.shape}")
        if c.shape[0] == 0:
            c = np.zeros((1, 2, 2), dtype=complex)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "low", int(low))

    def __setattr__(self, name, value):
        raise AttributeError("MatrixLoop is immutable")

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, m) -> "MatrixLoop":
        return cls(np.asarray(m, dtype=complex)[None], 0)

    @classmethod
    def identity(cls) -> "MatrixLoop":
        return cls.constant(I2)

    @classmethod
    def from_terms(cls, terms: dict) -> "MatrixLoop":
        """Build from ``{power: 2x2 matrix}``."""
        if not terms:
            return cls(np.zeros((1, 2, 2)), 0)
        lo, hi = min(terms), max(terms)
        c = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        for j, m in terms.items():
            c[j - lo] += np.asarray(m, dtype=complex)
        return cls(c, lo)

    @classmethod
    def from_entries(cls, entries: dict) -> "MatrixLoop":
        """Build from ``{(row, col, power): value}``."""
        terms: dict = {}
        for (r, c, j), v in entries.items():
            m = terms.setdefault(j, np.zeros((2, 2), dtype=complex))
            m[r, c] += v
        return cls.from_terms(terms)

    # basic accessors ----------------------------------------------------

    @property
    def high(self) -> int:
        return self.low + self.coeffs.shape[0] - 1

    @property
    def band(self) -> tuple:
        return (self.low, self.high)

    def coeff(self, j: int) -> np.ndarray:
        if self.low <= j <= self.high:
            return self.coeffs[j - self.low].copy()
        return np.zeros((2, 2), dtype=complex)

    def powers(self) -> np.ndarray:
        return np.arange(self.low, self.high + 1)

    def norm(self) -> float:
        """Euclidean norm of the full coefficient vector."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        pw = lam[..., None] ** self.powers()
        return np.einsum("...j,jab->...ab", pw, self.coeffs)

    def __repr__(self):
        return f"MatrixLoop(band={self.band})"

    # arithmetic ----------------------------------------------------------

    def padded(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients on ``[lo, hi]`` (zero-filled, out-of-range dropped)."""
        out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        a, b = max(lo, self.low), min(hi, self.high)
        if a <= b:
            out[a - lo:b - lo + 1] = self.coeffs[a - self.low:b - self.low + 1]
        return out

    def _coerce(self, other) -> "MatrixLoop":
        if isinstance(other, MatrixLoop):
            return other
        m = np.asarray(other, dtype=complex)
        if m.shape == (2, 2):
            return MatrixLoop.constant(m)
        if m.shape == ():
            return MatrixLoop.constant(m * I2)
        raise TypeError(f"cannot combine MatrixLoop with {type(other)}")

    def __add__(self, other):
        o = self._coerce(other)
        lo, hi = min(self.low, o.low), max(self.high, o.high)
        return MatrixLoop(self.padded(lo, hi) + o.padded(lo, hi), lo)

    __radd__ = __add__

    def __neg__(self):
        return MatrixLoop(-self.coeffs, self.low)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, s) -> "MatrixLoop":
        return MatrixLoop(self.coeffs * s, self.low)

    def __mul__(self, other):
        if np.isscalar(other):
            return self.scale(other)
        return self @ other

    def __rmul__(self, other):
        if np.isscalar(other):
            return self.scale(other)
        return self._coerce(other) @ self

    def __matmul__(self, other):
        o = self._coerce(other)
        c = _convolve(self.coeffs, o.coeffs)
        return MatrixLoop(c, self.low + o.low)

    def __rmatmul__(self, other):
        return self._coerce(other) @ self

    def mul(self, other, policy: LoopBandPolicy | None = None) -> "MatrixLoop":
        """Product followed by truncation to the policy band."""
        out = self @ other
        if policy is None:
            return out
        return truncate(out, policy)

    # structure ------------------------------------------------------------

    def project(self, lo, hi) -> "MatrixLoop":
        """Keep only powers in ``[lo, hi]`` (``None`` means unbounded)."""
        lo = self.low if lo is None else max(lo, self.low)
        hi = self.high if hi is None else min(hi, self.high)
        if lo > hi:
            return MatrixLoop(np.zeros((1, 2, 2)), lo)
        return MatrixLoop(self.padded(lo, hi), lo)

    def trimmed(self, tol: float = 0.0) -> "MatrixLoop":
        """Drop edge coefficients whose norm is at most ``tol`` times the largest."""
        n = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=(1, 2)))
        keep = np.nonzero(n > tol * n.max())[0] if n.max() > 0 else np.array([])
        if keep.size == 0:
            return MatrixLoop(np.zeros((1, 2, 2)), 0)
        a, b = keep[0], keep[-1]
        return MatrixLoop(self.coeffs[a:b + 1], self.low + a)

    def adjugate(self) -> "MatrixLoop":
        c = self.coeffs
        out = np.empty_like(c)
        out[:, 0, 0] = c[:, 1, 1]
        out[:, 1, 1] = c[:, 0, 0]
        out[:, 0, 1] = -c[:, 0, 1]
        out[:, 1, 0] = -c[:, 1, 0]
        return MatrixLoop(out, self.low)

    def det(self) -> np.ndarray:
        """Determinant as a scalar Laurent polynomial, returned as ``(coeffs, low)``."""
        c = self.coeffs
        d = np.convolve(c[:, 0, 0], c[:, 1, 1]) - np.convolve(c[:, 0, 1], c[:, 1, 0])
        return d, 2 * self.low

    def det_constant(self) -> tuple:
        """Constant part of det and relative size of its non-constant part."""
        d, lo = self.det()
        idx = -lo
        d0 = d[idx] if 0 <= idx < d.size else 0.0
        rest = np.delete(d, idx) if 0 <= idx < d.size else d
        scale = max(abs(d0), np.max(np.abs(d)), 1e-300)
        return complex(d0), float(np.max(np.abs(rest), initial=0.0) / scale)

    def inverse(self, tol: float = 1e-10) -> "MatrixLoop":
        d0, drift = self.det_constant()
        if abs(d0) < 1e-300 or drift > tol:
            raise NotInvertible(f"det is not a nonzero constant (det0={d0:.3e}, drift={drift:.3e})")
        return self.adjugate().scale(1.0 / d0)

    def conj_reflect(self) -> "MatrixLoop":
        """``lam -> conj(X(1/conj(lam)))``: conjugate coefficients, flip powers."""
        return MatrixLoop(np.conj(self.coeffs[::-1]), -self.high)

    def transpose(self) -> "MatrixLoop":
        return MatrixLoop(np.swapaxes(self.coeffs, 1, 2), self.low)

    def tau(self, check: bool = True, tol: float = 1e-8) -> "MatrixLoop":
        """Real-form involution ``sigma3 (conj(X(1/conj lam))^T)^-1 sigma3``.

        The inverse is taken as the adjugate, which is exact for unimodular
        loops; other inputs raise :class:`NonUnimodular` unless ``check`` is off.
        """
        if check:
            d0, drift = self.det_constant()
            if abs(d0 - 1) > tol or drift > tol:
                raise NonUnimodular(f"tau needs det = 1 (det0 = {d0:.3e}, drift {drift:.1e})")
        c = np.conj(self.coeffs[::-1])
        out = np.empty_like(c)
        out[:, 0, 0] = c[:, 1, 1]
        out[:, 0, 1] = c[:, 1, 0]
        out[:, 1, 0] = c[:, 0, 1]
        out[:, 1, 1] = c[:, 0, 0]
        return MatrixLoop(out, -self.high)

    def rho(self) -> "MatrixLoop":
        """``sigma3 conj(X(1/conj lam))^T sigma3`` (tau without the inverse)."""
        c = np.conj(np.swapaxes(self.coeffs[::-1], 1, 2)).copy()
        c[:, 0, 1] *= -1
        c[:, 1, 0] *= -1
        return MatrixLoop(c, -self.high)

    def sigma(self) -> "MatrixLoop":
        """Twisting involution ``Ad_sigma3 X(-lam)``."""
        sgn = (-1.0) ** self.powers()
        c = self.coeffs * sgn[:, None, None]
        c[:, 0, 1] *= -1
        c[:, 1, 0] *= -1
        return MatrixLoop(c, self.low)

    def twist_defect(self) -> float:
        """Norm of the part violating the twisting parity (diag even, off-diag odd)."""
        odd = (self.powers() % 2).astype(bool)
        bad = np.where(odd[:, None, None], _DIAG[None], ~_DIAG[None])
        return float(np.sqrt(np.sum(np.abs(self.coeffs[bad]) ** 2)))

    def is_twisted(self, tol: float = 1e-12) -> bool:
        return self.twist_defect() <= tol * max(self.norm(), 1e-300)

    def lambda_derivative(self) -> "MatrixLoop":
        """``lam * d/dlam``."""
        return MatrixLoop(self.coeffs * self.powers()[:, None, None], self.low)

    def ad(self, g) -> "MatrixLoop":
        """Conjugate by a constant matrix: ``g X g^-1``."""
        g = np.asarray(g, dtype=complex)
        return MatrixLoop(g @ self.coeffs @ np.linalg.inv(g), self.low)

    # twist isomorphism ------------------------------------------------------

    def twist(self) -> "MatrixLoop":
        """Map an untwisted loop to its twisted image.

        ``[[a, b], [c, d]] -> [[a(l^2), l b(l^2)], [l^-1 c(l^2), d(l^2)]]``.
        """
        lo, hi = 2 * self.low - 1, 2 * self.high + 1
        out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
        for k, j in enumerate(self.powers()):
            m = self.coeffs[k]
            out[2 * j - lo, 0, 0] += m[0, 0]
            out[2 * j - lo, 1, 1] += m[1, 1]
            out[2 * j + 1 - lo, 0, 1] += m[0, 1]
            out[2 * j - 1 - lo, 1, 0] += m[1, 0]
        return MatrixLoop(out, lo).trimmed(0.0)

    def untwist(self, tol: float = 1e-12) -> "MatrixLoop":
        """Inverse of :meth:`twist`; the input must be twisted."""
        if not self.is_twisted(tol):
            raise NotTwisted("loop is not twisted")
        terms: dict = {}
        for k, j in enumerate(self.powers()):
            m = self.coeffs[k]
            if j % 2 == 0:
                t = terms.setdefault(j // 2, np.zeros((2, 2), dtype=complex))
                t[0, 0] += m[0, 0]
                t[1, 1] += m[1, 1]
            else:
                t = terms.setdefault((j - 1) // 2, np.zeros((2, 2), dtype=complex))
                t[0, 1] += m[0, 1]
                t = terms.setdefault((j + 1) // 2, np.zeros((2, 2), dtype=complex))
                t[1, 0] += m[1, 0]
        return MatrixLoop.from_terms(terms).trimmed(0.0)

    # comparison -----------------------------------------------------------

    def distance(self, other) -> float:
        o = self._coerce(other)
        lo, hi = min(self.low, o.low), max(self.high, o.high)
        return float(np.sqrt(np.sum(np.abs(self.padded(lo, hi) - o.padded(lo, hi)) ** 2)))

    def allclose(self, other, tol: float = 1e-12) -> bool:
        return self.distance(other) <= tol

    def to_json(self) -> dict:
        return {
            "band": [self.low, self.high],
            "coeffs": [[[[float(v.real), float(v.imag)] for v in row] for row in m]
                       for m in self.coeffs],
        }

    @classmethod
    def from_json(cls, d) -> "MatrixLoop":
        lo, hi = d["band"]
        c = np.array(d["coeffs"], dtype=float)
        c = c[..., 0] + 1j * c[..., 1]
        if c.shape != (hi - lo + 1, 2, 2):
            raise ValueError("loop JSON band does not match coefficient count")
        return cls(c, lo)


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix-valued convolution of coefficient arrays."""
    n = a.shape[0] + b.shape[0] - 1
    if min(a.shape[0], b.shape[0]) <= 8:
        out = np.zeros((n, 2, 2), dtype=complex)
        if a.shape[0] <= b.shape[0]:
            for i in range(a.shape[0]):
                out[i:i + b.shape[0]] += a[i] @ b
        else:
            for i in range(b.shape[0]):
                out[i:i + a.shape[0]] += a @ b[i]
        return out
    out = np.empty((n, 2, 2), dtype=complex)
    for r in range(2):
        for c in range(2):
            out[:, r, c] = np.convolve(a[:, r, 0], b[:, 0, c]) + np.convolve(a[:, r, 1], b[:, 1, c])
    return out


def truncate(loop: MatrixLoop, policy: LoopBandPolicy) -> MatrixLoop:
    """Restrict to ``[-max_band, max_band]``; raise if the dropped tail is too heavy."""
    m = policy.max_band
    if loop.low >= -m and loop.high <= m:
        return loop
    kept = loop.project(-m, m)
    dropped = loop.norm() ** 2 - kept.norm() ** 2
    rel = np.sqrt(max(dropped, 0.0)) / max(loop.norm(), 1e-300)
    if rel > policy.tail_tol:
        raise BandOverflow(f"dropped relative tail {rel:.3e} exceeds {policy.tail_tol:.1e}")
    return kept


def omega(m: int) -> MatrixLoop:
    """Small-cell representative: lower unipotent ``lam^-m`` for odd m, upper ``lam^(1-m)`` for even m."""
    return psi(m, 1.0)


def psi(m: int, z: complex) -> MatrixLoop:
    """Unipotent path through the small cell, equal to ``omega(m)`` at ``z = 1``."""
    if m < 1:
        raise ValueError("m must be positive")
    if m % 2:
        return MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (1, 0, -m): z})
    return MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (0, 1, 1 - m): z})


def omega_theta(m: int, theta: float) -> MatrixLoop:
    """``omega(m)`` with its off-diagonal entry rotated by ``exp(i theta)``."""
    return psi(m, np.exp(1j * theta))


def twisted_isigma1() -> MatrixLoop:
    """Image of ``i sigma1`` under the twist map."""
    return MatrixLoop.from_entries({(0, 1, 1): 1j, (1, 0, -1): 1j})


def minkowski_coords(X) -> np.ndarray:
    """Coordinates ``(x1, x2, x0)`` of ``X = x1 s1 - x2 s2 + x0 i s3``.

    Works on arrays of shape ``(..., 2, 2)`` and returns the real parts.
    """
    X = np.asarray(X)
    x1 = 0.5 * (X[..., 0, 1] + X[..., 1, 0])
    x2 = (X[..., 0, 1] - X[..., 1, 0]) / 2j
    x0 = (X[..., 0, 0] - X[..., 1, 1]) / 2j
    return np.stack([x1.real, x2.real, x0.real], axis=-1)


def minkowski_matrix(x) -> np.ndarray:
    """Inverse of :func:`minkowski_coords`."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = 1j * x[..., 2]
    out[..., 1, 1] = -1j * x[..., 2]
    out[..., 0, 1] = x[..., 0] + 1j * x[..., 1]
    out[..., 1, 0] = x[..., 0] - 1j * x[..., 1]
    return out


def minkowski_dot(x, y) -> np.ndarray:
    """Signature (+, +, -) inner product on coordinate triples ``(x1, x2, x0)``."""
    x, y = np.asarray(x), np.asarray(y)
    return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2]
