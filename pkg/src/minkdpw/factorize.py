"""Iwasawa-type splittings ``X = F B`` for loops in the twisted loop group.

``F`` lies in the real form (``tau(F) = +-F``) and ``B`` is a plus loop
whose constant term is ``diag(rho, 1/rho)`` with ``rho > 0`` (upper
triangular with positive diagonal for untwisted input).

The main entry point, :func:`iwasawa_kernel`, finds ``F^-1`` as the
one-dimensional kernel of a finite linear system built from the
coefficients of ``X``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import (IllConditioned, MinkDPWError, NoStableRatio, NotInSL2C, NotInSmallCell,
                     NotPlusLoop, NotTwisted, ResidualTooLarge, SmallCellSuspected)
from .loopcore import I2, ISIGMA3, SIGMA1, MatrixLoop, omega

_SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass
class IwasawaResult:
    F: MatrixLoop
    B: MatrixLoop
    component_sign: int
    rho0: float
    conditioning: float = 1.0
    kernel_dim: int = 1
    residual: float = 0.0
    tau_residual: float = 0.0
    det_drift: float = 0.0
    case: int | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# constant matrices


def iwasawa_constant(X, tol: Tolerances = DEFAULT) -> IwasawaResult:
    """Split a constant ``X in SL(2, C)`` as ``F B``.

    Three cases, chosen by comparing ``|X11|`` and ``|X21|``:

    1. ``|X11| > |X21|``: ``F = [[u, v], [conj v, conj u]]`` with
       ``|u|^2 - |v|^2 = 1`` and ``B = [[r, beta], [0, 1/r]]``, ``r > 0``.
    2. ``|X11| < |X21|``: ``F = [[u, v], [-conj v, -conj u]]`` with
       ``|u|^2 - |v|^2 = -1``.
    3. equal moduli: ``F = [[e^{i th}, 0], [e^{i g}, e^{-i th}]]``.
    """
    X = np.asarray(X, dtype=complex)
    if X.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    d = np.linalg.det(X)
    if abs(d - 1) > tol.det_tol * max(1.0, np.abs(X).max() ** 2):
        raise NotInSL2C(f"det X = {d}")
    x11, x21, x12, x22 = X[0, 0], X[1, 0], X[0, 1], X[1, 1]
    m1, m2 = abs(x11), abs(x21)
    scale = max(m1, m2)
    if abs(m1 - m2) <= tol.boundary_tol * scale:
        r = 0.5 * (m1 + m2)
        e1, e2 = x11 / m1, x21 / m2
        F = np.array([[e1, 0], [e2, 1 / e1]])
        beta = x12 / e1
        case, sign = 3, 0
    elif m1 > m2:
        r = np.sqrt(m1 ** 2 - m2 ** 2)
        u, vb = x11 / r, x21 / r
        v = np.conj(vb)
        F = np.array([[u, v], [vb, np.conj(u)]])
        beta = np.conj(u) * x12 - v * x22
        case, sign = 1, 1
    else:
        r = np.sqrt(m2 ** 2 - m1 ** 2)
        u, vb = x11 / r, -x21 / r
        v = np.conj(vb)
        F = np.array([[u, v], [-vb, -np.conj(u)]])
        beta = -np.conj(u) * x12 - v * x22
        case, sign = 2, -1
    B = np.array([[r, beta], [0, 1 / r]])
    res = np.abs(F @ B - X).max() / max(np.abs(X).max(), 1.0)
    return IwasawaResult(MatrixLoop.constant(F), MatrixLoop.constant(B), sign, float(r),
                         residual=float(res), case=case)


# ---------------------------------------------------------------------------
# kernel system


def kernel_system(X: MatrixLoop, n: int | None = None, twisted: bool | None = None):
    """Linear system whose kernel contains ``F^-1`` for ``X = F B``.

    The unknown is ``W`` with powers in ``[-n, n]``.  Rows encode

    * negative powers of ``W X`` vanish,
    * negative powers of ``adj(rho W) X`` vanish (conjugated, which makes
      the whole system complex linear in ``W``),
    * the constant terms of both products are upper triangular with
      matching diagonals.

    Returns ``(A, cols, n)``, where ``cols`` lists the ``(j, p, q)`` index
    of each unknown.  For twisted input only twisted unknowns are kept.
    """
    if n is None:
        n = max(-X.low, 0)
    if twisted is None:
        twisted = X.is_twisted(1e-13)
    Xa = X.padded(-n, n)
    J = np.arange(-n, n + 1)

    def gather(K, sgn):
        P = K[:, None] + sgn * J[None, :]
        ok = (P >= -n) & (P <= n)
        Y = Xa[np.clip(P + n, 0, 2 * n)] * ok[..., None, None]
        return Y

    def blocks(K):
        Y1 = gather(K, -1)
        M1 = np.einsum("rp,kjsc->krcjps", I2, Y1)
        Y2 = np.conj(gather(K, +1))[:, :, ::-1, :]
        M2 = np.einsum("rp,kjqc->krcjpq", _SWAP, Y2)
        return M1, M2

    nj = J.size
    rows = []
    if n > 0:
        M1, M2 = blocks(np.arange(-2 * n, 0))
        rows.append(M1.reshape(-1, nj * 4))
        rows.append(M2.reshape(-1, nj * 4))
    R1, R2 = blocks(np.array([0]))
    R1, R2 = R1[0], R2[0]
    rows.append(np.stack([
        (R1[0, 0] - R2[0, 0]).reshape(-1),
        (R1[1, 1] - R2[1, 1]).reshape(-1),
        R1[1, 0].reshape(-1),
        R2[1, 0].reshape(-1),
    ]))
    A = np.concatenate(rows, axis=0)
    cols = [(j, p, q) for j in J for p in range(2) for q in range(2)]
    if twisted:
        keep = np.array([((p == q) == (j % 2 == 0)) for j, p, q in cols])
        A = A[:, keep]
        cols = [c for c, k in zip(cols, keep) if k]
    A = A[np.any(A != 0, axis=1)]
    return A, cols, n


def _vector_to_loop(vec, cols, n) -> MatrixLoop:
    c = np.zeros((2 * n + 1, 2, 2), dtype=complex)
    for v, (j, p, q) in zip(vec, cols):
        c[j + n, p, q] = v
    return MatrixLoop(c, -n)


def iwasawa_kernel(X: MatrixLoop, tol: Tolerances = DEFAULT, twisted: bool | None = None,
                   check: bool = True) -> IwasawaResult:
    """Normalized splitting ``X = F B`` of a loop with finite pole order.

    Raises :class:`SmallCellSuspected` when the kernel is not one
    dimensional, is ill conditioned, or has (nearly) vanishing
    determinant; raises :class:`ResidualTooLarge` when the factors fail to
    reproduce ``X``.
    """
    if twisted is None:
        twisted = X.is_twisted(1e-13)
    xn = X.norm()
    Xs = X.scale(1.0 / xn)
    A, cols, n = kernel_system(Xs, twisted=twisted)
    _, s, vh = np.linalg.svd(A, full_matrices=False)
    N = len(cols)
    if s.size < N:
        s = np.concatenate([s, np.zeros(N - s.size)])
    null_dim = int(np.sum(s <= tol.null_rel * s[0]))
    sv_ratio = float(s[-2] / s[0]) if N > 1 else 1.0
    if null_dim >= 2:
        raise SmallCellSuspected(f"kernel dimension {null_dim}")
    if sv_ratio < tol.cond_tol:
        raise IllConditioned(f"kernel singular-value ratio {sv_ratio:.2e}")
    W = _vector_to_loop(np.conj(vh[-1]), cols, n)
    det0, drift = W.det_constant()
    if abs(det0) < tol.det_tol:
        raise SmallCellSuspected(f"|det W| = {abs(det0):.2e} for unit-norm kernel vector")
    # Near a small cell the kernel stays one dimensional but its unit-norm
    # generator becomes singular, so |det W| is the quantity that degenerates.
    conditioning = min(sv_ratio, abs(det0))
    diag = {"sv_ratio": sv_ratio, "det_unit": abs(det0), "n": n}
    W = W.scale(1.0 / np.sqrt(det0))

    best = None
    for k in (0, 1):
        Winv = W if k == 0 else MatrixLoop.constant(ISIGMA3) @ W
        F = Winv.adjugate()
        tF = F.tau()
        fn = F.norm()
        for sign in (1, -1):
            r = (tF - F.scale(sign)).norm() / fn
            if best is None or r < best[0]:
                best = (r, k, sign, F, Winv)
    tau_res, k, sign, F, Winv = best

    B_full = Winv @ Xs
    neg = B_full.project(None, -1).norm() if B_full.low < 0 else 0.0
    B = B_full.project(0, None).scale(xn)
    b0 = B.coeff(0)
    phase = b0[0, 0] / abs(b0[0, 0])
    D = np.diag([phase, 1 / phase])
    F = F @ D
    B = MatrixLoop(np.linalg.inv(D) @ B.coeffs, B.low)
    rho0 = float(B.coeff(0)[0, 0].real)
    if twisted:
        F = F.project(-n, n)
    resid = (F @ B - X).norm() / xn
    out = IwasawaResult(F, B, sign, rho0, conditioning=conditioning, kernel_dim=max(null_dim, 1),
                        residual=float(max(resid, neg)), tau_residual=float(tau_res),
                        det_drift=drift, diagnostics=diag)
    if check and out.residual > tol.recon_tol:
        raise ResidualTooLarge(f"reconstruction residual {out.residual:.2e}")
    return out


def iwasawa_via_untwist(X: MatrixLoop, tol: Tolerances = DEFAULT) -> IwasawaResult:
    """Cross-check route: untwist, factor, and twist the factors back."""
    Xu = X.untwist()
    r = iwasawa_kernel(Xu, tol=tol, twisted=False)
    F, B = r.F.twist(), r.B.twist()
    resid = (F @ B - X).norm() / X.norm()
    return IwasawaResult(F, B, r.component_sign, r.rho0, conditioning=r.conditioning,
                         kernel_dim=r.kernel_dim, residual=float(resid),
                         tau_residual=r.tau_residual, det_drift=r.det_drift)


def align_phase(F: MatrixLoop, target: MatrixLoop):
    """Best ``D = diag(e^{ia}, e^{-ia})`` with ``F D`` close to ``target``.

    Returns ``(F D, distance)``.
    """
    lo, hi = min(F.low, target.low), max(F.high, target.high)
    a, t = F.padded(lo, hi), target.padded(lo, hi)
    s1 = np.sum(np.conj(t[:, :, 0]) * a[:, :, 0])
    s2 = np.sum(np.conj(t[:, :, 1]) * a[:, :, 1])
    w = s1 + np.conj(s2)
    e = np.conj(w) / abs(w) if abs(w) > 0 else 1.0
    FD = F @ np.diag([e, 1 / e])
    return FD, FD.distance(target)


# ---------------------------------------------------------------------------
# switching through the small cells


@dataclass
class SwitchResult:
    X: MatrixLoop
    Bhat: MatrixLoop
    epsilon: int          # +1: first stabilizer form, -1: second, 0: boundary
    ratio: float
    theta: float | None = None
    residual: float = 0.0


def _switch_m1(B: MatrixLoop, tol: Tolerances, allow_boundary: bool) -> SwitchResult:
    a0 = B.coeff(0)[0, 0]
    b1 = B.coeff(1)[0, 1]
    t = (b1 - a0) * a0
    kappa = abs(t)
    winv = MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (1, 0, -1): -1})
    if abs(kappa - 1) <= tol.boundary_tol:
        if not allow_boundary:
            raise NoStableRatio(f"|ratio| = {kappa!r} is within {tol.boundary_tol} of 1")
        e_minus = t / kappa
        theta = float(-np.angle(e_minus))
        Xl = MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (1, 0, -1): np.exp(1j * theta)})
        Xinv = MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (1, 0, -1): -np.exp(1j * theta)})
        full = Xinv @ B @ winv
        Bhat = full.project(0, None)
        res = full.project(None, -1).norm() if full.low < 0 else 0.0
        return SwitchResult(Xl, Bhat, 0, kappa, theta, float(res / max(full.norm(), 1e-300)))
    eps = 1 if kappa > 1 else -1
    v = 1.0 / np.sqrt(abs(kappa ** 2 - 1))
    u = eps * t * v
    Xl = MatrixLoop.from_entries({(0, 0, 0): u, (0, 1, 1): v, (1, 0, -1): eps * np.conj(v),
                                  (1, 1, 0): eps * np.conj(u)})
    full = Xl.adjugate() @ B @ winv
    Bhat = full.project(0, None)
    res = full.project(None, -1).norm() if full.low < 0 else 0.0
    return SwitchResult(Xl, Bhat, eps, kappa, None, float(res / max(full.norm(), 1e-300)))


def switch_factor(B: MatrixLoop, m: int, tol: Tolerances = DEFAULT,
                  allow_boundary: bool = True) -> SwitchResult:
    """Rewrite ``B omega(m)^-1`` as ``X Bhat`` with ``Bhat`` a plus loop.

    ``X`` has the form ``[[u, v lam], [eps conj(v) lam^-1, eps conj(u)]]``
    (conjugated by ``sigma1`` for ``m = 2``), with ``eps`` fixed by whether
    the ratio ``|b1 - a0| |a0|`` is above or below one.  At ratio one
    ``X`` is ``omega(m)`` with a rotated off-diagonal entry.
    """
    if B.low < 0 and B.project(None, -1).norm() > 0:
        raise NotPlusLoop("B has negative powers")
    if not B.is_twisted(1e-10):
        raise NotTwisted("B must be twisted")
    if m == 1:
        return _switch_m1(B, tol, allow_boundary)
    if m == 2:
        r = _switch_m1(B.ad(SIGMA1), tol, allow_boundary)
        return SwitchResult(r.X.ad(SIGMA1), r.Bhat.ad(SIGMA1), r.epsilon, r.ratio, r.theta, r.residual)
    raise ValueError("switch_factor handles m in {1, 2}")


def switch_bhat_formula(B: MatrixLoop, u, v, eps) -> MatrixLoop:
    """Closed-form entries of ``Bhat`` for ``m = 1``, written out entry by entry.

    Used as an independent check of the loop-algebra route in
    :func:`switch_factor`.
    """
    def s(r, c):
        return MatrixLoop(B.coeffs[:, r, c][:, None, None] * I2, B.low)

    def lam(j):
        return MatrixLoop(I2[None], j)

    a, b, c, d = s(0, 0), s(0, 1), s(1, 0), s(1, 1)
    ub, vb = np.conj(u), np.conj(v)
    e11 = (b @ lam(-1)).scale(-eps * ub) + d.scale(v) + a.scale(eps * ub) - (c @ lam(1)).scale(v)
    e12 = b.scale(eps * ub) - (d @ lam(1)).scale(v)
    e21 = (b @ lam(-2)).scale(eps * vb) - (a.scale(eps * vb) + d.scale(u)) @ lam(-1) + c.scale(u)
    e22 = (b @ lam(-1)).scale(-eps * vb) + d.scale(u)
    lo = min(e.low for e in (e11, e12, e21, e22))
    hi = max(e.high for e in (e11, e12, e21, e22))
    out = np.zeros((hi - lo + 1, 2, 2), dtype=complex)
    for e, (r, cc) in ((e11, (0, 0)), (e12, (0, 1)), (e21, (1, 0)), (e22, (1, 1))):
        out[:, r, cc] = e.padded(lo, hi)[:, 0, 0]
    return MatrixLoop(out, lo).trimmed(0.0)


def sym_loop(F: MatrixLoop) -> MatrixLoop:
    """``F i sigma3 F^-1 + 2 i lam dF/dlam F^-1`` as a loop (requires det F = 1)."""
    Finv = F.adjugate()
    return (F @ ISIGMA3 @ Finv) + (F.lambda_derivative() @ Finv).scale(2j)


def stabilizer_residual(k: MatrixLoop) -> float:
    """Distance of the Sym value of ``k`` from ``i sigma3`` (zero on the stabilizer)."""
    return sym_loop(k).trimmed(0.0).distance(MatrixLoop.constant(ISIGMA3))


def check_small_cell_point(phi0: MatrixLoop, F0: MatrixLoop, m: int, B0: MatrixLoop,
                           tol: float = 1e-9) -> None:
    """Raise :class:`NotInSmallCell` unless ``phi0 = F0 omega(m) B0``."""
    r = (F0 @ omega(m) @ B0 - phi0).norm() / max(phi0.norm(), 1e-300)
    if r > tol:
        raise NotInSmallCell(f"phi0 differs from F0 omega_{m} B0 by {r:.2e}")


# ---------------------------------------------------------------------------
# cell classification


@dataclass
class CellClass:
    variant: str                       # "BigCell", "P1", "P2" or "HigherOrUnknown"
    evidence: dict = field(default_factory=dict)
    result: IwasawaResult | None = None

    def __str__(self):
        return self.variant


def canonical_small_cell(X: MatrixLoop, tol: float = 1e-12):
    """Recognize ``D omega(m) D^-1`` with ``D`` constant diagonal unitary.

    Returns ``(m, aux)`` with ``aux = (D, m, D^-1)``, or ``None``.
    """
    Y = X.trimmed(tol) - I2
    Y = Y.trimmed(tol)
    if Y.norm() <= tol:
        return None
    nz = [(j, r, c) for j in Y.powers() for r in range(2) for c in range(2)
          if abs(Y.coeff(j)[r, c]) > tol]
    if len(nz) != 1:
        return None
    j, r, c = nz[0]
    val = Y.coeff(j)[r, c]
    if abs(abs(val) - 1) > tol:
        return None
    if (r, c) == (1, 0) and j < 0 and (-j) % 2 == 1:
        m = -j
        ph = np.exp(-0.5j * np.angle(val))
    elif (r, c) == (0, 1) and j <= -1 and (1 - j) % 2 == 0:
        m = 1 - j
        ph = np.exp(0.5j * np.angle(val))
    else:
        return None
    D = MatrixLoop.constant(np.diag([ph, 1 / ph]))
    Dinv = MatrixLoop.constant(np.diag([1 / ph, ph]))
    return m, (D, m, Dinv)


def rho_trend_slope(samples) -> tuple:
    """Least-squares slope of ``log rho`` against ``-log(distance)``.

    ``samples`` is a sequence of ``(distance, rho)`` pairs.  Positive slope
    means ``rho`` grows as the distance shrinks.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        return float("nan"), 0
    ok = (s[:, 0] > 0) & (s[:, 1] > 0) & np.isfinite(s).all(axis=1)
    s = s[ok]
    if s.shape[0] < 2 or np.ptp(np.log(s[:, 0])) == 0:
        return float("nan"), int(s.shape[0])
    x, y = -np.log(s[:, 0]), np.log(s[:, 1])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope), int(s.shape[0])


def classify_trend(samples, tol: Tolerances = DEFAULT) -> tuple:
    slope, n = rho_trend_slope(samples)
    if n < tol.min_trend_samples or not np.isfinite(slope):
        return "HigherOrUnknown", slope, n
    if slope < -tol.slope_tol:
        return "P1", slope, n
    if slope > tol.slope_tol:
        return "P2", slope, n
    return "HigherOrUnknown", slope, n


def classify_cell(X: MatrixLoop | None = None, context=None, canonical=None,
                  tol: Tolerances = DEFAULT) -> CellClass:
    """Place a loop in the big cell or one of the first two small cells.

    ``canonical`` may be an exact decomposition ``(F0, m, B0)``;
    ``context`` may hold ``(distance, rho)`` samples along an approach
    path.  Never raises for a unimodular input.
    """
    if canonical is not None:
        F0, m, B0 = canonical
        if X is not None:
            check_small_cell_point(X, F0, m, B0)
        return CellClass(f"P{m}" if m in (1, 2) else "HigherOrUnknown", {"route": "canonical", "m": m})
    evidence: dict = {}
    try:
        r = iwasawa_kernel(X, tol=tol)
        return CellClass("BigCell", {"conditioning": r.conditioning, "kernel_dim": r.kernel_dim}, r)
    except MinkDPWError as exc:
        evidence["kernel_error"] = f"{type(exc).__name__}: {exc}"
    hit = canonical_small_cell(X)
    if hit is not None and hit[0] in (1, 2):
        evidence.update(route="canonical", m=hit[0])
        return CellClass(f"P{hit[0]}", evidence)
    if context is not None:
        variant, slope, n = classify_trend(context, tol)
        evidence.update(route="rho_trend", slope=slope, samples=n)
        return CellClass(variant, evidence)
    return CellClass("HigherOrUnknown", evidence)
