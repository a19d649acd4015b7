"""Explicit surface families: rotational and equivariant surfaces, and Smyth-type potentials."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import ellipkinc

from .elliptic import jacobi_sn
from .errors import InfeasibleP, InvalidParameters, LeftMaximalInterval, NotInR, TotallyUmbilic
from .loopcore import ISIGMA3, MatrixLoop, minkowski_coords
from .potential import GridSpec, Potential


@dataclass(frozen=True)
class RevolutionParams:
    a: float
    b: float
    c: float = 0.0
    H: float | None = None

    def __post_init__(self):
        if self.a == 0 or self.b == 0:
            raise InvalidParameters("a and b must be nonzero")
        if self.H is None:
            object.__setattr__(self, "H", -2.0 * self.a * self.b)

    @property
    def p(self) -> float:
        return 2.0 * (self.a ** 2 + self.b ** 2 - self.c ** 2)

    @property
    def q(self) -> float:
        return 4.0 * abs(self.a * self.b)


def axis_classify(a: float, b: float, c: float, tol: float = 1e-12) -> str:
    """Causal type of the rotation axis from the sign of ``(a + b)^2 - c^2``."""
    s = (a + b) ** 2 - c ** 2
    if abs(s) < tol:
        return "null"
    return "spacelike" if s > 0 else "timelike"


def region_label(b: float, c: float, tol: float = 1e-12) -> str:
    """Region of the ``(b, c)`` half-plane at ``a = 1``: ``S``, ``T`` or ``L`` (lightlike axis)."""
    return {"spacelike": "S", "timelike": "T", "null": "L"}[axis_classify(1.0, b, c, tol)]


def region_invariant(b: float, c: float) -> float:
    """``(1 + b^2 - c^2) / b``, constant along the curves identified in the moduli space."""
    return (1.0 + b * b - c * c) / b


# ---------------------------------------------------------------------------
# the profile function v


def profile_initial(params: RevolutionParams) -> tuple:
    """``v(0) = 2b`` and ``v'(0) = -4bc`` (magnitude from the first-order equation, sign from ``-bc``)."""
    return 2.0 * params.b, -4.0 * params.b * params.c


def profile_constraint(params: RevolutionParams, v, vp):
    """``v'^2 - (v^2 - 4a^2)(v^2 - 4b^2) - 4c^2 v^2``."""
    a, b, c = params.a, params.b, params.c
    v, vp = np.asarray(v), np.asarray(vp)
    return vp ** 2 - (v ** 2 - 4 * a * a) * (v ** 2 - 4 * b * b) - 4 * c * c * v ** 2


def _profile_rhs(params):
    k = 2 * params.a ** 2 + 2 * params.b ** 2 - 2 * params.c ** 2

    def f(t, y):
        return [y[1], 2 * y[0] * (y[0] ** 2 - k)]
    return f


def _exit_events(vmax):
    def hits_zero(t, y):
        return y[0]
    hits_zero.terminal = True

    def blows_up(t, y):
        return abs(y[0]) - vmax
    blows_up.terminal = True
    return [hits_zero, blows_up]


def _integrate_outward(rhs, y0, x, extra_dim, rtol, atol, vmax, events=True):
    """Integrate from 0 to each sample of ``x`` (both signs), returning states in input order."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, len(y0)))
    for sgn in (1, -1):
        sel = np.nonzero(sgn * x > 0)[0] if sgn > 0 else np.nonzero(x <= 0)[0]
        if sel.size == 0:
            continue
        order = sel[np.argsort(sgn * x[sel])]
        targets = x[order]
        end = targets[-1]
        if end == 0:
            out[order] = y0
            continue
        sol = solve_ivp(rhs, (0.0, end), y0, method="DOP853", t_eval=targets, rtol=rtol, atol=atol,
                        events=_exit_events(vmax) if events else None)
        if sol.status == 1 or sol.y.shape[1] < targets.size:
            tstop = sol.t_events[0][0] if sol.t_events[0].size else sol.t_events[1][0]
            raise LeftMaximalInterval(f"v leaves (0, {vmax:g}) at x = {tstop:.6g}")
        if not sol.success:
            raise LeftMaximalInterval(sol.message)
        out[order] = sol.y.T
    return out


def solve_profile_v(params: RevolutionParams, x, rtol: float = 1e-13, atol: float = 1e-14,
                    vmax: float = 1e8, return_derivative: bool = False):
    """Samples of ``v`` solving ``v'' = 2 v (v^2 - 2a^2 - 2b^2 + 2c^2)``.

    Raises :class:`LeftMaximalInterval` if a sample lies beyond the point
    where ``v`` reaches zero or exceeds ``vmax``.
    """
    y0 = list(profile_initial(params))
    Y = _integrate_outward(_profile_rhs(params), y0, x, 0, rtol, atol, vmax)
    return (Y[:, 0], Y[:, 1]) if return_derivative else Y[:, 0]


def maximal_interval(params: RevolutionParams, xmax: float = 20.0, vmax: float = 1e8) -> tuple:
    """Largest ``(x_lo, x_hi)`` within ``[-xmax, xmax]`` on which ``v`` is finite and nonzero."""
    ends = []
    for end in (-xmax, xmax):
        sol = solve_ivp(_profile_rhs(params), (0.0, end), list(profile_initial(params)),
                        method="DOP853", rtol=1e-12, atol=1e-14, events=_exit_events(vmax))
        ends.append(sol.t[-1])
    return tuple(ends)


def sn_parameters(params: RevolutionParams) -> tuple:
    """``(ell, m, x0)`` for ``v = (2b/ell) sn(2 ell a (x + x0) | m)``.

    ``ell^2`` is the largest root of ``a^2 s^2 + (c^2 - a^2 - b^2) s + b^2``
    and ``m = (b / (ell^2 a))^2``.  Valid for ``0 < b < a`` and ``c <= 0``.
    """
    a, b, c = params.a, params.b, params.c
    if not (0 < b < a and c <= 0):
        raise InvalidParameters("closed form needs 0 < b < a and c <= 0")
    roots = np.roots([a * a, c * c - a * a - b * b, b * b])
    roots = roots[np.abs(roots.imag) < 1e-14].real
    roots = roots[roots > 0]
    if roots.size == 0:
        raise InvalidParameters("no real positive root for ell^2")
    if roots.size == 2 and abs(roots[0] - roots[1]) < 1e-12:
        raise InvalidParameters("degenerate root for ell^2")
    ell = float(np.sqrt(roots.max()))
    m = (b / (ell * ell * a)) ** 2
    if not (0 <= m <= 1 and ell <= 1):
        raise InvalidParameters("closed form parameters out of range")
    # sn(2 ell a x0) = ell on the increasing branch
    x0 = float(ellipkinc(np.arcsin(ell), m)) / (2 * ell * a)
    return ell, m, x0


def sn_profile(params: RevolutionParams, x):
    ell, m, x0 = sn_parameters(params)
    x = np.asarray(x, dtype=float)
    return 2 * params.b / ell * jacobi_sn(2 * ell * params.a * (x + x0), m)


# ---------------------------------------------------------------------------
# frames


def revolution_A(params: RevolutionParams) -> MatrixLoop:
    a, b, c = params.a, params.b, params.c
    return MatrixLoop.from_entries({(0, 0, 0): c, (1, 1, 0): -c, (0, 1, -1): a, (0, 1, 1): b,
                                    (1, 0, 1): -a, (1, 0, -1): -b})


def revolution_potential(params: RevolutionParams) -> Potential:
    a, b, c = params.a, params.b, params.c
    return Potential(params.H, {(0, 0, 0): [c], (1, 1, 0): [-c], (0, 1, -1): [a], (0, 1, 1): [b],
                                (1, 0, 1): [-a], (1, 0, -1): [-b]},
                     name=f"revolution a={a:g} b={b:g} c={c:g}",
                     metadata={"family": "revolution", "a": a, "b": b, "c": c})


def _A_samples(params, lam):
    a, b, c = params.a, params.b, params.c
    A = np.zeros(lam.shape + (2, 2), dtype=complex)
    A[..., 0, 0], A[..., 1, 1] = c, -c
    A[..., 0, 1] = a / lam + b * lam
    A[..., 1, 0] = -a * lam - b / lam
    return A


def exp_zA(params: RevolutionParams, z, lam):
    """``exp(z A(lam))`` for broadcastable ``z`` and ``lam`` (shape ``... x 2 x 2``)."""
    z, lam = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(lam, dtype=complex))
    A = _A_samples(params, lam)
    mu2 = A[..., 0, 0] ** 2 + A[..., 0, 1] * A[..., 1, 0]
    mu = np.sqrt(mu2 + 0j)
    zm = z * mu
    ch = np.cosh(zm)
    with np.errstate(invalid="ignore", divide="ignore"):
        sh = np.where(np.abs(zm) > 1e-8, np.sinh(zm) / np.where(mu == 0, 1, mu),
                      z * (1 + zm * zm / 6))
    return ch[..., None, None] * np.eye(2) + sh[..., None, None] * A


def plus_factor_coeffs(params: RevolutionParams, x, band: int = 40, rtol: float = 1e-12,
                       atol: float = 1e-14) -> np.ndarray:
    """Laurent coefficients ``B_0 .. B_band`` of the plus factor at each ``x``.

    Solves ``B_x = -Theta B`` with ``B(0) = I``, where
    ``Theta = diag(v'/2v, -v'/2v) + lam [[0, -v], [4ab/v, 0]]``,
    together with the profile equation.  Returns shape ``(len(x), band + 1, 2, 2)``.
    """
    a, b = params.a, params.b
    k2 = 2 * a * a + 2 * b * b - 2 * params.c ** 2
    nb = band + 1

    def rhs(t, y):
        v, vp = y[0], y[1]
        B = (y[2:2 + 4 * nb] + 1j * y[2 + 4 * nb:]).reshape(nb, 2, 2)
        d = vp / (2 * v)
        dB = np.empty_like(B)
        dB[:, 0, :] = -d * B[:, 0, :]
        dB[:, 1, :] = d * B[:, 1, :]
        dB[1:, 0, :] += v * B[:-1, 1, :]
        dB[1:, 1, :] -= (4 * a * b / v) * B[:-1, 0, :]
        flat = dB.ravel()
        return np.concatenate([[vp, 2 * v * (v * v - k2)], flat.real, flat.imag])

    B0 = np.zeros((nb, 2, 2))
    B0[0] = np.eye(2)
    y0 = np.concatenate([list(profile_initial(params)), B0.ravel(), np.zeros(4 * nb)])
    Y = _integrate_outward(rhs, y0, x, 0, rtol, atol, 1e8)
    return (Y[:, 2:2 + 4 * nb] + 1j * Y[:, 2 + 4 * nb:]).reshape(-1, nb, 2, 2)


def _fit(values, nsamples):
    """Laurent coefficients (powers -n/2 .. n/2 - 1) from samples at the roots of unity."""
    c = np.fft.fft(values, axis=-3) / nsamples
    return np.fft.fftshift(c, axes=-3), -(nsamples // 2)


def revolution_frame(params: RevolutionParams, z: complex, band: int = 40, nsamples: int = 256,
                     tail_tol: float = 1e-13):
    """Loops ``(F, B)`` with ``exp(zA) = F B`` from the profile ODE.

    ``B`` depends only on ``x = Re z``; ``F = exp(zA) B^-1``.
    """
    Bc = plus_factor_coeffs(params, [float(np.real(z))], band)[0]
    B = MatrixLoop(Bc, 0)
    lam = np.exp(2j * np.pi * np.arange(nsamples) / nsamples)
    Fv = exp_zA(params, z, lam) @ B.adjugate()(lam)
    coeffs, low = _fit(Fv, nsamples)
    F = MatrixLoop(coeffs, low)
    edge = np.abs(coeffs[:4]).max() + np.abs(coeffs[-4:]).max()
    if edge > tail_tol * np.abs(coeffs).max():
        from .errors import BandOverflow
        raise BandOverflow(f"frame coefficients reach the sampling edge ({edge:.1e})")
    return F.trimmed(1e-16), B.trimmed(1e-16)


def revolution_frame_explicit(params: RevolutionParams, z: complex, lam, nquad: int = 2001):
    """Pointwise ``F = exp(zA) exp(-fA) B_1^-1`` at sample values of ``lam``.

    ``f = int_0^x 2 dt / (1 + v^2 / (4ab lam^2))`` by Simpson quadrature;
    ``sqrt(det B_0)`` is continued along the ray from ``lam = 0``.  ``lam``
    must avoid the points where ``4ab lam^2 + v(t)^2`` vanishes.  Returns
    the frame values and the plus factor values at ``lam``.
    """
    from scipy.integrate import simpson
    a, b, c = params.a, params.b, params.c
    x = float(np.real(z))
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    ts = np.linspace(0.0, x, nquad)
    v, vp = solve_profile_v(params, ts, return_derivative=True)
    integrand = 2.0 / (1.0 + v[None, :] ** 2 / (4 * a * b * lam[:, None] ** 2))
    f = simpson(integrand, x=ts, axis=-1) if x != 0 else np.zeros(lam.shape, dtype=complex)
    vx, vpx = v[-1], vp[-1]

    def B0(l):
        out = np.zeros(np.shape(l) + (2, 2), dtype=complex)
        out[..., 0, 0] = 2 * vx * (b + a * l * l)
        out[..., 0, 1] = (2 * c * vx + vpx) * l
        out[..., 1, 1] = 4 * a * b * l * l + vx * vx
        return out

    # continuous square root of det B0 along t -> t lam, t in [0, 1]
    ts_ray = np.linspace(0.0, 1.0, 400)
    dets = np.linalg.det(B0(ts_ray[:, None] * lam[None, :]))
    root = np.sqrt(dets[0] + 0j)
    root = np.where(root.real < 0, -root, root)
    for k in range(1, ts_ray.size):
        cand = np.sqrt(dets[k] + 0j)
        root = np.where(np.abs(cand - root) <= np.abs(cand + root), cand, -cand)
    B1 = B0(lam) / root[:, None, None]
    expf = exp_zA(params, -f, lam)
    F = exp_zA(params, z, lam) @ expf @ np.linalg.inv(B1)
    B = B1 @ exp_zA(params, f, lam)
    return F, B


def revolution_mesh(params: RevolutionParams, grid: GridSpec, lambda0: complex = 1.0,
                    band: int = 40, nsamples: int = 128):
    """Surface of the rotational family sampled on a rectangular grid.

    Uses the frame ``F = exp(zA) B(x)^-1`` with ``B`` from the profile ODE;
    no per-vertex factorization is needed.
    """
    from .symsurface import SurfaceMesh
    if grid.kind != "rect":
        raise InvalidParameters("revolution meshes use rectangular grids")
    xs, ys = grid.axes
    Bc = plus_factor_coeffs(params, xs, band)                      # (nx, nb, 2, 2)
    lam = np.exp(2j * np.pi * np.arange(nsamples) / nsamples)
    pw = lam[:, None] ** np.arange(band + 1)
    Bv = np.einsum("sj,xjab->xsab", pw, Bc)
    adjB = np.empty_like(Bv)
    adjB[..., 0, 0], adjB[..., 1, 1] = Bv[..., 1, 1], Bv[..., 0, 0]
    adjB[..., 0, 1], adjB[..., 1, 0] = -Bv[..., 0, 1], -Bv[..., 1, 0]
    Z = grid.vertices()
    nx, ny = Z.shape
    pts = np.empty((nx, ny, 3))
    nrm = np.empty((nx, ny, 3))
    powers = np.arange(-(nsamples // 2), nsamples - nsamples // 2)
    l0 = complex(lambda0)
    w0 = l0 ** powers
    w1 = powers * w0
    tail = 0.0
    for i in range(nx):
        E = exp_zA(params, Z[i][:, None], lam[None, :])            # (ny, s, 2, 2)
        Fv = E @ adjB[i][None]
        coeffs, _ = _fit(Fv, nsamples)                               # (ny, s, 2, 2)
        tail = max(tail, float(np.abs(coeffs[:, :2]).max() + np.abs(coeffs[:, -2:]).max()))
        F0 = np.einsum("s,ysab->yab", w0, coeffs)
        dF = np.einsum("s,ysab->yab", w1, coeffs)
        Finv = np.empty_like(F0)
        Finv[:, 0, 0], Finv[:, 1, 1] = F0[:, 1, 1], F0[:, 0, 0]
        Finv[:, 0, 1], Finv[:, 1, 0] = -F0[:, 0, 1], -F0[:, 1, 0]
        S = F0 @ ISIGMA3 @ Finv + 2j * dF @ Finv
        pts[i] = minkowski_coords(-S / (2 * params.H))
        nrm[i] = minkowski_coords(F0 @ ISIGMA3 @ Finv)
    rho = np.broadcast_to(Bc[:, 0, 0, 0].real[:, None], (nx, ny)).copy()
    shape = (nx, ny)
    return SurfaceMesh(grid, l0, float(params.H), Z, pts, nrm, rho, 2 * np.log(rho),
                       np.full(shape, "BigCell", dtype=object), np.ones(shape, dtype=int),
                       np.zeros(shape, dtype=bool), np.full(shape, "", dtype=object),
                       np.ones(shape), np.zeros(shape), np.zeros(shape, dtype=bool),
                       potential=revolution_potential(params),
                       diagnostics={"route": "profile_ode", "max_tail": tail,
                                    "axis": axis_classify(params.a, params.b, params.c)})


# ---------------------------------------------------------------------------
# equivariant surfaces and moduli


@dataclass(frozen=True)
class EquivariantPoint:
    p: float
    P: complex
    v0: float

    def member(self, tol: float = 0.0) -> bool:
        return self.v0 ** 4 - 2 * self.p * self.v0 ** 2 + abs(self.P) ** 2 >= -tol


def equivariant_to_potential(e: EquivariantPoint, H_sign: int = 1) -> dict:
    """Parameters ``(a, b, c, lambda0, H)`` of the rotational potential realizing ``e``.

    ``b = v0/2``, ``|a| = |P| / (2|v0|)`` with the sign making ``H = -2ab``
    have sign ``H_sign``, ``c = sqrt(a^2 + b^2 - p/2)`` and
    ``lambda0 = exp(-i arg(P) / 2)``.
    """
    q = abs(e.P)
    if q == 0:
        raise TotallyUmbilic("P = 0 gives a totally umbilic surface")
    if e.v0 == 0:
        raise InvalidParameters("v0 must be nonzero")
    b = e.v0 / 2.0
    a = q / (2.0 * abs(e.v0))
    if -2 * a * b * H_sign < 0:
        a = -a
    c2 = a * a + b * b - e.p / 2.0
    if c2 < -1e-14:
        raise InfeasibleP(f"a^2 + b^2 - p/2 = {c2:.3g} < 0")
    c = float(np.sqrt(max(c2, 0.0)))
    lam0 = complex(np.exp(-0.5j * np.angle(e.P)))
    return {"a": a, "b": b, "c": c, "lambda0": lam0, "H": -2 * a * b}


@dataclass(frozen=True)
class ModuliRep:
    p: float
    q: float
    v0: float
    branch: str       # "inner", "outer", "through_zero", "equilibrium", "asymptotic", "zero"

    def close(self, other: "ModuliRep", tol: float = 1e-9) -> bool:
        return (self.branch == other.branch and abs(self.p - other.p) <= tol
                and abs(self.q - other.q) <= tol and abs(self.v0 - other.v0) <= tol)


def moduli_normalize(p: float, q: float, v0: float, tol: float = 1e-12) -> ModuliRep:
    """Canonical representative of ``(p, q, v0)`` under scaling, shifts and ``v -> -v``.

    Scaling ``v -> r v(r x)`` maps ``(p, q, v0)`` to ``(r^2 p, r^2 q, r v0)``;
    it is used to make ``|q| = 1`` (or ``|p| = 1`` when ``q = 0``).  The
    orbit of ``v`` under ``v'^2 = v^4 - 2p v^2 + q^2`` is then represented by
    its turning value ``sqrt(s-)`` (oscillating orbits) or ``sqrt(s+)``
    (unbounded orbits), with ``s+- = p +- sqrt(p^2 - q^2)``, or by ``0``
    for orbits through zero.
    """
    v0, q = abs(float(v0)), abs(float(q))
    p = float(p)
    if v0 ** 4 - 2 * p * v0 ** 2 + q * q < -tol * max(1.0, v0 ** 4, q * q, abs(p) * v0 * v0):
        raise NotInR("v0^4 - 2 p v0^2 + q^2 < 0")
    if q > 0:
        r2 = 1.0 / q
    elif p != 0:
        r2 = 1.0 / abs(p)
    elif v0 != 0:
        return ModuliRep(0.0, 0.0, 1.0, "asymptotic")
    else:
        return ModuliRep(0.0, 0.0, 0.0, "zero")
    p, q, v0 = p * r2, q * r2, v0 * np.sqrt(r2)
    if q == 0:
        if v0 <= tol:
            return ModuliRep(p, 0.0, 0.0, "equilibrium")
        if p < 0:
            return ModuliRep(p, 0.0, 1.0, "asymptotic")
        return ModuliRep(p, 0.0, float(np.sqrt(2 * p)), "outer")
    if p <= q + tol and not abs(p - q) <= tol:
        return ModuliRep(p, q, 0.0, "through_zero")
    disc = max(p * p - q * q, 0.0)
    sm, sp = p - np.sqrt(disc), p + np.sqrt(disc)
    s = v0 * v0
    if abs(sp - sm) <= 1e-9:
        if abs(s - sp) <= 1e-9:
            return ModuliRep(p, q, float(np.sqrt(sp)), "equilibrium")
        if s < sp:
            return ModuliRep(p, q, 0.0, "through_zero")
        return ModuliRep(p, q, float(np.sqrt(sp)), "outer")
    if s <= sm + tol:
        return ModuliRep(p, q, float(np.sqrt(sm)), "inner")
    return ModuliRep(p, q, float(np.sqrt(sp)), "outer")


# ---------------------------------------------------------------------------
# Smyth-type potentials


def smyth_potential(c: float, k: int, H: float = 0.5) -> Potential:
    """``lam^-1 [[0, 1], [c z^k, 0]] dz``; ``c = 0`` gives the hyperboloid."""
    if c < 0:
        raise InvalidParameters("c must be nonnegative (phases reduce to c > 0 by rotating z)")
    if int(k) != k or k < 0:
        raise InvalidParameters("k must be a nonnegative integer")
    k = int(k)
    poly = [0.0] * k + [float(c)]
    return Potential(H, {(0, 1, -1): [1.0], (1, 0, -1): poly}, name=f"smyth c={c:g} k={k}",
                     metadata={"smyth": {"c": float(c), "k": k}, "symmetry_order": k + 2})
