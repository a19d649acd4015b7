"""Sym formula, surface data at a vertex, and assembly of surface meshes."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import (MinkDPWError, MissingAux, NotNormalized, NotRealForm, SecondSmallCell,
                     StabilizerViolation)
from .factorize import (CellClass, canonical_small_cell, check_small_cell_point, classify_cell,
                        classify_trend, iwasawa_kernel, stabilizer_residual, switch_factor)
from .loopcore import ISIGMA3, LoopBandPolicy, MatrixLoop, minkowski_coords, omega, twisted_isigma1
from .potential import GridSpec, Potential, integrate_frame


def _check_real_form(F: MatrixLoop, tol: float) -> int:
    tF = F.tau()
    n = max(F.norm(), 1e-300)
    rp, rm = (tF - F).norm() / n, (tF + F).norm() / n
    if min(rp, rm) > tol:
        raise NotRealForm(f"tau(F) -+ F residual {min(rp, rm):.2e}")
    return 1 if rp <= rm else -1


def _frame_values(F: MatrixLoop, lam0):
    Fv = F(lam0)
    dF = F.lambda_derivative()(lam0)
    Finv = np.array([[Fv[1, 1], -Fv[0, 1]], [-Fv[1, 0], Fv[0, 0]]])
    return Fv, dF, Finv


def _representative(F: MatrixLoop, sign: int) -> MatrixLoop:
    # frames in the shifted component are Psi(i sigma1) times an identity-component frame
    if sign < 0:
        return twisted_isigma1().scale(-1) @ F
    return F


def sym_matrix(F: MatrixLoop, lam0: complex = 1.0) -> np.ndarray:
    """``F i sigma3 F^-1 + 2 i lam dF/dlam F^-1`` at ``lam0`` (2x2 matrix)."""
    Fv, dF, Finv = _frame_values(F, lam0)
    return Fv @ ISIGMA3 @ Finv + 2j * dF @ Finv


def sym_point(F: MatrixLoop, lam0: complex = 1.0, H: float = 0.5, convention: str = "raw",
              tol: Tolerances = DEFAULT) -> np.ndarray:
    """Ambient point ``-(1/2H) S(F)`` at ``lam0`` as ``(x1, x2, x0)``.

    ``convention="raw"`` uses ``F`` as given.  ``"representative"`` first
    strips the ``Psi(i sigma1)`` factor from frames in the shifted
    component, which replaces the surface piece by an isometric copy.
    """
    sign = _check_real_form(F, tol.real_form_tol)
    if convention == "representative":
        F = _representative(F, sign)
    elif convention != "raw":
        raise ValueError(f"unknown convention {convention!r}")
    return minkowski_coords(-sym_matrix(F, lam0) / (2 * H))


def normal_vec(F: MatrixLoop, lam0: complex = 1.0, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Coordinates of the unit timelike normal ``F e3 F^-1`` at ``lam0``."""
    _check_real_form(F, tol.real_form_tol)
    Fv, _, Finv = _frame_values(F, lam0)
    return minkowski_coords(Fv @ ISIGMA3 @ Finv)


def parallel_points(F: MatrixLoop, lam0: complex = 1.0, H: float = 0.5, tol: Tolerances = DEFAULT):
    """Points of the parallel CMC ``-H`` surface and of the parallel constant-curvature surface."""
    _check_real_form(F, tol.real_form_tol)
    Fv, dF, Finv = _frame_values(F, lam0)
    rot = Fv @ ISIGMA3 @ Finv
    der = 2j * dF @ Finv
    return minkowski_coords(-(der - rot) / (2 * H)), minkowski_coords(-der / (2 * H))


def metric_rho(B: MatrixLoop, tol: float = 1e-9) -> float:
    """``rho`` from ``B(0) = diag(rho, 1/rho)``; the metric is ``4 rho^4 |dw|^2``."""
    b0 = B.coeff(0)
    scale = max(np.abs(b0).max(), 1e-300)
    if abs(b0[0, 1]) > tol * scale or abs(b0[1, 0]) > tol * scale:
        raise NotNormalized("B(0) is not diagonal")
    if abs(b0[0, 0].imag) > tol * scale or b0[0, 0].real <= 0:
        raise NotNormalized("B(0)_11 is not positive real")
    return float(b0[0, 0].real)


def extended_sym(phi: MatrixLoop, aux=None, lam0: complex | None = None, H: float | None = None,
                 tol: Tolerances = DEFAULT, check_stabilizer: bool = True):
    """Sym value extended across the first small cell.

    Without ``aux``, ``phi`` must lie in the big cell.  With
    ``aux = (F0, m, B0)`` and ``m = 1`` the loop ``phi B0^-1 omega_1^-1``
    is factored instead; it lies in the big cell near the base point and
    yields the same Sym value as ``phi`` wherever both are defined.

    Returns the Sym loop, or the ambient point ``-(1/2H) S`` at ``lam0``
    when ``lam0`` and ``H`` are given.
    """
    if aux is None:
        try:
            r = iwasawa_kernel(phi, tol=tol)
        except MinkDPWError:
            hit = canonical_small_cell(phi)
            if hit is not None and hit[0] == 1:
                raise MissingAux("phi lies in the first small cell; supply (F0, 1, B0)") from None
            if hit is not None and hit[0] == 2:
                raise SecondSmallCell("no finite Sym value on the second small cell") from None
            raise
        F = r.F
    else:
        F0, m, B0 = aux
        if m == 2:
            raise SecondSmallCell("no finite Sym value on the second small cell")
        if m != 1:
            raise ValueError("only first-small-cell decompositions extend")
        phihat = phi @ B0.inverse() @ omega(1).inverse()
        F = iwasawa_kernel(phihat.trimmed(tol.trim_tol), tol=tol).F
        if check_stabilizer:
            # phi = F B in the big cell: the switch matrix relating F and F-hat
            # must fix i sigma3 under the Sym map
            try:
                rb = iwasawa_kernel(phi, tol=tol)
                sw = switch_factor((rb.B @ B0.inverse()).trimmed(tol.trim_tol), 1, tol=tol)
                res = stabilizer_residual(sw.X)
            except (MinkDPWError, ValueError):
                res = None       # phi itself is on the small cell: nothing to compare
            if res is not None and res > 1e-8:
                raise StabilizerViolation(f"switch matrix leaves the stabilizer ({res:.2e})")
    if lam0 is None:
        S = (F @ ISIGMA3 @ F.adjugate()) + (F.lambda_derivative() @ F.adjugate()).scale(2j)
        return S.trimmed(tol.trim_tol)
    return minkowski_coords(-sym_matrix(F, lam0) / (2 * H))


# ---------------------------------------------------------------------------
# meshes


@dataclass
class SurfaceMesh:
    """Per-vertex surface data on a grid.

    ``cell`` holds ``"BigCell"`` where the splitting succeeded and the
    small-cell class (``"P1"``, ``"P2"``, ``"HigherOrUnknown"``) where it
    failed.  ``flagged`` marks vertices within ``flag_width`` grid steps of
    the singular set; ``flag_class`` holds the class of the nearby
    singular set for flagged vertices.
    """

    grid: GridSpec
    lambda0: complex
    H: float
    z: np.ndarray
    points: np.ndarray            # (n1, n2, 3), nan where undefined
    normals: np.ndarray           # (n1, n2, 3)
    rho: np.ndarray               # nan where undefined
    u: np.ndarray                 # 2 log rho
    cell: np.ndarray              # str
    component_sign: np.ndarray    # +1 / -1, 0 where undefined
    flagged: np.ndarray           # bool
    flag_class: np.ndarray        # str, "" where not flagged
    conditioning: np.ndarray
    residual: np.ndarray
    extended: np.ndarray          # bool, point from the extended Sym formula
    potential: Potential | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(abs(self.lambda0) - 1) > 1e-12:
            raise ValueError("lambda0 must lie on the unit circle")

    @property
    def shape(self) -> tuple:
        return self.z.shape

    @property
    def big_cell(self) -> np.ndarray:
        return self.cell == "BigCell"

    def vertex_record(self, i, j) -> dict:
        p = self.points[i, j]
        return {"z": [float(self.z[i, j].real), float(self.z[i, j].imag)],
                "point": None if np.isnan(p).any() else p.tolist(),
                "rho": None if np.isnan(self.rho[i, j]) else float(self.rho[i, j]),
                "u": None if np.isnan(self.u[i, j]) else float(self.u[i, j]),
                "cell": str(self.cell[i, j]), "component_sign": int(self.component_sign[i, j]),
                "flagged": bool(self.flagged[i, j]), "flag_class": str(self.flag_class[i, j]),
                "conditioning": float(self.conditioning[i, j]),
                "residual": float(self.residual[i, j])}


def _neighbours(shape, periodic: bool):
    n1, n2 = shape
    for i in range(n1):
        for j in range(n2):
            for di, dj in ((1, 0), (0, 1)):
                a, b = i + di, j + dj
                if b == n2 and periodic:
                    b = 0
                if a < n1 and b < n2:
                    yield (i, j), (a, b)


def _axis_diff(g: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Centered difference along ``axis``, one-sided where a neighbour is missing."""
    g = np.moveaxis(g, axis, 0)
    fwd = np.full(g.shape, np.nan)
    bwd = np.full(g.shape, np.nan)
    if periodic:
        fwd = (np.roll(g, -1, axis=0) - g) / h
        bwd = (g - np.roll(g, 1, axis=0)) / h
    else:
        fwd[:-1] = (g[1:] - g[:-1]) / h
        bwd[1:] = (g[1:] - g[:-1]) / h
    out = 0.5 * (fwd + bwd)
    out = np.where(np.isnan(out), np.where(np.isnan(fwd), bwd, fwd), out)
    return np.moveaxis(out, 0, axis)


def _gradient_norm(g: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Euclidean ``|grad g|`` in the z-plane by finite differences (nan-aware)."""
    hs, ht = grid.spacing()
    gs = _axis_diff(g, hs, 0, False)
    gt = _axis_diff(g, ht, 1, grid.kind == "polar")
    if grid.kind == "polar":
        r = grid.axes[0][:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            gt = np.where(r > 0, gt / r, 0.0)
    return np.hypot(gs, gt)


def build_surface(P: Potential, grid: GridSpec, phi0: MatrixLoop | None = None,
                  lambda0: complex = 1.0, policy: LoopBandPolicy = LoopBandPolicy(),
                  tol: Tolerances = DEFAULT, aux=None, trend_radius: int = 4,
                  convention: str = "raw") -> SurfaceMesh:
    """Integrate the potential, split every vertex, and assemble the mesh.

    Factorization failures never abort the mesh; such vertices carry a
    small-cell class instead of a point (unless the first-small-cell
    decomposition ``aux = (F0, 1, B0)`` of ``phi(z0)`` is known, in which
    case the extended Sym formula supplies the point).  When ``phi0`` is
    itself a canonical first-small-cell loop, ``aux`` is derived from it.
    """
    t0 = time.perf_counter()
    phi0 = MatrixLoop.identity() if phi0 is None else phi0
    H = P.H
    ff = integrate_frame(P, grid, phi0, policy=policy, tol=tol, strict=False)
    if np.max(ff.det_drift) > tol.det_drift_tol:
        raise MinkDPWError(f"|det phi - 1| reached {np.max(ff.det_drift):.2e}")
    if aux is None:
        hit = canonical_small_cell(phi0)
        if hit is not None and hit[0] == 1:
            aux = hit[1]
    if aux is not None:
        check_small_cell_point(phi0, *aux)

    Z = grid.vertices()
    shape = Z.shape
    pts = np.full(shape + (3,), np.nan)
    nrm = np.full(shape + (3,), np.nan)
    rho = np.full(shape, np.nan)
    sign = np.zeros(shape, dtype=int)
    cond = np.zeros(shape)
    resid = np.full(shape, np.nan)
    cell = np.full(shape, "BigCell", dtype=object)
    extended = np.zeros(shape, dtype=bool)
    failed = np.zeros(shape, dtype=bool)
    errors: dict = {}
    cache: dict = {}

    for idx in np.ndindex(*shape):
        if grid.kind == "polar" and idx[0] == 0 and idx[1] > 0:
            continue                              # the centre is a single point
        X = ff.loop(*idx).trimmed(tol.trim_tol)
        try:
            r = iwasawa_kernel(X, tol=tol)
            F = r.F
            pts[idx] = sym_point(F, lambda0, H, convention=convention, tol=tol)
            nrm[idx] = normal_vec(F, lambda0, tol=tol)
            rho[idx] = metric_rho(r.B)
            sign[idx] = r.component_sign
            cond[idx] = r.conditioning
            resid[idx] = r.residual
        except MinkDPWError as exc:
            failed[idx] = True
            errors[idx] = f"{type(exc).__name__}: {exc}"
            cache[idx] = X
    if grid.kind == "polar":
        for arr in (pts, nrm, rho, sign, cond, resid, failed):
            arr[0, 1:] = arr[0, 0]
        if failed[0, 0]:
            for j in range(1, shape[1]):
                cache[(0, j)] = cache[(0, 0)]
                errors[(0, j)] = errors[(0, 0)]

    # signed smooth proxy for the singular set: 1/N_x0 changes sign across it
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 1.0 / nrm[..., 2]
    grad = _gradient_norm(g, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.abs(g) / grad
    h = grid.step()

    near = np.zeros(shape, dtype=bool)         # sign flip or failure close by
    for a, b in _neighbours(shape, grid.kind == "polar"):
        if failed[a] or failed[b] or sign[a] != sign[b]:
            near[a] = near[b] = True
    seeds = near.copy()
    reach = int(np.ceil(tol.flag_width)) + 1
    for _ in range(reach):
        grown = seeds.copy()
        grown[1:] |= seeds[:-1]
        grown[:-1] |= seeds[1:]
        if grid.kind == "polar":
            grown |= np.roll(seeds, 1, axis=1) | np.roll(seeds, -1, axis=1)
        else:
            grown[:, 1:] |= seeds[:, :-1]
            grown[:, :-1] |= seeds[:, 1:]
        seeds = grown
    flagged = failed | (seeds & (np.nan_to_num(dist, nan=np.inf) < tol.flag_width * h))

    # classify flagged vertices from the rho trend of their neighbourhood
    flag_class = np.full(shape, "", dtype=object)
    trend_info = {}
    ok = ~failed & np.isfinite(rho) & np.isfinite(g) & (np.abs(g) > 0)
    n1, n2 = shape
    for idx in zip(*np.nonzero(flagged)):
        i, j = idx
        ii = np.arange(max(0, i - trend_radius), min(n1, i + trend_radius + 1))
        if grid.kind == "polar":
            jj = np.arange(j - trend_radius, j + trend_radius + 1) % n2
        else:
            jj = np.arange(max(0, j - trend_radius), min(n2, j + trend_radius + 1))
        sub = np.ix_(ii, jj)
        m = ok[sub]
        samples = np.stack([np.abs(g[sub][m]), rho[sub][m]], axis=-1)
        variant, slope, count = classify_trend(samples, tol)
        flag_class[idx] = variant
        trend_info[(int(i), int(j))] = (slope, count)

    # failed vertices: canonical recognition, trend, and the extended formula
    for idx in cache:
        X = cache[idx]
        hit = canonical_small_cell(X)
        if hit is not None and hit[0] in (1, 2):
            cls = CellClass(f"P{hit[0]}", {"route": "canonical"})
        else:
            cls = CellClass(flag_class[idx] or "HigherOrUnknown", {"route": "rho_trend"})
        cell[idx] = cls.variant
        flag_class[idx] = cls.variant
        if aux is not None and cls.variant != "P2":
            try:
                pts[idx] = extended_sym(X, aux, lambda0, H, tol=tol, check_stabilizer=False)
                extended[idx] = True
            except MinkDPWError as exc:
                errors[idx] += f"; extended: {type(exc).__name__}"

    with np.errstate(divide="ignore", invalid="ignore"):
        u = 2 * np.log(rho)
    diagnostics = {
        "max_det_drift": float(np.max(ff.det_drift)),
        "max_tail": float(np.max(ff.tail)),
        "max_twist_defect": float(np.max(ff.twist_defect)),
        "failed": int(failed.sum()), "flagged": int(flagged.sum()),
        "grid_step": h, "flag_width": tol.flag_width,
        "errors": {f"{i},{j}": e for (i, j), e in sorted(errors.items())},
        "trend": {f"{i},{j}": v for (i, j), v in sorted(trend_info.items())},
        "seconds": time.perf_counter() - t0,
        "convention": convention,
    }
    return SurfaceMesh(grid, complex(lambda0), float(H), Z, pts, nrm, rho, u, cell, sign, flagged,
                       flag_class, cond, resid, extended, potential=P, diagnostics=diagnostics)
