"""Finite-difference differential geometry on finished meshes.

Everything here reads only the fields of a :class:`SurfaceMesh` (points,
normals, ``u``, flags, grid and the potential's metadata), so the checks
are independent of how the mesh was produced.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DegenerateMetric, DomainNotSymmetric, InsufficientNeighborhood, NotSmyth
from .loopcore import minkowski_coords, minkowski_dot, minkowski_matrix


@dataclass
class CheckEntry:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)
    spacing: tuple = ()
    excluded: int = 0

    def add(self, name, max_residual, tolerance, **detail) -> CheckEntry:
        e = CheckEntry(name, float(max_residual), float(tolerance),
                       bool(np.isfinite(max_residual) and max_residual <= tolerance), detail)
        self.entries.append(e)
        return e

    def extend(self, other: "ValidationReport"):
        self.entries.extend(other.entries)
        self.excluded = max(self.excluded, other.excluded)
        self.spacing = self.spacing or other.spacing
        return self

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_json(self) -> dict:
        return {"passed": self.passed, "spacing": list(self.spacing), "excluded": self.excluded,
                "checks": [asdict(e) for e in self.entries]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = [f"{'PASS' if e.passed else 'FAIL'}  {e.name}: {e.max_residual:.3e} (tol {e.tolerance:.1e})"
                 for e in self.entries]
        lines.append(f"excluded vertices: {self.excluded}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# stencils


def _periodic(mesh) -> bool:
    return mesh.grid.kind == "polar"


def _good(mesh) -> np.ndarray:
    ok = (mesh.cell == "BigCell") & ~mesh.flagged & np.isfinite(mesh.points).all(axis=-1)
    return ok


def _stencil_mask(ok: np.ndarray, periodic: bool, skip_center: bool, width: int = 1) -> np.ndarray:
    """Vertices whose full ``(2 width + 1)``-square neighbourhood is valid and interior."""
    m = ok.copy()
    for di in range(-width, width + 1):
        for dj in range(-width, width + 1):
            m &= np.roll(np.roll(ok, -di, axis=0), -dj, axis=1)
    m[:width] = m[-width:] = False
    if not periodic:
        m[:, :width] = m[:, -width:] = False
    if skip_center:
        m[:width + 1] = False
    return m


def _sh(f, k, axis):
    return np.roll(f, -k, axis=axis)


def _d(f, h, axis, order=2):
    if order == 4:
        return (-_sh(f, 2, axis) + 8 * _sh(f, 1, axis) - 8 * _sh(f, -1, axis) + _sh(f, -2, axis)) / (12 * h)
    return (_sh(f, 1, axis) - _sh(f, -1, axis)) / (2 * h)


def _dd(f, h, axis, order=2):
    if order == 4:
        return (-_sh(f, 2, axis) + 16 * _sh(f, 1, axis) - 30 * f + 16 * _sh(f, -1, axis)
                - _sh(f, -2, axis)) / (12 * h ** 2)
    return (_sh(f, 1, axis) - 2 * f + _sh(f, -1, axis)) / h ** 2


def _mixed(f, hs, ht, order=2):
    return _d(_d(f, hs, 0, order), ht, 1, order)


def _to_xy(mesh, Ds, Dt):
    """Convert first derivatives in grid parameters to z-plane x, y."""
    if mesh.grid.kind == "rect":
        return Ds, Dt
    r = mesh.grid.axes[0][:, None]
    th = mesh.grid.axes[1][None, :]
    c, s = np.cos(th), np.sin(th)
    with np.errstate(divide="ignore", invalid="ignore"):
        Dt_r = Dt / r[..., None] if Ds.ndim == 3 else Dt / r
    if Ds.ndim == 3:
        c, s = c[..., None], s[..., None]
    return c * Ds - s * Dt_r, s * Ds + c * Dt_r


def fundamental_forms(mesh, min_vertices: int = 1, order: int = 4) -> dict:
    """First and second fundamental forms in the grid parameters.

    Returns arrays ``E, F, G, L, M, N`` (nan outside ``mask``) together
    with ``mask``.  Second-form entries use the stored unit normal.
    ``order`` selects second- or fourth-order centered differences.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    hs, ht = mesh.grid.spacing()
    f = np.nan_to_num(mesh.points)
    nrm = np.nan_to_num(mesh.normals)
    mask = _stencil_mask(_good(mesh), _periodic(mesh), _periodic(mesh), order // 2)
    if mask.sum() < min_vertices:
        raise InsufficientNeighborhood("no interior vertex with a valid neighbourhood")
    fs, ft = _d(f, hs, 0, order), _d(f, ht, 1, order)
    fss, ftt, fst = _dd(f, hs, 0, order), _dd(f, ht, 1, order), _mixed(f, hs, ht, order)
    out = {"E": minkowski_dot(fs, fs), "F": minkowski_dot(fs, ft), "G": minkowski_dot(ft, ft),
           "L": minkowski_dot(fss, nrm), "M": minkowski_dot(fst, nrm), "N": minkowski_dot(ftt, nrm)}
    for k in out:
        out[k] = np.where(mask, out[k], np.nan)
    if np.all(np.abs(out["E"][mask]) < 1e-300):
        raise InsufficientNeighborhood("all fundamental-form entries vanish")
    out["mask"] = mask
    out["f_s"], out["f_t"] = fs, ft
    return out


def mean_curvature(mesh, forms: dict | None = None, det_tol: float = 1e-12) -> np.ndarray:
    ff = forms or fundamental_forms(mesh)
    E, F, G, L, M, N = (ff[k] for k in "EFGLMN")
    det = E * G - F * F
    m = ff["mask"]
    scale = np.nanmax(np.abs(E[m])) ** 2 if m.any() else 1.0
    if np.any(det[m] < det_tol * scale):
        raise DegenerateMetric("first fundamental form is degenerate at an interior vertex")
    # sign fixed so that the cylinder with normal F e3 F^-1 has H > 0
    return (E * N - 2 * F * M + G * L) / (2 * det)


def mean_curvature_residual(mesh, H_target: float | None = None, tolerance: float = 1e-4,
                            report: ValidationReport | None = None, order: int = 4) -> CheckEntry:
    report = report if report is not None else ValidationReport()
    H_target = mesh.H if H_target is None else H_target
    ff = fundamental_forms(mesh, order=order)
    Hs = mean_curvature(mesh, ff)
    res = np.abs(Hs - H_target)[ff["mask"]]
    return report.add("mean_curvature", np.max(res), tolerance, vertices=int(res.size),
                      H_target=float(H_target))


def conformality_residual(mesh, tolerance: float = 1e-3, report=None, order: int = 4) -> CheckEntry:
    """Relative size of ``<f_x,f_x> - <f_y,f_y>`` and ``<f_x,f_y>``."""
    report = report if report is not None else ValidationReport()
    ff = fundamental_forms(mesh, order=order)
    fx, fy = _to_xy(mesh, ff["f_s"], ff["f_t"])
    E, F, G = minkowski_dot(fx, fx), minkowski_dot(fx, fy), minkowski_dot(fy, fy)
    m = ff["mask"]
    res = (np.maximum(np.abs(E - G), 2 * np.abs(F)) / (0.5 * (E + G)))[m]
    return report.add("conformality", np.max(res), tolerance, vertices=int(res.size))


def tangency_residual(mesh, tolerance: float = 1e-8, report=None, order: int = 4) -> CheckEntry:
    report = report if report is not None else ValidationReport()
    ff = fundamental_forms(mesh, order=order)
    nrm = mesh.normals
    m = ff["mask"]
    scale = np.sqrt(np.abs(ff["E"]))
    r = np.maximum(np.abs(minkowski_dot(nrm, ff["f_s"])), np.abs(minkowski_dot(nrm, ff["f_t"])))
    res = (r / scale)[m]
    return report.add("tangency", np.max(res), tolerance, vertices=int(res.size))


def metric_identity_residual(mesh, tolerance: float = 1e-4, report=None, order: int = 4) -> CheckEntry:
    """``<f_x, f_x> = 4 rho^4 |dw/dz|^2`` relative error."""
    report = report if report is not None else ValidationReport()
    P = mesh.potential
    ff = fundamental_forms(mesh, order=order)
    fx, _ = _to_xy(mesh, ff["f_s"], ff["f_t"])
    E = minkowski_dot(fx, fx)
    with np.errstate(invalid="ignore"):
        expect = 4 * mesh.rho ** 4 * np.abs(P.dw_dz(mesh.z)) ** 2
    m = ff["mask"]
    res = np.abs(E / expect - 1)[m]
    return report.add("metric_identity", np.max(res), tolerance, vertices=int(res.size))


def laplacian(mesh, f: np.ndarray, order: int = 4) -> np.ndarray:
    """Centered-difference z-plane Laplacian of a scalar field on the mesh grid."""
    hs, ht = mesh.grid.spacing()
    if mesh.grid.kind == "rect":
        return _dd(f, hs, 0, order) + _dd(f, ht, 1, order)
    r = mesh.grid.axes[0][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return _dd(f, hs, 0, order) + _d(f, hs, 0, order) / r + _dd(f, ht, 1, order) / r ** 2


def gauss_residual(mesh, tolerance: float = 1e-3, report=None, order: int = 4) -> CheckEntry:
    """Residual of ``u_ww* - H^2 e^{2u} + |Q|^2 e^{-2u} / 4`` in the conformal coordinate ``w``."""
    report = report if report is not None else ValidationReport()
    P = mesh.potential
    if P is None:
        raise NotSmyth("mesh carries no potential")
    H = mesh.H
    u = np.nan_to_num(mesh.u)
    mask = _stencil_mask(_good(mesh) & np.isfinite(mesh.u), _periodic(mesh), _periodic(mesh), order // 2)
    if not mask.any():
        raise InsufficientNeighborhood("no interior vertex for the Laplacian")
    lap = laplacian(mesh, u, order)
    dw = np.abs(P.dw_dz(mesh.z)) ** 2
    Q = np.abs(P.hopf_q()(mesh.z)) ** 2
    res = lap / (4 * dw) - H ** 2 * np.exp(2 * u) + 0.25 * Q * np.exp(-2 * u)
    res = np.abs(res[mask])
    return report.add("gauss_equation", np.max(res), tolerance, vertices=int(res.size))


# ---------------------------------------------------------------------------
# radial reductions


def _smyth_meta(mesh):
    P = mesh.potential
    meta = getattr(P, "metadata", None) or {}
    if "smyth" not in meta:
        raise NotSmyth("mesh potential carries no Smyth metadata")
    return float(meta["smyth"]["c"]), int(meta["smyth"]["k"])


def radial_profile(mesh, radii=None):
    """Circle averages of ``u`` and the largest deviation from them.

    Polar meshes centred at 0 use their own rings; rectangular meshes are
    sampled on circles by bilinear interpolation.  Returns
    ``(r, mean, deviation, valid)``.
    """
    g = mesh.grid
    if g.kind == "polar":
        if abs(g.z0) > 1e-14:
            raise DomainNotSymmetric("polar grid is not centred at the origin")
        ok = _good(mesh) & np.isfinite(mesh.u)
        valid = ok.all(axis=1)
        u = mesh.u
        mean = np.nanmean(u, axis=1)
        dev = np.nanmax(np.abs(u - mean[:, None]), axis=1)
        return g.axes[0].copy(), mean, dev, valid
    x, y = g.axes
    u = np.where(_good(mesh), mesh.u, np.nan)
    interp = RegularGridInterpolator((x, y), u, bounds_error=False, fill_value=np.nan)
    if radii is None:
        rmax = min(abs(x[0]), abs(x[-1]), abs(y[0]), abs(y[-1]))
        radii = np.linspace(0, rmax, x.size // 2)
    nt = 4 * x.size
    th = 2 * np.pi * np.arange(nt) / nt
    pts = np.stack([np.outer(radii, np.cos(th)), np.outer(radii, np.sin(th))], axis=-1)
    vals = interp(pts)
    valid = np.isfinite(vals).all(axis=1)
    mean = np.mean(vals, axis=1)
    dev = np.max(np.abs(vals - mean[:, None]), axis=1)
    return np.asarray(radii), mean, dev, valid


def rotational_residual(mesh, tolerance: float = 1e-6, report=None) -> CheckEntry:
    report = report if report is not None else ValidationReport()
    r, mean, dev, valid = radial_profile(mesh)
    return report.add("rotational_metric", np.max(dev[valid]), tolerance, rings=int(valid.sum()))


def painleve_profile_residual(r, u, c: float, k: int) -> np.ndarray:
    """Residual of the radial sinh-Gordon reduction at interior radii.

    With ``mu = (4 / (k + 2)) sqrt(c) r^{(k+2)/2}`` and
    ``v = u - log(c)/2 - (k/2) log r`` the equation is
    ``v_mu mu + v_mu / mu - 2 sinh(2 v) = 0``.  Since ``mu`` is a power of
    ``r`` and ``log r`` is harmonic, ``v_mu mu + v_mu / mu`` equals
    ``(u_rr + u_r / r) / mu_r^2`` exactly; ``u_rr`` and ``u_r`` are
    second-order centered differences on a uniform radial grid.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    h = r[1] - r[0]
    rr = r[1:-1]
    ur = (u[2:] - u[:-2]) / (2 * h)
    urr = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    v = u[1:-1] - 0.5 * np.log(c) - 0.5 * k * np.log(rr)
    out = np.full(r.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:-1] = (urr + ur / rr) / (4 * c * rr ** k) - 2 * np.sinh(2 * v)
    return out


def painleve_residual(mesh, c: float | None = None, k: int | None = None, tolerance: float = 1e-3,
                      r_min: float | None = None, report=None) -> CheckEntry:
    """Max Painleve III residual of the ring-averaged ``u`` over ``r_min < r``.

    The centered differences are divided by ``mu_r^2 ~ r^k`` and carry a
    ``u_r / r`` term, so the radii next to the centre lose one order.  The
    default ``r_min`` is a fixed fraction (0.2) of the outer radius, which
    keeps the sampled interval independent of the grid step.
    """
    report = report if report is not None else ValidationReport()
    if c is None or k is None:
        c, k = _smyth_meta(mesh)
    r, mean, dev, valid = radial_profile(mesh)
    if r_min is None:
        r_min = 0.2 * float(r[-1])
    res = painleve_profile_residual(r, mean, c, k)
    use = valid.copy()
    use[1:-1] &= valid[:-2] & valid[2:]
    use &= (r > r_min) & np.isfinite(res)
    use[0] = False
    if not use.any():
        raise InsufficientNeighborhood("no valid interior radius")
    rs = np.abs(res[use])
    return report.add("painleve_III", np.max(rs), tolerance, radii=int(use.sum()), r_min=float(r_min))


# ---------------------------------------------------------------------------
# symmetries


def reflection_residual(mesh, order: int, tolerance: float = 1e-5, report=None) -> CheckEntry:
    """Compare ``f(R_l z)`` with ``-A_l conj(f(z)) A_l^-1`` for ``R_l z = e^{2 pi i l / order} conj(z)``."""
    report = report if report is not None else ValidationReport()
    g = mesh.grid
    if g.kind != "polar" or abs(g.z0) > 1e-14:
        raise DomainNotSymmetric("reflection check needs a polar grid centred at 0")
    nt = g.shape[1]
    if nt % order:
        raise DomainNotSymmetric(f"{nt} angular samples are not divisible by {order}")
    if abs(mesh.lambda0.imag) > 1e-12:
        raise DomainNotSymmetric("reflection relation is stated for real lambda0")
    ok = _good(mesh)
    Fm = minkowski_matrix(np.nan_to_num(mesh.points))
    worst = 0.0
    per = []
    for ell in range(order):
        a = np.exp(1j * np.pi * ell / order)
        A = np.diag([a, 1 / a])
        Ai = np.diag([1 / a, a])
        jmap = (ell * nt // order - np.arange(nt)) % nt
        img = -A @ np.conj(Fm) @ Ai
        target = Fm[:, jmap]
        both = ok & ok[:, jmap]
        d = np.linalg.norm(minkowski_coords(target) - minkowski_coords(img), axis=-1)[both]
        m = float(np.max(d)) if d.size else np.nan
        per.append(m)
        worst = max(worst, m)
    return report.add(f"reflection_{order}", worst, tolerance, per_plane=per)


def translation_residual(mesh, tolerance: float = 1e-8, report=None) -> CheckEntry:
    """Orbit flatness of a translation-invariant surface along the grid's second axis.

    Consecutive differences ``f(x, y + dy) - f(x, y)`` must be the same
    vector for every ``x`` and point along ``x1``.
    """
    report = report if report is not None else ValidationReport()
    if mesh.grid.kind != "rect":
        raise DomainNotSymmetric("translation check needs a rectangular grid")
    ok = _good(mesh)
    D = mesh.points[:, 1:] - mesh.points[:, :-1]
    both = ok[:, 1:] & ok[:, :-1]
    ref = np.nanmean(np.where(both[..., None], D, np.nan), axis=0)
    dev = np.linalg.norm(D - ref[None], axis=-1)[both]
    off_axis = np.abs(D[..., 1:])[both].max() if both.any() else np.nan
    return report.add("translation_x1", max(np.max(dev), off_axis), tolerance)


def symmetry_report(mesh, order: int | None = None, kind: str = "reflection",
                    tolerance: float | None = None) -> ValidationReport:
    rep = ValidationReport(spacing=mesh.grid.spacing(), excluded=int((~_good(mesh)).sum()))
    if kind == "reflection":
        reflection_residual(mesh, order, 1e-5 if tolerance is None else tolerance, rep)
    elif kind == "rotational":
        rotational_residual(mesh, 1e-6 if tolerance is None else tolerance, rep)
    elif kind == "translation":
        translation_residual(mesh, 1e-8 if tolerance is None else tolerance, rep)
    else:
        raise ValueError(f"unknown symmetry kind {kind!r}")
    return rep


def widen_exclusion(mesh, margin: int):
    """Copy of ``mesh`` with ``flagged`` grown by ``margin`` grid steps around every bad vertex.

    Finite differences next to a singular set see the metric blow up; the
    margin keeps the checks on vertices whose stencils stay clear of it.
    """
    if margin <= 0:
        return mesh
    bad = ~_good(mesh)
    grown = bad.copy()
    periodic = _periodic(mesh)
    for di in range(-margin, margin + 1):
        for dj in range(-margin, margin + 1):
            sh = _shift(bad, di, 0, False)
            grown |= _shift(sh, dj, 1, periodic)
    return replace(mesh, flagged=mesh.flagged | grown)


def _shift(a, k, axis, periodic):
    if periodic:
        return np.roll(a, k, axis=axis)
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis], dst[axis] = slice(None, -k), slice(k, None)
    elif k < 0:
        src[axis], dst[axis] = slice(-k, None), slice(None, k)
    out[tuple(dst)] = a[tuple(src)]
    return out


def validate_mesh(mesh, checks=("mean_curvature", "gauss"), tolerances: dict | None = None,
                  fd_order: int = 4, margin: int = 0) -> ValidationReport:
    """Run a set of named checks and collect them in one report.

    ``margin`` excludes vertices within that many grid steps of a flagged
    or undefined vertex (see :func:`widen_exclusion`).
    """
    mesh = widen_exclusion(mesh, margin)
    tol = {"mean_curvature": 1e-3, "gauss": 1e-3, "conformality": 1e-3, "tangency": 1e-6,
           "metric": 1e-3, "rotational": 1e-6, "painleve": 1e-3, "reflection": 1e-5,
           "translation": 1e-8}
    tol.update(tolerances or {})
    rep = ValidationReport(spacing=mesh.grid.spacing(), excluded=int((~_good(mesh)).sum()))
    for name in checks:
        if name == "mean_curvature":
            mean_curvature_residual(mesh, tolerance=tol[name], report=rep, order=fd_order)
        elif name == "gauss":
            gauss_residual(mesh, tol[name], rep, fd_order)
        elif name == "conformality":
            conformality_residual(mesh, tol[name], rep, fd_order)
        elif name == "tangency":
            tangency_residual(mesh, tol[name], rep, fd_order)
        elif name == "metric":
            metric_identity_residual(mesh, tol[name], rep, fd_order)
        elif name == "rotational":
            rotational_residual(mesh, tol[name], rep)
        elif name == "painleve":
            painleve_residual(mesh, tolerance=tol[name], report=rep)
        elif name == "reflection":
            c, k = _smyth_meta(mesh)
            reflection_residual(mesh, k + 2, tol[name], rep)
        elif name == "translation":
            translation_residual(mesh, tol[name], rep)
        else:
            raise ValueError(f"unknown check {name!r}")
    return rep
