"""Holomorphic potentials and integration of ``dphi = phi xi`` over a grid.

A potential is ``xi = sum_i A_i(z) lam^i dz`` with ``i`` in ``[-1, M]``,
each ``A_i`` a trace-free 2x2 matrix of polynomials in ``z``.  Twisting
forces diagonal entries onto even powers and off-diagonal entries onto
odd powers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .config import DEFAULT, Tolerances
from .errors import BadGrid, BandOverflow, DetDrift, InvalidPotential
from .loopcore import LoopBandPolicy, MatrixLoop, omega
from .rkf import rkf45


class SchemaError(InvalidPotential):
    pass


class ParityViolation(InvalidPotential):
    pass


class TraceViolation(InvalidPotential):
    pass


class VanishingA(InvalidPotential):
    def __init__(self, z):
        super().__init__(f"a_-1 vanishes at z = {z}")
        self.z = z


@dataclass
class Potential:
    H: float
    entries: dict                      # (row, col, power) -> complex coefficients in z
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {k: np.atleast_1d(np.asarray(v, dtype=complex)) for k, v in self.entries.items()}
        self.validate()

    @property
    def band(self) -> tuple:
        pw = [k[2] for k in self.entries] or [-1]
        return (-1, max(max(pw), -1))

    def validate(self):
        if not np.isfinite(self.H) or self.H == 0:
            raise SchemaError("H must be a nonzero real")
        for (r, c, j), p in self.entries.items():
            if r not in (0, 1) or c not in (0, 1):
                raise SchemaError(f"bad entry index ({r}, {c})")
            if j < -1:
                raise SchemaError(f"power {j} below -1 in entry ({r}, {c})")
            if not np.any(p):
                continue
            if (r == c) != (j % 2 == 0):
                raise ParityViolation(f"entry ({r}, {c}) at power {j} breaks twisting parity")
        for j in range(self.band[0], self.band[1] + 1):
            d0 = self.entries.get((0, 0, j))
            d1 = self.entries.get((1, 1, j))
            s = npoly.polyadd(d0 if d0 is not None else [0], d1 if d1 is not None else [0])
            if np.any(np.abs(s) > 1e-14):
                raise TraceViolation(f"trace of A_{j} is nonzero")
        if not np.any(self.entries.get((0, 1, -1), [0])):
            raise VanishingA("everywhere")

    def poly(self, r, c, j) -> np.ndarray:
        return self.entries.get((r, c, j), np.zeros(1, dtype=complex))

    def coefficients(self, z) -> np.ndarray:
        """``A_i(z)`` for all powers in the band; shape ``z.shape + (M + 2, 2, 2)``."""
        z = np.asarray(z, dtype=complex)
        lo, hi = self.band
        out = np.zeros(z.shape + (hi - lo + 1, 2, 2), dtype=complex)
        for (r, c, j), p in self.entries.items():
            out[..., j - lo, r, c] = npoly.polyval(z, p)
        return out

    def a_minus1(self, z):
        return npoly.polyval(np.asarray(z, dtype=complex), self.poly(0, 1, -1))

    def b_minus1(self, z):
        return npoly.polyval(np.asarray(z, dtype=complex), self.poly(1, 0, -1))

    def check_a(self, z, tol: float = 1e-12):
        a = np.abs(self.a_minus1(z))
        if np.any(a <= tol):
            raise VanishingA(np.asarray(z).ravel()[np.argmin(a.ravel())])

    def hopf_q(self):
        """``z -> -2 H b_-1(z) / a_-1(z)``."""
        def q(z):
            a = self.a_minus1(z)
            if np.any(np.abs(a) == 0):
                raise VanishingA(z)
            return -2 * self.H * self.b_minus1(z) / a
        return q

    def dw_dz(self, z):
        """Derivative of the coordinate ``w = (i/H) int a_-1 dz``."""
        return 1j / self.H * self.a_minus1(z)

    def to_json(self) -> dict:
        ents = [{"row": r, "col": c, "power": j, "poly": [[float(v.real), float(v.imag)] for v in p]}
                for (r, c, j), p in sorted(self.entries.items())]
        return {"name": self.name, "H": self.H, "lambda_band": list(self.band),
                "entries": ents, "metadata": self.metadata}


def _complex_list(x):
    a = np.asarray(x, dtype=float)
    if a.ndim == 1 and a.size == 2:
        return complex(a[0], a[1])
    return a[..., 0] + 1j * a[..., 1]


def parse_potential(doc) -> Potential:
    """Validate a potential document (dict, JSON text or path)."""
    if isinstance(doc, str):
        if doc.lstrip().startswith("{"):
            doc = json.loads(doc)
        else:
            with open(doc) as fh:
                doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("potential document must be an object")
    for key in ("H", "entries"):
        if key not in doc:
            raise SchemaError(f"missing field '{key}'")
    entries: dict = {}
    for k, e in enumerate(doc["entries"]):
        try:
            r, c, j = int(e["row"]), int(e["col"]), int(e["power"])
            poly = np.array([complex(p[0], p[1]) for p in e["poly"]])
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise SchemaError(f"entry {k}: {exc}") from exc
        key = (r, c, j)
        entries[key] = npoly.polyadd(entries[key], poly) if key in entries else poly
    band = doc.get("lambda_band")
    if band is not None:
        if band[0] != -1:
            raise SchemaError("lambda_band must start at -1")
        if any(j > band[1] for (_, _, j) in entries):
            raise SchemaError("entry power outside lambda_band")
    return Potential(float(doc["H"]), entries, name=doc.get("name", ""),
                     metadata=dict(doc.get("metadata", {})))


def initial_loop(init) -> MatrixLoop:
    if init is None or init == "identity":
        return MatrixLoop.identity()
    if init == "omega1":
        return omega(1)
    if init == "omega2":
        return omega(2)
    if isinstance(init, dict):
        return MatrixLoop.from_json(init)
    raise SchemaError(f"unknown initial condition {init!r}")


# ---------------------------------------------------------------------------
# grids


@dataclass
class GridSpec:
    """Rectangular or polar sampling grid with the integration base point.

    For ``kind="rect"`` the vertices are ``axes[0][i] + 1j * axes[1][j]``
    and ``z0`` must be one of them.  For ``kind="polar"`` the vertices are
    ``z0 + axes[0][i] * exp(1j * axes[1][j])`` with ``axes[0][0] = 0``.
    """

    kind: str
    axes: tuple
    z0: complex = 0j
    rtol: float = 1e-11
    atol: float = 1e-13
    max_step: float = np.inf

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if self.kind not in ("rect", "polar"):
            raise BadGrid(f"unknown grid kind {self.kind}")
        if any(a.size < 2 for a in self.axes):
            raise BadGrid("need at least two samples per axis")
        if self.kind == "rect":
            i0, j0 = self.base_index()
            zz = self.axes[0][i0] + 1j * self.axes[1][j0]
            if abs(zz - self.z0) > 1e-12 * max(1.0, abs(self.z0)):
                raise BadGrid(f"z0 = {self.z0} is not a grid vertex")
        else:
            if self.axes[0][0] != 0 or np.any(np.diff(self.axes[0]) <= 0):
                raise BadGrid("polar radii must start at 0 and increase")

    @classmethod
    def rect(cls, x, y, nx, ny, z0=0j, **kw):
        return cls("rect", (np.linspace(x[0], x[1], nx), np.linspace(y[0], y[1], ny)), complex(z0), **kw)

    @classmethod
    def polar(cls, radius, nr, ntheta, z0=0j, **kw):
        th = 2 * np.pi * np.arange(ntheta) / ntheta
        return cls("polar", (np.linspace(0, radius, nr), th), complex(z0), **kw)

    @classmethod
    def from_json(cls, domain: dict, grid: dict):
        z0 = _complex_list(domain.get("z0", [0, 0]))
        opts = {k: float(grid[k]) for k in ("rtol", "atol", "max_step") if k in grid}
        if domain.get("type", "rect") == "rect":
            return cls.rect(domain["x"], domain["y"], int(grid["nx"]), int(grid["ny"]), z0, **opts)
        if domain["type"] == "disk":
            return cls.polar(float(domain["radius"]), int(grid["nr"]), int(grid["ntheta"]), z0, **opts)
        raise SchemaError(f"unknown domain type {domain['type']}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "axes": [a.tolist() for a in self.axes],
                "z0": [self.z0.real, self.z0.imag]}

    @property
    def shape(self) -> tuple:
        return (self.axes[0].size, self.axes[1].size)

    def base_index(self) -> tuple:
        if self.kind == "polar":
            return (0, 0)
        return (int(np.argmin(np.abs(self.axes[0] - self.z0.real))),
                int(np.argmin(np.abs(self.axes[1] - self.z0.imag))))

    def vertices(self) -> np.ndarray:
        s, t = np.meshgrid(*self.axes, indexing="ij")
        if self.kind == "rect":
            return s + 1j * t
        return self.z0 + s * np.exp(1j * t)

    def spacing(self) -> tuple:
        return tuple(float(np.mean(np.diff(a))) for a in self.axes)

    def step(self) -> float:
        """Largest Euclidean distance between neighbouring vertices along an axis."""
        if self.kind == "rect":
            return max(self.spacing())
        return max(self.spacing()[0], self.axes[0][-1] * self.spacing()[1])


# ---------------------------------------------------------------------------
# integration


@dataclass
class FrameField:
    grid: GridSpec
    coeffs: np.ndarray        # (n1, n2, nb, 2, 2)
    low: int
    det_drift: np.ndarray
    tail: np.ndarray
    twist_defect: np.ndarray

    def loop(self, i, j) -> MatrixLoop:
        return MatrixLoop(self.coeffs[i, j], self.low)


def _phi_times_A(phi, A, alo):
    """Product of windowed loops ``phi`` (batch, nb, 2, 2) and ``A`` (batch, nA, 2, 2)."""
    out = np.zeros_like(phi)
    nb = phi.shape[1]
    for i in range(A.shape[1]):
        s = alo + i
        if not np.any(A[:, i]):
            continue
        if s <= 0:
            out[:, :nb + s] += phi[:, -s:] @ A[:, i, None]
        else:
            out[:, s:] += phi[:, :nb - s] @ A[:, i, None]
    return out


def _window(P: Potential, phi0: MatrixLoop, policy: LoopBandPolicy) -> tuple:
    m = policy.max_band
    hi = m if P.band[1] > 0 or phi0.high > 0 else max(phi0.high, 0)
    return -m, hi


def integrate_path(P: Potential, phi0: np.ndarray, zs: np.ndarray, lo: int, rtol=1e-11, atol=1e-13,
                   max_step=np.inf, fixed_steps=None) -> np.ndarray:
    """Integrate along piecewise-linear paths through ``zs`` (batch, npts).

    ``phi0`` has shape (batch, nb, 2, 2).  Returns the states at every
    path node, shape (batch, npts, nb, 2, 2).
    """
    batch, npts = zs.shape
    out = np.empty((batch, npts) + phi0.shape[1:], dtype=complex)
    out[:, 0] = phi0
    y = phi0
    alo = P.band[0]
    for k in range(1, npts):
        za, dz = zs[:, k - 1], zs[:, k] - zs[:, k - 1]

        def f(t, y, za=za, dz=dz):
            A = P.coefficients(za + t * dz) * dz[:, None, None, None]
            return _phi_times_A(y, A, alo)

        y = rkf45(f, y, 0.0, 1.0, rtol=rtol, atol=atol, max_step=max_step, fixed_steps=fixed_steps)
        out[:, k] = y
    return out


def integrate_frame(P: Potential, grid: GridSpec, phi0: MatrixLoop | None = None,
                    policy: LoopBandPolicy = LoopBandPolicy(), tol: Tolerances = DEFAULT,
                    strict: bool = True, fixed_steps=None) -> FrameField:
    """Solve ``dphi = phi xi`` with ``phi(z0) = phi0`` at every grid vertex.

    Rectangular grids integrate along the row through ``z0`` and then up
    and down every column; polar grids integrate outward along each ray.
    """
    phi0 = MatrixLoop.identity() if phi0 is None else phi0
    lo, hi = _window(P, phi0, policy)
    if phi0.low < lo or phi0.high > hi:
        raise BandOverflow("initial loop does not fit in the working band")
    start = phi0.padded(lo, hi)
    Z = grid.vertices()
    n1, n2 = grid.shape
    nb = hi - lo + 1
    C = np.empty((n1, n2, nb, 2, 2), dtype=complex)
    kw = dict(rtol=grid.rtol, atol=grid.atol, max_step=grid.max_step, fixed_steps=fixed_steps)
    if grid.kind == "rect":
        i0, j0 = grid.base_index()
        C[i0, j0] = start
        row = Z[:, j0]
        for sl in (slice(i0, None), slice(i0, None, -1)):
            path = row[sl][None]
            if path.shape[1] > 1:
                C[sl, j0] = integrate_path(P, start[None], path, lo, **kw)[0]
        for sl in (slice(j0, None), slice(j0, None, -1)):
            paths = Z[:, sl]
            if paths.shape[1] > 1:
                C[:, sl] = integrate_path(P, C[:, j0], paths, lo, **kw)
    else:
        paths = Z.T                      # (ntheta, nr)
        res = integrate_path(P, np.broadcast_to(start, (n2,) + start.shape).copy(), paths, lo, **kw)
        C[:] = np.swapaxes(res, 0, 1)

    lam = np.exp(2j * np.pi * (np.arange(16) + 0.5) / 16)
    pw = lam[:, None] ** np.arange(lo, hi + 1)
    vals = np.einsum("lj,...jab->...lab", pw, C)
    det = vals[..., 0, 0] * vals[..., 1, 1] - vals[..., 0, 1] * vals[..., 1, 0]
    drift = np.max(np.abs(det - 1), axis=-1)
    norms = np.sqrt(np.sum(np.abs(C) ** 2, axis=(-1, -2)))
    tail = (norms[..., 0] + (norms[..., -1] if hi > max(phi0.high, 0) else 0)) / np.max(norms, axis=-1)
    odd = (np.arange(lo, hi + 1) % 2).astype(bool)
    diag_mask = np.array([[1, 0], [0, 1]], dtype=bool)
    bad = np.where(odd[:, None, None], diag_mask, ~diag_mask)
    twist = np.sqrt(np.sum(np.abs(C * bad) ** 2, axis=(-1, -2, -3))) / np.sqrt(np.sum(norms ** 2, axis=-1))
    if strict:
        if np.max(tail) > policy.tail_tol:
            raise BandOverflow(f"edge coefficient reached {np.max(tail):.2e} of the loop norm")
        if np.max(drift) > tol.det_drift_tol:
            raise DetDrift(f"|det phi - 1| reached {np.max(drift):.2e}")
    return FrameField(grid, C, lo, drift, tail, twist)
