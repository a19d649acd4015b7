"""Mesh files: OBJ and PLY geometry plus a JSON sidecar that round-trips a mesh."""
from __future__ import annotations

import json
import os

import numpy as np

from .potential import GridSpec, parse_potential

MESH_FORMAT = "minkdpw-mesh"
MESH_VERSION = 1


def _num(x: float) -> str:
    return f"{float(x):.15g}"


def _faces(mesh, policy: str = "hole"):
    """Triangles over grid quads, skipping undefined vertices and (for ``hole``) flagged ones."""
    n1, n2 = mesh.shape
    finite = np.isfinite(mesh.points).all(axis=-1)
    usable = finite & ~mesh.flagged if policy == "hole" else finite
    polar = mesh.grid.kind == "polar"

    def vid(i, j):
        j %= n2
        return (0, 0) if polar and i == 0 else (i, j)

    tris = []
    jmax = n2 if polar else n2 - 1
    for i in range(n1 - 1):
        for j in range(jmax):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            for tri in ((a, b, c), (a, c, d)):
                if len(set(tri)) < 3:
                    continue
                if all(usable[v] for v in tri):
                    tris.append(tri)
    return tris


def _vertex_table(mesh, tris, clamp_radius=None):
    """Vertices referenced by any face (or all finite ones) in grid order, with index map."""
    finite = np.isfinite(mesh.points).all(axis=-1)
    n1, n2 = mesh.shape
    polar = mesh.grid.kind == "polar"
    order = []
    index = {}
    for i in range(n1):
        for j in range(n2):
            if polar and i == 0 and j > 0:
                continue
            if finite[i, j]:
                index[(i, j)] = len(order) + 1
                order.append((i, j))
    pts = np.array([mesh.points[v] for v in order]).reshape(-1, 3)
    if clamp_radius is not None and pts.size:
        nrm = np.linalg.norm(pts, axis=1, keepdims=True)
        pts = np.where(nrm > clamp_radius, pts * clamp_radius / nrm, pts)
    nrms = np.array([mesh.normals[v] for v in order]).reshape(-1, 3)
    return order, index, pts, nrms


def write_obj(mesh, path, policy: str = "hole", clamp_radius=None) -> str:
    tris = _faces(mesh, policy)
    order, index, pts, nrms = _vertex_table(mesh, tris, clamp_radius)
    lines = [f"# minkdpw mesh {mesh.shape[0]}x{mesh.shape[1]} H={_num(mesh.H)}"]
    lines += [f"v {_num(p[0])} {_num(p[1])} {_num(p[2])}" for p in pts]
    lines += [f"vn {_num(n[0])} {_num(n[1])} {_num(n[2])}" for n in nrms]
    for t in tris:
        k = [index[v] for v in t]
        lines.append(f"f {k[0]}//{k[0]} {k[1]}//{k[1]} {k[2]}//{k[2]}")
    text = "\n".join(lines) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text


def write_ply(mesh, path, policy: str = "hole", clamp_radius=None) -> str:
    tris = _faces(mesh, policy)
    order, index, pts, nrms = _vertex_table(mesh, tris, clamp_radius)
    head = ["ply", "format ascii 1.0", f"element vertex {len(order)}",
            "property double x", "property double y", "property double z",
            "property double nx", "property double ny", "property double nz",
            f"element face {len(tris)}", "property list uchar int vertex_indices", "end_header"]
    body = [" ".join(_num(v) for v in (*p, *n)) for p, n in zip(pts, nrms)]
    body += ["3 " + " ".join(str(index[v] - 1) for v in t) for t in tris]
    text = "\n".join(head + body) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text


def _opt(x):
    return None if not np.isfinite(x) else float(x)


def mesh_to_json(mesh) -> dict:
    n1, n2 = mesh.shape
    verts = []
    for i in range(n1):
        for j in range(n2):
            p, n = mesh.points[i, j], mesh.normals[i, j]
            verts.append({
                "i": i, "j": j,
                "z": [float(mesh.z[i, j].real), float(mesh.z[i, j].imag)],
                "point": None if not np.isfinite(p).all() else [float(v) for v in p],
                "normal": None if not np.isfinite(n).all() else [float(v) for v in n],
                "rho": _opt(mesh.rho[i, j]), "u": _opt(mesh.u[i, j]),
                "cell": str(mesh.cell[i, j]), "component_sign": int(mesh.component_sign[i, j]),
                "flagged": bool(mesh.flagged[i, j]), "flag_class": str(mesh.flag_class[i, j]),
                "extended": bool(mesh.extended[i, j]),
                "residuals": {"conditioning": _opt(mesh.conditioning[i, j]),
                              "reconstruction": _opt(mesh.residual[i, j])},
            })
    diag = {k: v for k, v in mesh.diagnostics.items() if k not in ("seconds",)}
    return {"format": MESH_FORMAT, "version": MESH_VERSION,
            "lambda0": [mesh.lambda0.real, mesh.lambda0.imag], "H": mesh.H,
            "grid": mesh.grid.to_json(), "shape": [n1, n2],
            "potential": None if mesh.potential is None else mesh.potential.to_json(),
            "diagnostics": _jsonable(diag), "vertices": verts}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return _opt(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps_mesh(mesh) -> str:
    return json.dumps(mesh_to_json(mesh), sort_keys=True, indent=1, allow_nan=False)


def mesh_from_json(doc):
    """Rebuild a :class:`SurfaceMesh` from :func:`mesh_to_json` output (dict, text or path)."""
    from .symsurface import SurfaceMesh
    if isinstance(doc, str):
        if doc.lstrip().startswith("{"):
            doc = json.loads(doc)
        else:
            with open(doc) as fh:
                doc = json.load(fh)
    if doc.get("format") != MESH_FORMAT:
        raise ValueError("not a mesh document")
    g = doc["grid"]
    grid = GridSpec(g["kind"], tuple(np.array(a) for a in g["axes"]), complex(*g["z0"]))
    n1, n2 = doc["shape"]
    shape = (n1, n2)
    pts = np.full(shape + (3,), np.nan)
    nrm = np.full(shape + (3,), np.nan)
    rho, u = np.full(shape, np.nan), np.full(shape, np.nan)
    cell = np.full(shape, "BigCell", dtype=object)
    fcls = np.full(shape, "", dtype=object)
    sign = np.zeros(shape, dtype=int)
    flagged = np.zeros(shape, dtype=bool)
    ext = np.zeros(shape, dtype=bool)
    cond, res = np.full(shape, np.nan), np.full(shape, np.nan)
    Z = np.zeros(shape, dtype=complex)
    for v in doc["vertices"]:
        k = (v["i"], v["j"])
        Z[k] = complex(*v["z"])
        if v["point"] is not None:
            pts[k] = v["point"]
        if v["normal"] is not None:
            nrm[k] = v["normal"]
        rho[k] = np.nan if v["rho"] is None else v["rho"]
        u[k] = np.nan if v["u"] is None else v["u"]
        cell[k], fcls[k] = v["cell"], v["flag_class"]
        sign[k], flagged[k], ext[k] = v["component_sign"], v["flagged"], v["extended"]
        r = v["residuals"]
        cond[k] = np.nan if r["conditioning"] is None else r["conditioning"]
        res[k] = np.nan if r["reconstruction"] is None else r["reconstruction"]
    P = None if doc.get("potential") is None else parse_potential(doc["potential"])
    return SurfaceMesh(grid, complex(*doc["lambda0"]), float(doc["H"]), Z, pts, nrm, rho, u, cell,
                       sign, flagged, fcls, cond, res, ext, potential=P,
                       diagnostics=doc.get("diagnostics", {}))


def export_mesh(mesh, path, fmt: str | None = None, policy: str = "hole", clamp_radius=None) -> str:
    """Write ``mesh`` as OBJ, PLY or JSON; the format defaults to the file extension."""
    if mesh.points.size == 0:
        raise ValueError("empty mesh")
    fmt = (fmt or os.path.splitext(str(path))[1].lstrip(".")).lower()
    if fmt == "obj":
        return write_obj(mesh, path, policy, clamp_radius)
    if fmt == "ply":
        return write_ply(mesh, path, policy, clamp_radius)
    if fmt == "json":
        text = dumps_mesh(mesh)
        with open(path, "w", newline="\n") as fh:
            fh.write(text + "\n")
        return text
    raise ValueError(f"unknown mesh format {fmt!r}")
