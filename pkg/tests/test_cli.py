import json
import os
import subprocess
import sys

import numpy as np
import pytest

from minkdpw.cli import run
from minkdpw.export import export_mesh, mesh_from_json, write_obj
from minkdpw.factorize import align_phase
from minkdpw.loopcore import MatrixLoop
from minkdpw.potential import GridSpec
from minkdpw.symsurface import SurfaceMesh

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def cfg(name):
    return os.path.join(CONFIGS, name)


def _synthetic(n1, n2, pts):
    g = GridSpec.rect((0, 1), (0, 1), n1, n2)
    shape = (n1, n2)
    nrm = np.zeros(shape + (3,))
    nrm[..., 2] = 1
    full = lambda v, dt=float: np.full(shape, v, dtype=dt)
    return SurfaceMesh(g, 1.0, 0.5, g.vertices(), np.asarray(pts, dtype=float), nrm, full(1.0), full(0.0),
                       full("BigCell", object), full(1, int), full(False, bool), full("", object),
                       full(1.0), full(0.0), full(False, bool))


SNAPSHOT = (
    "# minkdpw mesh 2x2 H=0.5\n"
    "v 0 0 1\n"
    "v 0 1 1\n"
    "v 1 0 2\n"
    "v 1 1 2.5\n"
    "vn 0 0 1\n"
    "vn 0 0 1\n"
    "vn 0 0 1\n"
    "vn 0 0 1\n"
    "f 1//1 3//3 4//4\n"
    "f 1//1 4//4 2//2\n"
)


def test_obj_snapshot(tmp_path):
    pts = [[[0, 0, 1], [0, 1, 1]], [[1, 0, 2], [1, 1, 2.5]]]
    mesh = _synthetic(2, 2, pts)
    path = tmp_path / "m.obj"
    write_obj(mesh, path)
    assert path.read_bytes() == SNAPSHOT.encode()


def test_flagged_vertex_drops_faces(tmp_path):
    pts = np.zeros((3, 3, 3))
    pts[..., 0], pts[..., 1] = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    mesh = _synthetic(3, 3, pts)
    mesh.flagged[1, 1] = True
    text = export_mesh(mesh, tmp_path / "m.obj", policy="hole")
    faces = [l.split()[1:] for l in text.splitlines() if l.startswith("f ")]
    centre = str(1 * 3 + 1 + 1)
    assert len(faces) == 2 and all(centre not in (f.split("//")[0] for f in face) for face in faces)
    text = export_mesh(mesh, tmp_path / "m2.obj", policy="clamp")
    assert sum(l.startswith("f ") for l in text.splitlines()) == 8
    ply = export_mesh(mesh, tmp_path / "m.ply")
    assert ply.startswith("ply\nformat ascii 1.0\nelement vertex 9\n") and "element face 2\n" in ply
    with pytest.raises(ValueError):
        export_mesh(mesh, tmp_path / "m.stl")


def test_json_sidecar_round_trip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(3, 4, 3))
    mesh = _synthetic(3, 4, pts)
    mesh.flagged[0, 2] = True
    mesh.points[2, 3] = np.nan
    text = export_mesh(mesh, tmp_path / "m.json")
    back = mesh_from_json(str(tmp_path / "m.json"))
    assert np.array_equal(np.isnan(back.points), np.isnan(mesh.points))
    assert np.allclose(np.nan_to_num(back.points), np.nan_to_num(mesh.points), atol=0, rtol=0)
    assert back.flagged[0, 2] and json.loads(text)["vertices"][11]["point"] is None


def test_cylinder_surface_and_validate(tmp_path, capsys):
    out = tmp_path / "cyl"
    argv = ["surface", cfg("cylinder.json"), "--out", str(out), "--grid", "nx=21", "--grid", "ny=21",
            "--format", "obj", "--format", "json", "--format", "ply"]
    assert run(argv) == 0
    assert {"mesh.obj", "mesh.json", "mesh.ply", "report.json"} <= set(os.listdir(out))
    first = (out / "mesh.json").read_bytes()
    assert json.loads((out / "report.json").read_text())["passed"]
    assert run(["validate", str(out)]) == 0
    out2 = tmp_path / "cyl2"
    assert run(argv[:3] + [str(out2)] + argv[4:]) == 0
    assert (out2 / "mesh.json").read_bytes() == first
    assert (out2 / "mesh.obj").read_bytes() == (out / "mesh.obj").read_bytes()
    capsys.readouterr()


def test_failed_check_exit_code(tmp_path):
    argv = ["surface", cfg("cylinder.json"), "--grid", "nx=11", "--grid", "ny=11",
            "--check", "mean_curvature", "--tol", "mean_curvature=1e-30"]
    assert run(argv) == 1


def test_hyperboloid_sidecar_rho(tmp_path):
    out = tmp_path / "hyp"
    run(["surface", cfg("hyperboloid.json"), "--out", str(out), "--grid", "nx=25", "--grid", "ny=25",
         "--format", "json", "--check", "mean_curvature", "--margin", "2"])
    doc = json.loads((out / "mesh.json").read_text())
    n = 0
    for v in doc["vertices"]:
        if v["flagged"] or v["rho"] is None:
            continue
        zz = v["z"][0] ** 2 + v["z"][1] ** 2
        exact = (np.sign(1 - zz) * (1 - zz)) ** -0.5
        assert abs(v["rho"] - exact) < 1e-9 * exact
        n += 1
    assert n > 400


def test_factor_psi_closed_form(capsys):
    assert run(["factor", cfg("psi1_half.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    F = MatrixLoop.from_json(doc["F"])
    s = 1 / np.sqrt(0.75)
    exact = MatrixLoop.from_entries({(0, 0, 0): s, (1, 1, 0): s, (0, 1, 1): 0.5 * s, (1, 0, -1): 0.5 * s})
    assert align_phase(F, exact)[1] < 1e-12
    assert doc["component_sign"] == 1


def test_classify_loop(capsys):
    assert run(["classify-loop", cfg("omega1.json")]) == 0
    assert json.loads(capsys.readouterr().out)["variant"] == "P1"


def test_classify_deterministic(capsys):
    outs = []
    for _ in range(2):
        code = run(["classify", "--p", "2", "--q", "1", "--v0", "1"])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] and code == 1
    assert json.loads(outs[0])["member"] is False
    assert run(["classify", "--p", "2", "--q", "1", "--v0", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["member"] and doc["representative"]["branch"] == "outer"


def test_usage_errors(tmp_path, capsys):
    assert run(["surface", str(tmp_path / "missing.json")]) == 2
    assert run(["surface"]) == 2
    assert run(["revolution", "--a", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"H": 0.5}')
    assert run(["surface", str(bad)]) == 2
    capsys.readouterr()


@pytest.mark.parametrize("name", ["smyth_c0_k0.json", "revolution_sn.json"])
def test_configs(name, tmp_path, capsys):
    assert run(["surface", cfg(name), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mesh.obj").exists()
    capsys.readouterr()


def test_revolution_and_smyth_commands(tmp_path, capsys):
    assert run(["revolution", "--a", "1", "--b", "0.5", "--c", "0", "--grid", "nx=21"]) == 0
    assert '"axis": "spacelike"' in capsys.readouterr().out
    assert run(["smyth", "--c", "100", "--k", "1", "--init", "omega1", "--radius", "0.2",
                "--grid", "nr=11", "--grid", "ntheta=12", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert '"cell": "P1"' in out


def test_entry_point():
    r = subprocess.run([sys.executable, "-m", "minkdpw.cli", "classify", "--p", "0.5", "--q", "1",
                        "--v0", "0.5"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["member"]
