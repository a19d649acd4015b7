import json
from dataclasses import replace

import numpy as np
import pytest

from minkdpw.errors import DegenerateMetric, DomainNotSymmetric, InsufficientNeighborhood, NotSmyth
from minkdpw.families import smyth_potential
from minkdpw.geomcheck import (ValidationReport, fundamental_forms, gauss_residual, mean_curvature,
                               painleve_profile_residual, painleve_residual, symmetry_report,
                               translation_residual, validate_mesh, widen_exclusion)
from minkdpw.potential import GridSpec, parse_potential
from minkdpw.symsurface import build_surface

CYL = {"H": 0.5, "entries": [{"row": 0, "col": 1, "power": -1, "poly": [[1, 0]]},
                             {"row": 1, "col": 0, "power": -1, "poly": [[1, 0]]}]}


@pytest.fixture(scope="module")
def cylinder():
    return build_surface(parse_potential(CYL), GridSpec.rect((-0.3, 0.3), (-0.3, 0.3), 25, 25))


@pytest.fixture(scope="module")
def hyperboloid():
    return build_surface(smyth_potential(0, 0), GridSpec.rect((-0.5, 0.5), (-0.5, 0.5), 25, 25))


def test_cylinder_forms(cylinder):
    ff = fundamental_forms(cylinder)
    m = ff["mask"]
    H = cylinder.H
    assert np.allclose(ff["E"][m], 4 / H ** 2, rtol=1e-4)
    assert np.allclose(ff["G"][m], 4 / H ** 2, rtol=1e-4)
    assert np.abs(ff["F"][m]).max() < 1e-4
    assert np.allclose(mean_curvature(cylinder, ff)[m], H, atol=1e-4)


def test_hyperboloid_forms(hyperboloid):
    ff = fundamental_forms(hyperboloid)
    m = ff["mask"]
    z = hyperboloid.z[m]
    exact = 4 / (hyperboloid.H ** 2 * (1 - abs(z) ** 2) ** 2)
    assert np.max(np.abs(ff["E"][m] / exact - 1)) < 1e-3
    assert np.max(np.abs(ff["G"][m] / exact - 1)) < 1e-3
    assert gauss_residual(hyperboloid).max_residual < 1e-4


def test_gauss_cylinder_identically_small(cylinder):
    assert gauss_residual(cylinder).max_residual < 1e-9


def test_degenerate_input(cylinder):
    flat = replace(cylinder, points=np.zeros_like(cylinder.points))
    with pytest.raises((InsufficientNeighborhood, DegenerateMetric)):
        mean_curvature(flat)
    few = replace(cylinder, flagged=np.ones_like(cylinder.flagged))
    with pytest.raises(InsufficientNeighborhood):
        fundamental_forms(few)


def test_translation_and_negative_control(cylinder):
    assert translation_residual(cylinder).passed
    pts = cylinder.points.copy()
    pts[12, 12, 2] += 1e-3
    assert not translation_residual(replace(cylinder, points=pts)).passed
    rep = symmetry_report(cylinder, kind="translation")
    assert rep.passed and rep.entries[0].name == "translation_x1"


def test_symmetry_errors(cylinder):
    with pytest.raises(DomainNotSymmetric):
        symmetry_report(cylinder, order=3)
    with pytest.raises(NotSmyth):
        painleve_residual(cylinder)


def test_painleve_zero_solution():
    r = np.linspace(0, 1, 21)
    for c in (1.0, 4.0):
        u = np.full_like(r, 0.5 * np.log(c))
        res = painleve_profile_residual(r, u, c, 0)
        assert np.nanmax(np.abs(res)) < 1e-14 and np.isnan(res[0])


def test_painleve_cylinder_case():
    # k = 0, c = 1 is the cylinder: u is constant and the reduction holds exactly
    mesh = build_surface(smyth_potential(1.0, 0), GridSpec.polar(0.4, 21, 16))
    e = painleve_residual(mesh)
    assert e.passed and e.max_residual < 1e-9


def test_validate_mesh_and_report_json(cylinder):
    rep = validate_mesh(cylinder, checks=("mean_curvature", "gauss", "conformality", "metric", "tangency"))
    assert rep.passed
    doc = json.loads(rep.dumps())
    assert len(doc["checks"]) == 5
    for c in doc["checks"]:
        assert c["passed"] == (c["max_residual"] <= c["tolerance"])
    strict = validate_mesh(cylinder, checks=("mean_curvature",), tolerances={"mean_curvature": 1e-30})
    assert not strict.passed
    with pytest.raises(ValueError):
        validate_mesh(cylinder, checks=("nope",))
    assert "PASS" in rep.summary()


def test_widen_exclusion(cylinder):
    flagged = cylinder.flagged.copy()
    flagged[10, 10] = True
    m = replace(cylinder, flagged=flagged)
    w = widen_exclusion(m, 2)
    assert w.flagged[8:13, 8:13].all() and w.flagged.sum() == 25
    assert widen_exclusion(m, 0) is m
    rep = ValidationReport()
    rep.add("x", float("nan"), 1.0)
    assert not rep.passed
