import json

import numpy as np
import pytest

from minkdpw.families import smyth_potential
from minkdpw.loopcore import LoopBandPolicy, MatrixLoop, omega
from minkdpw.potential import (GridSpec, ParityViolation, Potential, SchemaError, TraceViolation,
                               VanishingA, initial_loop, integrate_frame, integrate_path,
                               parse_potential)
from minkdpw.errors import BadGrid

LAM = np.exp(2j * np.pi * (np.arange(16) + 0.25) / 16)


def _doc(entries, H=0.5, **kw):
    return dict(H=H, entries=[{"row": r, "col": c, "power": j, "poly": [[v.real, v.imag] for v in map(complex, p)]}
                              for r, c, j, p in entries], **kw)


CYL = _doc([(0, 1, -1, [1]), (1, 0, -1, [1])])
HYP = _doc([(0, 1, -1, [1])])


def test_parse_examples():
    P = parse_potential(CYL)
    assert P.band == (-1, -1)
    assert parse_potential(json.dumps(CYL)).entries.keys() == P.entries.keys()
    S = parse_potential(_doc([(0, 1, -1, [1]), (1, 0, -1, [0, 100])]))
    assert np.isclose(S.b_minus1(0.2), 20)
    assert parse_potential(P.to_json()).to_json() == P.to_json()


def test_parse_errors():
    with pytest.raises(ParityViolation):
        parse_potential(_doc([(0, 1, -1, [1]), (0, 0, -1, [1]), (1, 1, -1, [-1])]))
    with pytest.raises(TraceViolation):
        parse_potential(_doc([(0, 1, -1, [1]), (0, 0, 0, [1])]))
    with pytest.raises(VanishingA):
        parse_potential(_doc([(1, 0, -1, [1])]))
    with pytest.raises(SchemaError):
        parse_potential({"entries": []})
    with pytest.raises(SchemaError):
        parse_potential({"H": 0.5, "entries": [{"row": 0}]})
    with pytest.raises(SchemaError):
        parse_potential(dict(CYL, lambda_band=[0, 1]))
    with pytest.raises(VanishingA):
        parse_potential(_doc([(0, 1, -1, [0, 1])])).check_a(np.array([0.1, 0.0]))


def test_hopf_q():
    assert np.isclose(parse_potential(CYL).hopf_q()(0.3j), -1.0)
    assert parse_potential(HYP).hopf_q()(0.3) == 0
    P = smyth_potential(3.0, 2, H=0.5)
    z = 0.4 - 0.2j
    assert np.isclose(P.hopf_q()(z), -2 * 0.5 * 3.0 * z ** 2)


def test_initial_loop():
    assert initial_loop(None).distance(MatrixLoop.identity()) == 0
    assert initial_loop("omega1").distance(omega(1)) == 0
    assert initial_loop(omega(2).to_json()).distance(omega(2)) == 0
    with pytest.raises(SchemaError):
        initial_loop("nope")


def test_grid_validation():
    with pytest.raises(BadGrid):
        GridSpec.rect((0, 1), (0, 1), 1, 5)
    with pytest.raises(BadGrid):
        GridSpec.rect((0, 1), (0, 1), 5, 5, z0=0.1 + 0.1j)
    g = GridSpec.from_json({"type": "disk", "radius": 0.5}, {"nr": 6, "ntheta": 8})
    assert g.kind == "polar" and g.shape == (6, 8) and np.isclose(abs(g.vertices()[-1, 3]), 0.5)


def _cylinder_exact(z):
    w = z[..., None] / LAM
    c, s = np.cosh(w), np.sinh(w)
    return np.stack([np.stack([c, s], -1), np.stack([s, c], -1)], -2)


def test_cylinder_closed_form():
    P = parse_potential(CYL)
    g = GridSpec.rect((-0.6, 0.6), (-0.6, 0.6), 7, 7)
    ff = integrate_frame(P, g, policy=LoopBandPolicy(max_band=40))
    Z = g.vertices()
    err = 0.0
    for i, j in [(0, 0), (6, 6), (2, 5), (5, 1), (3, 3), (0, 6), (6, 0), (1, 2), (4, 4), (3, 0)]:
        err = max(err, np.abs(ff.loop(i, j)(LAM) - _cylinder_exact(Z[i, j])).max())
    assert err < 1e-9
    assert ff.det_drift.max() < 1e-10 and ff.twist_defect.max() < 1e-14


def test_nilpotent_exact():
    P = parse_potential(HYP)
    g = GridSpec.polar(0.9, 4, 6)
    ff = integrate_frame(P, g)
    Z = g.vertices()
    for i, j in [(3, 0), (2, 4), (1, 5)]:
        exact = MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (0, 1, -1): Z[i, j]})
        assert ff.loop(i, j).distance(exact) < 1e-13


class _Zero:
    band = (-1, -1)

    def coefficients(self, z):
        return np.zeros(np.shape(z) + (1, 2, 2), dtype=complex)


def test_zero_potential_keeps_initial():
    phi0 = omega(1).padded(-3, 3)[None]
    zs = np.array([[0, 0.5, 0.5 + 0.5j]])
    out = integrate_path(_Zero(), phi0, zs, -3)
    assert np.abs(out - phi0[:, None]).max() == 0


def test_path_independence():
    P = smyth_potential(2.0, 1)
    phi0 = MatrixLoop.identity().padded(-30, 0)[None]
    a = integrate_path(P, phi0, np.array([[0, 0.3, 0.3 + 0.4j]]), -30)[0, -1]
    b = integrate_path(P, phi0, np.array([[0, 0.4j, 0.3 + 0.4j]]), -30)[0, -1]
    assert np.abs(a - b).max() < 10 * 1e-11 * 0.7 * np.abs(a).max()


def test_fourth_order_convergence():
    P = parse_potential(CYL)
    z1 = 0.8 + 0.3j
    phi0 = MatrixLoop.identity().padded(-30, 30)[None]
    exact = _cylinder_exact(np.array(z1))
    errs = []
    for n in (4, 8):
        y = integrate_path(P, phi0, np.array([[0, z1]]), -30, fixed_steps=n)[0, -1]
        errs.append(np.abs(MatrixLoop(y, -30)(LAM) - exact).max())
    assert errs[0] / errs[1] >= 16


def test_initial_omega_stays_twisted_and_unimodular():
    P = smyth_potential(100.0, 1)
    g = GridSpec.polar(0.1, 5, 8)
    ff = integrate_frame(P, g, phi0=omega(1), policy=LoopBandPolicy(max_band=40))
    assert ff.loop(0, 0).distance(omega(1)) < 1e-15
    assert ff.det_drift.max() < 1e-8 and ff.twist_defect.max() < 1e-14


def test_potential_constructor_checks():
    with pytest.raises(SchemaError):
        Potential(0.0, {(0, 1, -1): [1.0]})
