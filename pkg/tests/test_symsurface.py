import numpy as np
import pytest

from helpers import random_plus, random_real_form
from minkdpw.errors import MissingAux, NotNormalized, NotRealForm, SecondSmallCell
from minkdpw.factorize import iwasawa_kernel
from minkdpw.loopcore import ISIGMA3, MatrixLoop, minkowski_dot, omega, psi
from minkdpw.potential import GridSpec, Potential
from minkdpw.symsurface import (SurfaceMesh, build_surface, extended_sym, metric_rho, normal_vec,
                                parallel_points, sym_point)

I = MatrixLoop.identity()


def exp_potential(z, nterms=60):
    """``exp(z lam^-1 sigma1)`` as a Laurent polynomial in ``lam`` (truncated series)."""
    from math import factorial
    ent = {}
    for k in range(nterms):
        c = z ** k / factorial(k)
        if abs(c) < 1e-18:
            break
        if k % 2 == 0:
            ent[(0, 0, -k)] = c
            ent[(1, 1, -k)] = c
        else:
            ent[(0, 1, -k)] = c
            ent[(1, 0, -k)] = c
    return MatrixLoop.from_entries(ent)


def test_trivial_frame():
    assert np.allclose(sym_point(I, 1.0, 0.5), [0, 0, -1])
    assert np.allclose(normal_vec(I), [0, 0, 1])
    fp, fg = parallel_points(I, 1.0, 0.5)
    assert np.allclose(fp, [0, 0, 1]) and np.allclose(fg, 0)


def test_cylinder_point_closed_form():
    H = 0.5
    for z in (0.1 + 0.2j, -0.3 + 0.05j, 0.25 - 0.4j):
        F = iwasawa_kernel(exp_potential(z)).F
        x, y = z.real, z.imag
        exact = -(1 / (2 * H)) * np.array([4 * y, -np.sinh(4 * x), np.cosh(4 * x)])
        assert np.allclose(sym_point(F, 1.0, H), exact, atol=1e-10)


def test_normal_generic_real_form():
    a, b = 1.3 * np.exp(0.2j), 0.8 * np.exp(-1.1j)
    s = np.sqrt(abs(a) ** 2 - abs(b) ** 2)
    a, b = a / s, b / s
    F = MatrixLoop.constant([[a, b], [np.conj(b), np.conj(a)]])
    N = normal_vec(F)
    assert np.isclose(N[2], abs(a) ** 2 + abs(b) ** 2)
    assert np.isclose(minkowski_dot(N, N), -1)


def test_parallel_identity_and_diagonal_invariance():
    rng = np.random.default_rng(0)
    for _ in range(5):
        F = random_real_form(rng, 3)
        lam0 = np.exp(1j * rng.uniform(0, 2 * np.pi))
        H = rng.uniform(0.2, 2)
        f = sym_point(F, lam0, H)
        N = normal_vec(F, lam0)
        fp, fg = parallel_points(F, lam0, H)
        assert np.allclose(fp - f, N / H, atol=1e-10)
        # f_gauss - f = N / (2H) and <N, N> = -1
        assert np.allclose(fg - f, N / (2 * H), atol=1e-10)
        assert np.isclose(minkowski_dot(fg - f, N), -1 / (2 * H))
        assert np.isclose(minkowski_dot(N, N), -1, atol=1e-10)
        a = rng.uniform(0, 2 * np.pi)
        D = np.diag([np.exp(1j * a), np.exp(-1j * a)])
        assert np.allclose(sym_point(F @ D, lam0, H), f, atol=1e-10)


def test_not_real_form():
    rng = np.random.default_rng(1)
    X = random_real_form(rng, 2) @ random_plus(rng, 2)
    with pytest.raises(NotRealForm):
        sym_point(X)


def test_metric_rho():
    assert metric_rho(I) == 1.0
    with pytest.raises(NotNormalized):
        metric_rho(MatrixLoop.constant([[1, 0.5], [0, 1]]))
    with pytest.raises(NotNormalized):
        metric_rho(MatrixLoop.constant([[-1, 0], [0, -1]]))
    for z in (0.5, 0.3 + 0.6j, 1.4, 1.2j):
        r = iwasawa_kernel(MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (0, 1, -1): z}))
        eps = np.sign(1 - abs(z) ** 2)
        assert np.isclose(metric_rho(r.B), (eps * (1 - abs(z) ** 2)) ** -0.5)


def test_extended_sym():
    target = MatrixLoop.constant(ISIGMA3)
    for z in (0.5, 0.99, 1.01, 0.7j):
        assert extended_sym(psi(1, z)).distance(target) < 1e-9
    assert extended_sym(omega(1), aux=(I, 1, I)).distance(target) < 1e-12
    assert np.allclose(extended_sym(omega(1), aux=(I, 1, I), lam0=1.0, H=0.5), [0, 0, -1])
    with pytest.raises(MissingAux):
        extended_sym(omega(1))
    with pytest.raises(SecondSmallCell):
        extended_sym(omega(2))
    with pytest.raises(SecondSmallCell):
        extended_sym(omega(2), aux=(I, 2, I))


def test_extended_sym_second_cell_formula():
    # S(F^2_z) = i sigma3 + (4i / (1 - |z|^2)) [[|z|^2, -z lam^-1], [conj z lam, -|z|^2]]
    z = 0.6 * np.exp(0.4j)
    S = extended_sym(psi(2, z))
    k = 4j / (1 - abs(z) ** 2)
    want = MatrixLoop.from_entries({(0, 0, 0): 1j + k * abs(z) ** 2, (1, 1, 0): -1j - k * abs(z) ** 2,
                                    (0, 1, -1): -k * z, (1, 0, 1): k * np.conj(z)})
    assert S.distance(want) < 1e-10


def test_build_surface_cylinder_small():
    P = Potential(0.5, {(0, 1, -1): [1], (1, 0, -1): [1]})
    mesh = build_surface(P, GridSpec.rect((-0.2, 0.2), (-0.2, 0.2), 9, 9))
    x, y = mesh.z.real, mesh.z.imag
    exact = -np.stack([4 * y, -np.sinh(4 * x), np.cosh(4 * x)], -1)
    assert np.max(np.linalg.norm(mesh.points - exact, axis=-1)) < 1e-10
    nn = minkowski_dot(mesh.normals, mesh.normals)
    assert np.allclose(nn, -1, atol=1e-10)
    assert np.allclose(mesh.rho, 1) and mesh.big_cell.all()
    rec = mesh.vertex_record(4, 4)
    assert rec["cell"] == "BigCell" and rec["component_sign"] == 1


def test_build_surface_omega1_centre():
    P = Potential(0.5, {(0, 1, -1): [1], (1, 0, -1): [0, 100]})
    mesh = build_surface(P, GridSpec.polar(0.05, 6, 12), omega(1))
    assert mesh.cell[0, 0] == "P1" and mesh.extended[0, 0]
    assert np.allclose(mesh.points[0, 0], [0, 0, -1], atol=1e-9)


def test_mesh_lambda0_on_circle():
    P = Potential(0.5, {(0, 1, -1): [1], (1, 0, -1): [1]})
    with pytest.raises(ValueError):
        build_surface(P, GridSpec.rect((0, 0.1), (0, 0.1), 3, 3), lambda0=1.1)


def test_representative_convention_is_isometry():
    zs = [1.2, 1.1 + 0.4j, -0.3 + 1.3j, 1.5j]
    raw, rep = [], []
    for z in zs:
        r = iwasawa_kernel(MatrixLoop.from_entries({(0, 0, 0): 1, (1, 1, 0): 1, (0, 1, -1): z}))
        assert r.component_sign == -1
        raw.append(sym_point(r.F, 1.0, 0.5))
        rep.append(sym_point(r.F, 1.0, 0.5, convention="representative"))
    assert max(np.linalg.norm(a - b) for a, b in zip(raw, rep)) > 1e-3
    for i in range(len(zs)):
        for j in range(i):
            d1, d2 = raw[i] - raw[j], rep[i] - rep[j]
            assert np.isclose(minkowski_dot(d1, d1), minkowski_dot(d2, d2), rtol=1e-10)
