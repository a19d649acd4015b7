import numpy as np
import pytest
from scipy.special import ellipj

from minkdpw.elliptic import ellipk, jacobi_ellip, jacobi_sn
from minkdpw.errors import ModulusRange

U = np.linspace(-7, 7, 57)


def test_degenerate_moduli():
    assert np.allclose(jacobi_sn(U, 0.0), np.sin(U))
    assert np.allclose(jacobi_sn(U, 1.0), np.tanh(U))


@pytest.mark.parametrize("m", [0.05, 0.3, 0.5, 0.9, 0.999])
def test_identities_and_period(m):
    rng = np.random.default_rng(int(m * 1000))
    u = rng.uniform(-10, 10, 40)
    sn, cn, dn = jacobi_ellip(u, m)
    assert np.allclose(sn ** 2 + cn ** 2, 1, atol=1e-14)
    assert np.allclose(dn ** 2 + m * sn ** 2, 1, atol=1e-14)
    K = ellipk(m)
    assert np.allclose(jacobi_sn(u + 4 * K, m), sn, atol=1e-11)
    assert np.all(np.abs(sn) <= 1)


@pytest.mark.parametrize("m", [0.1, 0.6, 0.95])
def test_against_scipy(m):
    ref = ellipj(U, m)
    got = jacobi_ellip(U, m)
    for a, b in zip(got, ref[:3]):
        assert np.allclose(a, b, atol=1e-13)


def test_modulus_range():
    with pytest.raises(ModulusRange):
        jacobi_sn(0.3, 1.5)
    with pytest.raises(ModulusRange):
        ellipk(-0.1)
