import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from chidenn.material import (
    MaterialError,
    NeoHookean,
    cauchy_stress,
    from_moduli,
    material_tangent,
    pk1_stress,
    strain_energy,
    von_mises,
)

MAT = NeoHookean(C10=1.5, D1=0.2, rho0=2.0)


def random_F(rng, n, dim=3, amp=0.3):
    return np.eye(dim) + amp * rng.uniform(-1, 1, (n, dim, dim))


def fd_stress(mat, F, h=1e-6):
    P = np.zeros_like(F)
    for i in range(F.shape[-1]):
        for j in range(F.shape[-1]):
            Fp, Fm = F.copy(), F.copy()
            Fp[..., i, j] += h
            Fm[..., i, j] -= h
            P[..., i, j] = (strain_energy(mat, Fp) - strain_energy(mat, Fm)) / (2 * h)
    return P


def test_reference_state_is_stress_free():
    for d in (1, 2, 3):
        assert strain_energy(MAT, np.eye(d)) == 0.0
        np.testing.assert_allclose(pk1_stress(MAT, np.eye(d)), 0.0, atol=1e-14)


def test_moduli_conversion():
    mat = from_moduli(mu0=3.0, K0=10.0, rho0=1.0)
    assert mat.shear_modulus == pytest.approx(3.0)
    assert mat.bulk_modulus == pytest.approx(10.0)
    assert mat.wave_speed() == pytest.approx(np.sqrt(14.0))


def test_invalid_constants():
    with pytest.raises(ValueError):
        NeoHookean(C10=-1.0, D1=1.0)


def test_small_strain_limit_is_linear_elastic():
    rng = np.random.default_rng(0)
    eps = 1e-7 * rng.uniform(-1, 1, (3, 3))
    mu, K = MAT.shear_modulus, MAT.bulk_modulus
    sym = 0.5 * (eps + eps.T)
    lin = 2 * mu * (sym - np.trace(sym) / 3 * np.eye(3)) + K * np.trace(sym) * np.eye(3)
    np.testing.assert_allclose(pk1_stress(MAT, np.eye(3) + eps), lin, rtol=0, atol=1e-6 * np.abs(lin).max())


def test_uniaxial_strain_closed_form():
    lam = 1.3
    w = MAT.C10 * (lam ** (-2 / 3) * (lam**2 + 2) - 3) + (lam - 1) ** 2 / MAT.D1
    dw = MAT.C10 * (-2 / 3 * lam ** (-5 / 3) * (lam**2 + 2) + 2 * lam ** (1 / 3)) + 2 * (lam - 1) / MAT.D1
    assert strain_energy(MAT, [[lam]]) == pytest.approx(w, rel=1e-14)
    assert pk1_stress(MAT, [[lam]])[0, 0] == pytest.approx(dw, rel=1e-13)


def test_stress_matches_energy_derivative():
    rng = np.random.default_rng(1)
    F = random_F(rng, 100)
    P = pk1_stress(MAT, F)
    np.testing.assert_allclose(P, fd_stress(MAT, F), rtol=0, atol=1e-6 * np.abs(P).max())


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_tangent_matches_stress_derivative(dim):
    rng = np.random.default_rng(2)
    F = random_F(rng, 20, dim)
    A = material_tangent(MAT, F)
    h = 1e-6
    for k in range(dim):
        for l in range(dim):
            Fp, Fm = F.copy(), F.copy()
            Fp[:, k, l] += h
            Fm[:, k, l] -= h
            fd = (pk1_stress(MAT, Fp) - pk1_stress(MAT, Fm)) / (2 * h)
            np.testing.assert_allclose(A[:, :, :, k, l], fd, rtol=0, atol=1e-5 * np.abs(A).max())


def test_tangent_has_major_symmetry():
    F = random_F(np.random.default_rng(3), 10)
    A = material_tangent(MAT, F)
    np.testing.assert_allclose(A, np.einsum("nijkl->nklij", A), atol=1e-12 * np.abs(A).max())


def test_plane_strain_is_in_plane_block():
    F2 = random_F(np.random.default_rng(4), 5, 2)
    F3 = np.tile(np.eye(3), (5, 1, 1))
    F3[:, :2, :2] = F2
    np.testing.assert_allclose(pk1_stress(MAT, F2), pk1_stress(MAT, F3)[:, :2, :2], atol=1e-14)
    np.testing.assert_allclose(von_mises(MAT, F2), von_mises(MAT, F3), atol=1e-13)


def test_pure_dilation_has_no_von_mises_stress():
    s = cauchy_stress(MAT, 1.1 * np.eye(3))
    np.testing.assert_allclose(s, s[0, 0] * np.eye(3), atol=1e-13)
    assert von_mises(MAT, 1.1 * np.eye(3)) == pytest.approx(0.0, abs=1e-12)


def test_simple_shear_von_mises():
    g = 1e-6
    F = np.eye(3)
    F[0, 1] = g
    # small strain: sigma_xy = mu * g, vm = sqrt(3) * mu * g
    assert von_mises(MAT, F) == pytest.approx(np.sqrt(3) * MAT.shear_modulus * g, rel=1e-5)


def test_inverted_gradient_is_located():
    F = np.tile(np.eye(2), (3, 4, 1, 1))
    F[1, 2] = [[-1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(MaterialError) as err:
        pk1_stress(MAT, F)
    assert err.value.index == (1, 2)


matrices = st.lists(st.floats(-0.3, 0.3), min_size=9, max_size=9).map(lambda v: np.eye(3) + np.reshape(v, (3, 3)))
rotations = st.integers(0, 2**31 - 1).map(lambda s: Rotation.random(random_state=s).as_matrix())


@settings(max_examples=50, deadline=None)
@given(F=matrices, Q=rotations)
def test_objectivity(F, Q):
    if np.linalg.det(F) <= 0.05:
        return
    assert strain_energy(MAT, Q @ F) == pytest.approx(strain_energy(MAT, F), rel=1e-10, abs=1e-12)
    np.testing.assert_allclose(pk1_stress(MAT, Q @ F), Q @ pk1_stress(MAT, F), atol=1e-10)
    assert von_mises(MAT, Q @ F) == pytest.approx(von_mises(MAT, F), rel=1e-9, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(F=matrices)
def test_cauchy_is_symmetric(F):
    if np.linalg.det(F) <= 0.05:
        return
    s = cauchy_stress(MAT, F)
    np.testing.assert_allclose(s, s.T, atol=1e-12 * max(1.0, np.abs(s).max()))
