import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdc_screen.crystal import Chi2Tensor
from spdc_screen.errors import FrameMismatchError, NotPhaseMatchableError, NumericalError
from spdc_screen.frames import OpticClass, PrincipalIndices
from spdc_screen.nonlinearity import (
    crystal_deff,
    d_eff_at,
    deff_grid,
    deff_map,
    kleinman_symmetrize,
    max_deff_on_locus,
    polarization_basis,
    rotate_chi2,
)

from oracles import random_rotation

seeds = st.integers(0, 2**32 - 1)


def random_tensor(rng):
    c = rng.normal(size=(3, 3, 3))
    return 0.5 * (c + c.transpose(0, 2, 1))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_rotation_composition(seed):
    rng = np.random.default_rng(seed)
    chi, R1, R2 = random_tensor(rng), random_rotation(rng), random_rotation(rng)
    np.testing.assert_allclose(rotate_chi2(rotate_chi2(chi, R1), R2), rotate_chi2(chi, R2 @ R1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_contraction_invariant_under_joint_rotation(seed):
    rng = np.random.default_rng(seed)
    chi, R = random_tensor(rng), random_rotation(rng)
    e = [v / np.linalg.norm(v) for v in rng.normal(size=(3, 3))]
    d = 0.5 * chi
    direct = np.einsum("i,ijk,j,k", e[0], d, e[1], e[2])
    rotated = np.einsum("i,ijk,j,k", R @ e[0], 0.5 * rotate_chi2(chi, R), R @ e[1], R @ e[2])
    assert rotated == pytest.approx(direct, abs=1e-12)


def test_rotation_rejects_non_orthogonal():
    with pytest.raises(NumericalError):
        rotate_chi2(np.zeros((3, 3, 3)), np.diag([1.0, 1.0, 2.0]))
    # inversion is orthogonal and flips every chi2 component
    chi = random_tensor(np.random.default_rng(1))
    np.testing.assert_allclose(rotate_chi2(chi, -np.eye(3)), -chi)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_kleinman_fully_symmetric_and_idempotent(seed):
    k = kleinman_symmetrize(random_tensor(np.random.default_rng(seed)))
    for p in itertools.permutations(range(3)):
        np.testing.assert_allclose(np.transpose(k, p), k, atol=1e-15)
    np.testing.assert_allclose(kleinman_symmetrize(k), k, atol=1e-15)


def d3m(d22, d31, d33=0.0):
    return Chi2Tensor.from_contracted(2.0 * np.array([[0, 0, 0, 0, d31, -d22], [-d22, d22, 0, d31, 0, 0],
                                                      [d31, d31, d33, 0, 0, 0]]))


NEG = OpticClass("uniaxial", "negative")
IDX = PrincipalIndices(1.66, 1.66, 1.55)


@pytest.mark.parametrize("theta, phi", [(22.8, 0.0), (22.8, 30.0), (22.8, 90.0), (40.0, 17.0), (70.0, 200.0)])
def test_3m_hand_derivation(theta, phi):
    # e_e . d : e_o e_o with e_o = (sin p, -cos p, 0), e_e = (cos t cos p, cos t sin p, -sin t)
    d22, d31 = 2.2, 0.16
    basis = polarization_basis(IDX, theta, phi, NEG)
    got = d_eff_at(d3m(d22, d31), basis).value
    t, p = math.radians(theta), math.radians(phi)
    hand = d22 * math.cos(t) * math.sin(3 * p) - d31 * math.sin(t)
    assert got == pytest.approx(hand, abs=1e-14)
    # textbook magnitude d31 sin(theta) - d22 cos(theta) sin(3 phi)
    assert abs(got) == pytest.approx(abs(d31 * math.sin(t) - d22 * math.cos(t) * math.sin(3 * p)), abs=1e-14)


def test_422_kleinman_null_grid():
    d14 = 1.5
    chi = Chi2Tensor.from_contracted(2.0 * np.array([[0, 0, 0, d14, 0, 0], [0, 0, 0, 0, -d14, 0], [0.0] * 6]))
    assert np.max(np.abs(kleinman_symmetrize(chi).components)) < 1e-15
    raw = chi.components
    assert np.max(np.abs(raw)) > 0


def test_frame_mismatch():
    chi = d3m(2.2, 0.16).with_components(d3m(2.2, 0.16).components, frame="abc")
    with pytest.raises(FrameMismatchError):
        d_eff_at(chi, polarization_basis(IDX, 20.0, 0.0, NEG))


def test_crystal_deff_and_grid_agree(bbo, pump532):
    grid = deff_grid(bbo, pump532, [10.0, 22.8], [0.0, 45.0, 90.0])
    assert grid.shape == (3, 2)
    for i, phi in enumerate([0.0, 45.0, 90.0]):
        for j, theta in enumerate([10.0, 22.8]):
            assert grid[i, j] == pytest.approx(crystal_deff(bbo, pump532, theta, phi).value, abs=1e-14)


def test_deff_map_layout(bbo, pump532):
    m = deff_map(bbo, pump532, n_theta=19, n_phi=37)
    assert m.values.shape == (37, 19)
    assert m.thetas[0] == 0.0 and m.thetas[-1] == 90.0
    assert m.phis[-1] == 360.0
    assert {round(t, 6) for t, _ in m.locus} == {round(m.locus[0][0], 6)}
    assert len(m.locus) > 4


def test_max_on_locus_refines_between_samples():
    # |d_eff| peaks at phi = 33.3 on a flat theta locus
    locus = [(30.0, float(p)) for p in range(0, 91, 5)]
    best = max_deff_on_locus(locus, lambda t, p: math.cos(math.radians(p - 33.3)))
    assert best.phi == pytest.approx(33.3, abs=1e-6)
    assert best.value == pytest.approx(1.0, abs=1e-12)


def test_max_on_locus_tie_break_and_empty():
    locus = [(30.0, 90.0), (30.0, 30.0), (10.0, 150.0)]
    best = max_deff_on_locus(locus, lambda t, p: 2.0)
    assert (best.theta, best.phi) == (10.0, 150.0)
    with pytest.raises(NotPhaseMatchableError):
        max_deff_on_locus([], lambda t, p: 1.0)


def test_max_on_locus_not_worse_than_samples():
    rng = np.random.default_rng(3)
    locus = [(40.0 + 5 * math.sin(p / 20), float(p)) for p in range(0, 360, 3)]
    coeffs = rng.normal(size=4)

    def f(t, p):
        r = math.radians(p)
        return coeffs[0] * math.sin(3 * r) + coeffs[1] * math.cos(r) + coeffs[2] * math.sin(math.radians(t))

    best = max_deff_on_locus(locus, f)
    assert abs(best.value) >= max(abs(f(t, p)) for t, p in locus)


def test_biaxial_basis_uses_eigenvectors():
    idx = PrincipalIndices(1.56, 1.59, 1.61)
    b = polarization_basis(idx, 40.0, 25.0, OpticClass("biaxial", "negative"))
    assert abs(b.e_fast @ b.e_slow) < 1e-12
    assert abs(b.e_fast @ b.k) < 1e-12
