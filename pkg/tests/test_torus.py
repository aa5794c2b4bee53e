import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourier_ratio.mollifier import BAND_LIMITED, SPACE_COMPACT, Mollifier
from fourier_ratio.oracles import lattice_band_count
from fourier_ratio.thresholds import sequence_holder
from fourier_ratio.torus import (TORUS_KINDS, CircleSupport, GraphSupport, PointSupport, SubTorusSupport,
                                 TorusMeasure, apply_multiplier, bands, block_energy, block_partial_sums,
                                 check_band, default_torus_ladder, field_l2, make_torus_measure,
                                 manifold_proof_chain_check, manifold_ratio_ladder, multiplier_coefficients,
                                 propagation_block, spectral_norms, support_propagation_check)


@pytest.fixture(scope="module")
def sub_torus():
    return make_torus_measure("sub-torus", {"d": 2}, 256)


@pytest.fixture(scope="module")
def dirac2():
    return make_torus_measure("dirac", {"d": 2}, 256)


def test_dirac_coefficients_are_characters():
    u = make_torus_measure("dirac", {"d": 1, "at": [0.25]}, 16)
    n = np.arange(-16, 17)
    np.testing.assert_allclose(u.coeffs, np.exp(-2j * np.pi * n * 0.25), atol=1e-14)
    assert u.is_real
    assert not TorusMeasure(1, 16, np.exp(2j * np.pi * n * 0.1) * (n >= 0)).is_real


def test_sub_torus_coefficients(sub_torus):
    c = sub_torus.coeffs
    assert np.all(c[256, :] == 1) and np.count_nonzero(c) == 513
    assert isinstance(sub_torus.support, SubTorusSupport)


@pytest.mark.parametrize("kind", TORUS_KINDS)
def test_corpus_measures_are_real_with_unit_mass_coefficient(kind):
    u = make_torus_measure(kind, {}, 32)
    assert u.is_real
    assert abs(u.coefficient([0] * u.d)) == pytest.approx(1.0, rel=1e-12)


def test_builder_validation():
    with pytest.raises(ValueError):
        make_torus_measure("dirac", {"d": 2}, 4)
    with pytest.raises(ValueError):
        make_torus_measure("spiral", {}, 16)
    with pytest.raises(ValueError):
        make_torus_measure("sub-torus", {"d": 2, "resolution": 0.001}, 64)
    with pytest.raises(IndexError):
        make_torus_measure("dirac", {"d": 1}, 16).coefficient([17])


def test_band_multiplicities_match_lattice_counts(dirac2):
    b = bands(make_torus_measure("dirac", {"d": 2}, 20))
    for m, mult in zip(b.m[:80], b.multiplicity[:80]):
        assert lattice_band_count(2, int(m)) == mult
    assert b.lam[1] == pytest.approx(2 * math.pi)


def test_band_energy_is_parseval(sub_torus):
    b = bands(sub_torus)
    assert math.fsum(b.energy**2) == pytest.approx(block_energy(sub_torus), rel=1e-14)


@pytest.mark.parametrize("kind", ["sub-torus", "embedded-circle", "curve-graph", "dirac"])
def test_synthesis_parseval_and_a2(kind):
    u = make_torus_measure(kind, {"d": 2}, 64)
    psi = Mollifier(BAND_LIMITED, 2)
    for R in (8.0, 32.0):
        P = apply_multiplier(u, psi, R)
        coeff = math.fsum(np.abs(multiplier_coefficients(u, psi, R)).ravel() ** 2)
        assert field_l2(P) ** 2 == pytest.approx(coeff, rel=1e-12)
        assert spectral_norms(u, psi, R).a2 == pytest.approx(R**-1 * field_l2(P), rel=1e-10)


@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=2.0, max_value=14.0))
def test_random_coefficients_parseval_and_holder(seed, R):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(33,)) + 1j * rng.normal(size=(33,))
    u = TorusMeasure(1, 16, c)
    psi = Mollifier(BAND_LIMITED, 1)
    P = apply_multiplier(u, psi, R)
    assert field_l2(P) ** 2 == pytest.approx(math.fsum(np.abs(multiplier_coefficients(u, psi, R)) ** 2), rel=1e-12)
    n = spectral_norms(u, psi, R, p=5.0)
    assert sequence_holder(n.c, 5.0)[2]


def test_band_must_fit_block():
    u = make_torus_measure("dirac", {"d": 2}, 64)
    check_band(u, Mollifier(BAND_LIMITED, 2), 64.0)
    with pytest.raises(ValueError, match="band exceeds block"):
        check_band(u, Mollifier(BAND_LIMITED, 2), 65.0)
    with pytest.raises(ValueError, match="band exceeds block"):
        spectral_norms(u, Mollifier(SPACE_COMPACT, 2), 16.0)


def test_default_ladders():
    assert default_torus_ladder(2, 256) == [8.0, 16.0, 32.0, 64.0, 128.0]
    assert default_torus_ladder(3) == [4.0, 8.0, 16.0, 32.0]
    assert propagation_block(2, [16, 128]) == 1024


def test_sub_torus_exponent(sub_torus):
    lad = manifold_ratio_ladder(sub_torus, Mollifier(BAND_LIMITED, 2))
    assert 0.4 <= lad.estimate.kappa <= 0.6


def test_dirac_on_circle_exponent():
    u = make_torus_measure("dirac", {"d": 1}, 2048)
    lad = manifold_ratio_ladder(u, Mollifier(BAND_LIMITED, 1))
    assert abs(lad.estimate.kappa) <= 0.05


def test_zero_measure_has_undefined_exponent():
    u = TorusMeasure(1, 16, np.zeros(33))
    lad = manifold_ratio_ladder(u, Mollifier(BAND_LIMITED, 1), [1, 2, 4, 8])
    assert lad.estimate is None and "undefined" in lad.error


@pytest.mark.parametrize("kind", ["sub-torus", "dirac"])
def test_propagation_leak_small(kind):
    u = make_torus_measure(kind, {"d": 2}, 256)
    psi = Mollifier(SPACE_COMPACT, 2)
    for R in (16.0, 32.0):
        rep = support_propagation_check(u, psi, R)
        assert rep.passed and rep.leak <= 1e-6


def test_propagation_negative_control(sub_torus):
    shifted = SubTorusSupport(2, sub_torus.support.fixed, [0.5])
    rep = support_propagation_check(sub_torus, Mollifier(SPACE_COMPACT, 2), 16.0, support=shifted)
    assert rep.leak > 0.99 and not rep.passed


def test_propagation_refuses_band_limited_and_oversized_band(sub_torus):
    with pytest.raises(ValueError, match="space-compact"):
        support_propagation_check(sub_torus, Mollifier(BAND_LIMITED, 2), 16.0)
    with pytest.raises(ValueError, match="band exceeds block"):
        support_propagation_check(sub_torus, Mollifier(SPACE_COMPACT, 2), 128.0)


def test_curve_graph_distance_matches_dense_sampling():
    s = GraphSupport(0.1)
    rng = np.random.default_rng(1)
    x = rng.random((3000, 2))
    t = np.linspace(0, 1, 400_001)
    curve = np.stack([t, 0.1 * np.sin(2 * np.pi * t)], axis=1)
    from scipy.spatial import cKDTree

    ref, _ = cKDTree(np.mod(curve, 1.0), boxsize=1.0 + 1e-12).query(np.mod(x, 1.0))
    np.testing.assert_allclose(s.distance(x), ref, atol=1e-7)
    near = ref <= 0.05
    np.testing.assert_allclose(s.distance(x, upper=0.05)[near], ref[near], atol=1e-7)


def test_circle_and_point_distances():
    c = CircleSupport([0.5, 0.5], 0.25)
    np.testing.assert_allclose(c.distance(np.array([[0.5, 0.5], [0.5, 0.8], [0.0, 0.5]])), [0.25, 0.05, 0.25])
    p = PointSupport([[0.0, 0.0]])
    assert p.distance(np.array([[0.9, 0.9]]))[0] == pytest.approx(math.hypot(0.1, 0.1))


def test_saturation_flags():
    assert not block_partial_sums(make_torus_measure("sub-torus", {"d": 2}), 5.0).saturated
    assert not block_partial_sums(make_torus_measure("sub-torus", {"d": 2}), 12.0).saturated
    circle = make_torus_measure("embedded-circle", {"d": 2})
    assert block_partial_sums(circle, 12.0).saturated
    assert not block_partial_sums(circle, 8.0).saturated
    ps = block_partial_sums(circle, 12.0)
    assert ps.label == "block-partial" and ps.sums == sorted(ps.sums)


def test_manifold_chain_on_sub_torus(sub_torus):
    rep = manifold_proof_chain_check(sub_torus, Mollifier(BAND_LIMITED, 2), [8, 16, 32, 64], p=3.0)
    assert rep.consistent and rep.chain_label == "chain consistent"
    assert rep.exponent_sign == -1 and rep.verdict == "pairing bound decays"
    assert rep.fitted_k == pytest.approx(1.0, abs=0.1)


def test_manifold_chain_on_circle_does_not_decay_at_large_p():
    u = make_torus_measure("embedded-circle", {"d": 2}, 128)
    rep = manifold_proof_chain_check(u, Mollifier(BAND_LIMITED, 2), [8, 16, 32, 64], p=5.0, spatial=False)
    assert rep.exponent_sign == 1 and "does not decay" in rep.verdict
