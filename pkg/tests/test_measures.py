import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourier_ratio.measures import (GENERATORS, DiscreteMeasure, ResolutionError, analytic_mass, cantor_atoms,
                                    covering_constant, estimate_alpha, from_points, make_canonical_measure,
                                    neighborhood_volume)

SMALL = {"segment": 512, "k-plane-piece": 32, "circle": 512, "sphere": 24, "moment-curve": 256, "cylinder": 64}


@pytest.mark.parametrize("kind", GENERATORS)
def test_generator_mass_matches_continuum(kind):
    m = make_canonical_measure(kind, {}, SMALL.get(kind))
    assert m.mass == pytest.approx(analytic_mass(kind, {}), rel=1e-10)
    assert m.label == kind and m.is_real and not m.is_zero


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_canonical_measure("spiral", {})


def test_segment_layout_and_diameter():
    m = make_canonical_measure("segment", {"d": 2, "length": 2.0}, 100)
    assert m.d == 2 and m.n == 100
    assert np.all(m.points[:, 1] == 0)
    assert m.diameter <= 2.0 and m.diameter == pytest.approx(2.0, abs=0.05)


def test_circle_points_on_circle():
    m = make_canonical_measure("circle", {"radius": 0.5}, 64)
    np.testing.assert_allclose(np.hypot(*m.points.T), 0.5, rtol=1e-14)


def test_cantor_atoms_are_left_endpoints():
    a = cantor_atoms(1 / 3, 2)
    np.testing.assert_allclose(np.sort(a.ravel()), [0, 2 / 9, 2 / 3, 8 / 9], atol=1e-15)


def test_cantor_resolution_floor():
    m = make_canonical_measure("cantor", {"depth": 5})
    m.check_scale(2 * 3.0**-5)
    with pytest.raises(ResolutionError):
        m.check_scale(3.0**-6)


def test_measure_validation():
    with pytest.raises(ValueError):
        from_points(np.zeros((2, 2)), weights=[1.0, -1.0])
    with pytest.raises(ValueError):
        from_points(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        from_points(np.full((1, 2), np.nan))


def test_points_are_read_only():
    m = make_canonical_measure("circle", {}, 64)
    with pytest.raises(ValueError):
        m.points[0, 0] = 3.0


def test_density_multiplies_coefficients():
    m = make_canonical_measure("segment", {"d": 2}, 8)
    g = m.with_density(lambda x: 1.0 + 1j * x[:, 0])
    np.testing.assert_allclose(g.coefficients, m.weights * (1 + 1j * m.points[:, 0]))
    assert not g.is_real


@given(st.floats(min_value=0.1, max_value=10.0))
def test_scaling_pushes_forward(t):
    m = make_canonical_measure("circle", {}, 32)
    s = m.scaled(t)
    assert s.mass == m.mass
    assert s.diameter == pytest.approx(t * m.diameter, rel=1e-12)


def test_segment_neighbourhood_volume():
    m = make_canonical_measure("segment", {"d": 2})
    g = neighborhood_volume(m, 0.01)
    # stadium: 2 delta L + pi delta^2
    assert g.volume == pytest.approx(2 * 0.01 + math.pi * 1e-4, rel=0.01)
    # greedy cover of a line: one ball per delta of length, at most twice the optimum
    assert 50 <= g.covering_count <= 101


def test_dirac_single_covering_ball():
    m = make_canonical_measure("dirac", {"d": 2})
    g = neighborhood_volume(m, 0.1)
    assert g.covering_count == 1
    # cell-centre counting at delta/8 resolution
    assert g.volume == pytest.approx(math.pi * 0.01, rel=0.05)


@pytest.mark.parametrize("delta", [0.2, 0.05, 0.02])
def test_covering_dominates_volume(delta):
    m = make_canonical_measure("circle", {}, 2048)
    g = neighborhood_volume(m, delta)
    assert g.covering_count * covering_constant(2) * delta**2 >= g.volume


def test_cantor_covering_count_exact():
    m = make_canonical_measure("cantor", {"depth": 8})
    for j in range(2, 7):
        assert neighborhood_volume(m, 3.0**-j).covering_count <= 2**j + 1


@pytest.mark.parametrize("kind,params,alpha,tol", [
    ("segment", {"d": 2}, 1.0, 0.05),
    ("circle", {}, 1.0, 0.05),
    ("cantor", {}, math.log(2) / math.log(3), 0.02),
])
def test_dimension_recovery(kind, params, alpha, tol):
    fit = estimate_alpha(make_canonical_measure(kind, params))
    assert abs(fit.fitted_alpha - alpha) <= tol
    assert abs(fit.box_dim_estimate - alpha) <= tol


def test_dimension_fit_rejects_short_ladder():
    with pytest.raises(ValueError):
        estimate_alpha(make_canonical_measure("segment", {"d": 2}), [0.1, 0.05])
