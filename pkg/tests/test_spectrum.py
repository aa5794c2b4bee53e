import math

import numpy as np
import pytest

from fourier_ratio.measures import ResolutionError, from_points, make_canonical_measure
from fourier_ratio.mollifier import BAND_LIMITED, SPACE_COMPACT, Mollifier
from fourier_ratio.spectrum import (BudgetExceeded, default_spacing, direct_sum, make_grid, regularized_norm,
                                    sample_spectrum, spectrum_norms, transform_at)


@pytest.fixture(scope="module")
def small_segment():
    return make_canonical_measure("segment", {"d": 2}, 256)


def test_direct_sum_single_atom():
    xi = np.array([[0.25, 0.0], [1.0, 2.0]])
    vals = direct_sum(np.array([[1.0, 0.0]]), np.array([2.0 + 0j]), xi)
    np.testing.assert_allclose(vals, 2.0 * np.exp(-2j * np.pi * xi[:, 0]), atol=1e-15)


def test_sample_matches_direct_summation(small_segment):
    psi = Mollifier(SPACE_COMPACT, 2)
    s = sample_spectrum(small_segment, psi, 8.0)
    xi = s.grid.nodes()
    rng = np.random.default_rng(3)
    pick = rng.choice(len(xi), 200, replace=False)
    ref = transform_at(small_segment, psi, 8.0, xi[pick])
    np.testing.assert_allclose(s.values.ravel()[pick], ref, atol=1e-10)
    assert s.audit["passed"]


@pytest.mark.parametrize("kind,params,n", [("segment", {"d": 2}, 256), ("circle", {}, 256),
                                           ("cantor", {"depth": 6}, None)])
def test_symmetry_folding_changes_nothing(kind, params, n):
    m = make_canonical_measure(kind, params, n)
    psi = Mollifier(SPACE_COMPACT, m.d)
    a = spectrum_norms(m, psi, 8.0, ps=(1, 2, 4), use_symmetry=True)
    b = spectrum_norms(m, psi, 8.0, ps=(1, 2, 4), use_symmetry=False)
    for p in (1.0, 2.0, 4.0):
        assert a.x[p] == pytest.approx(b.x[p], rel=1e-11)
    assert b.symmetry == "none"


def test_streamed_norms_match_materialised(small_segment):
    psi = Mollifier(BAND_LIMITED, 2)
    s = sample_spectrum(small_segment, psi, 16.0)
    n = spectrum_norms(small_segment, psi, 16.0, ps=(1, 2, 4, math.inf))
    for p in (1.0, 2.0, 4.0, math.inf):
        assert n.x[p] == pytest.approx(regularized_norm(s, p), rel=1e-11)
    assert n.audit["passed"] and n.audit["max_rel_error"] < 1e-10


def test_dirac_norms_are_mollifier_norms():
    m = make_canonical_measure("dirac", {"d": 2})
    psi = Mollifier(BAND_LIMITED, 2)
    n = spectrum_norms(m, psi, 32.0, spacing=0.01)
    # the band-limited window holds the whole multiplier; Riemann sums converge fast
    assert n.x[1.0] == pytest.approx(psi.l1_norm(), rel=1e-3)
    assert n.x[2.0] == pytest.approx(psi.l2_norm(), rel=1e-3)


def test_fourier_ratio_is_scale_free_in_mass(small_segment):
    psi = Mollifier(SPACE_COMPACT, 2)
    heavy = small_segment.with_density(np.full(small_segment.n, 7.5))
    assert spectrum_norms(heavy, psi, 8.0).fr == pytest.approx(spectrum_norms(small_segment, psi, 8.0).fr, rel=1e-12)


def test_grid_window_and_spacing(small_segment):
    psi = Mollifier(SPACE_COMPACT, 2)
    g = make_grid(small_segment, psi, 10.0)
    assert g.spacing == default_spacing(small_segment)
    assert g.M * g.spacing >= psi.effective_truncation(10.0, 0.05)
    with pytest.raises(ValueError):
        make_grid(small_segment, psi, 10.0, spacing=1.0)
    with pytest.raises(ValueError):
        make_grid(small_segment, Mollifier(SPACE_COMPACT, 3), 10.0)


def test_node_cap_flags_window(small_segment):
    n = spectrum_norms(small_segment, Mollifier(SPACE_COMPACT, 2), 16.0, max_nodes=10_000)
    assert n.capped and n.node_count <= 10_000
    assert n.requested_half_width > n.grid.half_width


def test_memory_budget_enforced(small_segment):
    with pytest.raises(BudgetExceeded):
        sample_spectrum(small_segment, Mollifier(SPACE_COMPACT, 2), 16.0, memory_budget=1024)


def test_scale_below_resolution_rejected():
    m = make_canonical_measure("cantor", {"depth": 4})
    with pytest.raises(ResolutionError):
        spectrum_norms(m, Mollifier(SPACE_COMPACT, 1), 3.0**5)


def test_complex_density_audit():
    rng = np.random.default_rng(0)
    m = from_points(rng.random((40, 2)), density=np.exp(2j * np.pi * rng.random(40)))
    n = spectrum_norms(m, Mollifier(SPACE_COMPACT, 2), 8.0, ps=(1, 2, 3))
    assert n.audit["passed"] and n.symmetry == "none"
