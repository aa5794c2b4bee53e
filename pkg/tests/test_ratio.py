import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourier_ratio.measures import make_canonical_measure, neighborhood_volume
from fourier_ratio.mollifier import BAND_LIMITED, SPACE_COMPACT, Mollifier
from fourier_ratio.ratio import (RatioSeries, Region, cauchy_schwarz_bound, check_ladder, cube_region, default_ladder,
                                 default_regions, estimate_kappa, minkowski_lower_bound, ratio_ladder,
                                 sandwich_check, slab_region)
from fourier_ratio.spectrum import spectrum_norms


@pytest.fixture(scope="module")
def segment_series():
    m = make_canonical_measure("segment", {"d": 2}, 2048)
    return m, ratio_ladder(m, Mollifier(SPACE_COMPACT, 2), [8, 16, 32, 64], regions=default_regions(m))


@pytest.fixture(scope="module")
def cantor_series():
    m = make_canonical_measure("cantor", {"depth": 9})
    ladder = [3.0**j for j in range(2, 7)]
    return m, ratio_ladder(m, Mollifier(SPACE_COMPACT, 1), ladder, regions=default_regions(m))


def test_default_ladders():
    assert default_ladder(2) == [2.0**j for j in range(4, 10)]
    assert default_ladder(1)[-1] == 2.0**12


@pytest.mark.parametrize("bad", [[], [16, 24], [32, 16], [0, 1, 2]])
def test_ladder_validation(bad):
    with pytest.raises(ValueError):
        check_ladder(bad)


@given(kappa=st.floats(min_value=-1, max_value=2), c=st.floats(min_value=0.01, max_value=100),
       n=st.integers(min_value=4, max_value=10))
def test_kappa_recovers_exact_power_law(kappa, c, n):
    R = [2.0**j for j in range(3, 3 + n)]
    est = estimate_kappa((R, [c * r**-kappa for r in R]))
    assert est.kappa == pytest.approx(kappa, abs=1e-9)
    assert est.kappa_min == pytest.approx(kappa, abs=1e-9)
    assert est.residual < 1e-9


@given(st.lists(st.floats(min_value=0.01, max_value=10), min_size=4, max_size=10))
def test_kappa_min_is_a_lower_envelope(fr):
    R = [2.0**j for j in range(len(fr))]
    est = estimate_kappa((R, fr))
    assert est.kappa_min <= est.kappa + 1e-12
    assert est.window[1] == len(fr) - 1 and est.window[1] - est.window[0] + 1 >= 4


def test_kappa_needs_positive_ratios():
    with pytest.raises(ValueError, match="undefined ratio"):
        estimate_kappa(([1, 2, 4, 8], [1.0, 0.5, 0.0, 0.2]))
    with pytest.raises(ValueError):
        estimate_kappa(([1, 2, 4], [1.0, 0.5, 0.2]))


def test_series_rows_and_provenance(segment_series):
    _, s = segment_series
    rows = s.rows()
    assert [r["R"] for r in rows] == [8.0, 16.0, 32.0, 64.0]
    assert set(rows[0]) >= {"label", "R", "X1", "X2", "Xp", "FR", "eps_tail"}
    prov = s.provenance()
    assert prov["psi_family"] == SPACE_COMPACT and all(a["passed"] for a in prov["audit"])
    assert s.at(32.0) == 2
    with pytest.raises(KeyError):
        s.at(33.0)


def test_fourier_ratio_decreases_for_segment(segment_series):
    _, s = segment_series
    assert all(b < a for a, b in zip(s.fr, s.fr[1:]))


def test_sandwich_holds_on_segment(segment_series):
    m, s = segment_series
    for R in s.ladder:
        for X in default_regions(m).values():
            chk = sandwich_check(m, s, X, R)
            assert chk.passed, chk.passes


def test_sandwich_recomputes_unlisted_region(segment_series):
    m, s = segment_series
    X = slab_region(4.0, 2, name="slab4")
    with pytest.raises(ValueError):
        sandwich_check(m, s, X, 8.0)
    chk = sandwich_check(m, s, X, 8.0, psi=Mollifier(SPACE_COMPACT, 2))
    assert chk.passed and chk.eta < 0.02


def test_tiny_region_fails_upper_side(segment_series):
    m, s = segment_series
    chk = sandwich_check(m, s, cube_region(0.01, 2, "tiny"), 16.0, psi=Mollifier(SPACE_COMPACT, 2))
    assert chk.eta > 0.5
    assert chk.passes["lower"]


def test_cauchy_schwarz_ceiling(segment_series, cantor_series):
    for _, s in (segment_series, cantor_series):
        for n in s.norms:
            fr, ceiling = cauchy_schwarz_bound(n)
            assert fr <= ceiling


def test_cantor_minkowski_bound(cantor_series):
    m, s = cantor_series
    geo = [neighborhood_volume(m, 1.0 / R) for R in s.ladder]
    rep = minkowski_lower_bound(s, geo, math.log(2) / math.log(3))
    assert rep.passed
    for j, g in enumerate(geo, start=2):
        assert g.covering_count <= 2**j + 1


def test_minkowski_rejects_mismatched_geometry(cantor_series):
    m, s = cantor_series
    geo = [neighborhood_volume(m, 0.5 / R) for R in s.ladder]
    with pytest.raises(ValueError):
        minkowski_lower_bound(s, geo, 0.63)


def test_band_limited_ladder_runs():
    m = make_canonical_measure("circle", {}, 4096)
    s = ratio_ladder(m, Mollifier(BAND_LIMITED, 2), [8, 16, 32, 64])
    assert s.psi_family == BAND_LIMITED
    assert np.all(np.isfinite(s.fr)) and np.all(np.asarray(s.fr) > 0)


@given(st.integers(1, 3), st.floats(0.5, 64.0), st.integers(0, 2**31 - 1))
def test_grid_mask_matches_pointwise_membership(d, R, seed):
    rng = np.random.default_rng(seed)
    axes = [np.sort(rng.uniform(-150 * R, 150 * R, size=rng.integers(1, 7))) for _ in range(d)]
    X = Region(boxes=(((-2.0,) * d, (2.0,) * d), ((-math.inf,) + (-0.5,) * (d - 1), (math.inf,) + (0.5,) * (d - 1))))
    mesh = np.meshgrid(*axes, indexing="ij")
    xi = np.stack([g.ravel() for g in mesh], axis=-1)
    assert np.array_equal(X.grid_mask(axes, R).ravel(), X.contains(xi, R))


class _PointwiseOnly:
    """Wraps a region so that only ``contains`` is visible."""

    def __init__(self, region):
        self.region = region

    def contains(self, xi, R):
        return self.region.contains(xi, R)


@pytest.mark.parametrize("label", ["segment", "circle"])
def test_region_sums_agree_between_mask_paths(label):
    m = make_canonical_measure(label, {"d": 2} if label == "segment" else {})
    psi = Mollifier(SPACE_COMPACT, 2)
    regs = default_regions(m)
    fast = spectrum_norms(m, psi, 16.0, regions=regs)
    slow = spectrum_norms(m, psi, 16.0, regions={k: _PointwiseOnly(v) for k, v in regs.items()})
    for k in regs:
        assert fast.region_l1[k] == pytest.approx(slow.region_l1[k], rel=1e-12)
