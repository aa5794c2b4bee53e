"""Discrete measures and their neighbourhood geometry.

A measure ``f mu`` on R^d is stored as a weighted point cloud: support samples
``x_j``, quadrature weights ``w_j`` for ``mu`` and density values ``f(x_j)``.
Every integral against ``f mu`` becomes the finite sum ``sum_j w_j f(x_j) (.)(x_j)``.

Each generator declares a sampling resolution ``h`` (the largest gap between
neighbouring samples).  Neighbourhood radii and inverse scales below ``2 h`` are
rejected: a finite cloud looks zero-dimensional at scales finer than its
spacing, so such requests would silently undercount.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .mollifier import ball_volume

GENERATORS = (
    "dirac",
    "segment",
    "k-plane-piece",
    "circle",
    "sphere",
    "moment-curve",
    "cantor",
    "cantor-product",
    "cylinder",
)

# neighbourhood volume grid: cell side = delta / _CELLS_PER_DELTA
_CELLS_PER_DELTA = 8


class ResolutionError(ValueError):
    """Requested scale is finer than the point cloud resolves."""


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud approximating ``f mu`` in R^d.

    Attributes
    ----------
    d : int
    points : ndarray, shape (n, d)
    weights : ndarray, shape (n,)
        Nonnegative quadrature weights of ``mu``.
    density : ndarray, shape (n,), complex
        Values ``f(x_j)``.
    label : str
    resolution : float
        Declared sampling resolution ``h``; scales below ``2 h`` are refused.
    alpha0 : float or None
        Known dimension of the support, if the generator has one.
    params : dict
        Generator parameters (for provenance).
    """

    d: int
    points: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    label: str = "custom"
    resolution: float = 0.0
    alpha0: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, self.d))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float).ravel())
        f = np.ascontiguousarray(np.asarray(self.density, dtype=complex).ravel())
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if not (len(pts) == len(w) == len(f)):
            raise ValueError("points, weights and density must have equal length")
        if len(pts) == 0:
            raise ValueError("a measure needs at least one support point")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not self.resolution >= 0:
            raise ValueError("resolution must be nonnegative")
        for name, arr in (("points", pts), ("weights", w), ("density", f)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # basic statistics -------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def coefficients(self) -> np.ndarray:
        """c_j = w_j f(x_j), the atoms of the discretised ``f mu``."""
        return self.weights * self.density

    @property
    def total_variation(self) -> float:
        return math.fsum(np.abs(self.coefficients))

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.density.imag == 0))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.coefficients == 0))

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def diameter(self) -> float:
        """Upper bound for the support diameter.

        The smaller of the bounding-box diagonal and twice the largest distance
        from the box centre; exact for segments, discs and spheres.
        """
        lo, hi = self.bbox
        radius = float(np.sqrt(np.max(np.sum((self.points - (lo + hi) / 2) ** 2, axis=1))))
        return min(float(np.linalg.norm(hi - lo)), 2 * radius)

    def check_scale(self, delta: float, what: str = "delta") -> None:
        if delta < 2.0 * self.resolution * (1 - 1e-12):
            raise ResolutionError(
                f"{what}={delta:g} is below the resolution floor 2h={2 * self.resolution:g} of {self.label!r}"
            )

    def with_density(self, f: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> "DiscreteMeasure":
        """Same support and weights with a new density (callable on points or explicit values)."""
        values = f(self.points) if callable(f) else f
        return dataclasses.replace(self, density=np.broadcast_to(np.asarray(values, dtype=complex), (self.n,)))

    def scaled(self, t: float) -> "DiscreteMeasure":
        """Push-forward under x -> t x (weights unchanged, resolution scaled)."""
        return dataclasses.replace(self, points=self.points * t, resolution=self.resolution * abs(t))


def from_points(points, weights=None, density=None, resolution: float = 0.0, label: str = "custom"):
    """Wrap a user point cloud.  No analytic ground truth is attached."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n == 0:
        raise ValueError("a measure needs at least one support point")
    w = np.full(n, 1.0 / n) if weights is None else weights
    f = np.ones(n) if density is None else density
    return DiscreteMeasure(d, pts, w, f, label=label, resolution=resolution)


# ---------------------------------------------------------------------------
# generators


def _embed(coords: np.ndarray, d: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    if coords.shape[1] > d:
        raise ValueError(f"cannot embed {coords.shape[1]}-dimensional samples in R^{d}")
    out = np.zeros((coords.shape[0], d))
    out[:, : coords.shape[1]] = coords
    return out


def _require_sampling(h: float, diam: float, kind: str) -> None:
    if h > diam / 8:
        raise ValueError(
            f"{kind}: sample count too small (spacing {h:g} exceeds diameter/8 = {diam / 8:g})"
        )


def _midpoints(length: float, n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (length / n)


def make_canonical_measure(kind: str, params: dict | None = None, n: int | None = None) -> DiscreteMeasure:
    """Build one of the canonical measures.

    Parameters
    ----------
    kind : str
        One of ``dirac``, ``segment``, ``k-plane-piece``, ``circle``, ``sphere``,
        ``moment-curve``, ``cantor``, ``cantor-product``, ``cylinder``.
    params : dict, optional
        Generator parameters.  Common keys: ``d`` (ambient dimension),
        ``length``, ``radius``, ``k``, ``ratio``, ``depth``, ``offset``.
    n : int, optional
        Samples along the principal parameter (per axis for products,
        polar nodes for the sphere, angular nodes for the cylinder).
        Ignored for ``dirac`` and the Cantor generators, which use ``depth``.

    Notes
    -----
    Quadrature: midpoint rule on flat pieces (exact mass, second order),
    periodic trapezoid on circles (spectrally accurate), Gauss-Legendre in
    ``cos(theta)`` times trapezoid in azimuth on the sphere, Gauss-Legendre
    with arc-length weights on the moment curve.  Cantor measures are the
    exact depth-``J`` iterate of the two-map IFS with atoms at the left
    endpoints of the level-``J`` intervals.
    """
    p = dict(params or {})
    builder = _BUILDERS.get(kind)
    if builder is None:
        raise ValueError(f"unknown measure kind {kind!r}; expected one of {GENERATORS}")
    m = builder(p, n)
    return m


def _dirac(p, n):
    d = int(p.get("d", 2))
    center = np.asarray(p.get("center", np.zeros(d)), dtype=float).reshape(1, d)
    return DiscreteMeasure(d, center, [1.0], [1.0], "dirac", 0.0, 0.0, {"d": d})


def _segment(p, n):
    d = int(p.get("d", 2))
    L = float(p.get("length", 1.0))
    n = int(n or p.get("n", 2**16))
    if L <= 0:
        raise ValueError("segment length must be positive")
    _require_sampling(L / n, L, "segment")
    pts = _embed(_midpoints(L, n)[:, None], d)
    return DiscreteMeasure(d, pts, np.full(n, L / n), np.ones(n), "segment", L / n, 1.0, {"d": d, "length": L, "n": n})


def _kplane(p, n):
    d = int(p.get("d", 3))
    k = int(p.get("k", 2))
    L = float(p.get("length", 1.0))
    n = int(n or p.get("n", 256))
    if not 1 <= k <= d:
        raise ValueError("k-plane-piece needs 1 <= k <= d")
    _require_sampling(L / n, L, "k-plane-piece")
    axes = np.meshgrid(*([_midpoints(L, n)] * k), indexing="ij")
    coords = np.stack([a.ravel() for a in axes], axis=1)
    w = np.full(len(coords), (L / n) ** k)
    return DiscreteMeasure(d, _embed(coords, d), w, np.ones(len(coords)), "k-plane-piece", L / n, float(k),
                           {"d": d, "k": k, "length": L, "n": n})


def _circle(p, n):
    r = float(p.get("radius", 1.0))
    n = int(n or p.get("n", 2**15))
    h = 2 * math.pi * r / n
    _require_sampling(h, 2 * r, "circle")
    t = 2 * math.pi * np.arange(n) / n
    pts = r * np.stack([np.cos(t), np.sin(t)], axis=1)
    return DiscreteMeasure(2, pts, np.full(n, h), np.ones(n), "circle", h, 1.0, {"radius": r, "n": n})


def _sphere(p, n):
    d = int(p.get("d", 3))
    if d == 2:
        return _circle(p, None if n is None else 2 * n)
    if d != 3:
        raise ValueError("sphere requires d in {2, 3}")
    r = float(p.get("radius", 1.0))
    n = int(n or p.get("n", 256))
    x, wx = np.polynomial.legendre.leggauss(n)
    m = 2 * n
    phi = 2 * math.pi * np.arange(m) / m
    ct = np.repeat(x, m)
    st = np.sqrt(1 - ct**2)
    ph = np.tile(phi, n)
    pts = r * np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    w = np.repeat(wx, m) * (2 * math.pi / m) * r**2
    h = math.pi * r / n * 1.6  # widest polar gap of Gauss-Legendre nodes is about 1.6 * pi / n
    _require_sampling(h, 2 * r, "sphere")
    return DiscreteMeasure(3, pts, w, np.ones(len(w)), "sphere", h, 2.0, {"d": 3, "radius": r, "n": n})


def moment_curve_speed(t, d):
    t = np.asarray(t, dtype=float)
    comps = [np.ones_like(t), 2 * t, 3 * t**2][:d]
    return np.sqrt(sum(c * c for c in comps))


def _moment_curve(p, n):
    d = int(p.get("d", 3))
    if d not in (2, 3):
        raise ValueError("moment-curve requires d in {2, 3}")
    n = int(n or p.get("n", 4096))
    x, wx = np.polynomial.legendre.leggauss(n)
    t = (x + 1) / 2
    pts = np.stack([t, t**2, t**3][:d], axis=1)
    w = wx / 2 * moment_curve_speed(t, d)
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    h = float(gaps.max())
    _require_sampling(h, float(np.linalg.norm(pts[-1] - pts[0])), "moment-curve")
    return DiscreteMeasure(d, pts, w, np.ones(n), "moment-curve", h, 1.0, {"d": d, "n": n})


def cantor_atoms(ratio: float, depth: int) -> np.ndarray:
    """Left endpoints of the level-``depth`` intervals of the two-map IFS, ascending."""
    x = np.zeros(1)
    for j in range(depth):
        x = np.concatenate([x, x + (1 - ratio) * ratio**j])
    return np.sort(x)


def _cantor_params(p):
    ratio = float(p.get("ratio", 1.0 / 3.0))
    depth = int(p.get("depth", 10))
    if not 0 < ratio <= 0.5:
        raise ValueError("cantor ratio must lie in (0, 1/2]")
    if not 1 <= depth <= 40:
        raise ValueError("cantor depth must lie in 1..40")
    return ratio, depth


def _cantor(p, n):
    ratio, depth = _cantor_params(p)
    d = int(p.get("d", 1))
    offset = float(p.get("offset", 0.0))
    x = cantor_atoms(ratio, depth) + offset
    N = len(x)
    # each atom stands for a level-depth interval of length ratio**depth; its
    # neighbourhoods are resolved down to that length
    h = ratio**depth / 2
    return DiscreteMeasure(d, _embed(x[:, None], d), np.full(N, 2.0**-depth), np.ones(N), "cantor", h,
                           math.log(2) / math.log(1 / ratio),
                           {"d": d, "ratio": ratio, "depth": depth, "offset": offset})


def _cantor_product(p, n):
    ratio, depth = _cantor_params({"depth": 6, **p})
    d = int(p.get("d", 2))
    if d < 2:
        raise ValueError("cantor-product needs d >= 2")
    x = cantor_atoms(ratio, depth)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = _embed(np.stack([X.ravel(), Y.ravel()], axis=1), d)
    N = len(pts)
    return DiscreteMeasure(d, pts, np.full(N, 4.0**-depth), np.ones(N), "cantor-product", ratio**depth / 2,
                           2 * math.log(2) / math.log(1 / ratio), {"d": d, "ratio": ratio, "depth": depth})


def _cylinder(p, n):
    d = int(p.get("d", 3))
    k = int(p.get("k", 1))
    if d != 3 or k != 1:
        raise ValueError("cylinder is implemented as S^1 x [0, L] in R^3 (d=3, k=1)")
    r = float(p.get("radius", 1.0))
    L = float(p.get("length", 1.0))
    n = int(n or p.get("n", 512))
    h = 2 * math.pi * r / n
    nz = max(int(math.ceil(L / h)), 8)
    t = 2 * math.pi * np.arange(n) / n
    z = _midpoints(L, nz)
    T, Z = np.meshgrid(t, z, indexing="ij")
    pts = np.stack([r * np.cos(T.ravel()), r * np.sin(T.ravel()), Z.ravel()], axis=1)
    w = np.full(len(pts), h * L / nz)
    _require_sampling(max(h, L / nz), 2 * r, "cylinder")
    return DiscreteMeasure(3, pts, w, np.ones(len(pts)), "cylinder", max(h, L / nz), 2.0,
                           {"d": 3, "k": 1, "radius": r, "length": L, "n": n})


_BUILDERS = {
    "dirac": _dirac,
    "segment": _segment,
    "k-plane-piece": _kplane,
    "circle": _circle,
    "sphere": _sphere,
    "moment-curve": _moment_curve,
    "cantor": _cantor,
    "cantor-product": _cantor_product,
    "cylinder": _cylinder,
}


def analytic_mass(kind: str, params: dict | None = None) -> float:
    """Exact total mass of the generator's continuum object (same parameter defaults)."""
    from scipy import integrate

    p = dict(params or {})
    if kind == "dirac":
        return 1.0
    if kind == "segment":
        return float(p.get("length", 1.0))
    if kind == "k-plane-piece":
        return float(p.get("length", 1.0)) ** int(p.get("k", 2))
    if kind == "circle" or (kind == "sphere" and int(p.get("d", 3)) == 2):
        return 2 * math.pi * float(p.get("radius", 1.0))
    if kind == "sphere":
        return 4 * math.pi * float(p.get("radius", 1.0)) ** 2
    if kind == "moment-curve":
        d = int(p.get("d", 3))
        return integrate.quad(lambda t: float(moment_curve_speed(t, d)), 0, 1, epsabs=1e-15, epsrel=1e-13)[0]
    if kind in ("cantor", "cantor-product"):
        return 1.0
    if kind == "cylinder":
        return 2 * math.pi * float(p.get("radius", 1.0)) * float(p.get("length", 1.0))
    raise ValueError(f"unknown measure kind {kind!r}")


# ---------------------------------------------------------------------------
# geometry


@dataclass
class GeometryReport:
    """Neighbourhood statistics of the support at one radius."""

    label: str
    delta: float
    volume: float
    covering_count: int

    def as_row(self) -> dict:
        return {"label": self.label, "delta": self.delta, "volume": self.volume, "covering_count": self.covering_count}


@dataclass
class DimensionFit:
    """Scaling fits over a ladder of radii.

    ``fitted_alpha`` is ``d`` minus the least-squares slope of ``log volume``
    against ``log delta``; ``box_dim_estimate`` is the slope of
    ``log covering_count`` against ``log(1/delta)``.
    """

    reports: list[GeometryReport]
    fitted_alpha: float
    box_dim_estimate: float
    volume_residual: float
    covering_residual: float
    fit_constant: float  # C in volume ~ C delta^(d - alpha)


def covering_constant(d: int) -> float:
    """c_d with N(delta) c_d delta^d >= |E^delta|: balls of radius 2 delta around the centres."""
    return ball_volume(d, 2.0)


def _tree(m: DiscreteMeasure) -> cKDTree:
    return cKDTree(m.points)


def neighborhood_volume(m: DiscreteMeasure, delta: float, tree: cKDTree | None = None) -> GeometryReport:
    """Volume of ``E^delta`` and a greedy covering count by ``delta``-balls.

    The volume counts cells of the grid ``(delta/8) Z^d`` (anchored at the
    origin) whose centre lies within ``delta`` of a support point.  The
    covering visits support points in lexicographic order and opens a ball at
    every point not yet covered; both results are deterministic.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    m.check_scale(delta)
    tree = tree or _tree(m)
    return GeometryReport(m.label, float(delta), _grid_volume(m, delta, tree), _greedy_cover(m, delta, tree))


def neighborhood_cells(m: DiscreteMeasure, delta: float, tree: cKDTree | None = None,
                       cells_per_delta: int = _CELLS_PER_DELTA, chunk: int = 2**20):
    """Yield, in chunks, the centres of the cells of ``(delta / cells_per_delta) Z^d`` lying within ``delta`` of the support."""
    tree = tree or _tree(m)
    d = m.d
    s = delta / cells_per_delta
    # coarse blocks of side delta holding cells_per_delta^d fine cells each
    blocks = np.unique(np.floor(m.points / delta).astype(np.int64), axis=0)
    stencil = np.stack(np.meshgrid(*([np.arange(-1, 2)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    cand = np.unique((blocks[:, None, :] + stencil[None, :, :]).reshape(-1, d), axis=0)
    fine = np.stack(np.meshgrid(*([np.arange(cells_per_delta)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    per = max(1, chunk // len(fine))
    for start in range(0, len(cand), per):
        cells = (cand[start : start + per, None, :] * cells_per_delta + fine[None, :, :]).reshape(-1, d)
        centers = (cells + 0.5) * s
        dist, _ = tree.query(centers, k=1, distance_upper_bound=delta * (1 + 1e-12))
        yield centers[dist <= delta]


def _grid_volume(m: DiscreteMeasure, delta: float, tree: cKDTree) -> float:
    s = delta / _CELLS_PER_DELTA
    count = sum(len(c) for c in neighborhood_cells(m, delta, tree))
    return count * s**m.d


def _greedy_cover(m: DiscreteMeasure, delta: float, tree: cKDTree) -> int:
    order = np.lexsort(m.points.T[::-1])
    covered = np.zeros(m.n, dtype=bool)
    count = 0
    for i in order:
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(m.points[i], delta)] = True
    return count


def default_delta_ladder(m: DiscreteMeasure) -> list[float]:
    """Default radii: 2^-4..2^-8 for d <= 2, 2^-2..2^-5 in 3D, 3^-2..3^-8 for ratio-1/3 Cantor sets."""
    if m.label in ("cantor", "cantor-product"):
        r = m.params["ratio"]
        J = m.params["depth"]
        return [r**j for j in range(2, min(J, 8) + 1)]
    if m.d == 3:
        return [2.0**-j for j in range(2, 6)]
    return [2.0**-j for j in range(4, 9)]


def _lsq(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ coef - y) ** 2))
    return float(coef[0]), float(coef[1]), resid


def estimate_alpha(m: DiscreteMeasure, delta_ladder: Sequence[float] | None = None) -> DimensionFit:
    """Fit the neighbourhood-volume exponent and the box dimension over a ladder of radii."""
    ladder = sorted(delta_ladder if delta_ladder is not None else default_delta_ladder(m), reverse=True)
    for a, b in zip(ladder, ladder[1:]):
        if a / b < 2 * (1 - 1e-12):
            raise ValueError("delta ladder must be geometric with ratio >= 2")
    usable = [x for x in ladder if x >= 2 * m.resolution * (1 - 1e-12)]
    if len(usable) < 4:
        raise ValueError(f"need at least 4 usable radii above the resolution floor, got {len(usable)}")
    tree = _tree(m)
    reports = [neighborhood_volume(m, x, tree) for x in usable]
    logd = np.log([r.delta for r in reports])
    slope_v, icpt_v, res_v = _lsq(logd, np.log([r.volume for r in reports]))
    slope_n, _, res_n = _lsq(-logd, np.log([r.covering_count for r in reports]))
    return DimensionFit(reports, m.d - slope_v, slope_n, res_v, res_n, math.exp(icpt_v))
