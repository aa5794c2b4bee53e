"""Spectral Fourier ratio on the flat torus ``T^d = R^d / Z^d``.

The Laplacian eigenspace with eigenvalue ``-lambda^2``, ``lambda = 2 pi sqrt(m)``,
is spanned by the modes ``e^{2 pi i n.x}`` with ``|n|^2 = m``, so projector
energies are sums of squared coefficients over lattice spheres.  A measure is
stored by its coefficients on the block ``|n|_inf <= N``; everything spectral
uses the ball ``|n| <= N`` inside the block.

Weights.  ``psi.radial(|n| / R)`` is the weight of mode ``n`` at scale ``R``
(``psi.spectral(lambda / R)`` in eigenvalue units).  With the band-limited
family the weights vanish beyond ``|n| = A R``, so norms are exact as soon as
``A R <= N``.  With the space-compact family the spatial kernel of the
multiplier is ``R^d psi(R x)`` periodised, supported in the ball of radius
``r / R``; this is what makes the support of ``P_R u`` stay within
``E^{r/R}``, and the frequency tail is controlled only up to the
certified truncation of the mollifier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from .measures import cantor_atoms
from .mollifier import BAND_LIMITED, SPACE_COMPACT, Mollifier
from .ratio import ExponentEstimate, RatioSeries, check_ladder, estimate_kappa
from .spectrum import DEFAULT_EPS_TAIL
from .thresholds import DEFAULT_EPSILON, sequence_holder

TORUS_KINDS = ("dirac", "sub-torus", "embedded-circle", "cantor-on-T1", "curve-graph")
DEFAULT_LEAK_TOLERANCE = 1e-6
SATURATION_TOLERANCE = 1e-4
_FFT_BUDGET = 2**26  # complex grid entries per synthesis


def default_block(d: int) -> int:
    """Block radius: 256 in dimensions 1 and 2, 64 in dimension 3."""
    return 64 if d == 3 else 256


def propagation_block(d: int, ladder) -> int:
    """Smallest power-of-two block holding eight times the largest scale, so the bump's tail is kept."""
    return max(default_block(d), 1 << math.ceil(math.log2(8 * max(ladder))))


def default_torus_ladder(d: int, N: int | None = None) -> list[float]:
    """Dyadic scales up to ``N / 2``, starting at 8 (earlier when that leaves fewer than four scales)."""
    N = N or default_block(d)
    top = int(math.floor(math.log2(N / 2)))
    return [2.0**j for j in range(max(1, min(3, top - 3)), top + 1)]


# ---------------------------------------------------------------------------
# support descriptors


def _periodic(delta: np.ndarray) -> np.ndarray:
    return np.abs(delta - np.round(delta))


class PointSupport:
    """Finite set of points of ``T^d``; ``resolution`` is the sampling gap of the true support."""

    def __init__(self, points, resolution: float = 0.0, name: str = "points"):
        self.points = np.mod(np.atleast_2d(np.asarray(points, dtype=float)), 1.0)
        self.resolution = float(resolution)
        self.name = name
        self._tree = None

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def distance(self, x: np.ndarray, upper: float = math.inf) -> np.ndarray:
        """Periodic distance from each row of ``x`` to the nearest point (``inf`` beyond ``upper``)."""
        x = np.mod(np.atleast_2d(x), 1.0)
        if len(self.points) <= 16:
            best = np.full(len(x), np.inf)
            for q in self.points:
                best = np.minimum(best, np.sqrt(np.sum(_periodic(x - q) ** 2, axis=1)))
            best[best > upper] = np.inf
            return best
        if self._tree is None:
            # boxsize requires coordinates strictly below 1
            self._tree = cKDTree(np.minimum(self.points, np.nextafter(1.0, 0.0)), boxsize=1.0)
        return self._tree.query(np.minimum(x, np.nextafter(1.0, 0.0)), k=1, distance_upper_bound=upper)[0]

    def describe(self) -> str:
        return f"{self.name}: {len(self.points)} point(s), resolution {self.resolution:g}"


class SubTorusSupport:
    """Coordinate sub-torus ``{x_k = value_k for k in fixed}``; distances are exact."""

    def __init__(self, d: int, fixed: Sequence[int], values: Sequence[float] | None = None):
        self._d = d
        self.fixed = tuple(fixed)
        self.values = tuple(values) if values is not None else (0.0,) * len(self.fixed)
        self.resolution = 0.0
        self.name = "sub-torus"

    @property
    def d(self) -> int:
        return self._d

    def distance(self, x: np.ndarray, upper: float = math.inf) -> np.ndarray:
        x = np.atleast_2d(x)
        acc = np.zeros(len(x))
        for k, v in zip(self.fixed, self.values):
            acc += _periodic(x[:, k] - v) ** 2
        return np.sqrt(acc)

    def describe(self) -> str:
        return f"sub-torus fixing axes {self.fixed} at {self.values}"


class GraphSupport:
    """Graph ``x_2 = a sin(2 pi x_1)`` in ``T^2``.

    The foot point is found by Newton iteration on the stationarity condition
    starting from the vertical projection.  Within half the curvature radius
    ``1/(4 pi^2 a)`` the foot point is unique and the iteration converges.
    Farther points are located by a scan over one period followed by Newton
    steps, unless the Lipschitz lower bound already puts them beyond ``upper``.
    """

    _SCAN = 256

    def __init__(self, amplitude: float):
        self.amplitude = float(amplitude)
        self.resolution = 0.0
        self.name = "graph"

    @property
    def d(self) -> int:
        return 2

    def distance(self, x: np.ndarray, upper: float = math.inf) -> np.ndarray:
        x = np.atleast_2d(x)
        a, w = self.amplitude, 2 * np.pi
        x1, x2 = x[:, 0], x[:, 1]

        def gap(t):
            v = x2 - a * np.sin(w * t)
            return v - np.round(v)

        def newton(t, x1, x2):
            for _ in range(12):
                v = x2 - a * np.sin(w * t)
                v = v - np.round(v)
                c, sn = np.cos(w * t), np.sin(w * t)
                g = (t - x1) - v * a * w * c
                dg = 1 + (a * w * c) ** 2 + v * a * w * w * sn
                t = t - g / np.where(np.abs(dg) > 1e-12, dg, 1.0)
            return t

        vertical = np.abs(gap(x1))
        t = newton(x1.copy(), x1, x2)
        out = np.minimum(np.hypot(t - x1, gap(t)), vertical)
        if a == 0:
            return out
        reach = 0.5 / (w * w * a)
        far = (out > reach) & (vertical / math.hypot(1.0, a * w) <= upper)
        for idx in np.array_split(np.nonzero(far)[0], max(1, int(far.sum()) // 4096)):
            if idx.size:
                out[idx] = self._scan(x1[idx], x2[idx], newton)
        return out

    def _scan(self, x1, x2, newton):
        def wrapped_gap(t, y):
            v = y - self.amplitude * np.sin(2 * np.pi * t)
            return v - np.round(v)

        offs = np.arange(self._SCAN) / self._SCAN - 0.5
        dist = np.hypot(offs[None, :], wrapped_gap(x1[:, None] + offs[None, :], x2[:, None]))
        t = newton(x1 + offs[np.argmin(dist, axis=1)], x1, x2)
        return np.minimum(np.hypot(t - x1, wrapped_gap(t, x2)), dist.min(axis=1))

    def describe(self) -> str:
        return f"graph of {self.amplitude:g} sin(2 pi x_1)"


class CircleSupport:
    """Circle of radius ``r < 1/2`` about ``centre`` in the plane of the first two axes
    (at the centre's remaining coordinates); distances are exact."""

    def __init__(self, centre, radius: float):
        self.centre = np.asarray(centre, dtype=float)
        self.radius = float(radius)
        self.resolution = 0.0
        self.name = "circle"

    @property
    def d(self) -> int:
        return len(self.centre)

    def distance(self, x: np.ndarray, upper: float = math.inf) -> np.ndarray:
        x = np.atleast_2d(x)
        rel = x - self.centre
        rel = rel - np.round(rel)
        off = np.sum(rel[:, 2:] ** 2, axis=1)
        best = np.full(len(x), np.inf)
        # the nearest point may sit on a neighbouring periodic image of the circle
        for s0 in (-1, 0, 1):
            for s1 in (-1, 0, 1):
                planar = np.hypot(rel[:, 0] + s0, rel[:, 1] + s1) - self.radius
                best = np.minimum(best, np.sqrt(planar**2 + off))
        return best

    def describe(self) -> str:
        return f"circle of radius {self.radius:g} about {tuple(self.centre)}"


# ---------------------------------------------------------------------------
# measures


@dataclass
class TorusMeasure:
    """Fourier coefficients of a finite measure on ``T^d`` over the block ``|n|_inf <= N``.

    ``coeffs[n + N]`` holds the coefficient of mode ``n`` (array of shape
    ``(2N+1,) * d``).  ``mass`` is the total variation, ``support_dim`` the
    dimension ``k`` of the support used by the neighbourhood-growth condition.
    """

    d: int
    N: int
    coeffs: np.ndarray
    support: object | None = None
    label: str = "custom"
    mass: float = 1.0
    support_dim: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.N + 1,) * self.d:
            raise ValueError(f"coefficients must have shape {(2 * self.N + 1,) * self.d}")
        if self.support is not None and self.support.d != self.d:
            raise ValueError("support descriptor lives in a different dimension")

    @property
    def is_real(self) -> bool:
        flipped = self.coeffs[(slice(None, None, -1),) * self.d]
        return bool(np.allclose(flipped, np.conj(self.coeffs), rtol=0, atol=1e-13))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def modes(self) -> list[np.ndarray]:
        """Open-grid integer coordinates ``n_k`` of the block."""
        ax = np.arange(-self.N, self.N + 1)
        return list(np.ix_(*([ax] * self.d)))

    def squared_norm(self) -> np.ndarray:
        """``|n|^2`` on the block."""
        return sum(a * a for a in self.modes())

    def coefficient(self, n) -> complex:
        n = tuple(int(v) for v in np.atleast_1d(n))
        if any(abs(v) > self.N for v in n):
            raise IndexError(f"mode {n} is outside the block of radius {self.N}")
        return complex(self.coeffs[tuple(v + self.N for v in n)])


def _check_block(N: int) -> int:
    if int(N) != N or N < 8:
        raise ValueError("block radius N must be an integer >= 8")
    return int(N)


def make_torus_measure(kind: str, params: dict | None = None, N: int | None = None) -> TorusMeasure:
    """Build a corpus measure on the torus.

    Parameters
    ----------
    kind : str
        ``dirac`` (point mass at ``at``, default the origin),
        ``sub-torus`` (uniform measure on ``{x_k = 0 for k >= dim}``, ``dim``
        defaults to ``d - 1``),
        ``embedded-circle`` (arc length on the circle of ``radius`` 1/4 about
        ``centre`` in the first two coordinates, normalised to mass one),
        ``cantor-on-T1`` (middle-``ratio`` Cantor measure of finite ``depth``),
        ``curve-graph`` (push-forward of ``dx_1`` under ``x_1 -> (x_1, a sin 2 pi x_1)``).
    params : dict
        Kind-specific parameters plus ``d``; ``resolution`` requests a support
        resolution that the block must resolve (``N * resolution >= 1``).
    N : int
        Block radius, default :func:`default_block`.
    """
    params = dict(params or {})
    if kind not in TORUS_KINDS:
        raise ValueError(f"unknown torus measure {kind!r}; expected one of {TORUS_KINDS}")
    d = int(params.pop("d", 1 if kind == "cantor-on-T1" else 2))
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    N = _check_block(N if N is not None else default_block(d))
    res = params.pop("resolution", None)
    if res is not None and float(res) * N < 1:
        raise ValueError(f"block radius N={N} cannot resolve support resolution {res}; need N >= {1 / float(res):g}")
    u = _TORUS_BUILDERS[kind](d, N, params)
    u.params = {"kind": kind, "d": d, "N": N, **params}
    return u


def _zero_block(d, N):
    return np.zeros((2 * N + 1,) * d, dtype=complex)


def _modes(d, N):
    ax = np.arange(-N, N + 1)
    return list(np.ix_(*([ax] * d)))


def _torus_dirac(d, N, p):
    at = np.mod(np.asarray(p.pop("at", [0.0] * d), dtype=float), 1.0)
    if at.shape != (d,):
        raise ValueError("'at' must have d coordinates")
    phase = sum(n * x for n, x in zip(_modes(d, N), at))
    c = np.exp(-2j * np.pi * phase) * np.ones((2 * N + 1,) * d)
    return TorusMeasure(d, N, c, PointSupport(at[None, :], 0.0, "point"), "dirac", 1.0, 0.0)


def _sub_torus(d, N, p):
    s = int(p.pop("dim", d - 1))
    if not 1 <= s <= d - 1:
        raise ValueError("sub-torus dimension must lie in 1..d-1")
    c = _zero_block(d, N)
    # coefficient 1 iff the first s ('along') components vanish
    idx = tuple([N] * s + [slice(None)] * (d - s))
    c[idx] = 1.0
    return TorusMeasure(d, N, c, SubTorusSupport(d, range(s, d)), "sub-torus", 1.0, float(s))


def _embedded_circle(d, N, p):
    if d < 2:
        raise ValueError("embedded-circle needs d >= 2")
    r = float(p.pop("radius", 0.25))
    centre = np.asarray(p.pop("centre", [0.5] * d), dtype=float)
    if not 0 < r < 0.5:
        raise ValueError("radius must lie in (0, 1/2)")
    n = _modes(d, N)
    rho = np.sqrt(n[0] ** 2 + n[1] ** 2)
    phase = sum(nk * ck for nk, ck in zip(n, centre))
    c = np.exp(-2j * np.pi * phase) * special.j0(2 * np.pi * r * rho) * np.ones((2 * N + 1,) * d)

    return TorusMeasure(d, N, c, CircleSupport(centre, r), "embedded-circle", 1.0, 1.0)


def _cantor_torus(d, N, p):
    if d != 1:
        raise ValueError("cantor-on-T1 lives on T^1")
    ratio = float(p.pop("ratio", 1.0 / 3.0))
    depth = p.pop("depth", None)
    if depth is None:
        # finest gap below 1/(8N)
        depth = max(1, int(math.ceil(math.log(8 * N) / math.log(1 / ratio))))
    depth = int(depth)
    if not 0 < ratio < 0.5:
        raise ValueError("ratio must lie in (0, 1/2)")
    n = np.arange(-N, N + 1, dtype=float)
    c = np.ones(2 * N + 1, dtype=complex)
    for j in range(depth):
        c *= (1 + np.exp(-2j * np.pi * n * (1 - ratio) * ratio**j)) / 2
    atoms = cantor_atoms(ratio, depth)
    return TorusMeasure(1, N, c, PointSupport(atoms[:, None], 0.0, "cantor atoms"), "cantor-on-T1", 1.0,
                        math.log(2) / math.log(1 / ratio), {"depth": depth})


def _curve_graph(d, N, p):
    if d != 2:
        raise ValueError("curve-graph lives on T^2")
    a = float(p.pop("amplitude", 0.1))
    n1, n2 = _modes(2, N)
    # Jacobi-Anger: int_0^1 e^{-2 pi i (n1 t + n2 a sin 2 pi t)} dt = (-1)^{n1} J_{n1}(2 pi a n2)
    c = ((-1.0) ** n1) * special.jv(n1, 2 * np.pi * a * n2) * np.ones((2 * N + 1,) * 2)

    if not 0 < a <= 0.1:
        # keeps the curvature radius above 1/4, beyond every neighbourhood radius used
        raise ValueError("amplitude must lie in (0, 0.1]")
    return TorusMeasure(2, N, c.astype(complex), GraphSupport(a), "curve-graph", 1.0, 1.0)


_TORUS_BUILDERS = {
    "dirac": _torus_dirac,
    "sub-torus": _sub_torus,
    "embedded-circle": _embedded_circle,
    "cantor-on-T1": _cantor_torus,
    "curve-graph": _curve_graph,
}


# ---------------------------------------------------------------------------
# bands


@dataclass
class SpectralBands:
    """Eigenspaces met by the ball ``|n| <= N``.

    ``m`` are the integers ``|n|^2`` that occur, ``lam = 2 pi sqrt(m)``.
    """

    m: np.ndarray
    multiplicity: np.ndarray
    energy: np.ndarray

    @property
    def lam(self) -> np.ndarray:
        return 2 * np.pi * np.sqrt(self.m)

    def rows(self) -> list[dict]:
        return [{"m": int(a), "lambda": float(2 * math.pi * math.sqrt(a)), "multiplicity": int(b), "energy": float(e)}
                for a, b, e in zip(self.m, self.multiplicity, self.energy)]


def bands(u: TorusMeasure) -> SpectralBands:
    """Projector energies ``||E_lambda u|| = (sum_{|n|^2 = m} |c_n|^2)^{1/2}`` over the ball ``|n| <= N``."""
    sq = u.squared_norm()
    sq = np.broadcast_to(sq, u.coeffs.shape).ravel()
    ball = sq <= u.N**2
    sq = sq[ball]
    w = np.abs(u.coeffs.ravel()[ball]) ** 2
    mult = np.bincount(sq)
    energy2 = np.bincount(sq, weights=w)
    m = np.nonzero(mult)[0]
    return SpectralBands(m, mult[m], np.sqrt(energy2[m]))


def block_energy(u: TorusMeasure) -> float:
    """``sum |c_n|^2`` over the ball, for Parseval checks."""
    sq = np.broadcast_to(u.squared_norm(), u.coeffs.shape)
    return math.fsum(np.abs(u.coeffs[sq <= u.N**2]) ** 2)


# ---------------------------------------------------------------------------
# norms


def _band_reach(psi: Mollifier, R: float, eps_tail: float) -> float:
    """Largest ``|n|`` carrying weight at scale R (certified truncation for the space-compact family)."""
    if psi.family == BAND_LIMITED:
        return psi.band_radius * R
    return psi.effective_truncation(R, eps_tail)


def check_band(u: TorusMeasure, psi: Mollifier, R: float, eps_tail: float = DEFAULT_EPS_TAIL) -> None:
    reach = _band_reach(psi, R, eps_tail)
    if reach > u.N * (1 + 1e-12):
        raise ValueError(f"band exceeds block: scale R={R:g} reaches |n| = {reach:g} > N = {u.N}")


@dataclass
class SpectralNorms:
    """``A_{q,R} = R^{-d/q} ||c||_q`` for ``c_lambda = |psi(lambda/R)| ||E_lambda u||``."""

    R: float
    a1: float
    a2: float
    ap: float
    p: float
    c: np.ndarray = field(repr=False)
    lambda_max: float
    bands: int

    @property
    def fr(self) -> float:
        return self.a1 / self.a2 if self.a2 > 0 else math.nan


def _weights(psi: Mollifier, m: np.ndarray, R: float) -> np.ndarray:
    return np.abs(psi.radial(np.sqrt(m) / R))


def spectral_norms(u: TorusMeasure, psi: Mollifier, R: float, p: float = 4.0,
                   eps_tail: float = DEFAULT_EPS_TAIL, b: SpectralBands | None = None) -> SpectralNorms:
    """Localised spectral norms at scale R; exact over the block for the band-limited family.

    Raises when the band of weights at scale R does not fit in the block.
    """
    if psi.dim != u.d:
        raise ValueError("mollifier dimension differs from the torus dimension")
    if not R > 0:
        raise ValueError("R must be positive")
    check_band(u, psi, R, eps_tail)
    b = b or bands(u)
    c = _weights(psi, b.m, R) * b.energy
    d = u.d
    s1 = math.fsum(c)
    s2 = math.fsum(c * c)
    sp = math.fsum(c**p)
    live = b.m[c > 0]
    lam_max = float(2 * math.pi * math.sqrt(live.max())) if live.size else 0.0
    return SpectralNorms(float(R), R**-d * s1, R ** (-d / 2) * math.sqrt(s2), R ** (-d / p) * sp ** (1 / p),
                         float(p), c, lam_max, int(np.count_nonzero(c)))


@dataclass
class ManifoldLadder:
    """Ratio series over a ladder, its exponent estimate and the per-scale norms.

    ``estimate`` is None (and ``error`` set) when the ratio is undefined.
    """

    series: RatioSeries
    norms: list
    estimate: ExponentEstimate | None
    error: str = ""


def manifold_ratio_ladder(u: TorusMeasure, psi: Mollifier, ladder: Sequence[float] | None = None, p: float = 4.0,
                          eps_tail: float = DEFAULT_EPS_TAIL, tail_fraction: float = 0.5) -> ManifoldLadder:
    """Spectral Fourier ratio at every scale and the decay exponent ``kappa_M``."""
    ladder = check_ladder(ladder if ladder is not None else default_torus_ladder(u.d, u.N))
    b = bands(u)
    norms = [spectral_norms(u, psi, R, p, eps_tail, b) for R in ladder]
    series = RatioSeries(u.label, psi.family, float(eps_tail), float(p), ladder, [n.a1 for n in norms],
                         [n.a2 for n in norms], [n.ap for n in norms], [n.fr for n in norms],
                         extra_columns={"lambda_max": [n.lambda_max for n in norms]})
    try:
        est = estimate_kappa(series, tail_fraction=tail_fraction)
        err = ""
    except ValueError as exc:
        est, err = None, str(exc)
    return ManifoldLadder(series, norms, est, err)


# ---------------------------------------------------------------------------
# spatial synthesis and propagation


def default_grid_size(u: TorusMeasure) -> int:
    """Smallest power of two with spacing at most 1/(4N)."""
    return 1 << int(math.ceil(math.log2(4 * u.N)))


def apply_multiplier(u: TorusMeasure, psi: Mollifier, R: float, M: int | None = None) -> np.ndarray:
    """``P_R u`` sampled on the grid ``(j / M)`` of ``T^d``.

    Synthesises ``sum_{|n| <= N} psi.radial(|n|/R) c_n e^{2 pi i n.x}`` by an
    inverse FFT; ``M`` must give spacing at most ``1/(4N)``.
    """
    if psi.dim != u.d:
        raise ValueError("mollifier dimension differs from the torus dimension")
    M = M or default_grid_size(u)
    if M < 4 * u.N:
        raise ValueError(f"grid too coarse: M={M} gives spacing 1/{M} > 1/(4N) = 1/{4 * u.N}")
    if M**u.d > _FFT_BUDGET:
        raise MemoryError(f"grid of {M}^{u.d} points exceeds the synthesis budget")
    sq = np.broadcast_to(u.squared_norm(), u.coeffs.shape)
    w = np.where(sq <= u.N**2, psi.radial(np.sqrt(sq) / R), 0.0)
    F = np.zeros((M,) * u.d, dtype=complex)
    idx = np.ix_(*([np.arange(-u.N, u.N + 1) % M] * u.d))
    F[idx] = w * u.coeffs
    return np.fft.ifftn(F) * M**u.d


def multiplier_coefficients(u: TorusMeasure, psi: Mollifier, R: float) -> np.ndarray:
    """Block coefficients of ``P_R u`` (zero outside the ball)."""
    sq = np.broadcast_to(u.squared_norm(), u.coeffs.shape)
    return np.where(sq <= u.N**2, psi.radial(np.sqrt(sq) / R), 0.0) * u.coeffs


def field_l2(P: np.ndarray) -> float:
    """``||P||_{L2(T^d)}`` from grid samples (exact for trigonometric polynomials the grid resolves)."""
    return math.sqrt(math.fsum(np.abs(P.ravel()) ** 2) / P.size)


def grid_points(M: int, d: int, chunk: slice | None = None) -> np.ndarray:
    """Grid nodes ``j / M`` in C order, optionally a slice of the flattened index."""
    flat = np.arange(M**d)[chunk] if chunk is not None else np.arange(M**d)
    idx = np.stack(np.unravel_index(flat, (M,) * d), axis=1)
    return idx / M


def support_distance(support, M: int, d: int, upper: float = math.inf, chunk: int = 2**20) -> np.ndarray:
    """Periodic distance to the support at every grid node (flattened C order).

    Distances above ``upper`` may be returned as ``inf``.
    """
    out = np.empty(M**d)
    for start in range(0, M**d, chunk):
        sl = slice(start, min(start + chunk, M**d))
        out[sl] = support.distance(grid_points(M, d, sl), upper)
    return out


def propagation_radius(psi: Mollifier, R: float) -> float:
    """Support growth ``r / R`` of ``P_R``; infinite for the band-limited family."""
    return psi.space_radius / R


@dataclass
class LeakReport:
    R: float
    radius: float
    leak: float
    tol: float
    grid: int
    support: str

    @property
    def passed(self) -> bool:
        return self.leak <= self.tol


def support_propagation_check(u: TorusMeasure, psi: Mollifier, R: float, tol: float = DEFAULT_LEAK_TOLERANCE,
                              support=None, M: int | None = None, eps_tail: float = DEFAULT_EPS_TAIL) -> LeakReport:
    """Fraction of ``||P_R u||^2`` outside ``E^{r/R}`` on the spatial grid.

    ``support`` overrides the measure's own descriptor (for negative controls).
    The neighbourhood is widened by the descriptor's sampling resolution.
    """
    support = support if support is not None else u.support
    if support is None:
        raise ValueError("the measure carries no support descriptor")
    if not math.isfinite(psi.space_radius):
        raise ValueError("finite propagation needs the space-compact family")
    check_band(u, psi, R, eps_tail)
    M = M or default_grid_size(u)
    radius = propagation_radius(psi, R)
    if M * radius < 2:
        raise ValueError(f"grid of {M} points cannot resolve the neighbourhood radius {radius:g}")
    P = apply_multiplier(u, psi, R, M)
    a = np.abs(P.ravel()) ** 2
    dist = support_distance(support, M, u.d, upper=2 * (radius + support.resolution))
    total = math.fsum(a)
    outside = math.fsum(a[dist > radius + support.resolution])
    leak = outside / total if total > 0 else 0.0
    return LeakReport(float(R), radius, leak, tol, M, support.describe())


def neighborhood_fraction(support, delta: float, M: int, d: int) -> float:
    """``|E^delta|`` estimated by the fraction of grid nodes within ``delta`` of the support."""
    dist = support_distance(support, M, d, upper=2 * (delta + support.resolution))
    return float(np.count_nonzero(dist <= delta + support.resolution)) / dist.size


# ---------------------------------------------------------------------------
# block-partial sums


@dataclass
class PartialSums:
    """``sum_{lambda <= L} ||E_lambda u||^p`` for dyadic cutoffs ``L``; always block-partial."""

    p: float
    cutoffs: list
    sums: list
    increment: float
    saturated: bool
    label: str = "block-partial"


def block_partial_sums(u: TorusMeasure, p: float, tol: float = SATURATION_TOLERANCE) -> PartialSums:
    """Partial sums of the projector energies to the power ``p`` over the block.

    ``saturated`` flags a relative increment below ``tol`` over the last
    dyadic range of ``|n|``, i.e. between ``N/2`` and ``N``.  It is a
    heuristic statement about the block, not a convergence proof.
    """
    b = bands(u)
    terms = b.energy**p
    radii = np.sqrt(b.m)
    cutoffs = [2**j for j in range(int(math.log2(u.N)) + 1)]
    if cutoffs[-1] != u.N:
        cutoffs.append(u.N)
    sums = [math.fsum(terms[radii <= L]) for L in cutoffs]
    half = math.fsum(terms[radii <= u.N / 2])
    inc = (sums[-1] - half) / sums[-1] if sums[-1] > 0 else 0.0
    return PartialSums(float(p), cutoffs, sums, inc, bool(inc < tol))


# ---------------------------------------------------------------------------
# manifold proof chain


def _test_function(x: np.ndarray) -> np.ndarray:
    return np.exp(np.sum(np.cos(2 * np.pi * x), axis=1))


@dataclass
class ManifoldChainReport:
    label: str
    d: int
    k: float
    p: float
    epsilon: float
    kappa_prime: float
    kappa_used: float
    rows: list
    volume_constant: float
    fitted_k: float | None
    exponent: float
    exponent_sign: int
    verdict: str
    partial_sums: PartialSums
    checks: dict

    @property
    def consistent(self) -> bool:
        return all(self.checks.values())

    @property
    def chain_label(self) -> str:
        return "chain consistent" if self.consistent else "chain inconsistent"

    def summary(self) -> dict:
        ps = self.partial_sums
        return {
            "label": self.label, "d": self.d, "k": self.k, "p": self.p, "epsilon": self.epsilon,
            "kappa_prime": self.kappa_prime, "kappa_used": self.kappa_used,
            "volume_constant": self.volume_constant, "fitted_k": self.fitted_k,
            "exponent": self.exponent, "exponent_sign": self.exponent_sign, "verdict": self.verdict,
            "chain": self.chain_label, "checks": self.checks,
            "partial_sums": {"label": ps.label, "p": ps.p, "total": ps.sums[-1], "last_increment": ps.increment,
                             "saturated": ps.saturated},
        }


def manifold_proof_chain_check(u: TorusMeasure, psi: Mollifier, ladder: Sequence[float] | None = None,
                               p: float = 3.0, epsilon: float = DEFAULT_EPSILON, k: float | None = None,
                               eps_tail: float = DEFAULT_EPS_TAIL, spatial: bool = True,
                               M: int | None = None) -> ManifoldChainReport:
    """Replay the inequality chain of the manifold argument on band sequences.

    Rows per scale: the decay bound ``||c||_1 <= C R^{d/2 - kappa''} ||c||_2``
    (checked as non-increase of ``FR R^{kappa''}`` on the tail), sequence
    Hoelder ``||c||_2 <= ||c||_1^theta ||c||_p^{1-theta}``, the spatial
    Cauchy-Schwarz pairing of ``P_R u`` with a fixed smooth function over
    ``E^{1/R}`` and the volume ``|E^{1/R}|`` with its fitted constant.  The
    exponent is ``p (k - 2 kappa'') - 2 (d - 2 kappa'')``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if u.support is None:
        raise ValueError("the measure carries no support descriptor")
    lad = manifold_ratio_ladder(u, psi, ladder, p, eps_tail)
    if lad.estimate is None:
        raise ValueError(lad.error)
    d = u.d
    k = float(u.support_dim if k is None else k)
    est = lad.estimate
    kappa_prime = est.kappa_min
    kappa_used = kappa_prime - epsilon
    series = lad.series
    M = M or default_grid_size(u)
    reach = 2 * (1.0 / min(lad.series.ladder) + u.support.resolution)
    dist = support_distance(u.support, M, d, upper=reach)
    phi = None
    rows, volumes = [], []
    holder_ok = pairing_ok = True
    i0 = est.window[0]
    scaled = [f * R**kappa_used for R, f in zip(series.ladder, series.fr)]
    tail = scaled[i0:]
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))
    for i, (R, n) in enumerate(zip(series.ladder, lad.norms)):
        inside = dist <= 1.0 / R + u.support.resolution
        vol = float(np.count_nonzero(inside)) / dist.size
        volumes.append(vol)
        hl, hr, hok = sequence_holder(n.c, p)
        holder_ok &= hok
        row = {"R": R, "FR": n.fr, "lambda_max": n.lambda_max, "decay_constant": scaled[i], "tail": i >= i0,
               "holder_lhs": hl, "holder_rhs": hr, "holder_ok": hok, "volume": vol}
        if spatial:
            if phi is None:
                phi = np.concatenate([_test_function(grid_points(M, d, slice(s, min(s + 2**20, M**d))))
                                      for s in range(0, M**d, 2**20)])
            P = apply_multiplier(u, psi, R, M).ravel()
            cell = 1.0 / M**d
            pairing = abs(np.sum(P[inside] * phi[inside])) * cell
            gl2 = math.sqrt(math.fsum(np.abs(P[inside]) ** 2) * cell)
            fl2 = math.sqrt(math.fsum(phi[inside] ** 2) * cell)
            ok = pairing <= gl2 * fl2 * (1 + 1e-9)
            pairing_ok &= ok
            row.update(pairing=pairing, pairing_rhs=gl2 * fl2, pairing_ok=ok)
        rows.append(row)
    vs = [v * R ** (d - k) for v, R in zip(volumes, series.ladder)]
    C = max(vs)
    for row in rows:
        row["volume_bound"] = C * row["R"] ** (k - d)
    logs = np.log([1.0 / R for R in series.ladder])
    fitted_k = None
    if all(v > 0 for v in volumes) and len(volumes) >= 2:
        fitted_k = float(d - np.polyfit(logs, np.log(volumes), 1)[0])
    e = p * (k - 2 * kappa_used) - 2 * (d - 2 * kappa_used)
    sign = int(np.sign(e))
    checks = {"decay_monotone_on_tail": bool(monotone), "holder": bool(holder_ok)}
    if spatial:
        checks["pairing_cauchy_schwarz"] = bool(pairing_ok)
    return ManifoldChainReport(u.label, d, k, float(p), float(epsilon), float(kappa_prime), float(kappa_used), rows,
                               float(C), fitted_k, float(e), sign,
                               "pairing bound decays" if sign < 0 else "pairing bound does not decay",
                               block_partial_sums(u, p), checks)
