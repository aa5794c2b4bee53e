"""Mollified Fourier transforms of discrete measures and their regularised norms.

For a discrete measure with atoms ``c_j = w_j f(x_j)`` the mollified transform
at scale ``R`` is

    g(xi) = hat psi(xi / R) * sum_j c_j exp(-2 pi i x_j . xi),

and the regularised norms are ``X_p = (R^{-d} int |g|^p)^{1/p}``, evaluated
as Riemann sums over the cube ``[-T, T]^d`` with spacing ``h``.

The node values are produced by type-1 nonuniform FFTs over tiles of the
frequency lattice.  Exact symmetries of ``|g|`` (conjugate symmetry for real
densities, coordinate reflections of the recentred cloud) fold the lattice so
that only one representative of each orbit is transformed.
A deterministic subset of nodes is re-evaluated by direct summation (the
audit); the result is stored with every norm computation.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import finufft
import numpy as np
from scipy.spatial import cKDTree

from .measures import DiscreteMeasure
from .mollifier import Mollifier

DEFAULT_EPS_TAIL = 0.05
DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes of stored node values
DEFAULT_MAX_NODES = 4_000_000_000  # nodes visited by the streaming norm pass
AUDIT_FRACTION = 0.01
AUDIT_CAP = 4096
AUDIT_TOLERANCE = 1e-10

_TILE_NODES = 2**22
_DIRECT_CHUNK = 2**22
_AUDIT_WORK = 2**26


class BudgetExceeded(MemoryError):
    """The frequency grid does not fit the configured budget."""


def default_spacing(m: DiscreteMeasure) -> float:
    """Largest admissible node spacing, 1 / (4 (diam + 1))."""
    return 1.0 / (4.0 * (m.diameter + 1.0))


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform lattice ``h Z^d`` restricted to ``[-T, T]^d``.

    ``M = ceil(T / h)`` nodes are used on each side of the origin, so the
    window is never narrower than requested.
    """

    d: int
    half_width: float
    spacing: float

    @property
    def M(self) -> int:
        return int(math.ceil(self.half_width / self.spacing - 1e-9))

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.M + 1,) * self.d

    @property
    def node_count(self) -> int:
        return (2 * self.M + 1) ** self.d

    @property
    def nbytes(self) -> int:
        return 16 * self.node_count

    def axis(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1) * self.spacing

    def nodes(self) -> np.ndarray:
        """All nodes, C order, shape (node_count, d)."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)


def make_grid(m: DiscreteMeasure, psi: Mollifier, R: float, eps_tail: float = DEFAULT_EPS_TAIL,
              spacing: float | None = None) -> FrequencyGrid:
    """Grid for scale ``R``: half-width from the mollifier tail, spacing from the support diameter."""
    if psi.dim != m.d:
        raise ValueError(f"mollifier dimension {psi.dim} does not match measure dimension {m.d}")
    h_max = default_spacing(m)
    h = h_max if spacing is None else float(spacing)
    if h > h_max * (1 + 1e-12):
        raise ValueError(f"spacing {h:g} exceeds the admissible 1/(4(diam+1)) = {h_max:g}")
    T = psi.effective_truncation(R, eps_tail)
    return FrequencyGrid(m.d, T, h)


@dataclass
class SpectrumSample:
    """Materialised node values of the mollified transform on a grid."""

    grid: FrequencyGrid
    values: np.ndarray  # shape grid.shape, complex
    R: float
    eps_tail: float
    audit: dict = field(default_factory=dict)


@dataclass
class SpectrumNorms:
    """Streaming node sums at one scale.

    ``sums[p]`` is ``sum_nodes |g|^p`` (``max |g|`` for ``p = inf``) over the
    full window, ``x[p]`` the corresponding regularised norm.
    """

    R: float
    grid: FrequencyGrid
    eps_tail: float
    sums: dict
    x: dict
    region_l1: dict
    node_count: int
    audit: dict
    capped: bool = False
    requested_half_width: float | None = None
    symmetry: str = "none"

    @property
    def fr(self) -> float:
        return self.x[1] / self.x[2]


def _check_scale(m: DiscreteMeasure, R: float) -> None:
    if not R > 0:
        raise ValueError("R must be positive")
    m.check_scale(1.0 / R, what="1/R")


# ---------------------------------------------------------------------------
# direct summation


def direct_sum(points: np.ndarray, coeffs: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """sum_j c_j exp(-2 pi i x_j . xi) for each row of xi, summed in index order."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    out = np.empty(len(xi), dtype=complex)
    per = max(1, _DIRECT_CHUNK // max(1, len(points)))
    for s in range(0, len(xi), per):
        phase = -2.0 * np.pi * (xi[s : s + per] @ points.T)
        out[s : s + per] = np.sum(coeffs[None, :] * np.exp(1j * phase), axis=1)
    return out


def transform_at(m: DiscreteMeasure, psi: Mollifier, R: float, xi) -> np.ndarray:
    """Mollified transform at frequencies ``xi`` (shape (d,) or (k, d)) by direct summation."""
    if not R > 0:
        raise ValueError("R must be positive")
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim <= 1 and (m.d > 1 or xi.ndim == 0)
    xi2 = xi.reshape(-1, m.d)
    vals = direct_sum(m.points, m.coefficients, xi2) * psi.frequency(xi2 / R)
    return vals[0] if single else vals


# ---------------------------------------------------------------------------
# tiled nonuniform FFT


class _TileEngine:
    """Evaluates ``sum_j c_j exp(-2 pi i xc_j . m h)`` on rectangular blocks of lattice indices.

    ``xc`` are the support points recentred on the bounding-box centre; the
    phase ``exp(-2 pi i center . xi)`` is restored by :meth:`phase`.
    """

    def __init__(self, m: DiscreteMeasure, h: float):
        lo, hi = m.bbox
        self.center = (lo + hi) / 2
        self.xc = m.points - self.center
        self.scaled = [np.ascontiguousarray(2 * np.pi * h * self.xc[:, k]) for k in range(m.d)]
        self.c = np.ascontiguousarray(m.coefficients.astype(complex))
        self.h = h
        self.d = m.d
        self.real = m.is_real
        # upsampling 1.25 is faster but its errors reach 1e-9 on lattice-aligned clouds
        self.nufft_opts = dict(eps=1e-12, upsampfac=2.0)

    def symmetry(self) -> tuple[str, tuple]:
        """Symmetries of |values| used to fold the lattice.

        Returns ``("reflect", axes)`` when the recentred cloud (with its
        coefficients) is invariant under x_k -> -x_k for the listed axes,
        ``("conjugate", (0,))`` for real coefficients without such axes, and
        ``("none", ())`` otherwise.  Real coefficients plus reflection symmetry
        in every axis but the first imply symmetry in the first as well.
        """
        axes = [k for k in range(self.d) if self._reflection_invariant(k)]
        if self.real and all(k in axes for k in range(1, self.d)):
            return "reflect", tuple(range(self.d))
        if axes:
            return "reflect", tuple(axes)
        if self.real:
            return "conjugate", (0,)
        return "none", ()

    def _reflection_invariant(self, k: int) -> bool:
        n = len(self.c)
        scale = float(np.abs(self.xc).max()) + 1.0
        mirrored = self.xc.copy()
        mirrored[:, k] *= -1
        dist, idx = cKDTree(self.xc).query(mirrored)
        if dist.max() > 1e-12 * scale or len(np.unique(idx)) != n:
            return False
        return bool(np.max(np.abs(self.c[idx] - self.c)) <= 1e-12 * np.max(np.abs(self.c)))

    def block(self, starts: Sequence[int], sizes: Sequence[int]) -> np.ndarray:
        d = self.d
        gs = [s + (s % 2) for s in sizes]  # finufft mode counts, even
        offs = [a + g // 2 for a, g in zip(starts, gs)]
        shift = sum(o * x for o, x in zip(offs, self.scaled))
        cc = self.c * np.exp(-1j * shift)
        kw = dict(isign=-1, nthreads=1, **self.nufft_opts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if d == 1:
                f = finufft.nufft1d1(self.scaled[0], cc, gs[0], **kw)
            elif d == 2:
                f = finufft.nufft2d1(self.scaled[0], self.scaled[1], cc, tuple(gs), **kw)
            else:
                f = finufft.nufft3d1(*self.scaled, cc, tuple(gs), **kw)
        return f[tuple(slice(0, s) for s in sizes)]

    def direct(self, idx: np.ndarray) -> np.ndarray:
        return direct_sum(self.xc, self.c, idx * self.h)

    def phase(self, xi: np.ndarray) -> np.ndarray:
        return np.exp(-2j * np.pi * (xi @ self.center))


def _tiles(M: int, d: int, folded=()):
    """Blocks of lattice indices covering [-M, M]^d; axes in ``folded`` start at 0."""
    edge = max(16, int(round(_TILE_NODES ** (1.0 / d))))
    full = [(a, min(edge, M + 1 - a)) for a in range(-M, M + 1, edge)]
    half = [(a, min(edge, M + 1 - a)) for a in range(0, M + 1, edge)]
    axes = [half if k in folded else full for k in range(d)]
    for combo in np.ndindex(*[len(a) for a in axes]):
        yield tuple(axes[k][i] for k, i in enumerate(combo))


def _fold_weight(mode: str, folded, idx_axes):
    """Number of lattice nodes each computed node stands for."""
    d = len(idx_axes)
    if mode == "none":
        return 1.0
    if mode == "conjugate":
        return np.where(idx_axes[0] > 0, 2.0, 1.0).reshape([-1] + [1] * (d - 1))
    w = 1.0
    for k in folded:
        shape = [1] * d
        shape[k] = -1
        w = w * np.where(idx_axes[k] > 0, 2.0, 1.0).reshape(shape)
    return w


def _image_count(region, xi: np.ndarray, R: float, mode: str, folded) -> np.ndarray:
    """How many of the nodes represented by each computed node lie in ``region``."""
    count = region.contains(xi, R).astype(float)
    if mode == "conjugate":
        return count + np.where(xi[:, 0] > 0, region.contains(-xi, R), False)
    if mode == "reflect":
        for r in range(1, len(folded) + 1):
            for axes in itertools.combinations(folded, r):
                img = xi.copy()
                img[:, list(axes)] *= -1
                distinct = np.all(xi[:, list(axes)] > 0, axis=1)
                count = count + (distinct & region.contains(img, R))
    return count


def _image_count_grid(region, axes, R: float, mode: str, folded) -> np.ndarray:
    """Tensor-grid version of :func:`_image_count` for regions with ``grid_mask``."""
    d = len(axes)
    count = region.grid_mask(axes, R).astype(float)

    def positive(k):
        shape = [1] * d
        shape[k] = -1
        return (axes[k] > 0).reshape(shape)

    if mode == "conjugate":
        return count + (positive(0) & region.grid_mask([-a for a in axes], R))
    if mode == "reflect":
        for r in range(1, len(folded) + 1):
            for flip in itertools.combinations(folded, r):
                img = [-a if k in flip else a for k, a in enumerate(axes)]
                distinct = np.ones([1] * d, dtype=bool)
                for k in flip:
                    distinct = distinct & positive(k)
                count = count + (distinct & region.grid_mask(img, R))
    return count


def _radial_multiplier(psi: Mollifier, idx_axes: list[np.ndarray], h: float, R: float) -> np.ndarray:
    sq = 0.0
    for k, ax in enumerate(idx_axes):
        shape = [1] * len(idx_axes)
        shape[k] = -1
        sq = sq + ((ax * h) ** 2).reshape(shape)
    return psi.radial(np.sqrt(sq) / R)


def _audit_indices(M: int, d: int, folded, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = rng.integers(-M, M + 1, size=(count, d))
    for k in folded:
        idx[:, k] = np.abs(idx[:, k])
    return idx


def _audit_count(node_count: int, fraction: float, cap: int, n_points: int) -> int:
    """Audit size: ``fraction`` of the nodes, at most ``cap``, and at most 2^26 direct terms (>= 64 nodes)."""
    work_cap = max(64, _AUDIT_WORK // max(1, n_points))
    return int(min(cap, work_cap, max(1, math.ceil(fraction * node_count))))


def _in_tile(idx: np.ndarray, starts, sizes) -> np.ndarray:
    ok = np.ones(len(idx), dtype=bool)
    for k, (a, n) in enumerate(zip(starts, sizes)):
        ok &= (idx[:, k] >= a) & (idx[:, k] < a + n)
    return ok


def sample_spectrum(m: DiscreteMeasure, psi: Mollifier, R: float, eps_tail: float = DEFAULT_EPS_TAIL,
                    spacing: float | None = None, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                    audit_fraction: float = AUDIT_FRACTION, audit_cap: int = AUDIT_CAP,
                    seed: int = 0) -> SpectrumSample:
    """Materialise the mollified transform on every node of the scale-``R`` grid.

    Raises
    ------
    BudgetExceeded
        If storing the node values needs more than ``memory_budget`` bytes.
    """
    _check_scale(m, R)
    grid = make_grid(m, psi, R, eps_tail, spacing)
    if grid.nbytes > memory_budget:
        raise BudgetExceeded(
            f"grid with {grid.node_count} nodes needs {grid.nbytes / 2**30:.2f} GiB > budget "
            f"{memory_budget / 2**30:.2f} GiB; use a larger spacing or a larger eps_tail"
        )
    eng = _TileEngine(m, grid.spacing)
    M, d = grid.M, grid.d
    raw = np.empty(grid.shape, dtype=complex)
    for tile in _tiles(M, d):
        starts = [a for a, _ in tile]
        sizes = [n for _, n in tile]
        sl = tuple(slice(a + M, a + M + n) for a, n in zip(starts, sizes))
        raw[sl] = eng.block(starts, sizes)
    idx = _audit_indices(M, d, (), _audit_count(grid.node_count, audit_fraction, audit_cap, m.n), seed)
    fast = raw[tuple((idx + M).T)]
    audit = _audit_report(fast, eng.direct(idx), eng.c)
    ax = grid.axis()
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    xi = np.stack([g.ravel() for g in mesh], axis=-1)
    values = (raw.ravel() * eng.phase(xi) * psi.frequency(xi / R)).reshape(grid.shape)
    return SpectrumSample(grid, values, float(R), float(eps_tail), audit)


def _audit_report(fast: np.ndarray, direct: np.ndarray, c: np.ndarray) -> dict:
    scale = math.fsum(np.abs(c)) or 1.0
    err = float(np.max(np.abs(fast - direct)) / scale) if len(fast) else 0.0
    return {"nodes": int(len(fast)), "max_rel_error": err, "tolerance": AUDIT_TOLERANCE,
            "passed": bool(err <= AUDIT_TOLERANCE)}


def regularized_norm(s: SpectrumSample, p: float) -> float:
    """(R^{-d} h^d sum |values|^p)^{1/p}; max |values| for p = inf."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    a = np.abs(s.values).ravel()
    if math.isinf(p):
        return float(a.max())
    d, h = s.grid.d, s.grid.spacing
    return (s.R ** (-d) * h**d * math.fsum(a**p)) ** (1.0 / p)


def spectrum_norms(m: DiscreteMeasure, psi: Mollifier, R: float, ps: Iterable[float] = (1, 2),
                   eps_tail: float = DEFAULT_EPS_TAIL, spacing: float | None = None,
                   regions: dict | None = None, max_nodes: int = DEFAULT_MAX_NODES,
                   audit_fraction: float = AUDIT_FRACTION, audit_cap: int = AUDIT_CAP,
                   seed: int = 0, use_symmetry: bool = True) -> SpectrumNorms:
    """Stream over the scale-``R`` grid and accumulate ``sum |g|^p`` for each requested ``p``.

    Parameters
    ----------
    ps : iterable of float
        Exponents; 1 and 2 are always included.  ``inf`` gives the maximum.
    regions : dict, optional
        Name -> object with ``contains(xi, R)`` returning a boolean mask; the L1
        node sum inside each region is accumulated in ``region_l1``.
    max_nodes : int
        Upper limit on the number of lattice nodes in the window.  Larger
        windows are shrunk to fit and the result is flagged ``capped``.
    use_symmetry : bool
        Fold the lattice by the exact symmetries of ``|g|``; disabling it
        only changes the running time (and roundoff).
    """
    _check_scale(m, R)
    grid = make_grid(m, psi, R, eps_tail, spacing)
    requested = grid.half_width
    capped = False
    if grid.node_count > max_nodes:
        M_cap = int((max_nodes ** (1.0 / grid.d) - 1) // 2)
        grid = FrequencyGrid(grid.d, M_cap * grid.spacing, grid.spacing)
        capped = True
    ps = sorted({1.0, 2.0, *map(float, ps)})
    for p in ps:
        if not p >= 1:
            raise ValueError("p must be >= 1")
    regions = regions or {}
    eng = _TileEngine(m, grid.spacing)
    M, d, h = grid.M, grid.d, grid.spacing
    mode, folded = eng.symmetry() if use_symmetry else ("none", ())
    parts: dict = {p: [] for p in ps if not math.isinf(p)}
    peak = 0.0
    reg_parts: dict = {name: [] for name in regions}
    idx_a = _audit_indices(M, d, folded, _audit_count(grid.node_count, audit_fraction, audit_cap, m.n), seed)
    fast_a = np.empty(len(idx_a), dtype=complex)

    for tile in _tiles(M, d, folded):
        starts = [a for a, _ in tile]
        sizes = [n for _, n in tile]
        raw = eng.block(starts, sizes)
        sel = _in_tile(idx_a, starts, sizes)
        if sel.any():
            fast_a[sel] = raw[tuple((idx_a[sel] - np.asarray(starts)).T)]
        idx_axes = [np.arange(a, a + n) for a, n in zip(starts, sizes)]
        v = np.abs(raw) * np.abs(_radial_multiplier(psi, idx_axes, h, R))
        weight = _fold_weight(mode, folded, idx_axes)
        for p in parts:
            vp = v if p == 1.0 else (v * v if p == 2.0 else v**p)
            parts[p].append(float(np.sum(vp * weight)))
        if v.size:
            peak = max(peak, float(v.max()))
        if regions:
            coords = [ax * h for ax in idx_axes]
            xi = None
            for name, reg in regions.items():
                if hasattr(reg, "grid_mask"):
                    mask = _image_count_grid(reg, coords, R, mode, folded)
                else:
                    if xi is None:
                        mesh = np.meshgrid(*coords, indexing="ij")
                        xi = np.stack([g.ravel() for g in mesh], axis=-1)
                    mask = _image_count(reg, xi, R, mode, folded).reshape(v.shape)
                reg_parts[name].append(float(np.sum(v * mask)))

    sums = {p: math.fsum(v) for p, v in parts.items()}
    if any(math.isinf(p) for p in ps):
        sums[math.inf] = peak
    scale = R ** (-d) * h**d
    x = {p: (peak if math.isinf(p) else (scale * s) ** (1.0 / p)) for p, s in sums.items()}
    audit = _audit_report(fast_a, eng.direct(idx_a), eng.c)
    return SpectrumNorms(
        R=float(R), grid=grid, eps_tail=float(eps_tail), sums=sums, x=x,
        region_l1={k: math.fsum(v) for k, v in reg_parts.items()},
        node_count=grid.node_count, audit=audit, capped=capped, requested_half_width=requested,
        symmetry=mode if mode != "reflect" else "reflect:" + ",".join(map(str, folded)),
    )
