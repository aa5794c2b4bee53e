"""Fourier ratio ladders, decay-exponent fits and the sandwich inequalities.

``FR(R) = X_1 / X_2 = R^{-d/2} ||g||_1 / ||g||_2`` with ``g`` the mollified
transform at scale ``R``.  Over a geometric ladder of scales the decay
exponent is estimated as the least-squares slope of ``-log FR`` against
``log R`` on the tail of the ladder.  Since a liminf cannot be read off a
finite ladder, the smallest two-point slope in the same window is reported as
a conservative proxy and should be used wherever a lower bound on the decay is
needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .measures import DiscreteMeasure, GeometryReport, neighborhood_volume
from .mollifier import Mollifier
from .spectrum import DEFAULT_EPS_TAIL, DEFAULT_MAX_NODES, SpectrumNorms, spectrum_norms

DEFAULT_LOWER_SLACK = 0.9
DEFAULT_UPPER_SLACK = 1.1
BALL_FACTOR = 100.0


def default_ladder(d: int) -> list[float]:
    """2^4..2^9 in dimensions 2 and 3, 2^4..2^12 on the line."""
    top = 12 if d == 1 else 9
    return [2.0**j for j in range(4, top + 1)]


def check_ladder(ladder: Sequence[float]) -> list[float]:
    ladder = [float(r) for r in ladder]
    if not ladder:
        raise ValueError("empty ladder")
    for a, b in zip(ladder, ladder[1:]):
        if not b >= 2 * a * (1 - 1e-12):
            raise ValueError("ladder must be strictly increasing with ratio >= 2")
    if ladder[0] <= 0:
        raise ValueError("scales must be positive")
    return ladder


@dataclass
class RatioSeries:
    """Per-scale regularised norms and Fourier ratios."""

    label: str
    psi_family: str
    eps_tail: float
    p: float
    ladder: list
    x1: list
    x2: list
    xp: list
    fr: list
    norms: list = field(default_factory=list, repr=False)
    extra_columns: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        rows = []
        for i, R in enumerate(self.ladder):
            row = {"label": self.label, "R": R, "X1": self.x1[i], "X2": self.x2[i], "Xp": self.xp[i],
                   "FR": self.fr[i], "eps_tail": self.eps_tail}
            for k, col in self.extra_columns.items():
                row[k] = col[i]
            rows.append(row)
        return rows

    def at(self, R: float) -> int:
        for i, r in enumerate(self.ladder):
            if abs(r - R) <= 1e-12 * R:
                return i
        raise KeyError(f"scale {R} is not on the ladder")

    def provenance(self) -> dict:
        out = {"label": self.label, "psi_family": self.psi_family, "eps_tail": self.eps_tail, "p": self.p}
        if self.norms:
            out["capped_scales"] = [n.R for n in self.norms if n.capped]
            out["audit"] = [{"R": n.R, **n.audit} for n in self.norms]
            out["symmetry"] = self.norms[0].symmetry
        return out


def ratio_ladder(m: DiscreteMeasure, psi: Mollifier, ladder: Sequence[float] | None = None, p: float = 4.0,
                 eps_tail: float = DEFAULT_EPS_TAIL, spacing: float | None = None, regions: dict | None = None,
                 max_nodes: int = DEFAULT_MAX_NODES) -> RatioSeries:
    """Fourier ratio at every scale of ``ladder`` (default :func:`default_ladder`).

    ``p`` (>= 2) selects the extra norm stored in ``xp``.
    """
    if not p >= 2:
        raise ValueError("p must be >= 2")
    ladder = check_ladder(ladder if ladder is not None else default_ladder(m.d))
    for R in ladder:
        m.check_scale(1.0 / R, what="1/R")
    norms = [spectrum_norms(m, psi, R, ps=(1, 2, p), eps_tail=eps_tail, spacing=spacing, regions=regions,
                            max_nodes=max_nodes) for R in ladder]
    x1 = [n.x[1.0] for n in norms]
    x2 = [n.x[2.0] for n in norms]
    xp = [n.x[float(p)] for n in norms]
    fr = [a / b if b > 0 else math.nan for a, b in zip(x1, x2)]
    return RatioSeries(m.label, psi.family, float(eps_tail), float(p), ladder, x1, x2, xp, fr, norms)


@dataclass
class ExponentEstimate:
    """Decay exponent of FR over a tail window of the ladder."""

    kappa: float
    kappa_min: float
    window: tuple
    residual: float
    ladder_size: int
    slopes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"kappa": self.kappa, "kappa_min": self.kappa_min, "window": list(self.window),
                "residual": self.residual}


def estimate_kappa(series: RatioSeries | tuple, tail_fraction: float = 0.5, min_scales: int = 4) -> ExponentEstimate:
    """Fit ``-log FR = kappa log R + c`` on the last part of the ladder.

    Parameters
    ----------
    series : RatioSeries or (ladder, fr) pair
    tail_fraction : float
        Fraction of the ladder (from the top) used for the fit; the window is
        widened to ``min_scales`` scales when the fraction gives fewer.

    Returns
    -------
    ExponentEstimate
        ``kappa`` is the least-squares slope, ``kappa_min`` the smallest
        slope between consecutive scales of the window, ``residual`` the rms
        fit residual in units of ``log FR``.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if isinstance(series, RatioSeries):
        R, fr = series.ladder, series.fr
    else:
        R, fr = series
    R = np.asarray(R, dtype=float)
    fr = np.asarray(fr, dtype=float)
    L = len(R)
    if L < min_scales:
        raise ValueError(f"need at least {min_scales} scales, got {L}")
    if not np.all(np.isfinite(fr)) or np.any(fr <= 0):
        raise ValueError("undefined ratio: Fourier ratio must be finite and positive at every scale")
    size = min(L, max(min_scales, int(math.ceil(tail_fraction * L))))
    i0 = L - size
    x = np.log(R[i0:])
    y = -np.log(fr[i0:])
    A = np.vstack([x, np.ones_like(x)]).T
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    resid = y - A @ coef
    slopes = list(np.diff(y) / np.diff(x))
    return ExponentEstimate(float(coef[0]), float(min(slopes)), (i0, L - 1),
                            float(np.sqrt(np.mean(resid**2))), L, [float(s) for s in slopes])


# ---------------------------------------------------------------------------
# concentration regions


def _box_ball_volume(lo, hi, r: float) -> float:
    """Volume of the box [lo, hi] intersected with the centred ball of radius r."""
    d = len(lo)
    lo = [max(a, -r) for a in lo]
    hi = [min(b, r) for b in hi]
    if any(b <= a for a, b in zip(lo, hi)):
        return 0.0
    if d == 1:
        return hi[0] - lo[0]

    def disk_slice(a, b, c, e, rad):
        # area of [a, b] x [c, e] inside the disc of radius rad
        if rad <= 0:
            return 0.0
        a, b = max(a, -rad), min(b, rad)
        if b <= a:
            return 0.0

        def chord(x):
            s = math.sqrt(max(rad * rad - x * x, 0.0))
            return max(0.0, min(e, s) - max(c, -s))

        pts = [x for y in (c, e) if abs(y) < rad for x in (-math.sqrt(rad * rad - y * y), math.sqrt(rad * rad - y * y))
               if a < x < b]
        return integrate.quad(chord, a, b, points=pts or None, limit=200, epsabs=1e-12 * rad * rad)[0]

    if d == 2:
        return disk_slice(lo[0], hi[0], lo[1], hi[1], r)
    pts = [z for z in (lo[2], hi[2], 0.0) if lo[2] < z < hi[2]]
    return integrate.quad(lambda z: disk_slice(lo[0], hi[0], lo[1], hi[1], math.sqrt(max(r * r - z * z, 0.0))),
                          lo[2], hi[2], points=pts or None, limit=200, epsabs=1e-10 * r**3)[0]


@dataclass(frozen=True)
class Region:
    """Finite union of axis-aligned boxes in frequency space.

    Box corners may be infinite.  With ``scale_with_R`` the corners are given
    in units of ``R``.  Membership and volume always refer to ``X_R``, the
    region intersected with the ball of radius ``100 R``.
    """

    boxes: tuple
    scale_with_R: bool = True
    name: str = "X"

    def _scaled(self, R: float):
        f = R if self.scale_with_R else 1.0
        return [(tuple(a * f for a in lo), tuple(b * f for b in hi)) for lo, hi in self.boxes]

    def contains(self, xi: np.ndarray, R: float) -> np.ndarray:
        xi = np.atleast_2d(xi)
        inside = np.zeros(len(xi), dtype=bool)
        for lo, hi in self._scaled(R):
            ok = np.ones(len(xi), dtype=bool)
            for k in range(xi.shape[1]):
                ok &= (xi[:, k] >= lo[k]) & (xi[:, k] <= hi[k])
            inside |= ok
        return inside & (np.sum(xi * xi, axis=1) <= (BALL_FACTOR * R) ** 2)

    def grid_mask(self, axes, R: float) -> np.ndarray:
        """Membership on the tensor grid spanned by the 1-D coordinate arrays ``axes``.

        Equal to :meth:`contains` on the flattened grid, reshaped, but built by
        broadcasting per-axis tests instead of materialising every point.
        """
        d = len(axes)
        shaped = []
        for k, ax in enumerate(axes):
            shape = [1] * d
            shape[k] = -1
            shaped.append(np.asarray(ax, dtype=float).reshape(shape))
        inside = np.zeros([len(a) for a in axes], dtype=bool)
        for lo, hi in self._scaled(R):
            ok = np.ones([1] * d, dtype=bool)
            for k, ax in enumerate(shaped):
                ok = ok & (ax >= lo[k]) & (ax <= hi[k])
            inside |= ok
        r2 = (BALL_FACTOR * R) ** 2
        if sum(float(np.max(np.abs(a))) ** 2 for a in axes if len(a)) > r2:
            inside &= sum(a * a for a in shaped) <= r2
        return inside

    def volume(self, R: float) -> float:
        """|X intersected with B(0, 100 R)| by inclusion-exclusion over the boxes."""
        boxes = self._scaled(R)
        r = BALL_FACTOR * R
        total = 0.0
        n = len(boxes)
        for mask in range(1, 2**n):
            members = [boxes[i] for i in range(n) if mask >> i & 1]
            lo = tuple(max(b[0][k] for b in members) for k in range(len(members[0][0])))
            hi = tuple(min(b[1][k] for b in members) for k in range(len(members[0][0])))
            sign = 1 if len(members) % 2 else -1
            total += sign * _box_ball_volume(lo, hi, r)
        return total

    def describe(self) -> str:
        unit = "R" if self.scale_with_R else "1"
        return f"{self.name}: union of {len(self.boxes)} box(es) in units of {unit}, intersected with B(0, 100R)"


def cube_region(half_width: float, d: int, name: str = "cube") -> Region:
    """The cube [-a R, a R]^d."""
    return Region(((( -half_width,) * d, (half_width,) * d),), True, name)


def slab_region(half_width: float, d: int, axis: int = 1, name: str = "slab") -> Region:
    """{|xi_axis| <= a R}, unbounded in the other directions."""
    lo = [-math.inf] * d
    hi = [math.inf] * d
    lo[axis], hi[axis] = -half_width, half_width
    return Region(((tuple(lo), tuple(hi)),), True, name)


def default_regions(m: DiscreteMeasure) -> dict:
    """Documented concentration regions: the cube [-2R, 2R]^d for every measure, plus,
    for a segment along the first axis, the slab |xi_2| <= 2R around the dual direction."""
    regs = {"cube2": cube_region(2.0, m.d, "cube2")}
    if m.label == "segment" and m.d >= 2:
        regs["slab2"] = slab_region(2.0, m.d, axis=1, name="slab2")
    return regs


# ---------------------------------------------------------------------------
# sandwich and uncertainty


@dataclass
class ConcentrationCheck:
    """Both sides of the sandwich and of the uncertainty inequality at one scale."""

    R: float
    region: str
    fr: float
    eta: float
    xr_volume: float
    e_volume: float
    covering_count: int
    lower: float
    covering_lower: float
    upper: float | None
    uncertainty_lhs: float
    uncertainty_rhs: float
    lower_slack: float
    upper_slack: float
    passes: dict

    @property
    def passed(self) -> bool:
        return all(self.passes.values())


def sandwich_check(m: DiscreteMeasure, series: RatioSeries, X: Region, R: float,
                   geometry: GeometryReport | None = None, psi: Mollifier | None = None,
                   lower_slack: float = DEFAULT_LOWER_SLACK, upper_slack: float = DEFAULT_UPPER_SLACK
                   ) -> ConcentrationCheck:
    """Evaluate the sandwich bounds and the uncertainty inequality at scale ``R``.

    ``eta`` is the fraction of the computed L1 node mass outside ``X_R``.  The
    region sums are taken from the ladder when it was computed with ``X`` as
    one of its regions; otherwise the scale is recomputed with ``psi``.
    ``geometry`` defaults to :func:`neighborhood_volume` at ``delta = 1/R``.
    """
    i = series.at(R)
    norms = series.norms[i] if series.norms else None
    if norms is None or X.name not in norms.region_l1:
        if psi is None:
            raise ValueError(f"region {X.name!r} was not accumulated on the ladder; pass psi to recompute")
        norms = spectrum_norms(m, psi, R, ps=(1, 2), eps_tail=series.eps_tail, regions={X.name: X})
    geometry = geometry or neighborhood_volume(m, 1.0 / R)
    d = m.d
    fr = norms.fr
    total = norms.sums[1.0]
    eta = 1.0 - norms.region_l1[X.name] / total if total > 0 else 1.0
    eta = min(max(eta, 0.0), 1.0)
    xr = X.volume(R)
    lower = (R**d * geometry.volume) ** -0.5
    cov_lower = geometry.covering_count ** -0.5
    upper = math.sqrt(xr / (R**d * (1 - eta) ** 2)) if eta < 1 else None
    lhs = (1 - eta) ** 2
    rhs = geometry.volume * xr
    passes = {
        "lower": fr >= lower_slack * lower,
        "covering_lower": fr >= lower_slack * cov_lower,
        "upper": upper is not None and fr <= upper_slack * upper,
        "uncertainty": lhs <= upper_slack * rhs,
    }
    return ConcentrationCheck(float(R), X.name, fr, eta, xr, geometry.volume, geometry.covering_count, lower,
                              cov_lower, upper, lhs, rhs, lower_slack, upper_slack, passes)


@dataclass
class MinkowskiReport:
    rows: list
    passed: bool
    slack: float


def minkowski_lower_bound(series: RatioSeries, geometry: Sequence[GeometryReport], fitted_alpha: float,
                          slack: float = 0.1, tail_fraction: float = 0.5) -> MinkowskiReport:
    """Check ``FR(R) >= N(1/R)^{-1/2} (1 - slack)`` at every scale and
    ``FR(R) >= R^{-alpha/2 - 0.1}`` on the tail scales.

    ``geometry`` holds one report per ladder scale, at ``delta = 1/R``.
    """
    if len(geometry) != len(series.ladder):
        raise ValueError("need one geometry report per ladder scale")
    L = len(series.ladder)
    tail_start = L - min(L, max(1, int(math.ceil(tail_fraction * L))))
    rows = []
    ok = True
    for i, (R, fr, g) in enumerate(zip(series.ladder, series.fr, geometry)):
        if abs(g.delta * R - 1) > 1e-9:
            raise ValueError(f"geometry at delta={g.delta} does not match scale R={R}")
        cover = g.covering_count ** -0.5 * (1 - slack)
        power = R ** (-fitted_alpha / 2 - 0.1)
        row = {"R": R, "FR": fr, "covering_bound": cover, "covering_ok": fr >= cover}
        if i >= tail_start:
            row.update(power_bound=power, power_ok=fr >= power)
        ok &= row["covering_ok"] and row.get("power_ok", True)
        rows.append(row)
    return MinkowskiReport(rows, bool(ok), slack)


def cauchy_schwarz_bound(norms: SpectrumNorms) -> tuple[float, float]:
    """FR and its discrete Cauchy-Schwarz ceiling ``(h^d N_nodes / R^d)^{1/2}`` on the computed window."""
    g = norms.grid
    return norms.fr, math.sqrt(g.spacing**g.d * g.node_count / norms.R**g.d)
