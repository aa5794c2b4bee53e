"""Synthesis thresholds in exact arithmetic and a numeric check of the vanishing argument.

For a measure supported on a set of dimension ``alpha`` in ``R^d`` whose
Fourier ratio decays like ``R^{-kappa}``, integrability of the transform in
``L^p`` forces vanishing for ``2 <= p < p*`` with

    p* = 2 (d - 2 kappa) / (alpha - 2 kappa),      p* = inf when kappa = alpha / 2.

On a compact manifold the same formula holds with ``alpha`` replaced by the
neighbourhood-growth exponent ``k``.  Every formula here is evaluated with
:class:`fractions.Fraction` so that the algebraic identities hold with zero
tolerance; floats are converted through their shortest decimal repr, so
``0.1`` becomes ``1/10``.

:func:`proof_chain_check` replays the chain of inequalities behind the
vanishing criterion on computed spectra.  A nonzero measure never satisfies
the criterion's hypotheses below its own threshold, so the checker can only confirm that each
link holds and report the sign of the final exponent; its verdict reads
"chain consistent", never a vanishing claim.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .measures import DiscreteMeasure, GeometryReport, neighborhood_cells, neighborhood_volume
from .mollifier import SPACE_COMPACT, Mollifier, standard_bump

INF = math.inf
DEFAULT_EPSILON = 0.05
HOLDER_TOLERANCE = 1e-9
PAIRING_CELLS_PER_RADIUS = 4
MAX_PAIRING_PAIRS = 60_000_000

Number = Fraction | int | float | str


def as_fraction(x: Number) -> Fraction:
    """Exact rational from a Fraction, int, decimal string or float (through ``repr``)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(float(x)))
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def _is_inf(x) -> bool:
    if isinstance(x, str):
        return x.strip().lower() in ("inf", "+inf", "infinity")
    return isinstance(x, (float, np.floating)) and math.isinf(x) and x > 0


@dataclass(frozen=True)
class ThresholdResult:
    """Synthesis threshold for one (d, alpha, kappa) triple.

    ``p_star`` is a Fraction, or ``math.inf`` in the rigid regime.
    """

    d: int
    alpha: Fraction
    kappa: Fraction
    p_star: Fraction | float
    regime: str

    @property
    def is_finite(self) -> bool:
        return not (isinstance(self.p_star, float) and math.isinf(self.p_star))

    def as_dict(self) -> dict:
        p = self.p_star
        return {
            "d": self.d,
            "alpha": _json_number(self.alpha),
            "kappa": _json_number(self.kappa),
            "p_star": _json_number(p),
            "p_star_exact": str(p) if self.is_finite else "inf",
            "regime": self.regime,
        }


def _json_number(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return float(x)


def _check_dimension(d) -> int:
    if isinstance(d, bool) or int(d) != d or int(d) < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    return int(d)


def _check_alpha(d: int, alpha: Fraction) -> None:
    if not 0 < alpha < d:
        raise ValueError(f"alpha must lie in (0, d) = (0, {d}), got {alpha}")


def threshold(d: int, alpha: Number, kappa: Number) -> ThresholdResult:
    """Exact synthesis threshold ``p* = 2 (d - 2 kappa) / (alpha - 2 kappa)``.

    Parameters
    ----------
    d : int
        Ambient dimension.
    alpha : rational-like
        Dimension of the support, in ``(0, d)``; on a manifold pass ``k``.
    kappa : rational-like
        Fourier-ratio decay exponent, in ``[0, alpha/2]``.

    Returns
    -------
    ThresholdResult
        Regime ``classical`` at ``kappa = 0``, ``rigid`` (``p* = inf``) at
        ``kappa = alpha / 2`` and ``intermediate`` in between.

    Examples
    --------
    >>> threshold(2, 1, 0).p_star
    Fraction(4, 1)
    """
    d = _check_dimension(d)
    a = as_fraction(alpha)
    k = as_fraction(kappa)
    _check_alpha(d, a)
    if not 0 <= k <= a / 2:
        raise ValueError(f"kappa must lie in [0, alpha/2] = [0, {a / 2}], got {k}")
    if k == a / 2:
        return ThresholdResult(d, a, k, INF, "rigid")
    p = 2 * (d - 2 * k) / (a - 2 * k)
    return ThresholdResult(d, a, k, p, "classical" if k == 0 else "intermediate")


def threshold_inverse(d: int, alpha: Number, p: Number) -> Fraction:
    """The decay exponent whose threshold equals ``p``: ``kappa = (p alpha - 2 d) / (2 p - 4)``.

    ``p = inf`` returns ``alpha / 2``.  Raises when ``p < 2 d / alpha``, where
    no admissible exponent exists.
    """
    d = _check_dimension(d)
    a = as_fraction(alpha)
    _check_alpha(d, a)
    if _is_inf(p):
        return a / 2
    q = as_fraction(p)
    if q < 2 * d / a:
        raise ValueError(f"p = {q} is below the classical exponent 2d/alpha = {2 * d / a}; no admissible kappa")
    return (q * a - 2 * d) / (2 * q - 4)


def interpolation_theta(p: Number) -> tuple[Fraction, Fraction]:
    """``theta = (p - 2) / (2 (p - 1))`` with ``1/2 = theta + (1 - theta)/p``, and ``theta/(1 - theta) = (p - 2)/p``."""
    if _is_inf(p):
        raise ValueError("p must be finite")
    q = as_fraction(p)
    if q < 2:
        raise ValueError(f"p must be >= 2, got {q}")
    theta = (q - 2) / (2 * (q - 1))
    return theta, theta / (1 - theta)


def pairing_exponent(d: int, alpha: Number, kappa: Number, p: Number) -> Fraction:
    """Power of R in the assembled pairing bound, times ``2 p``, written term by term:
    ``2 p [ (d/2 - kappa)(p - 2)/p + (alpha - d)/2 ]``."""
    a, k, q = as_fraction(alpha), as_fraction(kappa), as_fraction(p)
    return 2 * q * ((Fraction(d, 2) - k) * (q - 2) / q + (a - d) / 2)


def exponent_numerator(d: int, alpha: Number, kappa: Number, p: Number) -> Fraction:
    """Collected form ``p (alpha - 2 kappa) - 2 (d - 2 kappa)``; negative means the pairing bound decays."""
    a, k, q = as_fraction(alpha), as_fraction(kappa), as_fraction(p)
    return q * (a - 2 * k) - 2 * (d - 2 * k)


def exponent_sign(d: int, alpha: float, kappa: float, p: float) -> int:
    """Sign of :func:`exponent_numerator` for measured (float) inputs."""
    v = p * (alpha - 2 * kappa) - 2 * (d - 2 * kappa)
    return int(np.sign(v))


def threshold_curve(d: int, alpha: Number, kappas: Sequence[Number] | None = None, points: int = 41) -> list[dict]:
    """Rows ``{kappa, p_star, regime}`` along a sweep of kappa in ``[0, alpha/2]``.

    The default sweep uses ``points`` equally spaced rational values, the last
    one at the rigid endpoint.
    """
    a = as_fraction(alpha)
    if kappas is None:
        if points < 2:
            raise ValueError("points must be at least 2")
        kappas = [a / 2 * Fraction(i, points - 1) for i in range(points)]
    rows = []
    for k in kappas:
        r = threshold(d, a, k)
        rows.append({"kappa": _json_number(r.kappa), "kappa_exact": str(r.kappa),
                     "p_star": _json_number(r.p_star), "regime": r.regime})
    return rows


# ---------------------------------------------------------------------------
# numeric replay of the inequality chain


def holder_step(s1: float, s2: float, sp: float, p: float, tol: float = HOLDER_TOLERANCE) -> tuple[float, float, bool]:
    """L2 <= L1^theta Lp^(1-theta) from raw sums ``sum |g|``, ``sum |g|^2``, ``sum |g|^p``.

    The sums may carry any common positive weight (grid cell volume, fold
    multiplicity); the cell volume cancels because ``1/2 = theta + (1-theta)/p``.
    Returns ``(lhs, rhs, holds)`` with the comparison made at relative
    tolerance ``tol``.
    """
    theta = (p - 2) / (2 * (p - 1))
    lhs = math.sqrt(s2)
    if s2 == 0:
        return 0.0, 0.0, True
    # work in logs: sum |g|^p overflows for large p
    log_rhs = theta * math.log(s1) + (1 - theta) / p * math.log(sp) if s1 > 0 and sp > 0 else -math.inf
    rhs = math.exp(log_rhs)
    return lhs, rhs, bool(math.log(lhs) <= log_rhs + math.log1p(tol))


def sequence_holder(c: np.ndarray, p: float, tol: float = HOLDER_TOLERANCE) -> tuple[float, float, bool]:
    """:func:`holder_step` for a finite sequence, scaled by its maximum to avoid overflow."""
    c = np.abs(np.asarray(c)).astype(float).ravel()
    top = float(c.max()) if c.size else 0.0
    if top == 0:
        return 0.0, 0.0, True
    u = c / top
    lhs, rhs, ok = holder_step(math.fsum(u), math.fsum(u * u), math.fsum(u**p), p, tol)
    return lhs * top, rhs * top, ok


def localizing_bump(m: DiscreteMeasure):
    """Fixed smooth test function: the standard bump on the ball around the bbox centre
    of radius (half diameter + 1), so it is positive on every neighbourhood used."""
    lo, hi = m.bbox
    centre = (lo + hi) / 2
    radius = m.diameter / 2 + 1.0

    def phi(y):
        r = np.sqrt(np.sum((np.atleast_2d(y) - centre) ** 2, axis=1)) / radius
        return standard_bump(r)

    return phi


@dataclass
class PairingCheck:
    """Spatial Cauchy-Schwarz on the neighbourhood grid at one scale."""

    R: float
    cells: int
    cell_size: float
    pairing: float
    g_l2: float
    phi_l2: float
    holds: bool
    skipped: str = ""


def pairing_check(m: DiscreteMeasure, psi: Mollifier, R: float, phi=None,
                  cells_per_radius: int = PAIRING_CELLS_PER_RADIUS, max_pairs: int = MAX_PAIRING_PAIRS) -> PairingCheck:
    """``|<g, phi>| <= ||g||_{L2(Omega)} ||phi||_{L2(Omega)}`` with ``g = psi_{1/R} * (f mu)``.

    ``g`` is evaluated at the centres of the cells of side ``r / (cells_per_radius R)``
    inside ``Omega_R = E^{r/R}``, ``r`` the spatial support radius of ``psi``.
    A band-limited ``psi`` has no spatial support; the space-compact bump of
    the same dimension is used instead, as the chain only needs a smooth
    spatial localiser.
    """
    if psi.family != SPACE_COMPACT:
        psi = Mollifier(SPACE_COMPACT, psi.dim)
    phi = phi or localizing_bump(m)
    delta = psi.space_radius / R
    s = delta / cells_per_radius
    tree = cKDTree(m.points)
    c = m.coefficients
    approx = 0
    total_cells = 0
    sums = {"pair_re": [], "pair_im": [], "g2": [], "phi2": []}
    for centres in neighborhood_cells(m, delta, tree, cells_per_delta=cells_per_radius, chunk=2**16):
        if not len(centres):
            continue
        total_cells += len(centres)
        sub = cKDTree(centres)
        pairs = sub.sparse_distance_matrix(tree, delta, output_type="ndarray")
        approx += len(pairs)
        if approx > max_pairs:
            return PairingCheck(float(R), total_cells, s, math.nan, math.nan, math.nan, True,
                                skipped=f"more than {max_pairs} point-cell pairs")
        rows, cols = pairs["i"], pairs["j"]
        k = R**m.d * psi.space(R * pairs["v"])
        g = np.bincount(rows, weights=k * c.real[cols], minlength=len(centres)).astype(complex)
        if np.iscomplexobj(c):
            g += 1j * np.bincount(rows, weights=k * c.imag[cols], minlength=len(centres))
        ph = phi(centres)
        prod = g * ph
        sums["pair_re"].append(math.fsum(prod.real))
        sums["pair_im"].append(math.fsum(prod.imag))
        sums["g2"].append(math.fsum(np.abs(g) ** 2))
        sums["phi2"].append(math.fsum(ph**2))
    vol = s**m.d
    pairing = abs(complex(math.fsum(sums["pair_re"]), math.fsum(sums["pair_im"]))) * vol
    g_l2 = math.sqrt(math.fsum(sums["g2"]) * vol)
    phi_l2 = math.sqrt(math.fsum(sums["phi2"]) * vol)
    holds = pairing <= g_l2 * phi_l2 * (1 + HOLDER_TOLERANCE)
    return PairingCheck(float(R), total_cells, s, pairing, g_l2, phi_l2, bool(holds))


@dataclass
class ProofChainReport:
    """Per-scale rows of the inequality chain plus the summary exponent.

    Row keys: ``R``, ``FR``, ``decay_lhs`` / ``decay_rhs`` (the L1 <= L2 bound
    with the measured exponent), ``decay_constant`` (their ratio),
    ``holder_lhs`` / ``holder_rhs`` / ``holder_ok``, ``pairing`` /
    ``pairing_rhs`` / ``pairing_ok`` / ``pairing_cells``,
    ``pairing_bound`` (the pairing bounded through Plancherel and the volume of
    the neighbourhood), ``volume`` and ``volume_scaled`` (``|Omega_R| R^{d-alpha}``).
    """

    label: str
    d: int
    alpha: float
    p: float
    epsilon: float
    kappa_prime: float
    kappa_used: float
    rows: list
    volume_constant: float
    volume_spread: float
    exponent: float
    exponent_sign: int
    verdict: str
    checks: dict
    notes: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return all(self.checks.values())

    @property
    def chain_label(self) -> str:
        return "chain consistent" if self.consistent else "chain inconsistent"

    def summary(self) -> dict:
        return {
            "label": self.label, "d": self.d, "alpha": self.alpha, "p": self.p, "epsilon": self.epsilon,
            "kappa_prime": self.kappa_prime, "kappa_used": self.kappa_used,
            "volume_constant": self.volume_constant, "volume_spread": self.volume_spread,
            "exponent": self.exponent, "exponent_sign": self.exponent_sign, "verdict": self.verdict,
            "chain": self.chain_label, "checks": self.checks, "notes": self.notes,
        }


def _decay_rows(ladder, fr, kappa_used, tail_start):
    # (a): FR(R) R^{kappa_used} must not increase over the tail; the supremum is the constant
    scaled = [f * R**kappa_used for R, f in zip(ladder, fr)]
    tail = scaled[tail_start:]
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))
    return scaled, max(tail), monotone


def _assemble(label, d, alpha, p, epsilon, kappa_prime, rows, volumes, ladder, notes, checks) -> ProofChainReport:
    scaled = [v * R ** (d - alpha) for v, R in zip(volumes, ladder)]
    C = max(scaled)
    spread = C / min(scaled) if min(scaled) > 0 else math.inf
    for row, v, sv in zip(rows, volumes, scaled):
        row["volume"] = v
        row["volume_scaled"] = sv
        row["volume_bound"] = C * row["R"] ** (alpha - d)
    kappa_used = kappa_prime - epsilon
    e = p * (alpha - 2 * kappa_used) - 2 * (d - 2 * kappa_used)
    sign = int(np.sign(e))
    verdict = "pairing bound decays" if sign < 0 else "pairing bound does not decay"
    return ProofChainReport(label, d, float(alpha), float(p), float(epsilon), float(kappa_prime), float(kappa_used),
                            rows, float(C), float(spread), float(e), sign, verdict, checks, notes)


def proof_chain_check(m: DiscreteMeasure, psi: Mollifier, series, geometry: Sequence[GeometryReport] | None = None,
                      alpha: float | None = None, p: float | None = None, epsilon: float = DEFAULT_EPSILON,
                      estimate=None, spatial: bool = True) -> ProofChainReport:
    """Replay each inequality of the Euclidean vanishing argument on a ratio ladder.

    Parameters
    ----------
    m, psi
        Measure and mollifier used for ``series``.
    series : RatioSeries
        Ladder with stored node sums for ``p`` (computed with ``ratio_ladder(..., p=p)``).
    geometry : list of GeometryReport, optional
        One report per scale at ``delta = r/R``; computed when omitted.
    alpha : float, optional
        Support dimension; defaults to the measure's declared value.
    p : float, optional
        Integrability exponent, defaults to ``series.p``.
    epsilon : float
        Margin subtracted from the measured ``kappa_min``.
    estimate : ExponentEstimate, optional
        Defaults to :func:`fourier_ratio.ratio.estimate_kappa` on ``series``.
    spatial : bool
        Evaluate the spatial Cauchy-Schwarz row (the costliest step).

    Notes
    -----
    With ``kappa' = kappa_min`` and ``kappa'' = kappa' - epsilon``:

    * decay row: ``||g||_1 <= C R^{d/2 - kappa''} ||g||_2``; ``C`` is the
      largest value of ``FR R^{kappa''}`` on the tail and the check is that
      this product does not increase there (the literal bound with ``C = 1``
      fails for any measure whose ratio starts above one);
    * Hoelder row: unconditional, tolerance ``1e-9`` relative;
    * pairing row: unconditional spatial Cauchy-Schwarz on the grid;
    * volume row: ``|Omega_R| <= C R^{alpha - d}`` with ``C`` fitted as the
      maximum, and the spread of ``|Omega_R| R^{d - alpha}`` reported;
    * exponent: sign of ``p (alpha - 2 kappa'') - 2 (d - 2 kappa'')``.
    """
    from .ratio import estimate_kappa

    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    p = float(series.p if p is None else p)
    if not p >= 2 or math.isinf(p):
        raise ValueError("p must be finite and >= 2")
    if not series.norms:
        raise ValueError("the series carries no node sums; recompute it with ratio_ladder")
    d = m.d
    alpha = float(m.alpha0 if alpha is None else alpha)
    if not 0 <= alpha < d:
        # alpha = 0 (atoms) is outside the vanishing criterion but the inequalities still make sense
        raise ValueError(f"alpha must lie in [0, d), got {alpha}")
    est = estimate or estimate_kappa(series)
    kappa_prime = est.kappa_min
    kappa_used = kappa_prime - epsilon
    ladder = list(series.ladder)
    radius = psi.space_radius if psi.family == SPACE_COMPACT else Mollifier(SPACE_COMPACT, d).space_radius
    if geometry is None:
        geometry = [neighborhood_volume(m, radius / R) for R in ladder]
    if len(geometry) != len(ladder):
        raise ValueError("need one geometry report per ladder scale")
    for R, g in zip(ladder, geometry):
        if abs(g.delta * R / radius - 1) > 1e-9:
            raise ValueError(f"missing geometry at delta = {radius / R:g} (got {g.delta:g})")
    tail_start = est.window[0]
    scaled, C_a, monotone = _decay_rows(ladder, series.fr, kappa_used, tail_start)
    rows = []
    holder_ok = True
    pairing_ok = True
    bound_ok = True
    phi = localizing_bump(m)
    for i, (R, norms) in enumerate(zip(ladder, series.norms)):
        if p not in norms.sums:
            raise ValueError(f"node sums for p = {p} were not stored at R = {R}")
        l1 = R**d * norms.x[1.0]
        l2 = R ** (d / 2) * norms.x[2.0]
        row = {"R": R, "FR": series.fr[i], "decay_lhs": l1, "decay_rhs": R ** (d / 2 - kappa_used) * l2,
               "decay_constant": scaled[i], "tail": i >= tail_start}
        hl, hr, hok = holder_step(norms.sums[1.0], norms.sums[2.0], norms.sums[p], p)
        row.update(holder_lhs=hl, holder_rhs=hr, holder_ok=hok)
        holder_ok &= hok
        if spatial:
            pc = pairing_check(m, psi, R, phi)
            row.update(pairing=pc.pairing, pairing_rhs=pc.g_l2 * pc.phi_l2, pairing_ok=pc.holds,
                       pairing_cells=pc.cells, pairing_skipped=pc.skipped)
            pairing_ok &= pc.holds
            if not pc.skipped:
                # ||g||_{L2(Omega)} <= ||g||_{L2} = ||hat g||_{L2}, and ||phi||_{L2(Omega)} <= |Omega|^{1/2}
                pb = l2 * math.sqrt(geometry[i].volume)
                row["pairing_bound"] = pb
                # the grid norm of g and the windowed L2 norm agree up to quadrature error
                row["pairing_bound_ok"] = pc.pairing <= 1.1 * pb
                bound_ok &= row["pairing_bound_ok"]
        rows.append(row)
    checks = {"decay_monotone_on_tail": bool(monotone), "holder": bool(holder_ok)}
    if spatial:
        checks["pairing_cauchy_schwarz"] = bool(pairing_ok)
        checks["pairing_bound"] = bool(bound_ok)
    notes = [f"decay constant C = {C_a:.6g} (FR <= C R^(-kappa'') on the tail)",
             "block-free Euclidean chain; the vanishing conclusion itself is not instantiated"]
    volumes = [g.volume for g in geometry]
    return _assemble(m.label, d, alpha, p, epsilon, kappa_prime, rows, volumes, ladder, notes, checks)
