"""Approximate-identity profiles with evaluable frequency-side forms.

Two radial families are provided:

``space-compact-bump``
    psi(x) = c * exp(-1 / (1 - |x/a|^2)) on the ball of radius ``a``, with
    unit integral.  Its Fourier transform has no closed form; it is tabulated
    once per (dimension) by Gauss-Legendre Hankel quadrature and interpolated
    with a cubic Hermite spline (interpolation error below 1e-10).

``band-limited``
    The frequency-side form is itself the smooth bump
    b(t) = exp(1 - 1 / (1 - t^2)) evaluated at |tau| / A, so it vanishes
    identically for |tau| >= A and equals 1 at the origin.

Conventions: the Euclidean transform is ``hat f(xi) = int f(x) e^{-2 pi i x.xi} dx``,
so the frequency-side form of ``psi_delta = delta^{-d} psi(x / delta)`` is
``hat psi(delta xi)``.  On the flat torus the multiplier attached to the
eigenvalue ``lambda = 2 pi |n|`` at scale ``R`` is ``hat psi(|n| / R)``, i.e. the
periodisation of the same kernel.  For the space-compact family that kernel is
supported in the ball of radius ``a / R``, which is the finite-propagation
radius used by :mod:`fourier_ratio.torus`.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline

SPACE_COMPACT = "space-compact-bump"
BAND_LIMITED = "band-limited"
FAMILIES = (SPACE_COMPACT, BAND_LIMITED)

# radial table for the unit-radius bump: rho in [0, _RHO_MAX], step _RHO_STEP
_RHO_MAX = 64.0
_RHO_STEP = 0.004
_GL_NODES = 800
_INTERP_ERROR = 1e-10


class TailUnreachable(ValueError):
    """The requested tail fraction needs a window beyond the tabulated range."""

    def __init__(self, message: str, required_T: float):
        super().__init__(message)
        self.required_T = required_T


def standard_bump(r):
    """exp(-1/(1-r^2)) for |r| < 1, else 0 (unnormalised)."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def unit_band_profile(t):
    """exp(1 - 1/(1-t^2)) for |t| < 1, else 0; equals 1 at t = 0."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inside = t < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2, 2 pi, 4 pi for d = 1, 2, 3)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


def _normalized_bessel(d: int, z):
    """Gamma(nu+1) (2/z)^nu J_nu(z) with nu = d/2 - 1; equals 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    if d == 1:
        return np.cos(z)
    if d == 2:
        return special.j0(z)
    if d == 3:
        return np.sinc(z / math.pi)
    raise ValueError(f"unsupported dimension {d}")


def _normalized_bessel_prime(d: int, z):
    z = np.asarray(z, dtype=float)
    if d == 1:
        return -np.sin(z)
    if d == 2:
        return -special.j1(z)
    if d == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (z * np.cos(z) - np.sin(z)) / z**2
        small = np.abs(z) < 1e-4
        out[small] = -z[small] / 3.0
        return out
    raise ValueError(f"unsupported dimension {d}")


def hankel_transform(profile, d: int, rho, support: float = 1.0, nodes: int = _GL_NODES):
    """Fourier transform of the radial function ``profile(|x|)`` supported in ``|x| <= support``.

    Returns the transform at radial frequencies ``rho`` together with its
    radial derivative.  Gauss-Legendre quadrature on ``[0, support]``.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = (x + 1.0) * support / 2.0
    w = w * support / 2.0
    base = sphere_area(d) * w * profile(r) * r ** (d - 1)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    val = np.empty_like(rho)
    der = np.empty_like(rho)
    for start in range(0, rho.size, 512):
        z = 2.0 * math.pi * np.outer(rho[start : start + 512], r)
        val[start : start + 512] = _normalized_bessel(d, z) @ base
        der[start : start + 512] = (_normalized_bessel_prime(d, z) * (2.0 * math.pi * r)) @ base
    return val, der


@lru_cache(maxsize=None)
def _bump_table(d: int):
    mass = sphere_area(d) * integrate.quad(
        lambda r: standard_bump(r) * r ** (d - 1), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13
    )[0]
    rho = np.arange(0.0, _RHO_MAX + _RHO_STEP / 2, _RHO_STEP)
    val, der = hankel_transform(standard_bump, d, rho)
    val /= mass
    der /= mass
    spline = CubicHermiteSpline(rho, val, der, extrapolate=False)

    # certified envelope: reverse running max (+ interpolation error), 2x safety
    runmax = np.maximum.accumulate(np.abs(val)[::-1])[::-1] + _INTERP_ERROR
    fit = rho >= _RHO_MAX / 4
    sq = np.sqrt(rho[fit])
    slope, icpt = np.polyfit(sq, np.log(runmax[fit]), 1)
    icpt += np.max(np.log(runmax[fit]) - (slope * sq + icpt))
    envelope = (float(-slope), float(icpt))
    bound = 2.0 * runmax

    # masses for tail certification: inside(K) = int_{|tau|<K} |m|, outside via bound
    weight = sphere_area(d) * rho ** (d - 1)
    inside = integrate.cumulative_trapezoid(np.abs(val) * weight, rho, initial=0.0)
    beyond_table = integrate.quad(
        lambda t: 2.0 * math.exp(icpt + slope * math.sqrt(t)) * sphere_area(d) * t ** (d - 1),
        _RHO_MAX,
        np.inf,
    )[0]
    tail_cum = integrate.cumulative_trapezoid((bound * weight)[::-1], -rho[::-1], initial=0.0)[::-1]
    outside = tail_cum + beyond_table
    # norms on a 40x finer resampling of the spline (L1) and on the space side by Plancherel (L2)
    fine = np.linspace(0.0, _RHO_MAX, 40 * (rho.size - 1) + 1)
    l1 = integrate.trapezoid(np.abs(spline(fine)) * sphere_area(d) * fine ** (d - 1), fine)
    l2sq = sphere_area(d) * integrate.quad(
        lambda r: (standard_bump(r) / mass) ** 2 * r ** (d - 1), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13
    )[0]
    return {
        "mass": mass,
        "rho": rho,
        "values": val,
        "spline": spline,
        "bound": bound,
        "envelope": envelope,
        "inside": inside,
        "outside": outside,
        "l1": float(l1),
        "l2": math.sqrt(l2sq),
    }


class Mollifier:
    """A radial approximate identity in ``R^dim`` (also used on the torus ``T^dim``).

    Parameters
    ----------
    family : str
        ``"space-compact-bump"`` or ``"band-limited"``.
    dim : int
        Ambient dimension, 1 to 3.
    radius : float
        Spatial support radius for the space-compact family, band radius ``A``
        for the band-limited family.
    """

    def __init__(self, family: str = SPACE_COMPACT, dim: int = 2, radius: float = 1.0):
        if family not in FAMILIES:
            raise ValueError(f"unknown mollifier family {family!r}; expected one of {FAMILIES}")
        if dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.family = family
        self.dim = dim
        self.radius = float(radius)
        if family == SPACE_COMPACT:
            self._table = _bump_table(dim)
            self.space_radius = self.radius
            self.band_radius = math.inf
            self.normalization = "unit-integral"
            # frequency cap of the tabulation: declared constant for tail certificates
            self.tail_constant = _RHO_MAX / self.radius
        else:
            self._table = None
            self.space_radius = math.inf
            self.band_radius = self.radius
            self.normalization = "unit-value"
            self.tail_constant = self.radius

    def __repr__(self):
        return f"Mollifier({self.family!r}, dim={self.dim}, radius={self.radius})"

    def __eq__(self, other):
        return (
            isinstance(other, Mollifier)
            and (self.family, self.dim, self.radius) == (other.family, other.dim, other.radius)
        )

    def __hash__(self):
        return hash((self.family, self.dim, self.radius))

    # frequency side -------------------------------------------------------
    def radial(self, rho):
        """Frequency-side form as a function of ``|tau|`` (vectorised)."""
        rho = np.abs(np.asarray(rho, dtype=float))
        if self.family == BAND_LIMITED:
            return unit_band_profile(rho / self.radius)
        scaled = rho * self.radius
        out = self._table["spline"](np.minimum(scaled, _RHO_MAX))
        out[scaled > _RHO_MAX] = 0.0
        return out

    def frequency(self, tau):
        """hat psi(tau) for tau of shape (..., dim); a scalar/1-d input is taken as |tau| when dim == 1."""
        tau = np.asarray(tau, dtype=float)
        if self.dim == 1:
            if tau.ndim >= 2 and tau.shape[-1] == 1:
                tau = tau[..., 0]
            return self.radial(tau)
        if tau.ndim == 0 or tau.shape[-1] != self.dim:
            raise ValueError(f"expected frequency vectors with last axis {self.dim}")
        return self.radial(np.sqrt(np.sum(tau * tau, axis=-1)))

    def dilated_frequency(self, delta: float, tau):
        """Frequency-side form of psi_delta, i.e. hat psi(delta * tau)."""
        return self.frequency(delta * np.asarray(tau, dtype=float))

    def spectral(self, s):
        """Torus weight psi(lambda / R) as a function of s = lambda / R (lambda = 2 pi |n|)."""
        return self.radial(np.asarray(s, dtype=float) / (2.0 * math.pi))

    def tail_bound(self, rho):
        """Certified, nonincreasing bound on sup_{|tau| >= rho} |hat psi(tau)|."""
        rho = np.abs(np.asarray(rho, dtype=float))
        if self.family == BAND_LIMITED:
            return unit_band_profile(np.minimum(rho / self.radius, 1.0))
        t = self._table
        scaled = rho * self.radius
        inside = np.interp(scaled, t["rho"], t["bound"])
        # linear interpolation of a nonincreasing table is nonincreasing, but a point
        # between nodes must be dominated by the left node's bound
        idx = np.clip(np.floor(scaled / _RHO_STEP).astype(int), 0, t["rho"].size - 1)
        inside = np.maximum(inside, t["bound"][idx])
        a, c = t["envelope"]
        far = 2.0 * np.exp(c - a * np.sqrt(np.maximum(scaled, _RHO_MAX)))
        return np.where(scaled <= _RHO_MAX, inside, far)

    def effective_truncation(self, R: float, eps_tail: float) -> float:
        """Half-width T of the frequency window at scale R for relative tail mass eps_tail.

        The L1 mass of hat psi(xi / R) outside |xi| <= T is certified (through
        :meth:`tail_bound`) to be at most ``eps_tail`` times the mass inside.
        """
        if not 0.0 < eps_tail < 1.0:
            raise ValueError("eps_tail must lie in (0, 1)")
        if not R > 0:
            raise ValueError("R must be positive")
        if self.family == BAND_LIMITED:
            return self.radius * R
        t = self._table
        ok = t["outside"] <= eps_tail * t["inside"]
        ok[0] = False
        if not ok.any():
            raise TailUnreachable(
                f"eps_tail={eps_tail:g} needs a window beyond |tau| = {self.tail_constant:g}",
                required_T=math.inf,
            )
        k = t["rho"][np.argmax(ok)]
        return float(k / self.radius * R)

    def tail_fraction(self, K: float) -> float:
        """Certified relative tail mass for the window |tau| <= K (unscaled units)."""
        if self.family == BAND_LIMITED:
            return 0.0 if K >= self.radius else math.inf
        t = self._table
        i = min(int(K * self.radius / _RHO_STEP), t["rho"].size - 1)
        if i == 0:
            return math.inf
        return float(t["outside"][i] / t["inside"][i])

    # space side -----------------------------------------------------------
    def space(self, r):
        """Spatial profile psi(|x|) with the family's normalisation."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.family == SPACE_COMPACT:
            return standard_bump(r / self.radius) / (self._table["mass"] * self.radius**self.dim)
        return _band_space_profile(self.dim, self.radius, r)

    def l1_norm(self) -> float:
        """||hat psi||_1 (band-limited: exact quadrature; bump: tabulated, tail below 1e-10)."""
        if self.family == SPACE_COMPACT:
            return self._table["l1"] / self.radius**self.dim
        return _band_norms(self.dim)[0] * self.radius**self.dim

    def l2_norm(self) -> float:
        if self.family == SPACE_COMPACT:
            return self._table["l2"] / self.radius ** (self.dim / 2)
        return _band_norms(self.dim)[1] * self.radius ** (self.dim / 2)

    def sup_norm(self) -> float:
        return 1.0


@lru_cache(maxsize=None)
def _band_norms(d: int):
    area = sphere_area(d)
    l1 = area * integrate.quad(lambda t: unit_band_profile(t) * t ** (d - 1), 0, 1, epsabs=1e-15)[0]
    l2 = area * integrate.quad(lambda t: unit_band_profile(t) ** 2 * t ** (d - 1), 0, 1, epsabs=1e-15)[0]
    return l1, math.sqrt(l2)


def _band_space_profile(d: int, A: float, r):
    # inverse transform of the radial band profile; the transform is its own inverse for radial functions
    val, _ = hankel_transform(lambda t: unit_band_profile(t), d, np.ravel(r) * A, support=1.0)
    return (val * A**d).reshape(np.shape(r))
