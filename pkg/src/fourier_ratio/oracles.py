"""Independent reference values for cross-checking the pipelines.

Everything here uses closed forms, adaptive quadrature or brute-force lattice
enumeration, deliberately different from the nonuniform FFT and fixed-grid
sums of the main modules.  This module imports nothing from the rest of the
package so that agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

_EPS = np.finfo(float).eps


@dataclass
class OracleResult:
    """A reference value with a certified absolute error bound."""

    value: complex | float | np.ndarray
    error_bound: float | np.ndarray
    method: str
    extra: dict = field(default_factory=dict)


def segment_transform(length: float, xi) -> OracleResult:
    """int_0^L exp(-2 pi i xi t) dt in closed form (vectorised over xi)."""
    xi = np.asarray(xi, dtype=float)
    value = length * np.exp(-1j * math.pi * xi * length) * np.sinc(xi * length)
    return OracleResult(value, 0.0 * np.abs(xi), "closed form L e^{-i pi xi L} sinc(xi L)")


def _oscillatory_quad(func, a, b, rate, tol=1e-14):
    """Adaptive quadrature split into panels of about half an oscillation each."""
    panels = max(8, int(math.ceil(rate * (b - a) / (2 * math.pi))) * 2)
    edges = np.linspace(a, b, panels + 1)
    vals, errs = [], []
    with warnings.catch_warnings():
        # the per-panel tolerance sits at roundoff level; the returned estimate is still used
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(func, lo, hi, epsabs=tol, epsrel=1e-13, limit=200)
            vals.append(v)
            errs.append(e)
    return math.fsum(vals), math.fsum(errs) + panels * 4 * _EPS * max(1.0, abs(math.fsum(vals)))


def circle_transform(rho: float, radius: float = 1.0) -> OracleResult:
    """Arc-length transform of the circle of given radius at radial frequency rho.

    Computed as ``radius * int_0^{2pi} exp(-2 pi i rho radius cos t) dt`` by
    panel-wise adaptive quadrature.  The imaginary part vanishes by the
    symmetry t -> pi - t, so only the cosine part over [0, pi] is integrated.
    """
    a = 2 * math.pi * abs(float(rho)) * radius
    v, e = _oscillatory_quad(lambda t: math.cos(a * math.cos(t)), 0.0, math.pi, a)
    return OracleResult(2 * radius * v, 2 * radius * e, "panel adaptive quadrature on [0, pi]")


def sphere_transform(rho: float, radius: float = 1.0) -> OracleResult:
    """Surface measure of the sphere of given radius in R^3: 4 pi r^2 sin(2 pi rho r) / (2 pi rho r)."""
    z = 2 * rho * radius
    return OracleResult(4 * math.pi * radius**2 * np.sinc(z), 0.0, "closed form")


def cantor_transform(ratio: float, depth: int, xi, offset: float = 0.0) -> OracleResult:
    """Transform of the depth-J two-map IFS measure with atoms at left endpoints.

    The finite object is ``prod_{j=1}^J (1 + exp(-2 pi i xi (1-r) r^{j-1})) / 2``
    (times the offset phase).  ``error_bound`` is a floating-point bound for
    that finite object; ``extra['limit_error']`` bounds the distance to the
    self-similar limit measure, ``pi |xi| r^J``, from the Lipschitz tail.
    """
    if not 0 < ratio <= 0.5:
        raise ValueError("ratio must lie in (0, 1/2]")
    if not 0 <= depth <= 40:
        raise ValueError("depth must lie in 0..40")
    xi = np.asarray(xi, dtype=float)
    value = np.exp(-2j * math.pi * xi * offset).astype(complex)
    for j in range(depth):
        value = value * (1 + np.exp(-2j * math.pi * xi * (1 - ratio) * ratio**j)) / 2
    err = 8 * (depth + 1) * _EPS * (1 + np.abs(xi) * (1 + abs(offset)))
    return OracleResult(value, err, "finite self-similar product", {"limit_error": math.pi * np.abs(xi) * ratio**depth})


def lattice_band_count(d: int, m: int) -> int:
    """#{n in Z^d : |n|^2 = m} by direct enumeration."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    r = math.isqrt(m)
    return sum(1 for n in itertools.product(range(-r, r + 1), repeat=d) if sum(k * k for k in n) == m)


def torus_band_energies(coeff: Callable[[tuple], complex], d: int, N: int) -> dict[int, float]:
    """Eigenspace energies ``(sum_{|n|^2 = m} |coeff(n)|^2)^{1/2}`` for every m <= N^2.

    Brute-force enumeration of the lattice ball of radius N; ``coeff`` maps an
    integer tuple to the Fourier coefficient.
    """
    acc: dict[int, list] = defaultdict(list)
    for n in itertools.product(range(-N, N + 1), repeat=d):
        m = sum(k * k for k in n)
        if m <= N * N:
            c = coeff(n)
            acc[m].append(abs(c) ** 2)
    return {m: math.sqrt(math.fsum(v)) for m, v in sorted(acc.items())}


def segment_ratio_continuum(R: float, multiplier: Callable[[np.ndarray], np.ndarray], K: float,
                            length: float = 1.0, p: float = 1.0) -> float:
    """Continuum ``R^{-2} int |hat psi(xi/R)|^p |S_L(xi_1)|^p dxi`` for a segment along xi_1 in R^2.

    ``multiplier`` is the radial frequency profile of the mollifier and is
    integrated over ``|u| <= K`` (in units of xi / R).  The outer integral
    runs over panels between consecutive zeros of the segment transform with
    16-point Gauss-Legendre; the inner integral over u_2 is adaptive.
    """
    x, w = np.polynomial.legendre.leggauss(16)
    zeros = np.arange(0.0, K + 1e-12, 1.0 / (R * length))
    if zeros[-1] < K:
        zeros = np.append(zeros, K)
    total = []
    for lo, hi in zip(zeros[:-1], zeros[1:]):
        u1 = (x + 1) / 2 * (hi - lo) + lo
        seg = np.abs(segment_transform(length, R * u1).value) ** p
        inner = np.empty_like(u1)
        for i, a in enumerate(u1):
            top = math.sqrt(max(K * K - a * a, 0.0))
            inner[i] = 2 * integrate.quad(
                lambda b: float(np.abs(multiplier(np.array([math.hypot(a, b)]))[0]) ** p),
                0.0, top, limit=400, epsabs=1e-13, epsrel=1e-11,
            )[0]
        total.append(float(np.sum(w * seg * inner)) * (hi - lo) / 2)
    # symmetric in u_1 -> -u_1
    return 2 * math.fsum(total)
