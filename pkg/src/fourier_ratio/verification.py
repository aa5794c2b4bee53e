"""Pipeline-versus-oracle comparisons behind the ``verify`` subcommand.

Each check samples the fast spectral pipeline at grid nodes where the
mollifier factor is not small, divides the factor out and compares with an
independent reference value.  Tolerances are absolute and always add the
oracle's own error bound.
"""
from __future__ import annotations

import numpy as np

from . import oracles
from .measures import make_canonical_measure
from .mollifier import SPACE_COMPACT, Mollifier
from .spectrum import sample_spectrum
from .torus import bands, make_torus_measure

ORACLE_TOLERANCE = 1e-6
BAND_TOLERANCE = 1e-10
MIN_FACTOR = 0.05

EUCLIDEAN_CORPUS = ("segment", "circle", "cantor")
TORUS_CORPUS = ("torus-dirac-1", "torus-dirac-2", "torus-dirac-3", "torus-sub-torus-2", "torus-sub-torus-3",
                "torus-embedded-circle-2", "torus-cantor-on-T1-1", "torus-curve-graph-2")
DEFAULT_CORPUS = EUCLIDEAN_CORPUS + TORUS_CORPUS

# small blocks keep the brute-force enumeration cheap
_ORACLE_BLOCK = {1: 96, 2: 24, 3: 8}


def _sampled_nodes(sample, psi, count: int, seed: int):
    xi = sample.grid.nodes()
    factor = psi.frequency(xi / sample.R)
    ok = np.nonzero(np.abs(factor) >= MIN_FACTOR)[0]
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(ok, size=min(count, len(ok)), replace=False))
    return xi[pick], sample.values.ravel()[pick] / factor[pick]


def _row(check, measure, count, err, bound, tol):
    return {"check": check, "measure": measure, "samples": int(count), "max_abs_error": float(err),
            "oracle_bound": float(bound), "tolerance": float(tol), "passed": bool(err <= tol + bound)}


def verify_segment(R: float = 16.0, count: int = 128, seed: int = 0) -> dict:
    m = make_canonical_measure("segment", {"d": 2})
    psi = Mollifier(SPACE_COMPACT, 2)
    xi, vals = _sampled_nodes(sample_spectrum(m, psi, R, seed=seed), psi, count, seed)
    ref = oracles.segment_transform(1.0, xi[:, 0])
    err = np.max(np.abs(vals - ref.value))
    return _row("segment transform", "segment", len(xi), err, float(np.max(ref.error_bound)), ORACLE_TOLERANCE)


def verify_circle(R: float = 16.0, count: int = 128, seed: int = 0) -> dict:
    m = make_canonical_measure("circle", {})
    psi = Mollifier(SPACE_COMPACT, 2)
    xi, vals = _sampled_nodes(sample_spectrum(m, psi, R, seed=seed), psi, count, seed)
    refs = [oracles.circle_transform(float(np.hypot(*x))) for x in xi]
    ref = np.array([r.value for r in refs])
    bound = max(r.error_bound for r in refs)
    err = np.max(np.abs(vals - ref))
    return _row("circle transform", "circle", len(xi), err, bound, ORACLE_TOLERANCE)


def verify_cantor(R: float = 27.0, count: int = 128, seed: int = 0, depth: int = 10) -> dict:
    m = make_canonical_measure("cantor", {"depth": depth})
    psi = Mollifier(SPACE_COMPACT, 1)
    xi, vals = _sampled_nodes(sample_spectrum(m, psi, R, seed=seed), psi, count, seed)
    ref = oracles.cantor_transform(1.0 / 3.0, depth, xi[:, 0])
    err = np.max(np.abs(vals - ref.value))
    return _row("cantor transform", "cantor", len(xi), err, float(np.max(ref.error_bound)), ORACLE_TOLERANCE)


def verify_torus(name: str) -> list[dict]:
    """Band energies and multiplicities of a torus corpus entry against lattice enumeration."""
    body, d = name[len("torus-"):].rsplit("-", 1)
    d = int(d)
    N = _ORACLE_BLOCK[d]
    u = make_torus_measure(body, {"d": d}, N=N)
    b = bands(u)
    ref = oracles.torus_band_energies(lambda n: u.coefficient(n), d, N)
    got = dict(zip(b.m.tolist(), b.energy.tolist()))
    keys = sorted(set(ref) | set(got))
    err = max(abs(ref.get(k, 0.0) - got.get(k, 0.0)) for k in keys)
    mult_err = sum(1 for k, c in zip(b.m.tolist(), b.multiplicity.tolist()) if oracles.lattice_band_count(d, k) != c)
    return [
        _row("torus band energies", name, len(keys), err, 0.0, BAND_TOLERANCE),
        {"check": "torus band multiplicities", "measure": name, "samples": len(b.m), "max_abs_error": float(mult_err),
         "oracle_bound": 0.0, "tolerance": 0.0, "passed": mult_err == 0},
    ]


def run_verification(corpus=None, seed: int = 0) -> list[dict]:
    """All checks for the named corpus entries (default :data:`DEFAULT_CORPUS`); an empty corpus gives no rows."""
    corpus = DEFAULT_CORPUS if corpus is None else tuple(corpus)
    rows: list[dict] = []
    for name in corpus:
        if name == "segment":
            rows.append(verify_segment(seed=seed))
        elif name == "circle":
            rows.append(verify_circle(seed=seed))
        elif name == "cantor":
            rows.append(verify_cantor(seed=seed))
        elif name in TORUS_CORPUS:
            rows.extend(verify_torus(name))
        else:
            raise ValueError(f"unknown corpus entry {name!r}; expected one of {DEFAULT_CORPUS}")
    return rows


def failures(rows) -> list[str]:
    return [f"{r['check']} [{r['measure']}]: error {r['max_abs_error']:.3g} > {r['tolerance']:.3g}"
            for r in rows if not r["passed"]]

