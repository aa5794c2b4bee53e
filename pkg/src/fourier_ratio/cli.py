"""Command-line front end: ``fourier-ratio <subcommand> [options]``.

Every subcommand that writes files records ``run_config.ini`` (replayable
with ``--config``) and ``manifest.json`` (version and tolerances) in its
output directory.  The exit status is 0 exactly when all declared checks
pass; failing checks are listed in ``failures.json`` and on stderr.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import output as out
from .config import ConfigError, RunConfig, _parse_scalar, family_alias, load_config
from .measures import GENERATORS, ResolutionError, make_canonical_measure, neighborhood_volume
from .mollifier import BAND_LIMITED, SPACE_COMPACT, Mollifier, TailUnreachable
from .ratio import default_regions, estimate_kappa, ratio_ladder, sandwich_check
from .spectrum import AUDIT_TOLERANCE
from .thresholds import (HOLDER_TOLERANCE, proof_chain_check, sequence_holder, threshold, threshold_curve,
                         threshold_inverse)
from .torus import (TORUS_KINDS, PointSupport, SubTorusSupport, apply_multiplier, bands, block_energy,
                    block_partial_sums, default_torus_ladder, field_l2, make_torus_measure, manifold_ratio_ladder,
                    propagation_block, support_propagation_check)
from .verification import BAND_TOLERANCE, ORACLE_TOLERANCE, failures, run_verification

A2_TOLERANCE = 1e-10
PARSEVAL_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, measure: bool = True, ladder: bool = True) -> None:
    p.add_argument("--config", help="sectioned key-value file; flags override its values")
    p.add_argument("--out", dest="output", help="output directory (default: out)")
    if measure:
        p.add_argument("--measure", dest="kind", help="measure generator")
        p.add_argument("--d", type=int, help="ambient dimension")
        p.add_argument("--n", type=int, help="samples along the principal parameter")
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="generator parameter (repeatable)")
        p.add_argument("--psi", dest="family", help="mollifier family: space-compact-bump (bump) or band-limited (band)")
        p.add_argument("--psi-radius", dest="radius", type=float, help="mollifier radius")
        p.add_argument("--eps-tail", dest="eps_tail", type=float, help="relative frequency tail mass")
        p.add_argument("--spacing", type=float, help="frequency grid spacing (default 1/(4(diam+1)))")
        p.add_argument("--seed", type=int, help="seed for audit sampling")
    if ladder:
        p.add_argument("--ladder", dest="scales", help="scales: '16,32,64' or exponent range '2^4..2^9'")
        p.add_argument("--p", type=float, help="integrability exponent (>= 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fourier-ratio", description="Fourier ratio ladders, decay exponents and "
                                     "synthesis thresholds for measures on R^d and the flat torus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fr-ladder", help="Fourier ratio over a ladder of scales (CSV, JSON, SVG)")
    _common(p)
    p = sub.add_parser("kappa", help="decay exponent of the Fourier ratio")
    _common(p)
    p.add_argument("--expect", help="declared range LO:HI for kappa, checked")

    p = sub.add_parser("threshold", help="exact synthesis threshold p* for (d, alpha, kappa)")
    _threshold_args(p)
    p.add_argument("--kappa", help="decay exponent (rational or decimal)")
    p = sub.add_parser("threshold-inverse", help="kappa whose threshold equals p")
    _threshold_args(p)
    p.add_argument("--p", dest="p_target", help="target exponent (rational, decimal or inf)")
    p = sub.add_parser("sweep-curve", help="the curve kappa -> p* as CSV and SVG")
    _threshold_args(p)
    p.add_argument("--points", type=int, help="number of kappa values (default 41)")

    p = sub.add_parser("sandwich", help="sandwich and uncertainty inequalities at every scale")
    _common(p)
    p.add_argument("--lower-slack", dest="lower_slack", type=float)
    p.add_argument("--upper-slack", dest="upper_slack", type=float)
    p = sub.add_parser("proof-chain", help="replay the inequality chain of the vanishing argument")
    _common(p)
    p.add_argument("--epsilon", type=float, help="margin below kappa_min (default 0.05)")

    p = sub.add_parser("torus-ladder", help="spectral Fourier ratio on the flat torus")
    _common(p)
    _torus_args(p)
    p = sub.add_parser("torus-propagation", help="mass of P_R u outside the propagated support")
    _common(p)
    _torus_args(p)
    p.add_argument("--leak-tol", dest="leak_tol", type=float, help="leak tolerance (default 1e-6)")
    p.add_argument("--support-shift", type=float, default=0.0,
                   help="translate the support descriptor along the last axis (negative control)")
    p.add_argument("--export-field", type=float, metavar="R", help="also write P_R u at this scale as CSV")

    p = sub.add_parser("verify", help="pipeline against the independent oracles")
    p.add_argument("--config")
    p.add_argument("--out", dest="output")
    p.add_argument("--corpus", help="comma-separated corpus entries; empty string for none")
    p.add_argument("--seed", type=int)
    return parser


def _threshold_args(p):
    p.add_argument("--config")
    p.add_argument("--out", dest="output", help="also write JSON/CSV here")
    p.add_argument("--d", type=int, required=False)
    p.add_argument("--alpha", help="support dimension (or k on a manifold)")


def _torus_args(p):
    p.add_argument("--block", type=int, help="coefficient block radius N")
    p.add_argument("--grid", type=int, help="spatial grid points per axis")


_FLAG_FIELDS = ("kind", "d", "n", "family", "radius", "eps_tail", "spacing", "seed", "scales", "p", "output",
                "lower_slack", "upper_slack", "epsilon", "block", "grid", "leak_tol", "alpha", "kappa",
                "p_target", "points", "corpus")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            cfg.set(name, value, where=f"--{name.replace('_', '-')}")
    for item in getattr(args, "param", []) or []:
        if "=" not in item:
            raise ConfigError("--param", f"expected KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        cfg.params[key.strip()] = _parse_scalar(raw)
    return cfg.validate()


# ---------------------------------------------------------------------------
# helpers


def _measure(cfg: RunConfig):
    params = dict(cfg.params)
    if cfg.d is not None:
        params["d"] = cfg.d
    if cfg.kind not in GENERATORS:
        raise ConfigError("measure.kind", f"expected one of {GENERATORS}, got {cfg.kind!r}")
    m = make_canonical_measure(cfg.kind, params, cfg.n)
    cfg.d = m.d
    return m


def _mollifier(cfg: RunConfig, d: int, default: str = SPACE_COMPACT) -> Mollifier:
    cfg.family = family_alias(cfg.family or default)
    return Mollifier(cfg.family, d, cfg.radius)


def _tolerances(cfg: RunConfig) -> dict:
    return {
        "audit_tolerance": AUDIT_TOLERANCE, "holder_tolerance": HOLDER_TOLERANCE,
        "oracle_tolerance": ORACLE_TOLERANCE, "band_tolerance": BAND_TOLERANCE,
        "a2_tolerance": A2_TOLERANCE, "parseval_tolerance": PARSEVAL_TOLERANCE,
        "leak_tolerance": cfg.leak_tol, "lower_slack": cfg.lower_slack, "upper_slack": cfg.upper_slack,
        "eps_tail": cfg.eps_tail, "epsilon": cfg.epsilon,
    }


class Run:
    """Collects checks for one subcommand and writes the standard records."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.checks: dict[str, bool] = {}
        self.failures: list[str] = []
        self.dir = out.ensure_dir(cfg.output)

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks[name] = bool(ok)
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)

    def finish(self) -> int:
        out.write_run_record(self.dir, self.command, self.cfg.to_ini(), _tolerances(self.cfg), __version__)
        out.write_json(self.path("checks.json"), {"checks": self.checks, "failures": self.failures,
                                                  "passed": not self.failures})
        if self.failures:
            out.write_json(self.path("failures.json"), self.failures)
            for f in self.failures:
                print(f"FAIL {f}", file=sys.stderr)
            return 1
        failures_path = self.path("failures.json")
        if os.path.exists(failures_path):
            os.remove(failures_path)
        return 0


def _plot_ratio(path, series_list, title, ylabel="FR(R)"):
    data = [(name, s.ladder, s.fr) for name, s in series_list]
    out.write_svg(path, out.svg_plot(data, title, "R", ylabel))


# ---------------------------------------------------------------------------
# subcommands


def cmd_fr_ladder(cfg: RunConfig, args) -> int:
    run = Run("fr-ladder", cfg)
    m = _measure(cfg)
    psi = _mollifier(cfg, m.d)
    s = ratio_ladder(m, psi, cfg.scales, p=cfg.p, eps_tail=cfg.eps_tail, spacing=cfg.spacing)
    cfg.scales = s.ladder
    out.write_csv(run.path("fr_ladder.csv"), s.rows())
    out.write_json(run.path("provenance.json"), s.provenance())
    _plot_ratio(run.path("fr_ladder.svg"), [(m.label, s)], f"Fourier ratio of {m.label}")
    for n in s.norms:
        run.check(f"audit R={n.R:g}", n.audit["passed"], f"max relative error {n.audit['max_rel_error']:.3g}")
        run.check(f"window R={n.R:g}", not n.capped, "frequency window was capped")
    return run.finish()


def cmd_kappa(cfg: RunConfig, args) -> int:
    run = Run("kappa", cfg)
    m = _measure(cfg)
    psi = _mollifier(cfg, m.d)
    s = ratio_ladder(m, psi, cfg.scales, p=cfg.p, eps_tail=cfg.eps_tail, spacing=cfg.spacing)
    cfg.scales = s.ladder
    est = estimate_kappa(s)
    result = {"label": m.label, "d": m.d, "psi_family": psi.family, "ladder": s.ladder, **est.as_dict(),
              "slopes": est.slopes}
    for n in s.norms:
        run.check(f"audit R={n.R:g}", n.audit["passed"], f"max relative error {n.audit['max_rel_error']:.3g}")
    if getattr(args, "expect", None):
        lo, hi = (float(x) for x in args.expect.split(":"))
        result["expect"] = [lo, hi]
        run.check("kappa in declared range", lo <= est.kappa <= hi, f"kappa = {est.kappa:.4f} outside [{lo}, {hi}]")
    out.write_json(run.path("kappa.json"), result)
    out.write_csv(run.path("fr_ladder.csv"), s.rows())
    _plot_ratio(run.path("fr_ladder.svg"), [(m.label, s)], f"Fourier ratio of {m.label}, kappa = {est.kappa:.3f}")
    print(out.dumps(result), end="")
    return run.finish()


def _threshold_inputs(cfg: RunConfig):
    if cfg.d is None:
        raise ConfigError("--d", "required")
    if cfg.alpha is None:
        raise ConfigError("--alpha", "required")
    return cfg.d, cfg.alpha


def cmd_threshold(cfg: RunConfig, args) -> int:
    d, alpha = _threshold_inputs(cfg)
    if cfg.kappa is None:
        raise ConfigError("--kappa", "required")
    res = threshold(d, alpha, cfg.kappa).as_dict()
    print(out.dumps(res), end="")
    if args.output:
        run = Run("threshold", cfg)
        out.write_json(run.path("threshold.json"), res)
        return run.finish()
    return 0


def cmd_threshold_inverse(cfg: RunConfig, args) -> int:
    d, alpha = _threshold_inputs(cfg)
    if cfg.p_target is None:
        raise ConfigError("--p", "required")
    k = threshold_inverse(d, alpha, cfg.p_target)
    res = {"d": d, "alpha": _num(alpha), "p": cfg.p_target, "kappa": float(k), "kappa_exact": str(k),
           "p_star_check": threshold(d, alpha, k).as_dict()["p_star_exact"]}
    print(out.dumps(res), end="")
    if args.output:
        run = Run("threshold-inverse", cfg)
        out.write_json(run.path("threshold_inverse.json"), res)
        return run.finish()
    return 0


def _num(text):
    f = Fraction(str(text))
    return int(f) if f.denominator == 1 else float(f)


def cmd_sweep_curve(cfg: RunConfig, args) -> int:
    d, alpha = _threshold_inputs(cfg)
    rows = threshold_curve(d, alpha, points=cfg.points)
    run = Run("sweep-curve", cfg)
    out.write_csv(run.path("sweep_curve.csv"), rows, ["kappa", "kappa_exact", "p_star", "regime"])
    finite = [r for r in rows if r["p_star"] != "inf"]
    out.write_svg(run.path("sweep_curve.svg"), out.svg_plot(
        [(f"d={d}, alpha={alpha}", [r["kappa"] for r in finite], [r["p_star"] for r in finite])],
        "synthesis threshold against decay exponent", "kappa", "p*", logx=False, logy=True))
    return run.finish()


def cmd_sandwich(cfg: RunConfig, args) -> int:
    run = Run("sandwich", cfg)
    m = _measure(cfg)
    psi = _mollifier(cfg, m.d)
    regions = default_regions(m)
    s = ratio_ladder(m, psi, cfg.scales, p=cfg.p, eps_tail=cfg.eps_tail, spacing=cfg.spacing, regions=regions)
    cfg.scales = s.ladder
    rows = []
    for R in s.ladder:
        geo = neighborhood_volume(m, 1.0 / R)
        for name, X in regions.items():
            c = sandwich_check(m, s, X, R, geometry=geo, lower_slack=cfg.lower_slack, upper_slack=cfg.upper_slack)
            row = {"label": m.label, "R": R, "region": name, "FR": c.fr, "eta": c.eta, "volume_E": c.e_volume,
                   "covering_count": c.covering_count, "volume_X": c.xr_volume, "lower": c.lower,
                   "covering_lower": c.covering_lower, "upper": c.upper, "uncertainty_lhs": c.uncertainty_lhs,
                   "uncertainty_rhs": c.uncertainty_rhs}
            for k, v in c.passes.items():
                row[f"{k}_ok"] = v
                run.check(f"{k} R={R:g} {name}", v)
            rows.append(row)
    out.write_csv(run.path("sandwich.csv"), rows)
    _plot_ratio(run.path("fr_ladder.svg"), [(m.label, s)], f"Fourier ratio of {m.label}")
    return run.finish()


def cmd_proof_chain(cfg: RunConfig, args) -> int:
    run = Run("proof-chain", cfg)
    m = _measure(cfg)
    psi = _mollifier(cfg, m.d)
    s = ratio_ladder(m, psi, cfg.scales, p=cfg.p, eps_tail=cfg.eps_tail, spacing=cfg.spacing)
    cfg.scales = s.ladder
    rep = proof_chain_check(m, psi, s, p=cfg.p, epsilon=cfg.epsilon)
    out.write_csv(run.path("proof_chain.csv"), rep.rows)
    out.write_json(run.path("proof_chain.json"), rep.summary())
    for k, v in rep.checks.items():
        run.check(k, v)
    print(out.dumps(rep.summary()), end="")
    return run.finish()


def _torus_measure(cfg: RunConfig):
    if cfg.kind not in TORUS_KINDS:
        raise ConfigError("measure.kind", f"expected one of {TORUS_KINDS}, got {cfg.kind!r}")
    params = dict(cfg.params)
    if cfg.d is not None:
        params["d"] = cfg.d
    u = make_torus_measure(cfg.kind, params, cfg.block)
    cfg.d, cfg.block = u.d, u.N
    return u


def cmd_torus_ladder(cfg: RunConfig, args) -> int:
    run = Run("torus-ladder", cfg)
    u = _torus_measure(cfg)
    psi = _mollifier(cfg, u.d, default=BAND_LIMITED)
    lad = manifold_ratio_ladder(u, psi, cfg.scales or default_torus_ladder(u.d, u.N), p=cfg.p, eps_tail=cfg.eps_tail)
    cfg.scales = lad.series.ladder
    b = bands(u)
    out.write_csv(run.path("torus_ladder.csv"), lad.series.rows())
    out.write_csv(run.path("bands.csv"), b.rows())
    energy = block_energy(u)
    parseval = abs(energy - math.fsum(b.energy**2)) / energy if energy > 0 else 0.0
    run.check("parseval", parseval <= PARSEVAL_TOLERANCE, f"relative defect {parseval:.3g}")
    for n in lad.norms:
        ok = sequence_holder(n.c, cfg.p)[2] if n.c.any() else True
        run.check(f"holder R={n.R:g}", ok)
        if cfg.grid or u.d < 3:
            P = apply_multiplier(u, psi, n.R, cfg.grid)
            a2 = n.R ** (-u.d / 2) * field_l2(P)
            err = abs(a2 - n.a2) / n.a2 if n.a2 > 0 else abs(a2)
            run.check(f"A2 synthesis R={n.R:g}", err <= A2_TOLERANCE, f"relative difference {err:.3g}")
    ps = block_partial_sums(u, cfg.p)
    result = {"label": u.label, "d": u.d, "N": u.N, "psi_family": psi.family, "ladder": lad.series.ladder,
              "partial_sums": {"label": ps.label, "p": ps.p, "cutoffs": ps.cutoffs, "sums": ps.sums,
                               "last_increment": ps.increment, "saturated": ps.saturated}}
    if lad.estimate is not None:
        result.update({"kappa_M": lad.estimate.kappa, "kappa_M_min": lad.estimate.kappa_min,
                       "window": list(lad.estimate.window), "residual": lad.estimate.residual})
        _plot_ratio(run.path("torus_ladder.svg"), [(u.label, lad.series)], f"spectral Fourier ratio of {u.label}",
                    "FR_M(R)")
    else:
        result["error"] = lad.error
    out.write_json(run.path("kappa_M.json"), result)
    print(out.dumps(result), end="")
    return run.finish()


def cmd_torus_propagation(cfg: RunConfig, args) -> int:
    run = Run("torus-propagation", cfg)
    ladder = cfg.scales or [2.0**j for j in range(4, 8)]
    cfg.scales = ladder
    if cfg.block is None:
        d = cfg.d or int(cfg.params.get("d", 1 if cfg.kind == "cantor-on-T1" else 2))
        cfg.block = propagation_block(d, ladder)
    u = _torus_measure(cfg)
    psi = _mollifier(cfg, u.d, default=SPACE_COMPACT)
    support = u.support
    if args.support_shift:
        if isinstance(support, SubTorusSupport):
            vals = list(support.values)
            vals[-1] += args.support_shift
            support = SubTorusSupport(u.d, support.fixed, vals)
        elif isinstance(support, PointSupport):
            shift = np.zeros(u.d)
            shift[-1] = args.support_shift
            support = PointSupport(support.points + shift, support.resolution, support.name + " (shifted)")
        else:
            raise ConfigError("--support-shift", f"not supported for the {support.name} descriptor")
    rows = []
    for R in ladder:
        rep = support_propagation_check(u, psi, R, tol=cfg.leak_tol, support=support, M=cfg.grid,
                                        eps_tail=cfg.eps_tail)
        rows.append({"label": u.label, "R": R, "radius": rep.radius, "leak": rep.leak, "tolerance": rep.tol,
                     "grid": rep.grid, "passed": rep.passed})
        run.check(f"leak R={R:g}", rep.passed, f"leak {rep.leak:.3g} > {rep.tol:.3g}")
    out.write_csv(run.path("propagation.csv"), rows)
    if args.export_field:
        P = apply_multiplier(u, psi, args.export_field, cfg.grid)
        if u.d <= 2:
            out.write_field_csv(run.path(f"field_R{args.export_field:g}.csv"), P)
    return run.finish()


def cmd_verify(cfg: RunConfig, args) -> int:
    run = Run("verify", cfg)
    rows = run_verification(cfg.corpus, seed=cfg.seed)
    out.write_json(run.path("verify.json"), {"rows": rows, "failures": failures(rows)})
    if rows:
        out.write_csv(run.path("verify.csv"), rows)
    for r in rows:
        run.check(f"{r['check']} [{r['measure']}]", r["passed"], f"error {r['max_abs_error']:.3g}")
    return run.finish()


COMMANDS = {
    "fr-ladder": cmd_fr_ladder,
    "kappa": cmd_kappa,
    "threshold": cmd_threshold,
    "threshold-inverse": cmd_threshold_inverse,
    "sweep-curve": cmd_sweep_curve,
    "sandwich": cmd_sandwich,
    "proof-chain": cmd_proof_chain,
    "torus-ladder": cmd_torus_ladder,
    "torus-propagation": cmd_torus_propagation,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ResolutionError, TailUnreachable, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
