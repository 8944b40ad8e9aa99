"""Command-line entry point: experiment orchestration, flat key=value config
files, and artifact emission (CSV for grids, JSON for single solves, native SVG
plots).

Exit codes: 0 success, 1 config error, 2 solver non-convergence in non-sweep
mode, 3 I/O failure.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import (INF, ChannelSpec, NormOrder, PriorSpec, ProblemConfig,
                     validate_config)
from .metrics import (error_report, rad_bound_commuting,
                      rad_bound_commuting_witness, rad_bound_generic,
                      rad_bound_l2_maha, rad_bound_lp)
from .prior_maha import swfm_measure
from .scaling import ScalingAbort, fit_scaling_exponents, leading_order_errors
from .simulator import compare_theory_simulation, finite_eps
from .solver import (SolverSettings, solve_fixed_point,
                     sweep_regularization_order, tune_lambda)
from .svgplot import heatmap, line_plot

SUBCOMMANDS = ("solve", "alpha-sweep", "r-sweep", "phase-diagram",
               "maha-compare", "scaling", "simulate", "rad-bounds")

USAGE = f"""usage: rerm <subcommand> <config_path> <output_dir>
subcommands: {", ".join(SUBCOMMANDS)}
config: flat key = value lines, '#' comments; keys include alpha, eps, lambda,
tau, rho, p ("inf" accepted), r, loss, prior, geometry, swfm.* block tables,
solver.mu, solver.tol, solver.max_iters, sim.d, sim.seeds."""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "alpha": 1.0, "eps": 0.0, "lambda": 1e-2, "tau": 0.0, "rho": 1.0,
    "p": INF, "r": 2.0, "loss": "logistic", "prior": "gaussian",
    "geometry": "lp",
    "swfm.phi": (0.5, 0.5), "swfm.omega": (1.0, 1.0),
    "swfm.zeta": (1.0, 2.5), "swfm.theta": (1.0, 1.0), "swfm.w": (2.5, 1.0),
    "solver.mu": 0.7, "solver.tol": 1e-5, "solver.max_iters": 5000,
    "sim.d": 1000, "sim.seeds": 10, "sim.iters": 20000, "sim.seed0": 0,
    "alphas": (0.5, 1.0, 2.0), "epss": (0.0, 0.05, 0.1, 0.2, 0.4, 0.8),
    "r.min": 1.0, "r.max": 3.0, "r.points": 50,
    "scaling.alpha_min": 1e-4, "scaling.alpha_max": 1e-2,
    "scaling.points": 8, "scaling.fraction": 0.5,
    "rad.n": 4, "rad.eps": 1.0, "rad.d": 1.0,
    "rad.max_dual_x": 1.0, "rad.W": 1.0, "rad.sigma": 1.0, "rad.sup_dual_w": 1.0,
    "rad.max_x2": 2.0, "rad.W2": 1.0, "rad.lambda_min": 4.0,
    "rad.lambdas": (1.0,), "rad.alphas": (1.0,), "rad.rad_clean": 0.0,
}
_STRING_KEYS = {"loss", "prior", "geometry"}
_LIST_KEYS = {k for k, v in _DEFAULTS.items() if isinstance(v, tuple)}
_INT_KEYS = {"solver.max_iters", "sim.d", "sim.seeds", "sim.iters",
             "sim.seed0", "r.points", "scaling.points", "rad.n"}


def _parse_scalar(key, text):
    if key in _STRING_KEYS:
        return text
    if text == "inf":
        return INF
    try:
        return int(text) if key in _INT_KEYS else float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def load_config(path):
    """Flat key = value text; '#' starts a comment; unknown keys rejected."""
    resolved = dict(_DEFAULTS)
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        if key in _LIST_KEYS:
            resolved[key] = tuple(_parse_scalar(key, v.strip())
                                  for v in val.split(",") if v.strip())
        else:
            resolved[key] = _parse_scalar(key, val)
    return resolved


def build_problem(conf):
    measure = None
    if conf["geometry"] == "mahalanobis":
        measure = swfm_measure(conf["swfm.phi"], conf["swfm.omega"],
                               conf["swfm.zeta"], conf["swfm.theta"],
                               conf["swfm.w"])
    try:
        return validate_config(ProblemConfig(
            alpha=conf["alpha"], eps=conf["eps"], lam=conf["lambda"],
            norms=NormOrder(p=conf["p"], r=conf["r"]),
            channel=ChannelSpec("probit", tau=conf["tau"]),
            prior=PriorSpec(conf["prior"], rho=conf["rho"]),
            geometry=conf["geometry"], measure=measure))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_settings(conf):
    try:
        return SolverSettings(damping=conf["solver.mu"], tol=conf["solver.tol"],
                              max_iters=conf["solver.max_iters"],
                              loss=conf["loss"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(conf):
    blob = repr(sorted(conf.items())).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _fmt_value(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, tuple):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


def _header_lines(conf, subcommand, t_start):
    lines = [f"# rerm v{__version__} subcommand={subcommand}",
             f"# generated={datetime.now(timezone.utc).isoformat()} "
             f"wall_time_s={time.monotonic() - t_start:.3f}"]
    for key in sorted(conf):
        lines.append(f"# {key} = {_fmt_value(conf[key])}")
    return lines


def write_csv(path, conf, subcommand, t_start, columns, rows):
    out = _header_lines(conf, subcommand, t_start)
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(_fmt_value(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def write_json(path, conf, subcommand, t_start, payload):
    doc = dict(version=__version__, subcommand=subcommand,
               generated=datetime.now(timezone.utc).isoformat(),
               wall_time_s=round(time.monotonic() - t_start, 3),
               config={k: conf[k] for k in sorted(conf)}, **payload)
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")


def _jsonable(v):
    """Strict-JSON form: inf -> "inf", numpy scalars/arrays -> plain Python."""
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) else float(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(conf, outdir, t0):
    cfg = build_problem(conf)
    settings = build_settings(conf)
    res = solve_fixed_point(cfg, settings)
    if not res.converged:
        print(f"solver did not converge (residual {res.residual:.3g})",
              file=sys.stderr)
        return 2
    rep = error_report(res.overlaps, cfg)
    payload = dict(
        overlaps=dict(m=res.overlaps.m, q=res.overlaps.q, V=res.overlaps.V,
                      P=res.overlaps.P),
        hats=dict(mhat=res.hats.mhat, qhat=res.hats.qhat, Vhat=res.hats.Vhat,
                  Phat=res.hats.Phat),
        errors=dict(e_gen=rep.e_gen, e_bnd=rep.e_bnd, e_rob=rep.e_rob,
                    teacher_margin=rep.teacher_margin),
        iterations=res.iterations, residual=res.residual,
        via_root=res.via_root)
    write_json(os.path.join(outdir, "solve.json"), conf, "solve", t0, payload)
    return 0


def cmd_alpha_sweep(conf, outdir, t0):
    cfg = build_problem(conf)
    settings = build_settings(conf)
    rows = []
    for alpha in conf["alphas"]:
        c = cfg.with_(alpha=float(alpha))
        lam, _, res = tune_lambda(c, settings=settings, return_state=True)
        rep = error_report(res.overlaps, c.with_(lam=lam))
        rows.append((float(alpha), conf["r"], lam, rep.e_gen, rep.e_bnd,
                     rep.e_rob))
    write_csv(os.path.join(outdir, "alpha_sweep.csv"), conf, "alpha-sweep", t0,
              ("alpha", "r", "lambda_star", "e_gen", "e_bnd", "e_rob"), rows)
    xs = [r[0] for r in rows]
    line_plot(os.path.join(outdir, "alpha_sweep.svg"),
              [(name, xs, [r[i] for r in rows])
               for name, i in (("e_gen", 3), ("e_bnd", 4), ("e_rob", 5))],
              title="errors vs alpha (tuned lambda)", xlabel="alpha",
              ylabel="error", logx=True)
    return 0


def _r_grid(conf):
    return np.linspace(conf["r.min"], conf["r.max"], conf["r.points"])


def cmd_r_sweep(conf, outdir, t0):
    cfg = build_problem(conf)
    settings = build_settings(conf)
    grid = _r_grid(conf)
    rows, rstar_rows = [], []
    for eps in conf["epss"]:
        sweep = sweep_regularization_order(cfg.with_(eps=float(eps)), grid,
                                           settings=settings)
        for pt in sweep.points:
            rows.append((float(eps), pt.r, pt.lam, pt.report.e_rob,
                         pt.r == sweep.r_star))
        rstar_rows.append((float(eps), sweep.r_star))
    write_csv(os.path.join(outdir, "r_sweep.csv"), conf, "r-sweep", t0,
              ("eps", "r", "lambda_star", "e_rob", "is_argmin"), rows)
    write_csv(os.path.join(outdir, "r_star.csv"), conf, "r-sweep", t0,
              ("eps", "r_star"), rstar_rows)
    line_plot(os.path.join(outdir, "r_star.svg"),
              [("r_star", [r[0] for r in rstar_rows],
                [r[1] for r in rstar_rows])],
              title="optimal penalty order vs eps", xlabel="eps",
              ylabel="r_star")
    return 0


def cmd_phase_diagram(conf, outdir, t0):
    from .solver import phase_diagram
    cfg = build_problem(conf)
    settings = build_settings(conf)
    alphas, epss = conf["alphas"], conf["epss"]
    mat, _ = phase_diagram(alphas, epss, cfg, settings=settings)
    rows = [(float(a), float(e), mat[i, j])
            for i, a in enumerate(alphas) for j, e in enumerate(epss)]
    write_csv(os.path.join(outdir, "phase_diagram.csv"), conf, "phase-diagram",
              t0, ("alpha", "eps", "delta_e_rob"), rows)
    heatmap(os.path.join(outdir, "phase_diagram.svg"), mat.T, alphas, epss,
            title="e_rob(r=2) - e_rob(r=1), tuned lambda", xlabel="alpha",
            ylabel="eps")
    return 0


SWFM_CASES = (("matched", (1.0, 2.5)), ("identity", (1.0, 1.0)),
              ("dual", (2.5, 1.0)))


def cmd_maha_compare(conf, outdir, t0):
    settings = build_settings(conf)
    rows = []
    for eps in conf["epss"]:
        for name, w_blocks in SWFM_CASES:
            cfg = build_problem({**conf, "geometry": "mahalanobis",
                                 "p": 2.0, "r": 2.0, "eps": float(eps),
                                 "swfm.w": w_blocks})
            lam, _, res = tune_lambda(cfg, settings=settings, return_state=True)
            rep = error_report(res.overlaps, cfg.with_(lam=lam))
            rows.append((float(eps), name, lam, rep.e_gen, rep.e_bnd,
                         rep.e_rob))
    write_csv(os.path.join(outdir, "maha_compare.csv"), conf, "maha-compare",
              t0, ("eps", "penalty_metric", "lambda_star", "e_gen", "e_bnd",
                   "e_rob"), rows)
    epss = sorted({r[0] for r in rows})
    line_plot(os.path.join(outdir, "maha_compare.svg"),
              [(name, epss, [r[5] for r in rows if r[1] == name])
               for name, _ in SWFM_CASES],
              title="robust error by penalty metric (tuned lambda)",
              xlabel="eps", ylabel="e_rob")
    return 0


def cmd_scaling(conf, outdir, t0):
    cfg = build_problem(conf)
    settings = build_settings(conf)
    grid = np.geomspace(conf["scaling.alpha_min"], conf["scaling.alpha_max"],
                        conf["scaling.points"])
    try:
        fit = fit_scaling_exponents(cfg, grid, settings=settings,
                                    fit_fraction=conf["scaling.fraction"])
    except ScalingAbort as exc:
        print(str(exc), file=sys.stderr)
        return 2
    rows = [(float(a), fit.overlaps["m"][i], fit.overlaps["q"][i],
             fit.overlaps["V"][i], fit.overlaps["P"][i])
            for i, a in enumerate(fit.alphas)]
    write_csv(os.path.join(outdir, "scaling.csv"), conf, "scaling", t0,
              ("alpha", "m", "q", "V", "P"), rows)
    summary = leading_order_errors(fit.exponents, fit.prefactors, cfg)
    payload = dict(exponents=fit.exponents, prefactors=fit.prefactors,
                   r2=fit.r2, leading_order=summary,
                   r2_flag=bool(min(fit.r2.values()) < 0.99))
    write_json(os.path.join(outdir, "scaling_summary.json"), conf, "scaling",
               t0, payload)
    line_plot(os.path.join(outdir, "scaling.svg"),
              [(k, fit.alphas, fit.overlaps[k]) for k in ("m", "q", "P")],
              title="overlaps vs alpha", xlabel="alpha", ylabel="overlap",
              logx=True)
    return 0


def cmd_simulate(conf, outdir, t0):
    cfg = build_problem(conf)
    settings = build_settings(conf)
    res = solve_fixed_point(cfg, settings)
    if not res.converged:
        print(f"theory solve did not converge (residual {res.residual:.3g})",
              file=sys.stderr)
        return 2
    comp = compare_theory_simulation(cfg, conf["sim.d"], conf["sim.seeds"],
                                     res.overlaps, iters=conf["sim.iters"],
                                     seed0=conf["sim.seed0"])
    h = config_hash(conf)
    rows = [(h, r.seed, r.m, r.q, r.P, r.e_gen, r.e_bnd, r.e_rob)
            for r in comp.rows]
    rows.append((h, "mean", comp.mean["m"], comp.mean["q"], comp.mean["P"],
                 comp.mean["e_gen"], comp.mean["e_bnd"], comp.mean["e_rob"]))
    rows.append((h, "theory", comp.theory["m"], comp.theory["q"],
                 comp.theory["P"], comp.theory["e_gen"], comp.theory["e_bnd"],
                 comp.theory["e_rob"]))
    write_csv(os.path.join(outdir, "simulate.csv"), conf, "simulate", t0,
              ("config_hash", "seed", "m", "q", "P", "e_gen", "e_bnd",
               "e_rob"), rows)
    d = conf["sim.d"]
    write_json(os.path.join(outdir, "simulate_summary.json"), conf, "simulate",
               t0, dict(mean=comp.mean, se=comp.se, theory=comp.theory,
                        agree_3se=comp.agree_3se,
                        eps_finite=finite_eps(cfg, d),
                        eps_theory_from_finite=finite_eps(cfg, d) *
                        d ** (1.0 / cfg.pstar - 0.5)))
    return 0


def cmd_rad_bounds(conf, outdir, t0):
    lam = np.asarray(conf["rad.lambdas"], dtype=float)
    al = np.asarray(conf["rad.alphas"], dtype=float)
    if len(lam) != len(al):
        raise ConfigError("rad.lambdas and rad.alphas must match in length")
    n, eps = conf["rad.n"], conf["rad.eps"]
    payload = dict(
        generic=rad_bound_generic(conf["rad.max_dual_x"], conf["rad.W"],
                                  conf["rad.sigma"], n, eps,
                                  conf["rad.sup_dual_w"]),
        l2_mahalanobis=rad_bound_l2_maha(conf["rad.max_x2"], conf["rad.W2"], n,
                                         eps, conf["rad.lambda_min"]),
        commuting=rad_bound_commuting(conf["rad.max_x2"], conf["rad.W2"], n,
                                      eps, lam * al),
        lp=rad_bound_lp(conf["rad.rad_clean"], eps, conf["rad.d"], conf["p"],
                        conf["r"], n))
    write_json(os.path.join(outdir, "rad_bounds.json"), conf, "rad-bounds", t0,
               payload)
    return 0


_DISPATCH = {
    "solve": cmd_solve, "alpha-sweep": cmd_alpha_sweep, "r-sweep": cmd_r_sweep,
    "phase-diagram": cmd_phase_diagram, "maha-compare": cmd_maha_compare,
    "scaling": cmd_scaling, "simulate": cmd_simulate,
    "rad-bounds": cmd_rad_bounds,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if len(argv) != 3 or argv[0] not in _DISPATCH:
        print(USAGE, file=sys.stderr)
        return 1
    sub, config_path, outdir = argv
    t0 = time.monotonic()
    try:
        conf = load_config(config_path)
        os.makedirs(outdir, exist_ok=True)
        return _DISPATCH[sub](conf, outdir, t0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
