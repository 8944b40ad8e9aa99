"""Damped fixed-point iteration over the eight order parameters, golden-section
hyperparameter tuning, and grid sweeps built on top of single solves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import root

from .channel import hat_update
from .config import ConjugateOverlaps, Overlaps, ProblemConfig, validate_config
from .metrics import error_report
from .prior_lp import nonhat_update_lp
from .prior_maha import nonhat_update_maha

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverSettings:
    damping: float = 0.7
    tol: float = 1e-5
    max_iters: int = 5000
    init: Overlaps = field(default_factory=lambda: Overlaps(0.1, 1.0, 1.0, 1.0))
    loss: str = "logistic"
    nodes: int = 129
    zw_convention: str = "appendix"

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must be in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class SolveResult:
    overlaps: Overlaps
    hats: ConjugateOverlaps
    iterations: int
    residual: float
    converged: bool
    via_root: bool = False


def _sanitize(ov: Overlaps, rho) -> Overlaps:
    """Keep the iterate inside the domain of both update maps."""
    q = max(ov.q, 1e-14)
    V = max(ov.V, 1e-14)
    P = max(ov.P, 0.0)
    m = ov.m
    cap = math.sqrt(rho * q) * (1.0 - 1e-12)
    if abs(m) > cap:
        m = math.copysign(cap, m)
    return Overlaps(m, q, V, P)


def _nonhat(hats, cfg, settings):
    if cfg.geometry == "mahalanobis":
        return nonhat_update_maha(hats, cfg.lam, cfg.measure)
    return nonhat_update_lp(hats, cfg, zw_convention=settings.zw_convention)


def solve_fixed_point(cfg: ProblemConfig, settings: SolverSettings | None = None,
                      init=None, max_picard=None) -> SolveResult:
    """Alternate the hat and non-hat maps with damping until the non-hat
    coordinates move less than the tolerance.

    init may be an Overlaps seed or an (Overlaps, ConjugateOverlaps) warm-start
    pair from a neighbouring solve.  max_picard caps the damped phase (callers
    that already know the map oscillates hand off to the root finish early).
    """
    settings = settings or SolverSettings()
    cfg = validate_config(cfg)
    rho = cfg.rho
    mu = settings.damping

    if isinstance(init, tuple):
        ov, hats = init
        ov = _sanitize(ov, rho)
    else:
        ov = _sanitize(init if init is not None else settings.init, rho)
        hats = hat_update(ov, cfg, loss=settings.loss, nodes=settings.nodes)

    converged = False
    via_root = False
    resid = float("inf")
    best_resid = float("inf")
    since_improve = 0
    it = 0
    n_picard = settings.max_iters if max_picard is None else min(max_picard,
                                                                 settings.max_iters)
    while it < n_picard and not converged:
        it += 1
        hn = hat_update(ov, cfg, loss=settings.loss, nodes=settings.nodes)
        hats = ConjugateOverlaps(*(mu * hn.asarray() + (1.0 - mu) * hats.asarray()))
        hats.check()
        on = _nonhat(hats, cfg, settings)
        new = Overlaps(*(mu * on.asarray() + (1.0 - mu) * ov.asarray()))
        new = _sanitize(new, rho)
        resid = _rel_resid(new.asarray(), ov.asarray())
        ov = new
        if resid <= settings.tol:
            converged = True
            break
        # stall detection: some couplings make plain damped iteration orbit the
        # solution; hand those off to a quasi-Newton finish instead of spinning
        if resid < 0.5 * best_resid:
            best_resid = resid
            since_improve = 0
        else:
            since_improve += 1
        if since_improve >= 150 or it == n_picard:
            ov2, ok = _root_finish(ov, cfg, settings, rho)
            if ok:
                ov = ov2
                converged = True
                via_root = True
            else:
                # transient was a bad launch point; orbit some more, retry
                best_resid = resid
                since_improve = 0

    # re-evaluate both maps once to report the true equation residual
    hfix = hat_update(ov, cfg, loss=settings.loss, nodes=settings.nodes)
    ofix = _nonhat(hfix, cfg, settings)
    if converged:
        hats = hfix
    eq_resid = max(_rel_resid(hfix.asarray(), hats.asarray()),
                   _rel_resid(ofix.asarray(), ov.asarray()))
    return SolveResult(ov, hats, it, eq_resid if converged else resid, converged,
                       via_root)


def _rel_resid(new, old):
    """Per-coordinate movement relative to scale max(1, |x|); the V coordinate
    can legitimately sit at O(1e3) in the weak-regularization regime."""
    return float(np.max(np.abs(new - old) / np.maximum(1.0, np.abs(old))))


def _root_finish(ov: Overlaps, cfg, settings, rho):
    """Solve the composed non-hat self-consistency G(x) = x with a hybrid
    Powell method, starting from the damped iterate."""

    def residual(x):
        cur = _sanitize(Overlaps(*x), rho)
        hats = hat_update(cur, cfg, loss=settings.loss, nodes=settings.nodes)
        nxt = _nonhat(hats, cfg, settings)
        return nxt.asarray() - cur.asarray()

    try:
        sol = root(residual, ov.asarray(), method="hybr", options=dict(xtol=1e-12))
    except (ValueError, FloatingPointError):
        return ov, False
    if not np.all(np.isfinite(sol.x)):
        return ov, False
    # trust the verified residual, not the optimizer's progress heuristic (it
    # trips on quadrature noise after it has already landed on the solution)
    fixed = _sanitize(Overlaps(*sol.x), rho)
    x = fixed.asarray()
    ok = _rel_resid(x + residual(x), x) <= settings.tol
    return fixed, ok


def _objective_value(result, cfg, objective):
    rep = error_report(result.overlaps, cfg)
    return {"e_rob": rep.e_rob, "e_gen": rep.e_gen}[objective]


def tune_lambda(cfg: ProblemConfig, objective="e_rob", bracket=(1e-6, 1e2),
                settings: SolverSettings | None = None, log_tol=1e-3,
                return_state=False):
    """Golden-section search on log(lambda); inner solves are warm-started from
    the previous converged state.  Non-convergent points score +inf."""
    settings = settings or SolverSettings()
    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    state = {"warm": None, "best": None, "stalled": False}

    def f(t):
        c = cfg.with_(lam=math.exp(t))
        cap = 40 if state["stalled"] else None
        try:
            res = solve_fixed_point(c, settings, init=state["warm"], max_picard=cap)
        except (ValueError, FloatingPointError):
            return float("inf")
        if not res.converged:
            return float("inf")
        state["warm"] = (res.overlaps, res.hats)
        state["stalled"] = res.via_root
        val = _objective_value(res, c, objective)
        if state["best"] is None or val < state["best"][1]:
            state["best"] = (math.exp(t), val, res)
        return val

    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > log_tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
    if state["best"] is None:
        raise ValueError("no lambda in the bracket produced a converged solve")
    lam_star, val, res = state["best"]
    if return_state:
        return lam_star, val, res
    return lam_star, val


def _tune_warm(cfg, bracket, settings, lam_prev, halfwidth=3.0):
    """Tune lambda, narrowing the bracket around a neighbouring optimum when one
    is available; falls back to the full bracket if the optimum drifts to the
    narrowed bracket's edge."""
    if lam_prev is None:
        return tune_lambda(cfg, bracket=bracket, settings=settings, return_state=True)
    t = math.log(lam_prev)
    lo = max(math.log(bracket[0]), t - halfwidth)
    hi = min(math.log(bracket[1]), t + halfwidth)
    lam, val, res = tune_lambda(cfg, bracket=(math.exp(lo), math.exp(hi)),
                                settings=settings, return_state=True)
    if min(abs(math.log(lam) - lo), abs(hi - math.log(lam))) < 0.05:
        return tune_lambda(cfg, bracket=bracket, settings=settings, return_state=True)
    return lam, val, res


@dataclass(frozen=True)
class SweepPoint:
    r: float
    lam: float
    report: object
    overlaps: Overlaps


@dataclass(frozen=True)
class SweepResult:
    points: list
    r_star: float
    failed: list


def sweep_regularization_order(cfg_base: ProblemConfig, r_grid, tune=True,
                               settings: SolverSettings | None = None,
                               bracket=(1e-6, 1e2)) -> SweepResult:
    """Solve (optionally with tuned lambda) along an ascending grid of penalty
    orders; r_star is the grid argmin of e_rob, smallest r on ties."""
    settings = settings or SolverSettings()
    r_grid = list(r_grid)
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r grid must be sorted ascending")
    points, failed = [], []
    warm = None
    lam_prev = None
    for r in r_grid:
        cfg = cfg_base.with_(norms=replace(cfg_base.norms, r=float(r)))
        try:
            if tune:
                lam, _, res = _tune_warm(cfg, bracket, settings, lam_prev)
                lam_prev = lam
                cfg = cfg.with_(lam=lam)
            else:
                lam = cfg.lam
                res = solve_fixed_point(cfg, settings, init=warm)
                if not res.converged:
                    raise ValueError("solver did not converge")
        except ValueError as exc:
            failed.append((r, str(exc)))
            continue
        warm = (res.overlaps, res.hats)
        points.append(SweepPoint(float(r), lam, error_report(res.overlaps, cfg),
                                 res.overlaps))
    if not points:
        raise ValueError("every grid point failed")
    best = min(points, key=lambda pt: (pt.report.e_rob, pt.r))
    return SweepResult(points, best.r, failed)


def phase_diagram(alpha_grid, eps_grid, cfg_base: ProblemConfig, pair=(2.0, 1.0),
                  settings: SolverSettings | None = None, bracket=(1e-6, 1e2)):
    """Matrix of tuned e_rob(rA) - e_rob(rB) over an (alpha, eps) grid.

    Failed cells are NaN; returns (matrix, n_failed)."""
    settings = settings or SolverSettings()
    rA, rB = pair
    out = np.full((len(alpha_grid), len(eps_grid)), np.nan)
    n_failed = 0
    lam_prev = {rA: None, rB: None}
    for i, alpha in enumerate(alpha_grid):
        for j, eps in enumerate(eps_grid):
            vals = []
            for r in (rA, rB):
                cfg = cfg_base.with_(alpha=float(alpha), eps=float(eps),
                                     norms=replace(cfg_base.norms, r=float(r)))
                try:
                    lam, val, _ = _tune_warm(cfg, bracket, settings, lam_prev[r])
                    lam_prev[r] = lam
                    vals.append(val)
                except ValueError:
                    lam_prev[r] = None
                    vals.append(float("nan"))
            out[i, j] = vals[0] - vals[1]
            if math.isnan(out[i, j]):
                n_failed += 1
    return out, n_failed
