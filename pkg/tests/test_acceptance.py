"""End-to-end acceptance suite.  Each test prints a single PASS/FAIL line on
the live terminal (bypassing capture) and enforces the stated tolerances."""

import json
import math
import time

import numpy as np

from rerm.channel import hat_update, prox_shifted_loss
from rerm.cli import main as cli_main
from rerm.config import (INF, ChannelSpec, ConjugateOverlaps, NormOrder,
                         Overlaps, PriorSpec, ProblemConfig, SpectralMeasure,
                         identity_measure)
from rerm.metrics import (error_report, rad_bound_commuting,
                          rad_bound_commuting_witness, rad_bound_generic,
                          rad_bound_l2_maha, rad_bound_lp)
from rerm.prior_lp import nonhat_update_lp
from rerm.scalar import ScalarFunction, moreau, moreau_grad, prox
from rerm.scaling import fit_scaling_exponents, leading_order_errors
from rerm.simulator import compare_theory_simulation
from rerm.solver import (SolverSettings, phase_diagram, solve_fixed_point,
                         sweep_regularization_order, tune_lambda)

from mc_oracles import mc_hat_estimates, mc_nonhat_estimates


def _report(capsys, label, failures, t0):
    status = "PASS" if not failures else "FAIL"
    with capsys.disabled():
        print(f"[acceptance] {label}: {status} ({time.monotonic() - t0:.1f}s)")
    assert not failures, "; ".join(failures)


def _random_convex(rng):
    kind = rng.integers(0, 3)
    if kind == 0:
        lam, r = rng.uniform(0.1, 2.0), rng.choice([1.0, 1.5, 2.0, 3.0])
        return ScalarFunction(lambda x, lam=lam, r=r: lam * abs(x) ** r)
    if kind == 1:
        y, s = rng.choice([-1.0, 1.0]), rng.uniform(0.0, 2.0)
        return ScalarFunction(
            lambda x, y=y, s=s: float(np.logaddexp(0.0, -(y * x - s))))
    y, s = rng.choice([-1.0, 1.0]), rng.uniform(0.0, 2.0)
    return ScalarFunction(lambda x, y=y, s=s: max(0.0, 1.0 - (y * x - s)))


def test_c01_identities_and_reductions(capsys):
    t0 = time.monotonic()
    failures = []
    cfg = ProblemConfig(alpha=1.0, eps=0.2, lam=0.05,
                        norms=NormOrder(p=2.0, r=2.0))
    res = solve_fixed_point(cfg)
    rep = error_report(res.overlaps, cfg)
    if rep.e_rob != rep.e_gen + rep.e_bnd:
        failures.append("e_rob != e_gen + e_bnd")
    # eps = 0 decouples the perturbation entirely
    res0 = solve_fixed_point(cfg.with_(eps=0.0))
    rep0 = error_report(res0.overlaps, cfg.with_(eps=0.0))
    if res0.hats.Phat != 0.0:
        failures.append(f"Phat = {res0.hats.Phat} at eps = 0")
    if rep0.e_bnd != 0.0:
        failures.append(f"e_bnd = {rep0.e_bnd} at eps = 0")
    # quadratic spectral geometry with a unit atom is the p = r = 2 system
    cfg_m = cfg.with_(geometry="mahalanobis", measure=identity_measure(1.0))
    res_m = solve_fixed_point(cfg_m)
    if not (res.converged and res_m.converged):
        failures.append("a reduction solve did not converge")
    for f in ("m", "q", "V", "P"):
        a, b = getattr(res.overlaps, f), getattr(res_m.overlaps, f)
        if abs(a - b) > 1e-6:
            failures.append(f"identity reduction mismatch on {f}: {a} vs {b}")
    _report(capsys, "01 identities-and-reductions", failures, t0)


def test_c02_scalar_calculus(capsys):
    t0 = time.monotonic()
    failures = []
    rng = np.random.default_rng(0)
    # nonexpansiveness on 1000 random pairs (localization limit of the
    # value-comparison prox adds a sqrt(machine-eps) slack)
    worst = 0.0
    for _ in range(1000):
        f = _random_convex(rng)
        V = rng.uniform(0.1, 5.0)
        a, b = rng.uniform(-5.0, 5.0, size=2)
        worst = max(worst, abs(prox(f, V, a) - prox(f, V, b)) - abs(a - b))
    if worst > 2e-7:
        failures.append(f"nonexpansiveness violated by {worst:.2e}")
    # envelope gradient vs finite differences, 100 instances
    for _ in range(100):
        f = _random_convex(rng)
        V = rng.uniform(0.2, 5.0)
        om = rng.uniform(-5.0, 5.0)
        g = moreau_grad(f, V, om)
        h = 1e-5
        fd = (moreau(f, V, om + h) - moreau(f, V, om - h)) / (2 * h)
        if abs(g - fd) > 1e-5 * max(abs(fd), 1e-3) + 1e-7:
            failures.append(f"envelope gradient off: {g} vs {fd}")
            break
    # shift property at 1e-9 on the bisection-based loss prox: the prox of
    # x -> g(yx - s) at omega is y * (s + prox_g(y omega - s))
    for _ in range(100):
        y = rng.choice([-1.0, 1.0])
        om, V, s = rng.uniform(-5, 5), rng.uniform(0.1, 5.0), rng.uniform(0, 2)
        lhs = prox_shifted_loss("logistic", y, np.array([om]), V, s)[0]
        t = prox_shifted_loss("logistic", 1.0, np.array([y * om - s]), V, 0.0)[0]
        rhs = y * (t + s)
        if abs(lhs - rhs) > 1e-9:
            failures.append(f"shift property off by {abs(lhs - rhs):.2e}")
            break
    # grid-oracle prox agreement, 200 instances
    for _ in range(200):
        f = _random_convex(rng)
        V = rng.uniform(0.1, 5.0)
        om = rng.uniform(-5.0, 5.0)
        x = prox(f, V, om)
        xs = np.arange(om - 20.0, om + 20.0, 1e-4)
        kind = f.evaluator
        obj = (xs - om) ** 2 / (2 * V) + np.array([kind(v) for v in xs])
        xg = xs[int(np.argmin(obj))]
        if abs(x - xg) > 1e-3:
            failures.append(f"grid oracle mismatch: {x} vs {xg}")
            break
    _report(capsys, "02 scalar-calculus", failures, t0)


def test_c03_monte_carlo_oracle(capsys):
    t0 = time.monotonic()
    failures = []
    rng = np.random.default_rng(1)
    n = 10 ** 7
    # ten random channel-side states
    for k in range(10):
        p = rng.choice([INF, 2.0, 4.0])
        cfg = ProblemConfig(alpha=rng.uniform(0.3, 2.0),
                            eps=rng.choice([0.0, 0.1, 0.3]),
                            lam=0.1, norms=NormOrder(p=float(p), r=2.0),
                            channel=ChannelSpec("probit",
                                                tau=rng.uniform(0.0, 0.8)))
        q = rng.uniform(0.5, 4.0)
        ov = Overlaps(rng.uniform(-0.9, 0.9) * math.sqrt(q), q,
                      rng.uniform(0.2, 3.0), rng.uniform(0.1, 3.0))
        got = hat_update(ov, cfg).asarray()
        est, se = mc_hat_estimates(ov, cfg, n=n, seed=100 + k,
                                   chunk=2 * 10 ** 6, prox_iters=30)
        bad = np.abs(got - est) > 3.0 * se + 1e-10
        if np.any(bad):
            failures.append(f"hat state {k}: off by "
                            f"{np.max(np.abs(got - est) / (se + 1e-300)):.1f} SE")
    # ten random prior-side states
    for k in range(10):
        prior = (PriorSpec("gaussian", rho=rng.uniform(0.5, 1.5))
                 if k % 2 == 0 else
                 PriorSpec("sparse_binary", rho=rng.uniform(0.2, 0.6)))
        cfg = ProblemConfig(alpha=1.0, eps=0.2,
                            lam=rng.uniform(0.05, 0.5),
                            norms=NormOrder(p=float(rng.choice([INF, 2.0])),
                                            r=float(rng.choice([1.0, 1.5, 2.0, 3.0]))),
                            prior=prior)
        hats = ConjugateOverlaps(rng.uniform(0.1, 1.5), rng.uniform(0.2, 2.0),
                                 rng.uniform(0.3, 2.0), rng.uniform(0.0, 1.0))
        got = nonhat_update_lp(hats, cfg).asarray()
        est, se = mc_nonhat_estimates(hats, cfg, n=n, seed=200 + k)
        bad = np.abs(got - est) > 3.0 * se + 1e-10
        if np.any(bad):
            failures.append(f"nonhat state {k}: off by "
                            f"{np.max(np.abs(got - est) / (se + 1e-300)):.1f} SE")
    _report(capsys, "03 monte-carlo-oracle", failures, t0)


def test_c04_theory_vs_simulation(capsys):
    t0 = time.monotonic()
    failures = []
    base = ProblemConfig(alpha=1.0, eps=0.2, lam=1e-2,
                         norms=NormOrder(p=INF, r=2.0))
    for r in (1.0, 2.0):
        for alpha in (0.5, 1.0, 2.0):
            cfg = base.with_(alpha=alpha, norms=NormOrder(p=INF, r=r))
            lam, _, res = tune_lambda(cfg, return_state=True)
            cfg = cfg.with_(lam=lam)
            comp = compare_theory_simulation(cfg, d=1000, n_seeds=10,
                                             theory_overlaps=res.overlaps)
            for f in ("e_gen", "e_bnd", "e_rob"):
                if not comp.agree_3se[f]:
                    gap = abs(comp.theory[f] - comp.mean[f]) / comp.se[f]
                    failures.append(
                        f"r={r} alpha={alpha} {f}: {gap:.1f} SE off "
                        f"(theory {comp.theory[f]:.4f}, "
                        f"sim {comp.mean[f]:.4f} +- {comp.se[f]:.4f})")
    _report(capsys, "04 theory-vs-simulation", failures, t0)


def test_c05_penalty_order_transition(capsys):
    t0 = time.monotonic()
    failures = []
    base = ProblemConfig(alpha=1.0, eps=0.0, lam=1e-2,
                         norms=NormOrder(p=INF, r=2.0))
    grid = np.linspace(1.0, 3.0, 50)
    r_stars = []
    for eps in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8):
        sweep = sweep_regularization_order(base.with_(eps=eps), grid)
        if sweep.failed:
            failures.append(f"eps={eps}: {len(sweep.failed)} grid points failed")
        r_stars.append(sweep.r_star)
    if not (1.9 <= r_stars[0] <= 2.1):
        failures.append(f"r_star(0) = {r_stars[0]}")
    if any(b > a + 1e-12 for a, b in zip(r_stars, r_stars[1:])):
        failures.append(f"r_star not nonincreasing: {r_stars}")
    if not r_stars[-1] <= 1.2:
        failures.append(f"r_star(0.8) = {r_stars[-1]}")
    _report(capsys, "05 penalty-order-transition", failures, t0)


def test_c06_phase_diagram_sign_structure(capsys):
    t0 = time.monotonic()
    failures = []
    base = ProblemConfig(alpha=1.0, eps=0.0, lam=1e-2,
                         norms=NormOrder(p=INF, r=2.0))
    alphas = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
    epss = (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)
    mat, n_failed = phase_diagram(alphas, epss, base, pair=(2.0, 1.0))
    if n_failed:
        failures.append(f"{n_failed} cells failed to converge")
    corner = mat[0, -1]  # min alpha, max eps
    if not corner > 0:
        failures.append(f"corner cell not positive: {corner}")
    edge = mat[:, 0]  # eps = 0 column
    if not np.all(edge <= 1e-9):
        failures.append(f"eps = 0 edge not <= 0: {edge}")
    _report(capsys, "06 phase-diagram-sign-structure", failures, t0)


def test_c07_spectral_dual_penalty_dominance(capsys):
    t0 = time.monotonic()
    failures = []
    cases = (("matched", (1.0, 2.5)), ("identity", (1.0, 1.0)),
             ("dual", (2.5, 1.0)))
    # the table specifies the attack-ball metric; the measure's zeta is the
    # shift (dual-norm) metric, i.e. the inverse of the trace-normalized table
    # column (not re-normalized), so the three penalty cases keep their labels
    phi = np.array([0.5, 0.5])
    zeta = tuple(1.0 / (np.array([1.0, 2.5]) / (phi @ [1.0, 2.5])))
    for eps in (0.2, 0.4):
        theory, sims = {}, {}
        for name, w_blocks in cases:
            wb = np.array(w_blocks, dtype=float)
            meas = SpectralMeasure((1.0, 1.0), (1.0, 1.0), zeta,
                                   tuple(wb / (phi @ wb)), tuple(phi))
            cfg = ProblemConfig(alpha=0.25, eps=eps, lam=1e-2,
                                norms=NormOrder(p=2.0, r=2.0),
                                geometry="mahalanobis", measure=meas)
            lam, val, res = tune_lambda(cfg, return_state=True)
            theory[name] = val
            # shared seeds across the three penalty metrics: the datasets are
            # identical, so the mean ordering is a paired comparison
            comp = compare_theory_simulation(cfg.with_(lam=lam), d=1000,
                                             n_seeds=10,
                                             theory_overlaps=res.overlaps)
            sims[name] = comp.mean["e_rob"]
        if not (theory["dual"] < theory["identity"]
                and theory["dual"] < theory["matched"]):
            failures.append(f"eps={eps}: theory ordering {theory}")
        if not (sims["dual"] < sims["identity"]
                and sims["dual"] < sims["matched"]):
            failures.append(f"eps={eps}: simulation ordering {sims}")
    _report(capsys, "07 spectral-dual-penalty-dominance", failures, t0)


def test_c08_low_alpha_scaling(capsys):
    t0 = time.monotonic()
    failures = []
    grid = np.geomspace(1e-4, 1e-2, 8)
    for r, check in ((1.0, "vanishing"), (2.0, "constant")):
        cfg = ProblemConfig(alpha=1.0, eps=0.3, lam=1e-3,
                            norms=NormOrder(p=INF, r=r))
        fit = fit_scaling_exponents(cfg, grid)
        summary = leading_order_errors(fit.exponents, fit.prefactors, cfg)
        expo = summary["bnd_exponent"]
        if check == "vanishing":
            if not expo >= 0.05:
                failures.append(f"r=1 boundary exponent {expo:.3f} < 0.05")
            # the boundary error itself must drop by more than 5x over the grid
            ebs = {}
            for a in (1e-4, 1e-2):
                i = int(np.argmin(np.abs(fit.alphas - a)))
                ov = Overlaps(*(fit.overlaps[k][i] for k in ("m", "q", "V", "P")))
                ebs[a] = error_report(ov, cfg.with_(alpha=a)).e_bnd
            if not ebs[1e-4] < ebs[1e-2] / 5.0:
                failures.append(f"r=1 e_bnd(1e-4)={ebs[1e-4]:.3g} not < "
                                f"e_bnd(1e-2)/5={ebs[1e-2] / 5:.3g}")
        else:
            if not abs(expo) <= 0.05:
                failures.append(f"r=2 boundary exponent {expo:.3f} not in "
                                "[-0.05, 0.05]")
    _report(capsys, "08 low-alpha-scaling", failures, t0)


def test_c09_complexity_bounds(capsys):
    t0 = time.monotonic()
    failures = []
    checks = (
        (rad_bound_generic(1.0, 1.0, 1.0, 4, 1.0, 1.0), math.sqrt(0.5) + 0.25),
        (rad_bound_l2_maha(2.0, 1.0, 4, 1.0, 4.0), 1.125),
        (rad_bound_commuting(2.0, 1.0, 4, 1.0, [1.0]), 1.25),
        (rad_bound_lp(0.0, 1.0, 1.0, 2.0, 2.0, 4), 0.25),
    )
    for got, want in checks:
        if got != want:
            failures.append(f"arithmetic example: {got} != {want}")
    # unit penalty eigenvalues collapse the commuting bound onto the l2 one
    a = rad_bound_commuting(1.5, 2.0, 16, 0.7, [1.0, 1.0, 1.0])
    b = rad_bound_l2_maha(1.5, 2.0, 16, 0.7, 1.0)
    if abs(a - b) > 1e-15:
        failures.append(f"commuting/l2 reduction: {a} vs {b}")
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(2, 8))
        lam = rng.uniform(0.2, 3.0, size=k)
        al = rng.uniform(0.2, 3.0, size=k)
        w, attained = rad_bound_commuting_witness(np.eye(k), lam, al)
        want = math.sqrt(float(np.max(1.0 / (lam * al))))
        direct = math.sqrt(float(w @ (w / lam)))  # diagonal Sigma_delta^{-1}
        if abs(attained - want) > 1e-12 or abs(direct - want) > 1e-12:
            failures.append(f"witness off: {attained} vs {want}")
            break
    _report(capsys, "09 complexity-bounds", failures, t0)


def test_c10_determinism(capsys, tmp_path):
    t0 = time.monotonic()
    failures = []
    # repeated fixed-point solves are bit-identical
    cfg = ProblemConfig(alpha=1.0, eps=0.2, lam=0.05,
                        norms=NormOrder(p=INF, r=2.0))
    a, b = solve_fixed_point(cfg), solve_fixed_point(cfg)
    if not np.array_equal(a.overlaps.asarray(), b.overlaps.asarray()):
        failures.append("repeated solves differ")
    # CLI artifacts: identical CSV bodies and JSON payloads across reruns
    conf = tmp_path / "conf.txt"
    conf.write_text("alpha = 1\neps = 0.2\nlambda = 0.05\n"
                    "alphas = 0.5, 1.0\n")
    for sub, artifact in (("solve", "solve.json"),
                          ("alpha-sweep", "alpha_sweep.csv")):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{sub}-{tag}"
            if cli_main([sub, str(conf), str(out)]) != 0:
                failures.append(f"{sub} rerun exited nonzero")
            text = (out / artifact).read_text()
            if artifact.endswith(".json"):
                doc = json.loads(text)
                doc.pop("generated"), doc.pop("wall_time_s")
                outs.append(json.dumps(doc, sort_keys=True))
            else:
                outs.append("".join(ln for ln in text.splitlines(keepends=True)
                                    if not ln.startswith("# generated=")))
        if outs[0] != outs[1]:
            failures.append(f"{sub} artifact bodies differ across reruns")
    _report(capsys, "10 determinism", failures, t0)
