"""Prior side of the self-consistent equations for separable (lp) penalties.

Z_w is the tilted partition function of the teacher prior; f_w is the proximal
map of the composite penalty lam|.|^r + Phat|.|^pstar.  For the gaussian prior
the tilt Z_w * N(0,1) is again a gaussian, so the expectations are evaluated by
an exact change of variables rather than by multiplying Z_w into the quadrature
weights (which loses accuracy at strong alignment).
"""

from __future__ import annotations

import math

import numpy as np

from .config import ConjugateOverlaps, Overlaps, PriorSpec, ProblemConfig


def zw(prior: PriorSpec, gamma, Lambda):
    """Z_w(gamma, Lambda) = E_w[exp(-Lambda w^2/2 + gamma w)] and its
    gamma-derivative, closed forms."""
    gamma = np.asarray(gamma, dtype=float)
    if prior.kind == "gaussian":
        rho = prior.rho
        denom = rho * Lambda + 1.0
        if denom <= 0.0:
            raise ValueError("gaussian Z_w requires rho*Lambda + 1 > 0")
        z = np.exp(rho * gamma ** 2 / (2.0 * denom)) / math.sqrt(denom)
        dz = rho * gamma / denom * z
        return z, dz
    # sparse binary: mass rho at zero, (1-rho)/2 at each of +-1
    rho = prior.rho
    z = rho + math.exp(-Lambda / 2.0) * (1.0 - rho) * np.cosh(gamma)
    dz = math.exp(-Lambda / 2.0) * (1.0 - rho) * np.sinh(gamma)
    return z, dz


def f_w(gamma, phat, lam, Lambda, r, pstar, iters=60):
    """Minimizer of lam|z|^r + phat|z|^pstar + Lambda z^2/2 - gamma z.

    The optimality condition in t = |z| is strictly increasing, so a plain
    bisection on [0, |gamma|/Lambda] is exact and vectorizes over gamma.
    """
    if Lambda <= 0.0:
        raise ValueError("f_w requires Lambda > 0")
    gamma = np.asarray(gamma, dtype=float)
    a = np.abs(gamma)
    # subgradient threshold at the origin (only r = 1 / pstar = 1 contribute a kink)
    thr = lam * (r == 1.0) + phat * (pstar == 1.0)
    active = a > thr
    lo = np.zeros_like(a)
    hi = a / Lambda
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        psi = lam * r * mid ** (r - 1.0) + phat * pstar * mid ** (pstar - 1.0) \
            + Lambda * mid - a
        take = psi > 0
        hi = np.where(take, mid, hi)
        lo = np.where(take, lo, mid)
    t = np.where(active, 0.5 * (lo + hi), 0.0)
    return np.sign(gamma) * t


def dfw_dgamma(fw, phat, lam, Lambda, r, pstar):
    """Exact d f_w / d gamma by the implicit function theorem: 1/psi'(t) at
    t = |f_w| > 0, zero on the inactive set."""
    t = np.abs(np.asarray(fw, dtype=float))
    active = t > 0.0
    ts = np.where(active, t, 1.0)  # placeholder off the active set
    curv = Lambda
    if r != 1.0:
        curv = curv + lam * r * (r - 1.0) * ts ** (r - 2.0)
    if pstar != 1.0:
        curv = curv + phat * pstar * (pstar - 1.0) * ts ** (pstar - 2.0)
    return np.where(active, 1.0 / curv, 0.0)


_GL_CACHE = {}


def _gauss_legendre(n):
    if n not in _GL_CACHE:
        from scipy.special import roots_legendre
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _half_line_nodes(u0, n_per_panel=64):
    """Quadrature for 2 * int_{u0}^{inf} h(u) phi(u) du with h smooth on the
    domain: Gauss-Legendre panels starting at u0 (the prior-side integrands
    have a kink exactly there when the composite penalty has an l1 part)."""
    x, w = _gauss_legendre(n_per_panel)
    edges = u0 + np.array([0.0, 2.0, 5.0, 13.0])
    us, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        u = a + half * (x + 1.0)
        us.append(u)
        ws.append(2.0 * half * w * np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi))
    return np.concatenate(us), np.concatenate(ws)


def _zw_args(hats: ConjugateOverlaps, convention):
    """Coefficient c and tilt Lambda such that Z_w is taken at (c*xi, Lambda)."""
    if hats.qhat <= 0.0:
        raise ValueError("nonhat update requires qhat > 0")
    if convention == "appendix":
        etah = hats.mhat ** 2 / hats.qhat
        return math.sqrt(etah), etah
    if convention == "main":
        c = hats.mhat / math.sqrt(hats.qhat)
        return c, c
    raise ValueError(f"unknown zw convention {convention!r}")


def nonhat_update_lp(hats: ConjugateOverlaps, cfg: ProblemConfig,
                     fw_iters=60, zw_convention="appendix") -> Overlaps:
    """One pass of the four non-hat equations for the lp geometry."""
    lam, r, pstar = cfg.lam, cfg.norms.r, cfg.pstar
    mhat, qhat, Vhat, Phat = hats.mhat, hats.qhat, hats.Vhat, hats.Phat
    if Vhat <= 0.0:
        raise ValueError("nonhat update requires Vhat > 0")
    c, Lw = _zw_args(hats, zw_convention)
    sq = math.sqrt(qhat)
    thr = lam * (r == 1.0) + Phat * (pstar == 1.0)  # f_w inactive below this

    # every integrand is even in xi and vanishes identically below the
    # activation kink of f_w, so integrate the active half-line only with
    # panels starting exactly at the kink (interior kinks wreck Gauss-Hermite)
    if cfg.prior.kind == "gaussian":
        rho = cfg.prior.rho
        denom = rho * Lw + 1.0
        if denom <= 0.0:
            raise ValueError("gaussian tilt not integrable: rho*Lambda + 1 <= 0")
        s = math.sqrt(denom)  # exact tilt: Z_w * phi is again gaussian
        u0 = thr / (sq * s)
        u, wz = _half_line_nodes(u0)
        gam = sq * s * u
        ratio = rho * c * u / s  # dZw/Zw evaluated along the substitution
    else:
        u0 = thr / sq
        u, wphi = _half_line_nodes(u0)
        gam = sq * u
        zvals, dz = zw(cfg.prior, c * u, Lw)
        ratio = dz / zvals
        wz = wphi * zvals

    fw0 = f_w(gam, Phat, lam, Vhat, r, pstar, iters=fw_iters)
    dfw = dfw_dgamma(fw0, Phat, lam, Vhat, r, pstar)
    m = float(wz @ (ratio * fw0))
    q = float(wz @ (fw0 * fw0))
    V = float(wz @ dfw)
    P = float(wz @ np.abs(fw0) ** pstar)
    return Overlaps(m, q, V, P)
