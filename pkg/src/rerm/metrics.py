"""Limiting error metrics from converged overlaps, plus the distribution-
agnostic Rademacher complexity bounds for adversarially perturbed linear
classes."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .config import ErrorReport, Overlaps, ProblemConfig
from .scalar import adaptive_integral

_SQRT2PI = math.sqrt(2.0 * math.pi)
ARCCOS_CLAMP = 1e-9


def e_gen(m, q, rho, tau):
    """Standard generalization error arccos(m / sqrt((rho + tau^2) q)) / pi."""
    if q <= 0:
        raise ValueError("q must be positive")
    arg = m / math.sqrt((rho + tau * tau) * q)
    if abs(arg) > 1.0 + ARCCOS_CLAMP:
        raise ValueError(f"alignment cosine out of range: {arg}")
    return math.acos(min(1.0, max(-1.0, arg))) / math.pi


def e_bnd(m, q, P, rho, tau, eps, pstar, tol=1e-10):
    """Boundary error: probability a correctly classified point sits within the
    worst-case margin shift of the decision boundary."""
    if q <= 0:
        raise ValueError("q must be positive")
    if eps == 0.0 or P == 0.0:
        return 0.0
    var = rho + tau * tau - m * m / q
    if var < -1e-10:
        raise ValueError(f"negative residual variance {var}")
    var = max(var, 1e-300)
    upper = eps * P ** (1.0 / pstar) / math.sqrt(q)
    a = (m / math.sqrt(q)) / math.sqrt(2.0 * var)

    def integrand(nu):
        return erfc(-a * nu) * math.exp(-0.5 * nu * nu) / _SQRT2PI

    return adaptive_integral(integrand, 0.0, upper, tol=tol)


def teacher_margin(rho, tau):
    return math.sqrt(2.0 / math.pi) * math.sqrt(rho) / math.sqrt(1.0 + tau * tau / rho)


def error_report(ov: Overlaps, cfg: ProblemConfig) -> ErrorReport:
    rho = cfg.rho
    tau = cfg.channel.tau if cfg.channel.kind == "probit" else 0.0
    eg = e_gen(ov.m, ov.q, rho, tau)
    eb = e_bnd(ov.m, ov.q, ov.P, rho, tau, cfg.eps, cfg.pstar)
    return ErrorReport(eg, eb, eg + eb, teacher_margin(rho, tau))


# ---------------------------------------------------------------------------
# Rademacher complexity bounds for the eps-perturbed linear class
# ---------------------------------------------------------------------------

def rad_bound_generic(max_dual_x, W, sigma_sc, n, eps, sup_dual_w):
    """max_i ||x_i||_* W sqrt(2/(sigma n)) + (eps / 2 sqrt(n)) sup ||w||_*."""
    return max_dual_x * W * math.sqrt(2.0 / (sigma_sc * n)) \
        + eps / (2.0 * math.sqrt(n)) * sup_dual_w


def rad_bound_l2_maha(max_x2, W2, n, eps, lambda_min_sigma_delta):
    """l2-ball class under a Mahalanobis perturbation metric."""
    if lambda_min_sigma_delta <= 0:
        raise ValueError("lambda_min must be positive")
    return max_x2 * W2 / math.sqrt(n) \
        + eps * W2 / (2.0 * math.sqrt(n)) * math.sqrt(1.0 / lambda_min_sigma_delta)


def rad_bound_commuting(max_x_Ainv, WA, n, eps, lambda_alpha_products):
    """Commuting-metrics bound: perturbation metric eigenvalues lambda_i,
    penalty metric eigenvalues alpha_i, supplied as their products."""
    prods = np.asarray(lambda_alpha_products, dtype=float)
    if np.any(prods <= 0):
        raise ValueError("eigenvalue products must be positive")
    return WA * max_x_Ainv / math.sqrt(n) \
        + eps * WA / (2.0 * math.sqrt(n)) * math.sqrt(float(np.max(1.0 / prods)))


def rad_bound_commuting_witness(v, lambda_i, alpha_i):
    """Direction achieving the perturbation term of the commuting bound:
    w = v_j / sqrt(alpha_j) for the index maximizing 1/(lambda_i alpha_i).

    Returns (w, attained_dual_seminorm) where the seminorm is
    sqrt(w^T Sigma_delta^{-1} w) for Sigma_delta = sum lambda_i v_i v_i^T.
    """
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lambda_i, dtype=float)
    al = np.asarray(alpha_i, dtype=float)
    j = int(np.argmax(1.0 / (lam * al)))
    w = v[j] / math.sqrt(al[j])
    attained = math.sqrt(1.0 / (lam[j] * al[j]))
    return w, attained


def rad_bound_lp(rad_clean, eps, d, p, r_norm, n):
    """Perturbed-class bound for an lp attack on an lr-ball hypothesis class:
    rad_clean + eps * max(d^{1 - 1/r - 1/p}, 1) / (2 sqrt(n))."""
    if p == float("inf"):
        expo = 1.0 - 1.0 / r_norm
    else:
        expo = 1.0 - 1.0 / r_norm - 1.0 / p
    return rad_clean + eps * max(d ** expo, 1.0) / (2.0 * math.sqrt(n))
