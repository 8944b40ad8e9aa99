"""Channel side of the self-consistent equations.

Partition function Z0 of the label channel, the shifted-loss proximal map f_g,
and the four conjugate (hat) updates.  The adversarial budget only enters here
through the margin shift s = eps * P^{1/pstar} and the Phat prefactor.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, expit

from .config import ChannelSpec, ConjugateOverlaps, Overlaps, ProblemConfig
from .scalar import gauss_hermite_nodes

_SQRT2PI = math.sqrt(2.0 * math.pi)

P_FLOOR = 1e-12  # regularizes the Phat prefactor P^(1/pstar - 1) near cold starts
FD_H = 1e-6


def loss_value(kind, u):
    u = np.asarray(u)  # dtype preserved: float32 callers stay float32
    if kind == "logistic":
        return np.logaddexp(0.0, -u)
    if kind == "hinge":
        return np.maximum(0.0, 1.0 - u)
    raise ValueError(f"unknown loss {kind!r}")


def loss_grad(kind, u):
    u = np.asarray(u)
    if kind == "logistic":
        return -expit(-u)
    if kind == "hinge":
        return -(u < 1.0).astype(u.dtype)
    raise ValueError(f"unknown loss {kind!r}")


def z0(channel: ChannelSpec, y, omega, V):
    """Z0(y, omega, V) = E_z[P_out(y | sqrt(V) z + omega)], closed forms."""
    omega = np.asarray(omega, dtype=float)
    if channel.kind == "probit":
        vt = V + channel.tau ** 2
        if vt == 0.0:
            arg = y * omega
            return np.where(arg > 0, 1.0, np.where(arg < 0, 0.0, 0.5))
        return 0.5 * erfc(-y * omega / math.sqrt(2.0 * vt))
    # sign(z) + gaussian of variance delta, evaluated at the label value y
    np_, nm = _noisy_sign_weights(channel, y)
    if V == 0.0:
        phi = np.where(omega > 0, 1.0, np.where(omega < 0, 0.0, 0.5))
    else:
        phi = 0.5 * erfc(-omega / math.sqrt(2.0 * V))
    return np_ * phi + nm * (1.0 - phi)


def dz0_domega(channel: ChannelSpec, y, omega, V):
    """Analytic d/domega of z0."""
    omega = np.asarray(omega, dtype=float)
    if channel.kind == "probit":
        vt = V + channel.tau ** 2
        if vt <= 0.0:
            raise ValueError("probit dz0 needs V + tau^2 > 0")
        return y * np.exp(-omega ** 2 / (2.0 * vt)) / math.sqrt(2.0 * math.pi * vt)
    np_, nm = _noisy_sign_weights(channel, y)
    if V <= 0.0:
        raise ValueError("noisy_sign dz0 needs V > 0")
    dens = np.exp(-omega ** 2 / (2.0 * V)) / math.sqrt(2.0 * math.pi * V)
    return (np_ - nm) * dens


def _noisy_sign_weights(channel, y):
    d = channel.delta
    if d == 0.0:
        return float(y == 1), float(y == -1)
    c = 1.0 / math.sqrt(2.0 * math.pi * d)
    return (c * math.exp(-((y - 1.0) ** 2) / (2.0 * d)),
            c * math.exp(-((y + 1.0) ** 2) / (2.0 * d)))


def prox_shifted_loss(kind, y, omega, V, shift, iters=60):
    """Vectorized prox of x -> g(y*x - shift) at omega with parameter V.

    Uses the reduction prox(x-space) = y * prox_u(y*omega) where the u-space
    loss is g(u - shift); the u-space prox lives in [omega', omega' + V].
    """
    y = np.asarray(y, dtype=float)
    op = y * np.asarray(omega, dtype=float)  # u-space prox argument
    if kind == "hinge":
        t = 1.0 + shift
        p = np.where(op >= t, op, np.where(op <= t - V, op + V, t))
        return y * p
    if kind != "logistic":
        raise ValueError(f"unknown loss {kind!r}")
    # monotone bisection on G(p) = p - op - V*sigmoid(shift - p), increasing in p
    lo = op.copy()
    hi = op + V
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = mid - op - V * expit(shift - mid)
        take = g > 0
        hi = np.where(take, mid, hi)
        lo = np.where(take, lo, mid)
    return y * 0.5 * (lo + hi)


def f_g(kind, y, omega, V, shift, iters=60):
    """(prox of the shifted loss at omega, minus omega) / V."""
    return (prox_shifted_loss(kind, y, omega, V, shift, iters=iters)
            - np.asarray(omega, dtype=float)) / V


def margin_shift(cfg: ProblemConfig, P):
    """eps * P^{1/pstar}; the Mahalanobis case is the pstar = 2 instance."""
    if cfg.eps == 0.0:
        return 0.0
    return cfg.eps * max(P, 0.0) ** (1.0 / cfg.pstar)


def hat_update(ov: Overlaps, cfg: ProblemConfig, loss="logistic", nodes=129,
               h=FD_H, prox_iters=60):
    """One pass of the four conjugate equations at the current overlaps."""
    m, q, V, P = ov.m, ov.q, ov.V, ov.P
    rho = cfg.rho
    veff = rho - m * m / q
    if veff < -1e-10:
        raise ValueError(f"invalid state: rho - m^2/q = {veff}")
    veff = max(veff, 0.0)

    xi, wts = gauss_hermite_nodes(nodes)
    omega_g = math.sqrt(q) * xi
    omega_0 = (m / math.sqrt(q)) * xi
    shift = margin_shift(cfg, P)

    mhat = qhat = vhat = pterm = 0.0
    for y in (1.0, -1.0):
        z0v = z0(cfg.channel, y, omega_0, veff)
        dz0v = dz0_domega(cfg.channel, y, omega_0, veff)
        # one vectorized prox pass for the value and the two FD stencil points
        stack = np.concatenate([omega_g, omega_g + h, omega_g - h])
        fg = f_g(loss, y, stack, V, shift, iters=prox_iters)
        fg0, fgp, fgm = np.split(fg, 3)
        dfg = (fgp - fgm) / (2.0 * h)
        mhat += float(wts @ (dz0v * fg0))
        qhat += float(wts @ (z0v * fg0 * fg0))
        vhat -= float(wts @ (z0v * dfg))
        pterm += float(wts @ (z0v * y * fg0))

    alpha = cfg.alpha
    if cfg.eps == 0.0:
        phat = 0.0
    else:
        pstar = cfg.pstar
        pref = cfg.eps * alpha / pstar * max(P, P_FLOOR) ** (1.0 / pstar - 1.0)
        phat = pref * pterm
    return ConjugateOverlaps(alpha * mhat, alpha * qhat, alpha * vhat, phat)
