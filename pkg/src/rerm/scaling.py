"""Low sample-complexity diagnostics: power-law exponent fits of the overlaps
on a geometric alpha grid and the induced leading-order error behaviour."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ProblemConfig
from .solver import SolverSettings, solve_fixed_point


@dataclass(frozen=True)
class ScalingFit:
    alphas: np.ndarray
    overlaps: dict          # name -> array over the grid
    exponents: dict         # name -> fitted slope on the small-alpha half
    prefactors: dict        # name -> exp(intercept)
    r2: dict
    fit_mask: np.ndarray


class ScalingAbort(ValueError):
    """Raised when a grid point fails to converge; carries partial results."""

    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


def fit_scaling_exponents(cfg_base: ProblemConfig, alpha_grid,
                          settings: SolverSettings | None = None,
                          fit_fraction=0.5) -> ScalingFit:
    """Solve along a geometric alpha grid (warm-started downward in alpha) and
    fit log-log slopes of (m, q, V, P) on the small-alpha part of the grid."""
    settings = settings or SolverSettings()
    alphas = np.sort(np.asarray(alpha_grid, dtype=float))
    if len(alphas) < 8:
        raise ValueError("need at least 8 grid points")
    names = ("m", "q", "V", "P")
    vals = {k: [] for k in names}
    warm = None
    for alpha in alphas[::-1]:
        cfg = cfg_base.with_(alpha=float(alpha))
        res = solve_fixed_point(cfg, settings, init=warm)
        if not res.converged:
            partial = {k: np.array(v[::-1]) for k, v in vals.items()}
            raise ScalingAbort(f"solver failed at alpha = {alpha}", partial)
        warm = (res.overlaps, res.hats)
        for k in names:
            vals[k].append(getattr(res.overlaps, k if k != "m" else "m"))
    overlaps = {k: np.array(v[::-1]) for k, v in vals.items()}

    n_fit = max(2, int(math.ceil(fit_fraction * len(alphas))))
    mask = np.zeros(len(alphas), dtype=bool)
    mask[:n_fit] = True
    la = np.log(alphas[mask])
    exponents, prefactors, r2 = {}, {}, {}
    for k in names:
        v = overlaps[k][mask]
        if np.any(v <= 0):
            raise ValueError(f"nonpositive overlap {k} in the fit region")
        lv = np.log(v)
        slope, intercept = np.polyfit(la, lv, 1)
        pred = slope * la + intercept
        ss_res = float(np.sum((lv - pred) ** 2))
        ss_tot = float(np.sum((lv - lv.mean()) ** 2))
        exponents[k] = float(slope)
        prefactors[k] = float(math.exp(intercept))
        r2[k] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(alphas, overlaps, exponents, prefactors, r2, mask)


def leading_order_errors(exponents, prefactors, cfg: ProblemConfig, tol=0.05):
    """Leading small-alpha behaviour of the two error contributions.

    e_gen -> 1/2 - (m0 / (pi sqrt(rho q0))) alpha^(dm - dq/2);
    e_bnd -> (eps P0^(1/pstar) / (sqrt(2 pi) sqrt(q0))) alpha^(dP/pstar - dq/2),
    classified as vanishing / constant / growing by the sign of its exponent.
    """
    rho = cfg.rho
    ps = cfg.pstar
    dm, dq, dP = exponents["m"], exponents["q"], exponents["P"]
    m0, q0, P0 = prefactors["m"], prefactors["q"], prefactors["P"]
    gen_exponent = dm - dq / 2.0
    gen_coeff = m0 / (math.pi * math.sqrt(rho * q0))
    bnd_exponent = dP / ps - dq / 2.0
    bnd_coeff = cfg.eps * P0 ** (1.0 / ps) / (math.sqrt(2.0 * math.pi) * math.sqrt(q0))
    if bnd_exponent > tol:
        regime = "vanishing"
    elif abs(bnd_exponent) <= tol:
        regime = "constant"
    else:
        regime = "growing"
    return dict(gen_exponent=gen_exponent, gen_coeff=gen_coeff,
                bnd_exponent=bnd_exponent, bnd_coeff=bnd_coeff,
                bnd_regime=regime)
