"""Prior-side updates for Mahalanobis perturbation/regularization geometry.

With quadratic penalty lam * w^T Sigma_w w and perturbation metric Sigma_delta,
the non-hat equations are rational expectations over the joint spectral measure
of the (simultaneously diagonalizable) covariances, evaluated exactly as
weighted sums over its atoms.  Per-atom denominators carry the factors of two
from differentiating both quadratic forms: D = 2 lam w + Vhat omega + 2 Phat zeta.
"""

from __future__ import annotations

import numpy as np

from .config import ConjugateOverlaps, Overlaps, SpectralMeasure


def nonhat_update_maha(hats: ConjugateOverlaps, lam, measure: SpectralMeasure) -> Overlaps:
    tb, om, ze, w, wt = measure.arrays()
    mhat, qhat, Vhat, Phat = hats.mhat, hats.qhat, hats.Vhat, hats.Phat
    D = 2.0 * lam * w + Vhat * om + 2.0 * Phat * ze
    if np.any(D <= 0.0):
        raise ValueError("nonpositive atom denominator in Mahalanobis update")
    D2 = D * D
    m = float(wt @ (mhat * tb / D))
    q = float(wt @ ((mhat ** 2 * tb * om + qhat * om ** 2) / D2))
    V = float(wt @ (om / D))
    P = float(wt @ (ze * (mhat ** 2 * tb + qhat * om) / D2))
    return Overlaps(m, q, V, P)


def swfm_measure(phi, omega_blocks, zeta_blocks, theta_blocks, w_blocks) -> SpectralMeasure:
    """Block-structured (strong/weak feature) spectral measure.

    Each covariance is block-diagonal with scalar blocks; every matrix is
    trace-normalized to mean eigenvalue 1 before the atoms are formed.  The
    squared projected-teacher atom is omega^2 * theta of the normalized blocks.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or np.any(phi <= 0) or abs(phi.sum() - 1.0) > 1e-12:
        raise ValueError("block fractions must be positive and sum to 1")

    def norm(blocks):
        b = np.asarray(blocks, dtype=float)
        if b.shape != phi.shape:
            raise ValueError("block value lists must match the fraction list")
        if np.any(b <= 0):
            raise ValueError("block values must be positive")
        return b / float(phi @ b)

    om = norm(omega_blocks)
    ze = norm(zeta_blocks)
    th = norm(theta_blocks)
    w = norm(w_blocks)
    tb = om ** 2 * th
    return SpectralMeasure(tuple(tb), tuple(om), tuple(ze), tuple(w), tuple(phi))
