"""Problem configuration and the shared value types of the solver suite.

Everything here is an immutable value object: a problem instance is fully
described by a ProblemConfig, the saddle-point state by an (Overlaps,
ConjugateOverlaps) pair, and a converged solve is summarized by an ErrorReport.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

INF = float("inf")


def dual_exponent(p):
    """Dual exponent pstar with 1/p + 1/pstar = 1.  p = inf gives exactly 1."""
    if p == INF:
        return 1.0
    if p <= 1.0:
        raise ValueError("attack norm requires p in (1, inf]")
    return p / (p - 1.0)


@dataclass(frozen=True)
class NormOrder:
    """Attack norm order p (extended real in (1, inf]) and penalty order r >= 1."""

    p: float
    r: float

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ValueError(f"p must be in (1, inf], got {self.p}")
        if not (self.r >= 1.0):
            raise ValueError(f"r must be >= 1, got {self.r}")

    @property
    def pstar(self):
        return dual_exponent(self.p)


@dataclass(frozen=True)
class ChannelSpec:
    """Label channel: probit with noise std tau, or sign plus Gaussian of variance delta."""

    kind: str  # "probit" | "noisy_sign"
    tau: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("probit", "noisy_sign"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.tau < 0 or self.delta < 0:
            raise ValueError("channel noise parameters must be nonnegative")


@dataclass(frozen=True)
class PriorSpec:
    """Teacher prior: centered gaussian of variance rho, or sparse binary with
    sparsity rho (fraction of exactly-zero weights, the rest +-1)."""

    kind: str  # "gaussian" | "sparse_binary"
    rho: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if not (self.rho > 0):
                raise ValueError("gaussian prior needs variance rho > 0")
        elif self.kind == "sparse_binary":
            if not (0 < self.rho <= 1):
                raise ValueError("sparse_binary prior needs sparsity rho in (0, 1]")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @property
    def variance(self):
        """Second moment of a teacher coordinate (what the error formulas call rho)."""
        if self.kind == "gaussian":
            return self.rho
        return 1.0 - self.rho  # P(w != 0) * 1


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete joint law of (theta_bar_sq, omega, zeta, w) eigenvalue atoms.

    omega: covariate covariance eigenvalue; zeta: perturbation-metric eigenvalue;
    w: penalty-metric eigenvalue; theta_bar_sq: squared projected-teacher atom.
    """

    theta_bar_sq: tuple
    omega: tuple
    zeta: tuple
    w: tuple
    weight: tuple

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, f), dtype=float)
                  for f in ("theta_bar_sq", "omega", "zeta", "w", "weight")]
        k = len(arrays[0])
        if any(len(a) != k for a in arrays):
            raise ValueError("atom arrays must share a length")
        tb, om, ze, w, wt = arrays
        if abs(wt.sum() - 1.0) > 1e-12:
            raise ValueError(f"atom weights must sum to 1, got {wt.sum()}")
        if np.any(om <= 0) or np.any(ze <= 0) or np.any(w <= 0):
            raise ValueError("eigenvalue atoms must be strictly positive")
        if np.any(tb < 0) or np.any(wt < 0):
            raise ValueError("theta_bar_sq and weights must be nonnegative")

    def arrays(self):
        return (np.asarray(self.theta_bar_sq, dtype=float),
                np.asarray(self.omega, dtype=float),
                np.asarray(self.zeta, dtype=float),
                np.asarray(self.w, dtype=float),
                np.asarray(self.weight, dtype=float))

    @property
    def rho(self):
        tb, _, _, _, wt = self.arrays()
        return float(wt @ tb)


def identity_measure(rho=1.0):
    """Single atom with unit eigenvalues; reduces the spectral system to the
    isotropic quadratic one."""
    return SpectralMeasure((rho,), (1.0,), (1.0,), (1.0,), (1.0,))


@dataclass(frozen=True)
class ProblemConfig:
    alpha: float
    eps: float
    lam: float
    norms: NormOrder = field(default_factory=lambda: NormOrder(p=2.0, r=2.0))
    channel: ChannelSpec = field(default_factory=lambda: ChannelSpec("probit", tau=0.0))
    prior: PriorSpec = field(default_factory=lambda: PriorSpec("gaussian", rho=1.0))
    geometry: str = "lp"  # "lp" | "mahalanobis"
    measure: SpectralMeasure | None = None

    @property
    def pstar(self):
        return self.norms.pstar

    @property
    def rho(self):
        """Effective teacher strength entering the channel and the errors."""
        if self.geometry == "mahalanobis":
            return self.measure.rho
        return self.prior.variance

    def with_(self, **kw):
        return validate_config(replace(self, **kw))


def validate_config(cfg: ProblemConfig) -> ProblemConfig:
    """Check every invariant; returns cfg unchanged if valid."""
    if not (cfg.alpha > 0):
        raise ValueError("alpha must be > 0")
    if not (cfg.lam > 0):
        raise ValueError("lam must be > 0 (objective may not attain its infimum otherwise)")
    if cfg.eps < 0:
        raise ValueError("eps must be >= 0")
    if cfg.geometry == "lp":
        if cfg.measure is not None:
            raise ValueError("lp geometry takes no spectral measure")
    elif cfg.geometry == "mahalanobis":
        if cfg.measure is None:
            raise ValueError("mahalanobis geometry requires a spectral measure")
        if cfg.norms.p != 2.0 or cfg.norms.r != 2.0:
            raise ValueError("mahalanobis geometry requires quadratic norms p = r = 2")
        if cfg.prior.kind != "gaussian":
            raise ValueError("mahalanobis geometry supports the gaussian prior only")
    else:
        raise ValueError(f"unknown geometry {cfg.geometry!r}")
    # touch the derived quantity so bad p fails here rather than deep in a sweep
    _ = cfg.pstar
    return cfg


@dataclass(frozen=True)
class Overlaps:
    m: float
    q: float
    V: float
    P: float

    def check(self, rho, tol=1e-8):
        if not (self.q > 0 and self.V > 0 and self.P >= 0):
            raise ValueError(f"invalid overlaps {self}")
        if self.m ** 2 > rho * self.q * (1.0 + tol):
            raise ValueError(f"Cauchy-Schwarz violated: m^2 = {self.m**2} > rho q = {rho * self.q}")
        return self

    def asarray(self):
        return np.array([self.m, self.q, self.V, self.P])


@dataclass(frozen=True)
class ConjugateOverlaps:
    mhat: float
    qhat: float
    Vhat: float
    Phat: float

    def check(self):
        if not (self.qhat >= 0 and self.Vhat > 0 and self.Phat >= 0):
            raise ValueError(f"invalid conjugate overlaps {self}")
        return self

    def asarray(self):
        return np.array([self.mhat, self.qhat, self.Vhat, self.Phat])


@dataclass(frozen=True)
class ErrorReport:
    e_gen: float
    e_bnd: float
    e_rob: float
    teacher_margin: float

    def __post_init__(self):
        if self.e_rob != self.e_gen + self.e_bnd:
            raise ValueError("e_rob must equal e_gen + e_bnd exactly")
        if not (0.0 <= self.e_gen <= 1.0 and 0.0 <= self.e_bnd <= 1.0):
            raise ValueError(f"errors out of range: {self}")
        if self.e_rob > 1.0 + 1e-10:
            raise ValueError(f"e_rob > 1: {self.e_rob}")
        if self.teacher_margin < 0:
            raise ValueError("teacher margin must be nonnegative")


def lp_norm(v, p):
    """lp norm with the extended-real convention: p = inf is the max norm."""
    v = np.asarray(v, dtype=float)
    if p == INF:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    if p == 1:
        return float(np.sum(np.abs(v)))
    if p == 2:
        return float(np.linalg.norm(v))
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))
