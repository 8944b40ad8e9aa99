"""Scalar convex calculus: proximal operators, Moreau envelopes, quadrature.

The prox here is fully generic (bracketed golden-section on the prox objective);
the hot loops of the saddle-point equations use the specialized vectorized
routines in channel.py / prior_lp.py instead, which are cross-checked against
this one in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

_SQRT2PI = math.sqrt(2.0 * math.pi)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ScalarFunction:
    """A convex scalar function together with a descriptor of its family."""

    evaluator: Callable[[float], float]
    kind: str = "generic"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.evaluator(x)


def logistic_loss():
    return ScalarFunction(lambda x: np.logaddexp(0.0, -x), kind="logistic")


def hinge_loss():
    return ScalarFunction(lambda x: max(0.0, 1.0 - x), kind="hinge")


def power_penalty(lam, r, phat=0.0, pstar=2.0):
    """lam|x|^r + phat|x|^pstar."""
    def f(x):
        a = abs(x)
        return lam * a ** r + phat * a ** pstar
    return ScalarFunction(f, kind="power_penalty",
                          params=dict(lam=lam, r=r, phat=phat, pstar=pstar))


def shifted_loss(loss: ScalarFunction, y, shift):
    """x -> loss(y*x - shift): the per-sample effective loss after the
    worst-case perturbation is absorbed into a margin shift."""
    return ScalarFunction(lambda x: loss(y * x - shift), kind="shifted_" + loss.kind,
                          params=dict(y=y, shift=shift))


def _grow_bracket(obj, omega, max_doublings=60):
    """Expand [omega-1, omega+1] geometrically until the objective increases at
    both ends relative to the midpoint region."""
    h = 1.0
    fo = obj(omega)
    for _ in range(max_doublings):
        lo, hi = omega - h, omega + h
        if obj(lo) >= fo and obj(hi) >= fo:
            return lo, hi
        h *= 2.0
    raise ValueError("bracket growth failed: non-coercive prox objective")


def _golden(obj, lo, hi, tol=1e-10):
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = obj(x1), obj(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = obj(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = obj(x2)
    return 0.5 * (lo + hi)


def prox(f: ScalarFunction, V, omega, tol=1e-10):
    """argmin_x (x - omega)^2 / (2V) + f(x), by bracketed scalar minimization."""
    if not V > 0:
        raise ValueError("V must be positive")
    obj = lambda x: (x - omega) ** 2 / (2.0 * V) + f(x)
    lo, hi = _grow_bracket(obj, omega)
    x = _golden(obj, lo, hi, tol=tol)
    # kinks of |x|^r sit at the origin; golden section can stall one step away
    if lo <= 0.0 <= hi and obj(0.0) < obj(x):
        x = 0.0
    return x


def moreau(f: ScalarFunction, V, omega, tol=1e-10):
    x = prox(f, V, omega, tol=tol)
    return (x - omega) ** 2 / (2.0 * V) + f(x)


def moreau_grad(f: ScalarFunction, V, omega, tol=1e-10):
    return (omega - prox(f, V, omega, tol=tol)) / V


_GH_CACHE = {}


def gauss_hermite_nodes(n=129):
    """Probabilists' Gauss-Hermite nodes and weights normalized against N(0,1)."""
    if n not in _GH_CACHE:
        x, w = hermegauss(n)
        _GH_CACHE[n] = (x, w / _SQRT2PI)
    return _GH_CACHE[n]


def gauss_hermite_expect(g, nodes=129):
    """E[g(xi)] for xi ~ N(0,1)."""
    x, w = gauss_hermite_nodes(nodes)
    return float(w @ np.asarray([g(xi) for xi in x], dtype=float)) \
        if not _vectorized(g) else float(w @ g(x))


def _vectorized(g):
    try:
        out = g(np.array([0.0, 0.5]))
    except Exception:
        return False
    return np.shape(out) == (2,)


def adaptive_integral(g, a, b, tol=1e-10, max_depth=50):
    """Adaptive Simpson quadrature of g over [a, b] to absolute tolerance tol."""
    if a > b:
        raise ValueError("need a <= b")
    if a == b:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def rec(x0, x2, f0, f1, f2, whole, eps, depth):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = g(xl), g(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        if depth >= max_depth:
            raise ValueError("adaptive quadrature recursion depth exhausted")
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (rec(x0, xm, f0, fl, f1, left, eps / 2.0, depth + 1)
                + rec(xm, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    m = 0.5 * (a + b)
    fa, fm, fb = g(a), g(m), g(b)
    whole = simpson(a, b, fa, fm, fb)
    return rec(a, b, fa, fm, fb, whole, tol, 0)
