"""Generalized beta-Gaussian distribution N_beta(0, 1).

The density is ``c_beta * exp(-|y|**beta / beta)`` with
``c_beta = 1 / (2 * beta**(1/beta) * Gamma(1 + 1/beta))``.  ``beta = 2`` is the
standard normal law, ``beta = 1`` the Laplace law.

The CDF reduces to the regularized incomplete gamma function with shape
``a = 1/beta`` evaluated at ``|y|**beta / beta``; both P and Q are computed here
(series below ``x = a + 1``, Lentz continued fraction above) so that the
inverse CDF can work in log space deep into the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "BetaGaussian",
    "QuadratureSpec",
    "QuadratureError",
    "DivergenceError",
    "gamma_pq",
    "quad_oracle",
]

_T_MIN = 1e-300
_T_MAX = 1.0 - 1e-16
_FPMIN = 1e-300
_MAX_ITER = 1000


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class DivergenceError(ValueError):
    """The requested moment is infinite."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


def _series_p(a, x):
    """log P(a, x) by the power series; accurate for x < a + 1."""
    ap = np.full_like(x, a)
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        ap = ap + 1.0
        term = np.where(active, term * x / ap, term)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > np.abs(total) * 1e-17
    with np.errstate(divide="ignore"):
        return np.log(total) + a * np.log(x) - x - math.lgamma(a)


def _cf_q(a, x):
    """log Q(a, x) by the modified Lentz continued fraction; x >= a + 1."""
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        if not active.any():
            break
        an = -i * (i - a)
        b = b + 2.0
        d_new = an * d + b
        d_new = np.where(np.abs(d_new) < _FPMIN, _FPMIN, d_new)
        c_new = b + an / c
        c_new = np.where(np.abs(c_new) < _FPMIN, _FPMIN, c_new)
        d_new = 1.0 / d_new
        delta = d_new * c_new
        h = np.where(active, h * delta, h)
        d = np.where(active, d_new, d)
        c = np.where(active, c_new, c)
        active &= np.abs(delta - 1.0) > 1e-16
    return np.log(h) + a * np.log(x) - x - math.lgamma(a)


def gamma_pq(a: float, x):
    """Regularized incomplete gamma functions in log form.

    Returns ``(log_p, log_q)`` for ``P(a, x)`` and ``Q(a, x) = 1 - P(a, x)``,
    elementwise over ``x >= 0``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    log_p = np.empty_like(x)
    log_q = np.empty_like(x)
    zero = x <= 0.0
    small = (~zero) & (x < a + 1.0)
    large = x >= a + 1.0
    log_p[zero] = -np.inf
    log_q[zero] = 0.0
    if small.any():
        lp = _series_p(a, x[small])
        log_p[small] = lp
        log_q[small] = np.log1p(-np.exp(lp))
    if large.any():
        lq = _cf_q(a, x[large])
        log_q[large] = lq
        log_p[large] = np.log1p(-np.exp(lq))
    return log_p, log_q


@dataclass(frozen=True)
class BetaGaussian:
    """Univariate beta-Gaussian law with shape parameter ``beta > 0``."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def c_beta(self) -> float:
        b = self.beta
        return 1.0 / (2.0 * b ** (1.0 / b) * math.gamma(1.0 + 1.0 / b))

    @property
    def _a(self) -> float:
        return 1.0 / self.beta

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return self.c_beta * np.exp(-np.abs(y) ** self.beta / self.beta)

    def cdf(self, y):
        """CDF via ``Phi(w) = Q(1/beta, |w|**beta / beta) / 2`` for ``w < 0``."""
        y_arr = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y_arr).ravel()
        x = np.abs(flat) ** self.beta / self.beta
        log_p, log_q = gamma_pq(self._a, x)
        lower = 0.5 * np.exp(log_q)
        upper = 0.5 + 0.5 * np.exp(log_p)
        out = np.where(flat < 0, lower, upper)
        out[flat == 0] = 0.5
        return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])

    def inv_cdf(self, t):
        """Inverse CDF.

        ``t`` is clamped to ``[1e-300, 1 - 1e-16]`` so that shifted lattice
        points landing numerically on 0 or 1 still map to finite values.
        Each element is solved by Newton's method on the log incomplete gamma
        function, safeguarded by a bisection bracket.
        """
        t_arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t_arr).ravel()
        if np.any(~((flat > 0) & (flat < 1))):
            raise ValueError("inv_cdf requires 0 < t < 1")
        flat = np.clip(flat, _T_MIN, _T_MAX)
        tail = np.minimum(flat, 1.0 - flat)
        x = self._solve_tail(tail)
        w = (self.beta * x) ** (1.0 / self.beta)
        out = np.where(flat < 0.5, -w, w)
        out[tail == 0.5] = 0.0
        return out.reshape(t_arr.shape) if t_arr.ndim else float(out[0])

    def _solve_tail(self, m):
        # find x >= 0 with Q(a, x) = 2m, i.e. P(a, x) = 1 - 2m
        a = self._a
        lg_a = math.lgamma(a)
        q = 2.0 * m
        p = 2.0 * (0.5 - m)
        use_q = q <= 0.5
        with np.errstate(divide="ignore"):
            log_target = np.where(use_q, np.log(q), np.log(p))

        def h_and_slope(x):
            log_p, log_q = gamma_pq(a, x)
            with np.errstate(divide="ignore", over="ignore"):
                log_dens = (a - 1.0) * np.log(x) - x - lg_a
                h = np.where(use_q, log_target - log_q, log_p - log_target)
                slope = np.where(use_q, np.exp(log_dens - log_q), np.exp(log_dens - log_p))
            return h, slope

        neg_log_q = -np.log(np.maximum(q, _FPMIN))
        guess_q = np.maximum(a, neg_log_q - lg_a + (a - 1.0) * np.log(np.maximum(a, neg_log_q)))
        with np.errstate(divide="ignore"):
            guess_p = np.exp((np.log(p) + math.lgamma(a + 1.0)) / a)
        x = np.where(use_q, guess_q, guess_p)
        x = np.where(np.isfinite(x) & (x > 0), x, a)

        lo = np.zeros_like(x)
        hi = np.maximum(2.0 * x, a + 10.0)
        for _ in range(200):
            h_hi, _ = h_and_slope(hi)
            low = h_hi <= 0
            if not low.any():
                break
            lo = np.where(low, hi, lo)
            hi = np.where(low, 2.0 * hi, hi)
        x = np.clip(x, lo, hi)
        x = np.where((x <= lo) | (x >= hi), 0.5 * (lo + hi), x)

        active = np.ones(x.shape, dtype=bool)
        for _ in range(200):
            if not active.any():
                break
            h, slope = h_and_slope(x)
            lo = np.where(active & (h < 0), x, lo)
            hi = np.where(active & (h > 0), x, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = h / slope
            x_new = x - step
            bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi)
            x_new = np.where(bad, 0.5 * (lo + hi), x_new)
            done = (h == 0) | (np.abs(x_new - x) <= 4e-16 * np.maximum(x, 1e-300)) | (hi - lo <= 4e-16 * hi)
            x = np.where(active, x_new, x)
            active &= ~done
        return x

    def abs_moment(self, tau: float) -> float:
        """``E|Y|**tau`` in closed form."""
        if not tau > 0:
            raise ValueError("tau must be positive")
        b = self.beta
        log_val = math.lgamma((tau + 1.0) / b) - (1.0 - tau / b) * math.log(b) - math.lgamma(1.0 + 1.0 / b)
        return math.exp(log_val)

    def exp_moment(self, alpha: float, tau: float, nu: int, spec: QuadratureSpec | None = None) -> float:
        """``E[|Y|**nu * exp(alpha * |Y|**tau)]`` by adaptive quadrature.

        Finite iff ``tau < beta``, or ``tau == beta`` and ``alpha < 1/beta``.
        """
        spec = spec or QuadratureSpec()
        b = self.beta
        if alpha < 0 or nu < 0 or not tau > 0:
            raise ValueError("need alpha >= 0, nu >= 0, tau > 0")
        if tau > b and alpha > 0:
            raise DivergenceError(f"tau={tau} > beta={b}: moment diverges")
        if tau == b and alpha >= 1.0 / b:
            raise DivergenceError(f"alpha={alpha} >= 1/beta={1.0 / b}: moment diverges")
        if alpha == 0.0 or tau == b:
            # exp(-kappa * y**beta) tail with kappa = 1/beta - alpha
            kappa = 1.0 / b - alpha if tau == b else 1.0 / b
            start = 0.0
        else:
            # alpha * y**tau <= y**beta / (2 beta) once y**(beta - tau) >= 2 alpha beta
            kappa = 0.5 / b
            start = (2.0 * alpha * b) ** (1.0 / (b - tau))
        c2 = 2.0 * self.c_beta

        def tail(T):
            a_t = (nu + 1.0) / b
            _, log_q = gamma_pq(a_t, kappa * T**b)
            log_full = math.lgamma(a_t) - math.log(b) - a_t * math.log(kappa)
            return c2 * math.exp(log_full + float(log_q[0]))

        T = max(start, 1.0)
        while tail(T) > spec.abs_tol / 10.0:
            T *= 1.5

        def f(y):
            return c2 * y**nu * math.exp(alpha * y**tau - y**b / b)

        val, err, info = _quad(f, 0.0, T, spec)
        return val


def _quad(f, lo, hi, spec: QuadratureSpec):
    val, err, info, *rest = integrate.quad(
        f, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions, full_output=1
    )
    if rest and rest[0] not in (None, ""):
        msg = rest[0]
        if err > max(spec.abs_tol, spec.rel_tol * abs(val)):
            raise QuadratureError(f"quadrature failed on [{lo}, {hi}]: {msg}")
    return val, err, info


def quad_oracle(
    f: Callable[[float], float],
    spec: QuadratureSpec | None = None,
    tail_bound: Callable[[float], float] | None = None,
) -> float:
    """Integrate ``f`` over the real line.

    With ``tail_bound(T)`` (a bound on the integral of ``|f|`` outside
    ``[-T, T]``) the range is cut at the first ``T`` whose bound is below
    ``abs_tol / 10``; otherwise both half-lines are mapped by scipy's
    infinite-range transform.  The two halves are integrated separately since
    most integrands here have a cusp at the origin.
    """
    spec = spec or QuadratureSpec()
    if tail_bound is not None:
        T = 1.0
        while tail_bound(T) > spec.abs_tol / 10.0:
            T *= 1.5
            if T > 1e12:
                raise QuadratureError("tail bound never drops below tolerance")
        lo, hi = -T, T
    else:
        lo, hi = -np.inf, np.inf
    left, *_ = _quad(f, lo, 0.0, spec)
    right, *_ = _quad(f, 0.0, hi, spec)
    return left + right
