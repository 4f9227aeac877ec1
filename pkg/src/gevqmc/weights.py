"""Kernel constants, POD weights and predicted QMC rates.

The weighted space over R^s uses the weight functions
``psi^2(x) = exp(-theta |x|**tau)`` against the beta-Gaussian density.  A
randomly shifted lattice rule built by CBC then has R.M.S. error bounded in
terms of ``gamma_u**lam * K**(lam |u|) * (2 zeta(2 r lam))**|u|``, where the
constant ``K`` depends on which of four regimes ``(tau, beta)`` falls in.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SpaceParams",
    "PodWeights",
    "ParameterError",
    "zeta",
    "kernel_constant_K",
    "log_kernel_constant_K",
    "kernel_case",
    "select_lambda",
    "lambda_r_compatible",
    "build_pod_weights",
    "theoretical_rate",
    "pod_weight_sum",
    "log_pod_weight_sum",
    "save_weights",
    "load_weights",
]

log = logging.getLogger(__name__)

ZETA_ARG_FLOOR = 1.0


class ParameterError(ValueError):
    """Parameters outside the admissible range of the error theory."""


# Bernoulli numbers B_2 .. B_20
_BERNOULLI = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510, 43867 / 798, -174611 / 330]


def zeta(x: float, n_terms: int = 16) -> float:
    """Riemann zeta for real ``x > 1`` by Euler-Maclaurin summation."""
    if not x > ZETA_ARG_FLOOR:
        raise ParameterError(f"zeta argument {x} must exceed {ZETA_ARG_FLOOR}")
    N = n_terms
    head = math.fsum(k ** (-x) for k in range(1, N))
    tail = N ** (1.0 - x) / (x - 1.0) + 0.5 * N ** (-x)
    rising = x  # x (x+1) ... (x + 2i - 2)
    for i, b2i in enumerate(_BERNOULLI, start=1):
        tail += b2i / math.factorial(2 * i) * rising * N ** (-x - 2 * i + 1)
        rising *= (x + 2 * i - 1) * (x + 2 * i)
    return head + tail


@dataclass(frozen=True)
class SpaceParams:
    """Parameters of the weighted function space.

    ``tau``: exponent in the weight function; ``theta``: its rate;
    ``r``: decay parameter of the shift-averaged kernel; ``delta``: rate slack.
    """

    tau: float
    theta: float
    r: float
    delta: float
    beta: float

    def __post_init__(self):
        tau, beta, theta, r, delta = self.tau, self.beta, self.theta, self.r, self.delta
        if not (0 < tau <= beta):
            raise ParameterError(f"need 0 < tau <= beta, got tau={tau}, beta={beta}")
        if self.equal:
            if not (0 < theta < 1.0 / beta):
                raise ParameterError(f"tau = beta needs 0 < theta < 1/beta = {1.0 / beta}")
            r_hi = 1.0 - theta * beta / 2.0
            if not (0.5 < r <= r_hi):
                raise ParameterError(f"tau = beta needs r in (1/2, {r_hi}]")
            if not (0 < delta < 0.5 - theta * beta / 2.0):
                raise ParameterError(f"tau = beta needs delta in (0, {0.5 - theta * beta / 2.0})")
        else:
            if not theta > 0:
                raise ParameterError("theta must be positive")
            if not (0.5 < r < 1):
                raise ParameterError("r must lie in (1/2, 1)")
            if not (0 < delta < 0.5):
                raise ParameterError("delta must lie in (0, 1/2)")

    @property
    def equal(self) -> bool:
        return self.tau == self.beta


def _c_beta(beta: float) -> float:
    return 1.0 / (2.0 * beta ** (1.0 / beta) * math.gamma(1.0 + 1.0 / beta))


def kernel_case(sp: SpaceParams) -> str:
    if sp.equal:
        return "tau=beta<1" if sp.beta < 1 else "1<=tau=beta"
    return "tau<beta<1" if sp.beta < 1 else "tau<beta,beta>=1"


def kernel_constant_K(sp: SpaceParams) -> float:
    log_k = log_kernel_constant_K(sp)
    if log_k > _LOG_MAX:
        raise ParameterError(f"K = exp({log_k:.4g}) overflows double precision")
    return math.exp(log_k)


_LOG_MAX = math.log(np.finfo(float).max)


def log_kernel_constant_K(sp: SpaceParams) -> float:
    """``log K`` for the regime selected by ``(tau, beta)``."""
    b, t, th, r = sp.beta, sp.tau, sp.theta, sp.r
    cb = _c_beta(b)
    base = 4.0 * math.pi ** (-2.0 * r) / ((2.0 * r) * (2.0 - 2.0 * r) * cb)
    case = kernel_case(sp)
    if case == "1<=tau=beta":
        return math.log(base)
    if case == "tau=beta<1":
        gap = 2.0 - 2.0 * r - b * th
        if not gap > 0:
            raise ParameterError("tau = beta < 1 needs r < 1 - theta*beta/2 strictly")
        m = 3.0 - 2.0 * r
        log_k = (
            math.log(base)
            - m * math.log(2.0 * math.gamma(1.0 / b))
            + (1.0 - b) * m / b * math.log((1.0 - b) / (math.e * b) * (1.0 + b * th) / gap)
            + m / b * math.log(m / (1.0 + b * th))
        )
        return log_k
    # tau < beta: Young's inequality term, with eps = sqrt(1 + 2(1-r)) - 1
    m = 1.0 + 2.0 * (1.0 - r)
    eps = math.sqrt(m) - 1.0
    q = b / (b - t)
    log_young = (1.0 - q) * math.log(eps / t) + math.log((b - t) / b) + q * math.log(th)
    if log_young > _LOG_MAX:
        return math.inf
    log_k = math.log(base) + math.exp(log_young)
    if case == "tau<beta<1":
        log_k += (
            -m * math.log(2.0 * math.gamma(1.0 / b))
            + (1.0 - b) * m / b * math.log((1.0 - b) / (math.e * b * eps))
            + m / b * math.log(math.sqrt(m))
        )
    return log_k


def select_lambda(p: float, sigma: float, sp: SpaceParams) -> float:
    """Weight exponent ``lam`` for summability exponent ``p`` and Gevrey ``sigma``."""
    if not 0 < p < 1:
        raise ParameterError("p must lie in (0, 1)")
    inv_sigma = 1.0 / sigma
    if math.isclose(p, inv_sigma, rel_tol=0, abs_tol=1e-15):
        raise ParameterError("p = 1/sigma is excluded")
    if 2.0 / 3.0 < p < inv_sigma:
        if sp.equal and not sp.theta < (3.0 * p - 2.0) / (p * sp.beta):
            raise ParameterError(f"tau = beta with p in (2/3, 1/sigma) needs theta < {(3 * p - 2) / (p * sp.beta)}")
        return p / (2.0 - p)
    if p <= min(2.0 / 3.0, inv_sigma):
        if sp.equal:
            return 1.0 / (2.0 - sp.theta * sp.beta - 2.0 * sp.delta)
        return 1.0 / (2.0 - 2.0 * sp.delta)
    raise ParameterError(f"p = {p} > 1/sigma = {inv_sigma}: no admissible lambda")


def lambda_r_compatible(lam: float, r: float) -> bool:
    """The CBC bound holds for ``lam`` in ``(1/(2r), 1]``."""
    return 1.0 / (2.0 * r) < lam <= 1.0


def theoretical_rate(p: float, sp: SpaceParams) -> float:
    """Exponent of the predicted R.M.S. decay in ``phi(n)``."""
    first = 1.0 / p - 0.5
    if sp.equal:
        return min(first, 1.0 - sp.theta * sp.beta / 2.0 - sp.delta)
    return min(first, 1.0 - sp.delta)


@dataclass(frozen=True)
class PodWeights:
    """``gamma_u = ((|u|!)**sigma prod_{j in u} f_j)**exponent`` with ``gamma_{} = 1``.

    ``sigma = 0`` gives product weights.  A zero factor switches its
    coordinate off (every ``gamma_u`` with ``j in u`` vanishes).
    """

    sigma: float
    lam: float
    per_coord_factor: np.ndarray
    exponent: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.asarray(self.per_coord_factor, dtype=float)
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ParameterError("per-coordinate factors must be nonnegative and finite")
        object.__setattr__(self, "per_coord_factor", f)

    @property
    def s_max(self) -> int:
        return self.per_coord_factor.size

    def log_gamma(self, u: Iterable[int]) -> float:
        """Log weight of a set of 0-based coordinates."""
        u = list(u)
        if not u:
            return 0.0
        with np.errstate(divide="ignore"):
            logs = np.log(self.per_coord_factor[u])
        if np.isneginf(logs).any():
            return -math.inf
        return self.exponent * (self.sigma * math.lgamma(len(u) + 1) + math.fsum(logs))

    def gamma(self, u: Iterable[int]) -> float:
        return math.exp(self.log_gamma(u))

    def product_part(self) -> np.ndarray:
        """``f_j**exponent``."""
        return self.per_coord_factor**self.exponent

    def order_ratio(self, ell: int) -> float:
        """``Gamma_ell / Gamma_{ell-1}`` with ``Gamma_ell = (ell!)**(sigma*exponent)``."""
        return float(ell) ** (self.sigma * self.exponent)

    def log_order_weight(self, ell: int) -> float:
        return self.sigma * self.exponent * math.lgamma(ell + 1)


def build_pod_weights(
    s_max: int,
    sigma: float,
    lam: float,
    C: float,
    b: Sequence[float],
    alpha: Sequence[float],
    sp: SpaceParams,
    K: float | None = None,
) -> PodWeights:
    b = np.asarray(b, dtype=float)[:s_max]
    alpha = np.asarray(alpha, dtype=float)[:s_max]
    if b.size < s_max or alpha.size < s_max:
        raise ParameterError("b and alpha must have at least s_max entries")
    if np.any(b < 0) or np.any(alpha < 0):
        raise ParameterError("b and alpha must be nonnegative")
    if np.any(sp.theta <= 2.0 * alpha):
        raise ParameterError(f"theta = {sp.theta} must exceed 2*max(alpha) = {2 * alpha.max()}")
    if K is None:
        K = kernel_constant_K(sp)
    z = zeta(2.0 * sp.r * lam)
    denom = (sp.theta - 2.0 * alpha) ** (1.0 / (2.0 * sp.tau)) * math.sqrt(
        K**lam * z * math.gamma(1.0 + 1.0 / sp.tau)
    )
    f = (C + 1.0) * b / denom
    if np.any(np.diff(f) > 1e-12 * f[:-1]):
        log.warning("per-coordinate weight factors are not nonincreasing")
    meta = {"C": C, "K": K, "zeta": z, "kernel_case": kernel_case(sp)}
    return PodWeights(sigma=sigma, lam=lam, per_coord_factor=f, exponent=2.0 / (1.0 + lam), metadata=meta)


def log_pod_weight_sum(w: PodWeights, s: int, lam: float, scale: float) -> float:
    """Log of ``sum_{u in {1:s}} gamma_u**lam * scale**|u|`` (empty set included).

    Runs the elementary-symmetric recursion over orders in log space, since the
    order factor ``(|u|!)**(sigma*exponent*lam)`` overflows long before the sum
    settles.
    """
    with np.errstate(divide="ignore"):
        logx = lam * w.exponent * np.log(w.per_coord_factor[:s]) + math.log(scale)
    log_ratio = lam * w.sigma * w.exponent * np.log(np.arange(1, s + 1, dtype=float))
    # acc[ell] = log(Gamma_ell**lam * e_ell(x_1..x_j))
    acc = np.full(s + 1, -np.inf)
    acc[0] = 0.0
    for j in range(s):
        acc[1 : j + 2] = np.logaddexp(acc[1 : j + 2], logx[j] + log_ratio[: j + 1] + acc[: j + 1])
    return float(np.logaddexp.reduce(acc))


def pod_weight_sum(w: PodWeights, s: int, lam: float, scale: float) -> float:
    """``sum_{u in {1:s}} gamma_u**lam * scale**|u|``; may return ``inf``."""
    with np.errstate(over="ignore"):
        return float(np.exp(log_pod_weight_sum(w, s, lam, scale)))


def save_weights(path, w: PodWeights, comments: Sequence[str] = ()) -> None:
    """Header ``sigma lambda exponent``, then one factor per line; ``#`` lines are comments."""
    lines = [f"{float(w.sigma)!r} {float(w.lam)!r} {float(w.exponent)!r}"]
    lines += [repr(float(v)) for v in w.per_coord_factor]
    lines += [f"# {c}" for c in comments]
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_weights(path) -> PodWeights:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        sigma, lam, exponent = (float(v) for v in lines[0].split())
        f = np.array([float(v) for v in lines[1:]])
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"malformed weights file {path}") from exc
    return PodWeights(sigma=sigma, lam=lam, per_coord_factor=f, exponent=exponent)
