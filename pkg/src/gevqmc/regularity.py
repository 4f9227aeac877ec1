"""Multi-indices, the Gevrey recurrence bound and finite-difference checks.

Coordinates are 0-based here: ``MultiIndex({0: 2})`` differentiates twice in
the first parameter ``y_1``, and ``b[0]`` is the first entry of the sequence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "MultiIndex",
    "GevreyParams",
    "OrderCapError",
    "recurrence_upsilon",
    "closed_form_bound",
    "solution_derivative_bound",
    "gevrey_ratio_fd",
    "field_gevrey_bound",
]


class OrderCapError(ValueError):
    pass


@dataclass(frozen=True)
class MultiIndex:
    """Finitely supported multi-index stored as sorted ``(index, value)`` pairs."""

    entries: tuple[tuple[int, int], ...] = ()

    def __init__(self, entries: Mapping[int, int] | Sequence[tuple[int, int]] = ()):
        items = dict(entries).items() if not isinstance(entries, dict) else entries.items()
        clean = []
        for j, v in items:
            if j < 0 or v < 0:
                raise ValueError("multi-index entries must be nonnegative")
            if v:
                clean.append((int(j), int(v)))
        object.__setattr__(self, "entries", tuple(sorted(clean)))

    @classmethod
    def from_dense(cls, values: Sequence[int]) -> "MultiIndex":
        return cls({j: v for j, v in enumerate(values)})

    @classmethod
    def unit(cls, j: int) -> "MultiIndex":
        return cls({j: 1})

    @property
    def order(self) -> int:
        return sum(v for _, v in self.entries)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.entries)

    def __getitem__(self, j: int) -> int:
        return dict(self.entries).get(j, 0)

    def __len__(self) -> int:
        return len(self.entries)

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        mine = dict(self.entries)
        for j, v in other.entries:
            mine[j] = mine.get(j, 0) - v
        return MultiIndex(mine)

    def __le__(self, other: "MultiIndex") -> bool:
        return all(v <= other[j] for j, v in self.entries)

    def is_zero(self) -> bool:
        return not self.entries

    def factorial(self) -> int:
        return math.prod(math.factorial(v) for _, v in self.entries)

    def binom(self, m: "MultiIndex") -> int:
        return math.prod(math.comb(v, m[j]) for j, v in self.entries)

    def power(self, b: Sequence[float]) -> float:
        """``b**nu`` with the convention ``0**0 = 1``."""
        return math.prod(float(b[j]) ** v for j, v in self.entries)

    def sub_indices(self) -> Iterator["MultiIndex"]:
        """All ``m <= self``, including zero and ``self``."""
        js = self.support
        ranges = [range(v + 1) for _, v in self.entries]
        for combo in itertools.product(*ranges):
            yield MultiIndex(dict(zip(js, combo)))


@dataclass(frozen=True)
class GevreyParams:
    sigma: float = 1.0
    C: float = 1.0
    C0: float = 1.0

    def __post_init__(self):
        if self.sigma < 1:
            raise ValueError("Gevrey exponent sigma must be >= 1")
        if not (self.C > 0 and self.C0 > 0):
            raise ValueError("C and C0 must be positive")


def recurrence_upsilon(
    nu: MultiIndex,
    p: GevreyParams,
    b: Sequence[float],
    equality_mode: bool = True,
    cap: int = 8,
    rng: np.random.Generator | None = None,
) -> float:
    """Evaluate the multivariate recurrence by memoized recursion.

    With ``equality_mode`` the recurrence is taken with equality and
    ``Upsilon_0 = C0``.  Otherwise every level is shrunk by an independent
    factor in ``[1/2, 1]`` drawn from ``rng``, which produces one of the
    sequences that satisfy the recurrence as an inequality.
    """
    if nu.order > cap:
        raise OrderCapError(f"|nu| = {nu.order} exceeds cap {cap}")
    if not equality_mode and rng is None:
        rng = np.random.default_rng(0)
    memo: dict[MultiIndex, float] = {}

    def slack() -> float:
        return 1.0 if equality_mode else float(rng.uniform(0.5, 1.0))

    def ups(mu: MultiIndex) -> float:
        if mu in memo:
            return memo[mu]
        if mu.is_zero():
            val = p.C0 * slack()
        else:
            total = 0.0
            for m in mu.sub_indices():
                if m.is_zero():
                    continue
                total += mu.binom(m) * math.factorial(m.order) ** p.sigma * m.power(b) * ups(mu - m)
            val = p.C * total * slack()
        memo[mu] = val
        return val

    return ups(nu)


def _a_k(k: int, C: float) -> float:
    return (C if k > 0 else 1.0) * (C + 1.0) ** max(k - 1, 0)


def closed_form_bound(nu: MultiIndex, p: GevreyParams, b: Sequence[float]) -> float:
    k = nu.order
    return p.C0 * _a_k(k, p.C) * math.factorial(k) ** p.sigma * nu.power(b)


def solution_derivative_bound(
    nu: MultiIndex, p: GevreyParams, b: Sequence[float], f_norm: float, a_min_val: float
) -> float:
    """Upper bound on ``||d^nu u||_{H^1_0}`` for a Gevrey-regular coefficient."""
    k = nu.order
    if k < 1:
        raise ValueError("bound stated for |nu| >= 1")
    if not a_min_val > 0:
        raise ValueError("a_min must be positive")
    return f_norm / a_min_val * p.C * (p.C + 1.0) ** (k - 1) * math.factorial(k) ** p.sigma * nu.power(b)


def field_gevrey_bound(
    nu: MultiIndex, sigma: float, C_xi: float, psi_sup_norms: Sequence[float], linear_h: bool = False
) -> float:
    """``(e/2)**sigma (|nu|!)**sigma prod_j (2**sigma C_xi ||psi_j||)**nu_j``.

    Valid for ``nu <= 1`` componentwise, or for every ``nu`` when the inner
    link function is the identity (``linear_h=True``).
    """
    if not linear_h and any(v > 1 for _, v in nu.entries):
        raise ValueError("bound requires nu <= 1 componentwise unless linear_h is set")
    b = [2.0**sigma * C_xi * s for s in psi_sup_norms]
    return (math.e / 2.0) ** sigma * math.factorial(nu.order) ** sigma * nu.power(b)


_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def _fd_derivative(coeff, y, nu: MultiIndex, step: float):
    """Tensor-product central difference of ``coeff(y)`` (array over x)."""
    parts = [(j, _STENCILS[v]) for j, v in nu.entries]
    total = 0.0
    for combo in itertools.product(*[list(zip(*st)) for _, st in parts]):
        yy = np.array(y, dtype=float, copy=True)
        w = 1.0
        for (j, _), (offset, c) in zip(parts, combo):
            yy[j] += offset * step
            w *= c
        total = total + w * coeff(yy)
    return total / step**nu.order


def gevrey_ratio_fd(field, y, nu: MultiIndex, spatial_grid, step: float = 1e-3) -> float:
    """Finite-difference estimate of ``max_x |d^nu a(x, y) / a(x, y)|``.

    ``field`` needs a ``coeff(points, y)`` method returning values on
    ``spatial_grid`` (shape ``(m, 2)``).  Central differences of second order
    are refined by one Richardson step (``h`` and ``h/2``).
    """
    if nu.order > 3:
        raise ValueError("finite-difference check limited to |nu| <= 3")
    y = np.asarray(y, dtype=float)
    if nu.support and max(nu.support) >= y.size:
        raise ValueError("multi-index support exceeds parameter dimension")
    grid = np.asarray(spatial_grid, dtype=float)

    def coeff(yy):
        return field.coeff(grid, yy)

    base = coeff(y)
    if nu.is_zero():
        return float(np.max(np.abs(base / base)))
    d_h = _fd_derivative(coeff, y, nu, step)
    d_h2 = _fd_derivative(coeff, y, nu, step / 2.0)
    deriv = (4.0 * d_h2 - d_h) / 3.0
    return float(np.max(np.abs(deriv / base)))
