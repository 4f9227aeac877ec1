"""Random diffusion coefficients on the unit square.

The Gevrey field is

    a(x, y) = exp(sum_j h(y_j) psi_j(x)) * exp(xi(sum_j y_j psi_j(x)))

with ``psi_j(x) = 0.5 j**(-vartheta) sin(pi j x1) sin(pi j x2)``,
``h(y) = y / (1 + sqrt|y|)`` and the non-analytic smooth bump
``xi(z) = exp(-1/z**2)`` (``xi(0) = 0``), whose derivatives obey
``|xi^(k)| <= 3**k (k!)**(3/2)``.

Parameters are indexed from 1 in ``psi`` (matching ``j``) but stored 0-based in
arrays: column ``k`` of a psi matrix holds ``psi_{k+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GevreyField",
    "LognormalField",
    "CoordinateSequences",
    "psi",
    "link_h",
    "xi",
    "lognormal_coeff",
    "a_min_model",
]

_XI_ZERO = 1e-150


def link_h(y):
    y = np.asarray(y, dtype=float)
    return y / (1.0 + np.sqrt(np.abs(y)))


def xi(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    nz = np.abs(z) >= _XI_ZERO
    out[nz] = np.exp(-1.0 / z[nz] ** 2)
    return out if out.ndim else float(out)


def psi(j: int, vartheta: float, x, amplitude: float = 0.5):
    if j < 1:
        raise ValueError("psi is indexed from j = 1")
    x = np.asarray(x, dtype=float)
    return amplitude * j ** (-vartheta) * np.sin(math.pi * j * x[..., 0]) * np.sin(math.pi * j * x[..., 1])


def _psi_matrix(points, s: int, vartheta: float, amplitude: float):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    j = np.arange(1, s + 1, dtype=float)
    sx = np.sin(math.pi * np.outer(pts[:, 0], j))
    sy = np.sin(math.pi * np.outer(pts[:, 1], j))
    return amplitude * j ** (-vartheta) * sx * sy


@dataclass(frozen=True)
class CoordinateSequences:
    alpha: np.ndarray
    b: np.ndarray
    p: float

    @property
    def alpha_sup(self) -> float:
        return float(np.max(self.alpha)) if self.alpha.size else 0.0


@dataclass(frozen=True)
class GevreyField:
    vartheta: float
    s: int
    amplitude: float = 0.5
    sigma: float = 1.5
    C_xi: float = 3.0

    def __post_init__(self):
        if not self.vartheta > 1:
            raise ValueError("decay exponent vartheta must exceed 1")
        if self.s < 1:
            raise ValueError("truncation dimension s must be >= 1")

    def psi_sup_norms(self, s: int | None = None) -> np.ndarray:
        """Exact ``||psi_j||_inf = amplitude * j**(-vartheta)``."""
        j = np.arange(1, (s or self.s) + 1, dtype=float)
        return self.amplitude * j ** (-self.vartheta)

    def sequences(self, s: int | None = None, p: float | None = None) -> CoordinateSequences:
        norms = self.psi_sup_norms(s)
        b = 2.0**self.sigma * self.C_xi * norms
        return CoordinateSequences(alpha=norms, b=b, p=p if p is not None else 1.0 / self.vartheta + 1e-3)

    def psi_matrix(self, points, s: int | None = None) -> np.ndarray:
        """``(m, s)`` array of ``psi_j`` at the given points."""
        return _psi_matrix(points, s or self.s, self.vartheta, self.amplitude)

    def coeff_from_psi(self, psi_mat, y):
        """Coefficient values for parameter vectors ``y`` of shape ``(s,)`` or
        ``(batch, s)`` given a precomputed psi matrix; returns ``(m,)`` or
        ``(batch, m)``.  Parameters beyond the psi matrix width are ignored
        (that is the dimension truncation)."""
        y = np.asarray(y, dtype=float)
        s = psi_mat.shape[1]
        y = y[..., :s]
        lin = y @ psi_mat.T
        hlin = link_h(y) @ psi_mat.T
        return np.exp(hlin + xi(lin))

    def coeff(self, x, y):
        """``a_s(x, y)`` with ``s = min(self.s, len(y))`` series terms."""
        y = np.asarray(y, dtype=float)
        s = min(self.s, y.shape[-1])
        return self.coeff_from_psi(self.psi_matrix(x, s), y[..., :s])


def lognormal_coeff(a0: Callable, eigen: Sequence[tuple[float, Callable]], x, y):
    """``a0(x) * exp(sum_j sqrt(lambda_j) psi_j(x) y_j)`` over the first ``len(y)`` pairs."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for (lam, fn), yj in zip(eigen, np.asarray(y, dtype=float)):
        total = total + math.sqrt(lam) * fn(x) * yj
    return a0(x) * np.exp(total)


@dataclass(frozen=True)
class LognormalField:
    """``exp(sum_j y_j psi_j(x))`` with the same ``psi_j`` as the Gevrey field."""

    vartheta: float
    s: int
    amplitude: float = 0.5
    sigma: float = 1.0
    C_xi: float = 1.0

    def psi_sup_norms(self, s: int | None = None) -> np.ndarray:
        j = np.arange(1, (s or self.s) + 1, dtype=float)
        return self.amplitude * j ** (-self.vartheta)

    def sequences(self, s: int | None = None, p: float | None = None) -> CoordinateSequences:
        norms = self.psi_sup_norms(s)
        return CoordinateSequences(alpha=norms, b=norms.copy(), p=p if p is not None else 1.0 / self.vartheta + 1e-3)

    def psi_matrix(self, points, s: int | None = None) -> np.ndarray:
        return _psi_matrix(points, s or self.s, self.vartheta, self.amplitude)

    def coeff_from_psi(self, psi_mat, y):
        y = np.asarray(y, dtype=float)[..., : psi_mat.shape[1]]
        return np.exp(y @ psi_mat.T)

    def coeff(self, x, y):
        y = np.asarray(y, dtype=float)
        s = min(self.s, y.shape[-1])
        return self.coeff_from_psi(self.psi_matrix(x, s), y[..., :s])


def a_min_model(c: float, alpha, tau: float, y) -> float:
    """``c * exp(-sum_j alpha_j |y_j|**tau)``."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)[..., : alpha.size]
    return c * np.exp(-(np.abs(y) ** tau) @ alpha[: y.shape[-1]])
