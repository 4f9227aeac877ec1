"""Randomly shifted rank-1 lattice rules and fast CBC construction.

Lattice points are ``t_i = frac(i z / n)`` for ``i = 0, ..., n-1`` (``i = n``
gives the same point as ``i = 0``).  Generating vectors are built component by
component for POD weights.  The candidate search uses the cyclic structure of
the multiplicative group mod a prime ``n``: with a primitive root ``g`` every
candidate score is one entry of a circular correlation, computed by FFT.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .weights import PodWeights

__all__ = [
    "GeneratingVector",
    "ShiftSet",
    "QmcResult",
    "LatticeError",
    "is_prime",
    "euler_totient",
    "primitive_root",
    "lattice_point",
    "lattice_points",
    "surrogate_kernel",
    "kernel_table",
    "wce_criterion",
    "cbc_construct",
    "qmc_estimate",
    "write_genvec",
    "read_genvec",
    "write_shifts",
    "read_shifts",
    "read_kernel_table",
]

log = logging.getLogger(__name__)

DEFAULT_ORDER_CAP = 60
TIE_RTOL = 1e-12


class LatticeError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    return all(n % d for d in range(3, math.isqrt(n) + 1, 2))


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def euler_totient(n: int) -> int:
    if n < 1:
        raise ValueError("totient defined for n >= 1")
    phi = n
    for p in _prime_factors(n):
        phi -= phi // p
    return phi


def primitive_root(n: int) -> int:
    """Smallest generator of the multiplicative group mod prime ``n``."""
    if not is_prime(n):
        raise LatticeError(f"n = {n} is not prime")
    if n == 2:
        return 1
    factors = _prime_factors(n - 1)
    for g in range(2, n):
        if all(pow(g, (n - 1) // q, n) != 1 for q in factors):
            return g
    raise AssertionError("no primitive root found")  # unreachable for prime n


@dataclass(frozen=True)
class GeneratingVector:
    n: int
    z: tuple[int, ...]

    def __post_init__(self):
        z = tuple(int(v) for v in self.z)
        object.__setattr__(self, "z", z)
        if not is_prime(self.n):
            raise LatticeError(f"n = {self.n} is not prime")
        if not z:
            raise LatticeError("generating vector must have s >= 1 entries")
        if any(not 1 <= v <= self.n - 1 for v in z):
            raise LatticeError("entries of z must lie in {1, ..., n-1}")

    @property
    def s(self) -> int:
        return len(self.z)

    def truncate(self, s: int) -> "GeneratingVector":
        if s > self.s:
            raise LatticeError(f"cannot extend a dimension-{self.s} vector to {s}")
        return GeneratingVector(self.n, self.z[:s])


@dataclass(frozen=True)
class ShiftSet:
    shifts: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        sh = np.atleast_2d(np.asarray(self.shifts, dtype=float))
        if sh.shape[0] < 1:
            raise LatticeError("need at least one shift")
        if np.any(sh < 0) or np.any(sh >= 1):
            raise LatticeError("shifts must lie in [0, 1)")
        object.__setattr__(self, "shifts", sh)

    @classmethod
    def generate(cls, R: int, s: int, seed: int) -> "ShiftSet":
        """``R`` uniform shifts from a Philox stream keyed by ``seed``."""
        rng = np.random.Generator(np.random.Philox(seed))
        return cls(rng.random((R, s)), seed)

    @property
    def R(self) -> int:
        return self.shifts.shape[0]

    @property
    def s(self) -> int:
        return self.shifts.shape[1]

    def truncate(self, s: int) -> "ShiftSet":
        return ShiftSet(self.shifts[:, :s], self.seed)


def lattice_point(g: GeneratingVector, i: int, shift=None) -> np.ndarray:
    base = np.array([(i * zj) % g.n for zj in g.z], dtype=float) / g.n
    if shift is None:
        return base
    return np.mod(base + np.asarray(shift, dtype=float), 1.0)


def lattice_points(g: GeneratingVector, shift=None, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Points ``i = start, ..., stop-1`` as an ``(m, s)`` array."""
    stop = g.n if stop is None else stop
    i = np.arange(start, stop, dtype=np.int64)[:, None]
    base = (i * np.asarray(g.z, dtype=np.int64)[None, :] % g.n) / g.n
    if shift is None:
        return base
    return np.mod(base + np.asarray(shift, dtype=float)[None, : g.s], 1.0)


def surrogate_kernel(n: int) -> np.ndarray:
    """``omega(i/n) = B_2(i/n) = x**2 - x + 1/6`` for ``i = 0..n-1``."""
    x = np.arange(n, dtype=float) / n
    return x * x - x + 1.0 / 6.0


def kernel_table(mode: str, n: int) -> np.ndarray:
    """Resolve ``surrogate`` or ``table:<file>`` to an ``n``-entry table."""
    if mode == "surrogate":
        return surrogate_kernel(n)
    if mode.startswith("table:"):
        return read_kernel_table(mode[len("table:") :], n)
    raise LatticeError(f"unknown kernel mode {mode!r}")


def _order_cap(s: int, cap: int) -> int:
    if s > cap:
        log.warning("POD order truncated at %d for dimension %d", cap, s)
    return min(s, cap)


def _accumulate(Q, gk: float, om: np.ndarray, ratios: np.ndarray):
    # Q[l] = Gamma_l * e_l(...); add one coordinate with values gk * om
    for ell in range(Q.shape[0] - 1, 0, -1):
        Q[ell] += gk * ratios[ell] * om * Q[ell - 1]


def wce_criterion(
    g: GeneratingVector, w: PodWeights, kernel_values, j: int | None = None, order_cap: int = DEFAULT_ORDER_CAP
) -> float:
    """Shift-averaged squared worst-case error over the first ``j`` coordinates.

    ``(1/n) sum_i sum_{0 != u in {1:j}} gamma_u prod_{k in u} omega(frac(i z_k / n))``
    """
    j = g.s if j is None else j
    omega = np.asarray(kernel_values, dtype=float)
    if omega.size != g.n:
        raise LatticeError("kernel table must have n entries")
    if j > w.s_max:
        raise LatticeError("not enough weights for the requested dimension")
    L = _order_cap(j, order_cap)
    ratios = np.array([1.0] + [w.order_ratio(ell) for ell in range(1, L + 1)])
    gfac = w.product_part()
    Q = np.zeros((L + 1, g.n))
    Q[0] = 1.0
    idx = np.arange(g.n, dtype=np.int64)
    for k in range(j):
        _accumulate(Q, gfac[k], omega[idx * g.z[k] % g.n], ratios)
    return float(np.sum(Q[1:]) / g.n)


def _pick(scores: np.ndarray, scale: float) -> int:
    """Index of the smallest score.

    Scores within ``TIE_RTOL * scale`` of the minimum count as ties and go to
    the smallest index; ``scale`` bounds the magnitude of every score so that
    FFT rounding never decides between mathematically equal candidates.
    """
    lo = scores.min()
    return int(np.flatnonzero(scores <= lo + TIE_RTOL * scale)[0])


def cbc_construct(
    n: int,
    s: int,
    w: PodWeights,
    kernel_mode: str | np.ndarray = "surrogate",
    order_cap: int = DEFAULT_ORDER_CAP,
) -> GeneratingVector:
    """Fast CBC for POD weights with a prime number of points."""
    if not is_prime(n):
        raise LatticeError(f"n = {n} is not prime")
    if s < 1:
        raise LatticeError("s must be >= 1")
    if s > w.s_max:
        raise LatticeError(f"weights cover {w.s_max} coordinates, asked for {s}")
    omega = kernel_mode if isinstance(kernel_mode, np.ndarray) else kernel_table(kernel_mode, n)
    if omega.size != n:
        raise LatticeError("kernel table must have n entries")
    if n == 2:
        return GeneratingVector(2, (1,) * s)

    root = primitive_root(n)
    perm = np.empty(n - 1, dtype=np.int64)  # perm[a] = root**a mod n
    perm[0] = 1
    for a in range(1, n - 1):
        perm[a] = perm[a - 1] * root % n
    fft_omega = np.fft.rfft(omega[perm])

    L = _order_cap(s, order_cap)
    ratios = np.array([1.0] + [w.order_ratio(ell) for ell in range(1, L + 1)])
    gfac = w.product_part()
    Q = np.zeros((L + 1, n))
    Q[0] = 1.0
    Qabs = Q.copy()  # same recursion with |omega|, bounds every partial sum
    omega_abs = np.abs(omega)
    idx = np.arange(n, dtype=np.int64)
    z: list[int] = []
    for k in range(s):
        V = ratios[1:] @ Q[:-1]
        Vp = V[perm]
        # E2(z) - E2_prev = g_k/n * (omega(0) V(0) + sum_a omega(root**(a+b)) V(root**a)) for z = root**b
        corr = np.fft.irfft(fft_omega * np.conj(np.fft.rfft(Vp)), n=n - 1)
        scores = np.empty(n - 1)
        scores[perm - 1] = gfac[k] / n * (corr + omega[0] * V[0])  # by candidate value 1..n-1
        v_abs = ratios[1:] @ Qabs[:-1]
        scale = (np.sum(Qabs[1:]) + gfac[k] * omega_abs.sum() * v_abs.max()) / n
        zk = _pick(scores, scale) + 1
        z.append(zk)
        _accumulate(Q, gfac[k], omega[idx * zk % n], ratios)
        _accumulate(Qabs, gfac[k], omega_abs[idx * zk % n], ratios)
    return GeneratingVector(n, tuple(z))


@dataclass(frozen=True)
class QmcResult:
    per_shift: np.ndarray  # (R,) or (R, d)
    mean: np.ndarray | float
    rms: float


def _chunk_sum(F, pts):
    vals = np.asarray(F(pts), dtype=float)
    return vals.sum(axis=0)


def qmc_estimate(
    F: Callable[[np.ndarray], np.ndarray],
    g: GeneratingVector,
    shifts: ShiftSet,
    chunk: int = 256,
    executor: Executor | None = None,
) -> QmcResult:
    """Randomly shifted lattice estimate.

    ``F`` maps an ``(m, s)`` array of points to ``(m,)`` or ``(m, d)`` values.
    Points are cut into fixed chunks whose partial sums are combined in a
    fixed order, so the result does not depend on how many workers evaluate
    them.  With an ``executor`` the chunks are dispatched with ``map`` and
    ``F`` must be picklable.  The rms for vector output uses the Euclidean
    norm; callers with other norms should work from ``per_shift``.
    """
    if shifts.s < g.s:
        raise LatticeError("shifts have fewer coordinates than the lattice")
    bounds = [(a, min(a + chunk, g.n)) for a in range(0, g.n, chunk)]
    tasks = [lattice_points(g, shifts.shifts[r], a, b) for r in range(shifts.R) for a, b in bounds]
    if executor is None:
        sums = [_chunk_sum(F, t) for t in tasks]
    else:
        sums = list(executor.map(_chunk_sum, [F] * len(tasks), tasks))
    nb = len(bounds)
    per_shift = []
    for r in range(shifts.R):
        acc = sums[r * nb]
        for part in sums[r * nb + 1 : (r + 1) * nb]:
            acc = acc + part
        per_shift.append(acc / g.n)
    per_shift = np.array(per_shift)
    mean = per_shift.mean(axis=0)
    R = shifts.R
    if R >= 2:
        diff = per_shift - mean
        rms = math.sqrt(float(np.sum(diff * diff)) / (R * (R - 1)))
    else:
        rms = float("nan")
    return QmcResult(per_shift, mean if np.ndim(mean) else float(mean), rms)


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_genvec(path, g: GeneratingVector, header: Sequence[str] = ()) -> None:
    lines = [f"{g.n} {g.s}"] + [str(v) for v in g.z] + [f"# {h}" for h in header]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_genvec(path) -> GeneratingVector:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        n, s = int(rows[0][0]), int(rows[0][1])
        z = tuple(int(r[0]) for r in rows[1 : s + 1])
    except (IndexError, ValueError) as exc:
        raise LatticeError(f"malformed generating-vector file {path}") from exc
    if len(z) != s:
        raise LatticeError(f"{path}: header says s = {s} but found {len(z)} entries")
    return GeneratingVector(n, z)


def write_shifts(path, shifts: ShiftSet) -> None:
    lines = [" ".join(repr(float(v)) for v in row) for row in shifts.shifts]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_shifts(path, seed: int | None = None) -> ShiftSet:
    rows = np.loadtxt(path, ndmin=2, comments="#")
    return ShiftSet(rows, seed)


def read_kernel_table(path, n: int | None = None) -> np.ndarray:
    vals = np.loadtxt(path, ndmin=1, comments="#").astype(float).ravel()
    if n is not None and vals.size != n:
        raise LatticeError(f"kernel table {path} has {vals.size} entries, expected {n}")
    return vals
