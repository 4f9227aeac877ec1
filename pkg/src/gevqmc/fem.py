"""P1 finite elements for ``-div(a grad u) = f`` on the unit square, ``u = 0`` on the boundary.

Level ``k`` has ``N = 2**k`` cells per side.  Node ``(ix, iy)`` has index
``ix + iy*(N+1)``; every square is split along its ``(0,0)-(1,1)`` diagonal
into a lower triangle ``(00, 10, 11)`` and an upper triangle ``(00, 11, 01)``,
so level ``k`` is nested in level ``k+1``.

Both local stiffness matrices are independent of ``h`` in two dimensions, so
the global stiffness matrix is linear in the per-triangle coefficient values
``a_t``.  ``P1Problem`` precomputes that linear map once per mesh, after which
each assembly is one sparse matrix-vector product.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

__all__ = [
    "UniformMesh",
    "FemSolution",
    "P1Problem",
    "SolverError",
    "build_mesh",
    "assemble_and_solve",
    "prolong",
    "h1_seminorm",
    "l2_norm",
    "error_vs_exact",
    "write_solution",
]

MAX_LEVEL = 10


class SolverError(RuntimeError):
    pass


# gradients (times h) of the three hat functions on each reference triangle
_GRAD_LOWER = np.array([[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]])
_GRAD_UPPER = np.array([[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]])
_K_LOWER = 0.5 * _GRAD_LOWER @ _GRAD_LOWER.T
_K_UPPER = 0.5 * _GRAD_UPPER @ _GRAD_UPPER.T
_M_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0  # times the triangle area

# barycentric rules: centroid, edge midpoints (degree 2), Dunavant degree 4
_RULES = {
    "centroid": (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    "3point": (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]), np.full(3, 1 / 3)),
}
_a, _b = 0.445948490915965, 0.108103018168070
_c, _d = 0.091576213509771, 0.816847572980459
_RULES["degree4"] = (
    np.array([[_a, _a, _b], [_a, _b, _a], [_b, _a, _a], [_c, _c, _d], [_c, _d, _c], [_d, _c, _c]]),
    np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
)


@dataclass(frozen=True, eq=False)
class UniformMesh:
    k: int
    nodes: np.ndarray
    triangles: np.ndarray
    lower: np.ndarray  # bool per triangle: lower (00,10,11) or upper (00,11,01)
    interior: np.ndarray

    @property
    def N(self) -> int:
        return 2**self.k

    @property
    def h(self) -> float:
        return 2.0**-self.k

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_interior(self) -> int:
        return self.interior.size

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def quad_points(self, rule: str = "centroid") -> tuple[np.ndarray, np.ndarray]:
        """Quadrature points ``(n_tri, q, 2)`` and weights ``(q,)`` summing to 1."""
        bary, wts = _RULES[rule]
        verts = self.nodes[self.triangles]  # (n_tri, 3, 2)
        return np.einsum("qv,tvd->tqd", bary, verts), wts


@functools.lru_cache(maxsize=None)
def build_mesh(k: int) -> UniformMesh:
    if not 1 <= k <= MAX_LEVEL:
        raise ValueError(f"mesh level must be in [1, {MAX_LEVEL}], got {k}")
    N = 2**k
    g = np.arange(N + 1) / N
    X, Y = np.meshgrid(g, g, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    ix, iy = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    n00 = (ix + iy * (N + 1)).ravel()
    n10, n01, n11 = n00 + 1, n00 + N + 1, n00 + N + 2
    tri = np.empty((2 * N * N, 3), dtype=np.int64)
    tri[0::2] = np.column_stack([n00, n10, n11])
    tri[1::2] = np.column_stack([n00, n11, n01])
    lower = np.zeros(2 * N * N, dtype=bool)
    lower[0::2] = True
    jx, jy = np.meshgrid(np.arange(1, N), np.arange(1, N), indexing="xy")
    interior = (jx + jy * (N + 1)).ravel()
    for arr in (nodes, tri, lower, interior):
        arr.setflags(write=False)
    return UniformMesh(k, nodes, tri, lower, interior)


@dataclass(frozen=True, eq=False)
class FemSolution:
    mesh: UniformMesh
    values: np.ndarray  # interior nodal values

    def full(self) -> np.ndarray:
        out = np.zeros(self.mesh.n_nodes)
        out[self.mesh.interior] = self.values
        return out

    def __sub__(self, other: "FemSolution") -> "FemSolution":
        if other.mesh.k != self.mesh.k:
            raise ValueError("solutions live on different meshes")
        return FemSolution(self.mesh, self.values - other.values)


class P1Problem:
    """Assembly data for one mesh, reused across coefficient samples.

    Parameters
    ----------
    mesh : UniformMesh
    f : callable, optional
        Load function of an ``(m, 2)`` point array.  Integrated by the
        centroid rule.  Default ``f(x) = x_2``.
    coeff_rule : {"centroid", "3point"}
        Quadrature used to average the coefficient over each triangle.
    """

    def __init__(self, mesh: UniformMesh, f: Callable | None = None, coeff_rule: str = "centroid"):
        if coeff_rule not in ("centroid", "3point"):
            raise ValueError(f"unknown coefficient rule {coeff_rule!r}")
        self.mesh = mesh
        self.coeff_rule = coeff_rule
        n_tri = mesh.triangles.shape[0]
        pos = np.full(mesh.n_nodes, -1, dtype=np.int64)
        pos[mesh.interior] = np.arange(mesh.n_interior)

        loc = np.where(mesh.lower[:, None, None], _K_LOWER, _K_UPPER)  # (n_tri, 3, 3)
        rows = np.repeat(pos[mesh.triangles], 3, axis=1).ravel()
        cols = np.tile(pos[mesh.triangles], (1, 3)).ravel()
        vals = loc.reshape(-1)
        tri_id = np.repeat(np.arange(n_tri), 9)
        keep = (rows >= 0) & (cols >= 0) & (vals != 0)
        rows, cols, vals, tri_id = rows[keep], cols[keep], vals[keep], tri_id[keep]

        m = mesh.n_interior
        key = rows * m + cols
        uniq, slot = np.unique(key, return_inverse=True)
        self._indices = (uniq % m).astype(np.int32)
        self._indptr = np.searchsorted(uniq // m, np.arange(m + 1)).astype(np.int32)
        self._map = sps.csr_matrix((vals, (slot, tri_id)), shape=(uniq.size, n_tri))
        # upper band storage for the Cholesky solver: ab[bw + i - j, j] = A[i, j]
        r, c = uniq // m, uniq % m
        up = r <= c
        self._bw = int((c - r).max()) if m > 1 else 0
        self._band_src = np.flatnonzero(up)
        self._band_pos = ((self._bw + r - c)[up], c[up])
        self.K1 = self.stiffness(np.ones(n_tri))
        self.M = self._mass(pos)
        self.load = self._load(pos, f if f is not None else (lambda x: x[:, 1]))

    def _mass(self, pos):
        mesh = self.mesh
        area = mesh.h**2 / 2.0
        t = pos[mesh.triangles]
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        vals = np.broadcast_to(area * _M_REF, (t.shape[0], 3, 3)).reshape(-1)
        keep = (rows >= 0) & (cols >= 0)
        m = mesh.n_interior
        return sps.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(m, m))

    def _load(self, pos, f):
        mesh = self.mesh
        area = mesh.h**2 / 2.0
        fc = np.asarray(f(mesh.centroids), dtype=float) * area / 3.0
        b = np.zeros(mesh.n_nodes)
        np.add.at(b, mesh.triangles.ravel(), np.repeat(fc, 3))
        return b[mesh.interior]

    def coeff_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened points where the coefficient is sampled and the per-triangle weights."""
        pts, wts = self.mesh.quad_points(self.coeff_rule)
        return pts.reshape(-1, 2), wts

    def triangle_coeff(self, samples) -> np.ndarray:
        """Average coefficient samples at ``coeff_points`` to one value per triangle."""
        _, wts = self.mesh.quad_points(self.coeff_rule)
        samples = np.asarray(samples, dtype=float)
        q = wts.size
        return samples.reshape(samples.shape[:-1] + (-1, q)) @ wts

    def stiffness(self, a_tri) -> sps.csr_matrix:
        data = self._map @ np.asarray(a_tri, dtype=float)
        m = self.mesh.n_interior
        return sps.csr_matrix((data, self._indices, self._indptr), shape=(m, m))

    def banded(self, a_tri) -> np.ndarray:
        data = self._map @ np.asarray(a_tri, dtype=float)
        ab = np.zeros((self._bw + 1, self.mesh.n_interior))
        ab[self._band_pos] = data[self._band_src]
        return ab

    def solve(self, a_tri, load=None, solver: str = "banded", rtol: float = 1e-12) -> FemSolution:
        a_tri = np.asarray(a_tri, dtype=float)
        if not np.all(a_tri > 0):
            raise SolverError("coefficient must be strictly positive")
        A = self.stiffness(a_tri)
        b = self.load if load is None else np.asarray(load, dtype=float)
        if solver == "banded":
            try:
                x = sla.solveh_banded(self.banded(a_tri), b, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise SolverError("stiffness matrix not positive definite") from exc
        elif solver == "direct":
            x = spla.splu(A.tocsc()).solve(b)
        elif solver == "cg":
            diag = A.diagonal()
            pre = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
            x, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=pre, maxiter=10 * A.shape[0])
            if info != 0:
                raise SolverError(f"CG did not converge (info={info})")
        else:
            raise ValueError(f"unknown solver {solver!r}")
        bnorm = np.linalg.norm(b)
        if bnorm > 0 and np.linalg.norm(A @ x - b) > max(rtol, 1e-10) * bnorm:
            raise SolverError("linear solve residual above tolerance")
        if not np.all(np.isfinite(x)):
            raise SolverError("non-finite solution")
        return FemSolution(self.mesh, x)


@functools.lru_cache(maxsize=None)
def _problem(k: int) -> P1Problem:
    return P1Problem(build_mesh(k))


def assemble_and_solve(
    mesh: UniformMesh, coeff: Callable, f: Callable, coeff_rule: str = "centroid", solver: str = "banded"
) -> FemSolution:
    """Galerkin solution for coefficient and load given as functions of ``(m, 2)`` points."""
    prob = P1Problem(mesh, f, coeff_rule)
    pts, _ = prob.coeff_points()
    return prob.solve(prob.triangle_coeff(coeff(pts)), solver=solver)


def prolong(u: FemSolution, fine: UniformMesh) -> FemSolution:
    """P1 interpolation of ``u`` onto a nested finer mesh."""
    kc, kf = u.mesh.k, fine.k
    if kf < kc:
        raise ValueError("target mesh is coarser than the source")
    if kf == kc:
        return FemSolution(fine, u.values.copy())
    Nc, m = u.mesh.N, 2 ** (kf - kc)
    uc = u.full().reshape(Nc + 1, Nc + 1)  # [iy, ix]
    I = np.arange(fine.N + 1)
    cx = np.minimum(I // m, Nc - 1)
    fr = (I - cx * m) / m
    ix, iy = cx[None, :], cx[:, None]
    fx, fy = fr[None, :], fr[:, None]
    u00, u10 = uc[iy, ix], uc[iy, ix + 1]
    u01, u11 = uc[iy + 1, ix], uc[iy + 1, ix + 1]
    low = (1 - fx) * u00 + (fx - fy) * u10 + fy * u11
    up = (1 - fy) * u00 + (fy - fx) * u01 + fx * u11
    full = np.where(fx >= fy, low, up).ravel()
    return FemSolution(fine, full[fine.interior])


def h1_seminorm(u: FemSolution) -> float:
    v = u.values
    return math.sqrt(max(float(v @ (_problem(u.mesh.k).K1 @ v)), 0.0))


def l2_norm(u: FemSolution) -> float:
    v = u.values
    return math.sqrt(max(float(v @ (_problem(u.mesh.k).M @ v)), 0.0))


def error_vs_exact(u: FemSolution, exact: Callable, grad_exact: Callable) -> tuple[float, float]:
    """``(|u - u_ex|_{H^1}, ||u - u_ex||_{L^2})`` by a degree-4 rule per triangle."""
    mesh = u.mesh
    pts, wts = mesh.quad_points("degree4")
    bary, _ = _RULES["degree4"]
    uv = u.full()[mesh.triangles]  # (n_tri, 3)
    uh = uv @ bary.T  # (n_tri, q)
    grads = np.where(mesh.lower[:, None, None], _GRAD_LOWER, _GRAD_UPPER) / mesh.h
    duh = np.einsum("tv,tvd->td", uv, grads)[:, None, :]
    flat = pts.reshape(-1, 2)
    ue = np.asarray(exact(flat)).reshape(uh.shape)
    ge = np.asarray(grad_exact(flat)).reshape(duh.shape[0], -1, 2)
    area = mesh.h**2 / 2.0
    l2 = area * np.sum(((uh - ue) ** 2) @ wts)
    h1 = area * np.sum(np.sum((duh - ge) ** 2, axis=2) @ wts)
    return math.sqrt(h1), math.sqrt(l2)


def write_solution(path, u: FemSolution) -> None:
    with open(path, "w") as fh:
        fh.write(f"{u.mesh.k} {u.mesh.n_interior}\n")
        for v in u.values:
            fh.write(f"{v!r}\n")
