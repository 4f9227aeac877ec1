import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gevqmc.fem import (
    FemSolution,
    P1Problem,
    SolverError,
    assemble_and_solve,
    build_mesh,
    error_vs_exact,
    h1_seminorm,
    l2_norm,
    prolong,
    write_solution,
)
from gevqmc.studies import fit_rate

PI = math.pi


def exact(x):
    return np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1])


def grad_exact(x):
    return np.column_stack(
        [PI * np.cos(PI * x[:, 0]) * np.sin(PI * x[:, 1]), PI * np.sin(PI * x[:, 0]) * np.cos(PI * x[:, 1])]
    )


def ones(x):
    return np.ones(len(x))


@pytest.mark.parametrize("k,nodes,tris,interior", [(1, 9, 8, 1), (2, 25, 32, 9), (7, 16641, 32768, 16129)])
def test_mesh_counts(k, nodes, tris, interior):
    m = build_mesh(k)
    assert (m.n_nodes, m.triangles.shape[0], m.n_interior) == (nodes, tris, interior)


def test_mesh_geometry_and_nesting():
    m3, m4 = build_mesh(3), build_mesh(4)
    v = m3.nodes[m3.triangles]
    area = 0.5 * np.abs(
        (v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1]) - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1])
    )
    np.testing.assert_allclose(area, m3.h**2 / 2)
    fine = {tuple(p) for p in m4.nodes}
    assert all(tuple(p) in fine for p in m3.nodes)
    with pytest.raises(ValueError):
        build_mesh(0)
    with pytest.raises(ValueError):
        build_mesh(11)


def test_stiffness_properties():
    prob = P1Problem(build_mesh(4))
    A = prob.K1.toarray()
    assert np.abs(A - A.T).max() == 0.0
    assert np.linalg.eigvalsh(A).min() > 0
    # rows of nodes away from the boundary sum to zero
    N = 16
    inner = [(ix - 1) + (iy - 1) * (N - 1) for ix in range(2, N - 1) for iy in range(2, N - 1)]
    assert np.abs(A[inner].sum(axis=1)).max() < 1e-13


def test_hat_function_norm():
    u = FemSolution(build_mesh(1), np.array([1.0]))
    assert h1_seminorm(u) ** 2 == pytest.approx(4.0, rel=1e-15)
    # P1 mass on the 6 incident triangles: 6 * (h^2/2) * 2/12 with h = 1/2
    assert l2_norm(u) ** 2 == pytest.approx(6 * 0.125 / 6, rel=1e-15)


def test_manufactured_solution_rates():
    pts_h1, pts_l2 = [], []
    for k in range(2, 7):
        u = assemble_and_solve(build_mesh(k), ones, lambda x: 2 * PI**2 * exact(x))
        e1, e0 = error_vs_exact(u, exact, grad_exact)
        pts_h1.append((2.0**-k, e1))
        pts_l2.append((2.0**-k, e0))
    assert 0.95 <= fit_rate(pts_h1).slope <= 1.05
    assert 1.9 <= fit_rate(pts_l2).slope <= 2.1


def test_zero_load_and_scaling():
    m = build_mesh(3)
    zero = assemble_and_solve(m, ones, lambda x: np.zeros(len(x)))
    assert np.all(zero.values == 0)
    coeff = lambda x: 1.0 + x[:, 0] ** 2  # noqa: E731
    u1 = assemble_and_solve(m, coeff, lambda x: x[:, 1])
    u3 = assemble_and_solve(m, lambda x: 3.0 * coeff(x), lambda x: x[:, 1])
    np.testing.assert_allclose(u3.values, u1.values / 3.0, rtol=1e-13)


@pytest.mark.parametrize("solver", ["banded", "direct", "cg"])
def test_solvers_agree_and_residual(solver, rng):
    prob = P1Problem(build_mesh(4))
    a = rng.uniform(0.2, 5.0, 2 * 16**2)
    u = prob.solve(a, solver=solver)
    A = prob.stiffness(a)
    assert np.linalg.norm(A @ u.values - prob.load) <= 1e-10 * np.linalg.norm(prob.load)
    ref = prob.solve(a, solver="direct")
    np.testing.assert_allclose(u.values, ref.values, rtol=1e-10, atol=1e-16)


def test_solve_rejects_nonpositive():
    prob = P1Problem(build_mesh(2))
    a = np.ones(32)
    a[3] = 0.0
    with pytest.raises(SolverError):
        prob.solve(a)


def test_three_point_rule_exact_for_linear_coeff():
    m = build_mesh(3)
    c = lambda x: 1.0 + x[:, 0] + 2 * x[:, 1]  # noqa: E731
    a = assemble_and_solve(m, c, lambda x: x[:, 1], coeff_rule="centroid")
    b = assemble_and_solve(m, c, lambda x: x[:, 1], coeff_rule="3point")
    np.testing.assert_allclose(a.values, b.values, rtol=1e-13)


def test_prolong_identity_and_composition():
    m = build_mesh(3)
    u = assemble_and_solve(m, ones, lambda x: x[:, 1])
    same = prolong(u, m)
    np.testing.assert_array_equal(same.values, u.values)
    two = prolong(prolong(u, build_mesh(4)), build_mesh(5))
    one = prolong(u, build_mesh(5))
    np.testing.assert_allclose(two.values, one.values, atol=1e-15)
    with pytest.raises(ValueError):
        prolong(one, m)


def test_prolong_reproduces_piecewise_linear():
    # a function that is linear on each coarse triangle, zero on the boundary
    mc, mf = build_mesh(2), build_mesh(5)
    bubble = lambda x: np.minimum.reduce([x[:, 0], x[:, 1], 1 - x[:, 0], 1 - x[:, 1]])  # noqa: E731
    # bubble is not P1 on the diagonal split, so interpolate on the coarse mesh first and compare to its P1 formula
    uc = FemSolution(mc, bubble(mc.nodes[mc.interior]))
    uf = prolong(uc, mf)
    # x1 * (1 - x1) interpolant check: nodal values of the coarse interpolant are recovered at shared nodes
    coarse_full = uc.full()
    fine_full = uf.full()
    N, m = mc.N, 2 ** (mf.k - mc.k)
    for iy in range(N + 1):
        for ix in range(N + 1):
            assert fine_full[ix * m + iy * m * (mf.N + 1)] == coarse_full[ix + iy * (N + 1)]
    # and the H1 seminorm is preserved exactly, since the interpolant is the same function
    assert h1_seminorm(uf) == pytest.approx(h1_seminorm(uc), rel=1e-12)
    assert l2_norm(uf) == pytest.approx(l2_norm(uc), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_prolong_exact_for_p1_functions(a, b, c):
    # any coarse P1 function: interpolate random nodal values and compare at fine nodes with the formula
    mc, mf = build_mesh(1), build_mesh(3)
    u = FemSolution(mc, np.array([a]))
    uf = prolong(u, mf)
    x = mf.nodes[mf.interior]
    hat = np.where(
        x[:, 0] >= x[:, 1],
        np.minimum(2 * x[:, 1], np.minimum(2 - 2 * x[:, 0], 1 - 2 * (x[:, 0] - x[:, 1]))),
        np.minimum(2 * x[:, 0], np.minimum(2 - 2 * x[:, 1], 1 - 2 * (x[:, 1] - x[:, 0]))),
    )
    hat = np.clip(hat, 0, None)
    np.testing.assert_allclose(uf.values, a * hat, atol=1e-14)
    assert h1_seminorm(uf) == pytest.approx(abs(a) * 2.0, rel=1e-12, abs=1e-14)


def test_prolonged_norm_trend():
    vals = []
    for k in (2, 3, 4, 5):
        u = assemble_and_solve(build_mesh(k), ones, lambda x: 2 * PI**2 * exact(x))
        vals.append(h1_seminorm(prolong(u, build_mesh(6))))
    target = PI / math.sqrt(2)
    errs = [abs(v - target) for v in vals]
    assert all(x > y for x, y in zip(errs, errs[1:]))


def test_difference_norms_zero():
    u = assemble_and_solve(build_mesh(3), ones, lambda x: x[:, 1])
    d = u - u
    assert h1_seminorm(d) == 0.0 and l2_norm(d) == 0.0


def test_write_solution(tmp_path):
    u = assemble_and_solve(build_mesh(2), ones, lambda x: x[:, 1])
    write_solution(tmp_path / "u.txt", u)
    lines = (tmp_path / "u.txt").read_text().splitlines()
    assert lines[0] == "2 9" and len(lines) == 10
