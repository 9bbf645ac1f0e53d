import numpy as np
import pytest

from pointocp import fem
from pointocp.adjoint import Observations, adjoint_load, misfits, solve_adjoint, solve_adjoint_frozen
from pointocp.errors import PointOutsideDomain
from pointocp.fem import P0Function, P1Function
from pointocp.mesh import unit_square_mesh
from pointocp.state import parse_nonlinearity, reduced_jacobian, solve_state

from oracles import poisson_dirac_solve

CUBIC = parse_nonlinearity("cubic(1)")
ZERO = parse_nonlinearity("zero")


def some_state(m, seed=0, nl=CUBIC):
    u = np.random.default_rng(seed).uniform(-10, 10, m.n_triangles)
    y, _ = solve_state(m, nl, P0Function(m, u))
    return y


def test_observations_validation():
    with pytest.raises(ValueError):
        Observations([], [])
    with pytest.raises(ValueError):
        Observations([(0.5, 0.5)], [1.0, 2.0])
    with pytest.raises(ValueError):
        Observations([(0.5, 0.5), (0.5, 0.5)], [1.0, 2.0])
    obs = Observations([(0.5, 0.5)], [1.0])
    with pytest.raises(PointOutsideDomain):
        Observations([(1.0, 0.5)], [1.0]).check_inside((0, 1, 0, 1))
    assert len(obs) == 1


def test_zero_misfit_gives_zero_adjoint():
    m = unit_square_mesh(8)
    y = some_state(m)
    pts = [(0.3, 0.3), (0.6, 0.8)]
    obs = Observations(pts, [fem.point_eval(y, t) for t in pts])
    assert np.abs(misfits(y, obs)).max() == 0
    assert not solve_adjoint(m, CUBIC, y, obs).coefficients.any()
    other = some_state(m, seed=9)
    assert not solve_adjoint_frozen(m, CUBIC, other, obs, y).coefficients.any()


@pytest.mark.parametrize("point", [(0.25, 0.25), (0.37, 0.61), (0.5, 0.5)])
def test_single_point_oracle(point):
    m = unit_square_mesh(12)
    y = some_state(m, nl=ZERO)
    obs = Observations([point], [0.0])
    p = solve_adjoint(m, ZERO, y, obs)
    weight = fem.point_eval(y, point)
    oracle = poisson_dirac_solve(m.vertices, m.triangles, m.boundary_vertex, [point], [weight])
    assert np.abs(p.coefficients - oracle).max() <= 1e-12 * max(1.0, np.abs(oracle).max())


def swap_permutation(n):
    idx = np.arange((n + 1) ** 2)
    i, j = idx % (n + 1), idx // (n + 1)
    return i * (n + 1) + j


def test_swap_symmetry():
    n = 16
    m = unit_square_mesh(n)
    perm = swap_permutation(n)
    np.testing.assert_allclose(m.vertices[perm], m.vertices[:, ::-1])
    # control symmetric under x <-> y
    y = fem.interpolate(m, lambda x, y_: x * y_ * (1 - x) * (1 - y_) * (1 + x + y_))
    pts = [(0.25, 0.75), (0.75, 0.25), (0.3, 0.3)]
    obs = Observations(pts, [1.0, 1.0, -2.0])
    p = solve_adjoint(m, CUBIC, y, obs).coefficients
    assert np.abs(p[perm] - p).max() <= 1e-10


def test_frozen_equals_plain():
    m = unit_square_mesh(8)
    y = some_state(m)
    obs = Observations([(0.25, 0.25), (0.75, 0.5)], [3.0, -3.0])
    np.testing.assert_array_equal(solve_adjoint_frozen(m, CUBIC, y, obs, y).coefficients,
                                  solve_adjoint(m, CUBIC, y, obs).coefficients)


def test_frozen_continuity():
    m = unit_square_mesh(16)
    y = some_state(m)
    obs = Observations([(0.25, 0.25), (0.75, 0.5)], [3.0, -3.0])
    pert = np.random.default_rng(2).standard_normal(m.n_vertices)
    pert[m.boundary_vertex] = 0
    y2 = P1Function(m, y.coefficients + 1e-8 * pert / np.linalg.norm(pert))
    a = solve_adjoint_frozen(m, CUBIC, y, obs, y)
    b = solve_adjoint_frozen(m, CUBIC, y2, obs, y)
    assert fem.norm(a, minus=b) <= 1e-6


def test_linearity_and_superposition():
    m = unit_square_mesh(12)
    y = some_state(m)
    pts = [(0.25, 0.25), (0.6, 0.7)]
    vals = np.array([fem.point_eval(y, t) for t in pts])
    tg = np.array([3.0, -1.0])
    base = solve_adjoint(m, CUBIC, y, Observations(pts, tg)).coefficients
    doubled = solve_adjoint(m, CUBIC, y, Observations(pts, vals - 2 * (vals - tg))).coefficients
    scale = np.abs(base).max()
    assert np.abs(doubled - 2 * base).max() <= 1e-12 * scale
    single = sum(solve_adjoint(m, CUBIC, y, Observations([t], [g])).coefficients for t, g in zip(pts, tg))
    assert np.abs(single - base).max() <= 1e-12 * scale


def test_load_is_sum_of_diracs():
    m = unit_square_mesh(6)
    obs = Observations([(0.2, 0.3), (0.5, 0.5)], [0.0, 0.0])
    b = adjoint_load(m, [2.0, -1.0], obs)
    np.testing.assert_allclose(b, fem.dirac_load(m, (0.2, 0.3), 2.0) + fem.dirac_load(m, (0.5, 0.5), -1.0))


def test_system_matrix_positive_definite():
    m = unit_square_mesh(16)
    A = reduced_jacobian(m, CUBIC, some_state(m))
    x = np.random.default_rng(0).standard_normal(A.shape[0])
    for _ in range(8):
        x = fem.solve_spd(A, x)
        x /= np.linalg.norm(x)
    lam_min = float(x @ (A @ x))
    assert lam_min > 0
    assert lam_min == pytest.approx(np.linalg.eigvalsh(A.toarray()).min(), rel=1e-3)


def test_outside_point_rejected():
    m = unit_square_mesh(4)
    y = some_state(m)
    obs = Observations([(0.5, 1.0)], [0.0])
    with pytest.raises(PointOutsideDomain):
        solve_adjoint(m, CUBIC, y, obs)
