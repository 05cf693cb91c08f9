import numpy as np
import pytest

from curveform.control import (
    FormationController,
    Gains,
    agent_control,
    compute_errors,
    difference_control,
    disturbance_error,
    lyapunov_rate,
    lyapunov_value,
    observer_update,
    stacked_control,
)
from curveform.curves import BasisFamily, ParametricCurve, assign_parameters, pseudoinverse, stack_basis
from curveform.dynamics import block_input_matrix, input_matrix, step_state, virtual_point
from curveform.errors import ConfigurationError, InvalidArgument
from curveform.topology import (
    DirectedTopology,
    build_laplacian,
    chain,
    extend_matrix,
    leader_selector,
    random_rooted_digraph,
    theorem1_matrices,
)


def random_setup(rng, n_max=8):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers((n + 1) // 2, (n + 1) // 2 + 3))
    fam = BasisFamily.fourier(max(m, 1))
    topo = random_rooted_digraph(n, rng)
    G = stack_basis(fam, assign_parameters(n)).matrix
    xi = rng.normal(size=fam.n_coefficients)
    return n, fam, topo, G, xi


def test_gains_validation():
    with pytest.raises(InvalidArgument):
        Gains(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        Gains(1.0, float("nan"))


def test_errors_shape_check():
    G = stack_basis(BasisFamily.fourier(1), [0.0]).matrix
    with pytest.raises(InvalidArgument):
        compute_errors(np.zeros(4), G, pseudoinverse(G), np.zeros(6))


def test_leader_control_example():
    # leader at its target with zero estimate receives no command
    G = stack_basis(BasisFamily.fourier(1), [0.0, 0.5]).matrix
    xi = np.arange(6.0)
    x_bar = G @ xi
    u = agent_control(0, chain(2), G, xi, x_bar, np.zeros(6), np.zeros(2), np.eye(2), Gains())
    np.testing.assert_array_equal(u, [0, 0])
    u = agent_control(0, chain(2), G, xi, x_bar + [1, -2, 0, 0], np.zeros(6), np.zeros(2), np.eye(2), Gains(2, 1))
    np.testing.assert_allclose(u, [-2, 4])


def test_follower_without_neighbours_rejected():
    topo = DirectedTopology(np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        difference_control(1, topo, np.zeros(4), np.zeros(2), np.eye(2), Gains())


@pytest.mark.parametrize("seed", range(20))
def test_control_forms_agree(seed):
    rng = np.random.default_rng(seed)
    n, fam, topo, G, xi = random_setup(rng)
    Gp = pseudoinverse(G)
    ell = rng.uniform(0.01, 1)
    thetas = rng.uniform(0, 2 * np.pi, n)
    x_bar = G @ xi + rng.normal(size=2 * n)
    dh = rng.normal(size=(n, 2))
    gains = Gains(rng.uniform(0.1, 3), rng.uniform(0.1, 3))
    err = compute_errors(x_bar, G, Gp, xi)
    R = block_input_matrix(thetas, ell)
    stacked = stacked_control(err.position, err.coefficient, dh, extend_matrix(build_laplacian(topo)),
                              extend_matrix(leader_selector(n)), R, G, gains).reshape(n, 2)
    for i in range(n):
        Ri = input_matrix(thetas[i], ell)
        a = agent_control(i, topo, G, xi, x_bar, err.coefficient, dh[i], Ri, gains)
        b = difference_control(i, topo, err.position, dh[i], Ri, gains)
        np.testing.assert_allclose(a, stacked[i], atol=1e-10)
        np.testing.assert_allclose(b, stacked[i], atol=1e-10)


@pytest.mark.parametrize("form", ["xi", "difference"])
def test_controller_evaluate_matches_stacked(form):
    rng = np.random.default_rng(7)
    n, fam, topo, G, xi = random_setup(rng)
    ell, gains = 0.2, Gains(1.5, 0.5)
    ctrl = FormationController(ParametricCurve(fam, xi), topo, gains, ell, form)
    poses = rng.normal(size=(n, 3))
    dh = rng.normal(size=(n, 2))
    u, u_bar, x_e, rate = ctrl.evaluate(poses, dh)
    x_bar = virtual_point(poses, ell).ravel()
    err = compute_errors(x_bar, G, pseudoinverse(G), xi)
    R = block_input_matrix(poses[:, 2], ell)
    expected = stacked_control(err.position, err.coefficient, dh, extend_matrix(ctrl.L),
                               extend_matrix(ctrl.Lambda), R, G, gains)
    np.testing.assert_allclose(u_bar.ravel(), expected, atol=1e-10)
    np.testing.assert_allclose(R @ u.ravel(), expected, atol=1e-10)
    np.testing.assert_allclose(rate.ravel(), gains.k2 * R.T @ err.position, atol=1e-12)


def test_observer_examples():
    np.testing.assert_allclose(observer_update([0, 0], np.eye(2), [1, 0], [0, 0], 1.0, 0.1), [0.1, 0])
    np.testing.assert_array_equal(observer_update([0.3, 0.4], np.eye(2), [2, 2], [2, 2], 1.0, 0.1), [0.3, 0.4])
    with pytest.raises(InvalidArgument):
        observer_update([0, 0], np.eye(2), [1, 0], [0, 0], 1.0, 0.0)


def test_lyapunov_value_example():
    assert lyapunov_value([3, 4], [0, 0], np.eye(1)) == 25.0
    assert lyapunov_value([0, 0], [1, 0], np.diag([2.0])) == 2.0


def test_estimate_cancels_disturbance():
    # with dhat = d / k2 the compensation equals R d exactly
    rng = np.random.default_rng(1)
    k2, ell = 0.75, 0.01
    for _ in range(10):
        th, d = rng.uniform(0, 6), rng.normal(size=2)
        Ri = input_matrix(th, ell)
        dh = d / k2
        np.testing.assert_allclose(k2 * Ri @ dh - Ri @ d, 0, atol=1e-14)
        np.testing.assert_allclose(disturbance_error(dh, d, k2), 0, atol=1e-15)


@pytest.mark.parametrize("k1,k2", [(1.0, 1.0), (2.5, 0.6)])
def test_lyapunov_rate_matches_finite_difference(k1, k2):
    rng = np.random.default_rng(11)
    n = 5
    fam = BasisFamily.fourier(3)
    topo = random_rooted_digraph(n, rng)
    curve = ParametricCurve(fam, rng.normal(size=fam.n_coefficients))
    ell = 0.5
    ctrl = FormationController(curve, topo, Gains(k1, k2), ell)
    thm = theorem1_matrices(ctrl.L, ctrl.Lambda)
    d = rng.normal(size=(n, 2))
    poses = np.column_stack([ctrl.targets + rng.normal(size=(n, 2)), rng.uniform(0, 6, n)])
    dh = rng.normal(size=(n, 2))

    def V(poses_, dh_):
        return lyapunov_value(virtual_point(poses_, ell) - ctrl.targets, disturbance_error(dh_, d, k2), thm.P)

    h = 1e-6
    u, _, x_e, rate = ctrl.evaluate(poses, dh)
    p1 = step_state(poses, u, d, h, "rk4")
    fd = (V(p1, dh + h * rate) - V(poses, dh)) / h
    analytic = lyapunov_rate(x_e, thm.Q, k1)
    assert analytic < 0
    assert fd == pytest.approx(analytic, rel=1e-4)
