"""Acceptance gate. Each test records one pass/fail line at the stated tolerance."""

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from curveform import fileio
from curveform.control import (
    Gains,
    agent_control,
    compute_errors,
    difference_control,
    stacked_control,
)
from curveform.curves import (
    BasisFamily,
    SampleSet,
    assign_parameters,
    evaluate_curve,
    fit_coefficients,
    pseudoinverse,
    stack_basis,
)
from curveform.dynamics import block_input_matrix, input_matrix
from curveform.simulation import InitialConditions, run_scenario
from curveform.topology import build_laplacian, extend_matrix, leader_selector, random_rooted_digraph, theorem1_matrices

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
TOL = 1e-2


def timed_run(name):
    scenario, _ = fileio.load_scenario(SCENARIOS / f"{name}.toml")
    t0 = time.perf_counter()
    log = run_scenario(scenario)
    return log, time.perf_counter() - t0


@pytest.fixture(scope="module")
def closed_run():
    return timed_run("closed_curve")


@pytest.fixture(scope="module")
def open_run():
    return timed_run("open_curve")[0]


@pytest.fixture(scope="module")
def switch_run():
    return timed_run("curve_switch")[0]


def test_c01_closed_curve(closed_run, record):
    log, elapsed = closed_run
    e0, e1 = log.error_norm[0], log.error_norm[-1]
    ok = e1 < TOL and e1 < 0.01 * e0 and elapsed < 10.0
    record(1, "closed-curve reproduction", ok,
           f"|x_e|(100)={e1:.3e} (<1e-2), ratio={e1 / e0:.3e} (<1e-2), runtime={elapsed:.2f}s (<10s)")
    assert ok


def test_c02_disturbance_recovery(closed_run, record):
    log, _ = closed_run
    worst = log.disturbance_errors().max()
    ok = worst < TOL
    record(2, "disturbance recovery", ok, f"max |k2 dhat - d|={worst:.3e} (<1e-2)")
    assert ok


def test_c03_orientation_settling(closed_run, record):
    log, _ = closed_run
    tail = log.times >= log.times[-1] - 5.0
    worst = np.abs(log.heading_rates[tail]).max()
    ok = worst < 1e-3
    record(3, "orientation settling", ok, f"max |omega + d2| over final 5 s={worst:.3e} (<1e-3)")
    assert ok


def test_c04_open_curve(open_run, record):
    e1 = open_run.error_norm[-1]
    ok = e1 < TOL
    record(4, "open-curve reproduction", ok, f"|x_e|(100)={e1:.3e} (<1e-2)")
    assert ok


def test_c05_curve_switch(switch_run, record):
    log = switch_run
    (k,) = log.switch_steps()
    before, after, end = log.error_norm[k - 1], log.error_norm[k], log.error_norm[-1]
    ok = before < TOL and after > before and end < TOL
    record(5, "curve-switch reproduction", ok,
           f"|x_e| before switch={before:.3e} (<1e-2), at switch={after:.3e} (jump), at 150 s={end:.3e} (<1e-2)")
    assert ok


def test_c06_lyapunov_monotone(closed_run, open_run, switch_run, record):
    parts = []
    worst = -np.inf
    for name, log in (("closed", closed_run[0]), ("open", open_run), ("switch", switch_run)):
        margin = np.diff(log.lyapunov) - 1e-6 * log.scenario.dt
        for k in log.switch_steps():
            margin[k - 1] = -np.inf
        worst = max(worst, margin.max())
        parts.append(f"{name} {int((margin > 0).sum())} rises")
    ok = worst <= 0.0
    record(6, "Lyapunov monotonicity", ok,
           f"max V(k+1) - V(k) - 1e-6 dt={worst:.3e} (<=0); " + ", ".join(parts))
    assert ok


def test_c07_weight_matrix_suite(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = np.inf
    for _ in range(100):
        n = int(rng.integers(1, 11))
        thm = theorem1_matrices(build_laplacian(random_rooted_digraph(n, rng)), leader_selector(n))
        sym = 0.5 * (thm.Q + thm.Q.T)
        worst = min(worst, np.linalg.eigvalsh(thm.P).min(), np.linalg.eigvalsh(sym).min())
    elapsed = time.perf_counter() - t0
    ok = worst > 1e-12 and elapsed < 5.0
    record(7, "Lyapunov weight-matrix suite", ok, f"min eigenvalue={worst:.3e} (>1e-12), runtime={elapsed:.2f}s (<5s)")
    assert ok


def test_c08_controller_forms(record):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 9))
        while 2 * m + 1 < n:
            m += 1
        fam = BasisFamily.fourier(m)
        topo = random_rooted_digraph(n, rng)
        G = stack_basis(fam, assign_parameters(n)).matrix
        xi = rng.normal(size=fam.n_coefficients)
        x_bar = G @ xi + rng.normal(size=2 * n)
        thetas = rng.uniform(0, 2 * np.pi, n)
        ell = rng.uniform(0.01, 1.0)
        dh = rng.normal(size=(n, 2))
        gains = Gains(rng.uniform(0.1, 3), rng.uniform(0.1, 3))
        err = compute_errors(x_bar, G, pseudoinverse(G), xi)
        stacked = stacked_control(err.position, err.coefficient, dh, extend_matrix(build_laplacian(topo)),
                                  extend_matrix(leader_selector(n)), block_input_matrix(thetas, ell), G,
                                  gains).reshape(n, 2)
        for i in range(n):
            Ri = input_matrix(thetas[i], ell)
            a = agent_control(i, topo, G, xi, x_bar, err.coefficient, dh[i], Ri, gains)
            b = difference_control(i, topo, err.position, dh[i], Ri, gains)
            worst = max(worst, np.abs(a - stacked[i]).max(), np.abs(b - stacked[i]).max())
    ok = worst < 1e-10
    record(8, "controller-form equivalence", ok, f"max disagreement={worst:.3e} (<1e-10)")
    assert ok


def _penrose_residuals(rng, families):
    ident = penrose = 0.0
    for _ in range(100):
        fam, n = families(rng)
        # one parameter per stratum keeps the stack full rank
        s = (np.arange(n) + rng.uniform(0.1, 0.9, n)) / n
        G = stack_basis(fam, s).matrix
        Gp = pseudoinverse(G)
        ident = max(ident, np.abs(G @ Gp - np.eye(2 * n)).max())
        penrose = max(
            penrose,
            np.abs(G @ Gp @ G - G).max(),
            np.abs(Gp @ G @ Gp - Gp).max(),
            np.abs((G @ Gp).T - G @ Gp).max(),
            np.abs((Gp @ G).T - Gp @ G).max(),
        )
    return ident, penrose


def _package_families(rng):
    # the orders used for shapes here: Fourier up to 8 harmonics, polynomial up to degree 6
    if rng.random() < 0.5:
        m = int(rng.integers(1, 9))
        return BasisFamily.fourier(m), int(rng.integers(1, min(2 * m + 1, 10) + 1))
    d = int(rng.integers(1, 7))
    return BasisFamily.polynomial(d), int(rng.integers(1, d + 2))


def _high_degree_monomials(rng):
    d = int(rng.integers(7, 12))
    return BasisFamily.polynomial(d), int(rng.integers(6, min(d + 1, 10) + 1))


def test_c09_pseudoinverse(record):
    ident, penrose = _penrose_residuals(np.random.default_rng(9), _package_families)
    # diagnostic only: monomial stacks past degree 6 have condition numbers up to ~1e8
    _, hi_penrose = _penrose_residuals(np.random.default_rng(9), _high_degree_monomials)
    ok = ident < 1e-10 and penrose < 1e-10
    record(9, "pseudoinverse identity", ok,
           f"|G G+ - I|max={ident:.3e}, Penrose={penrose:.3e} (<1e-10); "
           f"degree 7-11 monomials (not gated) Penrose={hi_penrose:.1e}")
    assert ok


def test_c10_exact_fit(record):
    rng = np.random.default_rng(10)
    worst = 0.0
    for m in range(2, 9):
        for _ in range(5):
            fam = BasisFamily.fourier(m)
            xi = rng.normal(size=fam.n_coefficients)
            s = rng.uniform(0, 1, fam.n_coefficients + 5)
            xi_hat = fit_coefficients(SampleSet(s, evaluate_curve(fam, xi, s)), fam)
            worst = max(worst, np.abs(xi_hat - xi).max())
    ok = worst < 1e-8
    record(10, "exact fit recovery", ok, f"max |xi_hat - xi|={worst:.3e} (<1e-8)")
    assert ok


def test_c11_equilibrium(record):
    scenario, _ = fileio.load_scenario(SCENARIOS / "closed_curve.toml")
    scenario = replace(scenario, disturbances=(0.0, 0.0), duration=10.0,
                       initial=InitialConditions(on_target=True, delta_hat=(0.0, 0.0)))
    log = run_scenario(scenario)
    drift = max(np.abs(log.poses - log.poses[0]).max(), np.abs(log.estimates).max())
    ok = drift < 1e-9
    record(11, "equilibrium stationarity", ok, f"max state drift over 10 s={drift:.3e} (<1e-9)")
    assert ok


def test_c12_determinism(closed_run, tmp_path, record):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    fileio.write_trajectory_csv(first, closed_run[0])
    fileio.write_trajectory_csv(second, timed_run("closed_curve")[0])
    ok = first.read_bytes() == second.read_bytes()
    record(12, "determinism", ok, f"trajectory CSVs byte-identical: {ok}")
    assert ok
