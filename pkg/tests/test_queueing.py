import math

import numpy as np
import pytest

from evqueue.queueing import QueueParams, QueueSolution, erlang_b, offered_load, service_time, solve


def stationary_by_generator_matrix(lam, es, c, n):
    """Independent oracle: solve pi Q = 0 for the birth-death generator directly."""
    mu = 1.0 / es
    q = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        if k < n:
            q[k, k + 1] = lam
        if k > 0:
            q[k, k - 1] = min(k, c) * mu
        q[k, k] = -q[k].sum()
    # append the normalization condition and least-squares the overdetermined system
    a = np.vstack([q.T, np.ones(n + 1)])
    b = np.zeros(n + 2)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi


def mm1n_closed_form(rho, n):
    """Textbook M/M/1/N: geometric weights, closed-form normalization."""
    if rho == 1.0:
        pi = np.full(n + 1, 1.0 / (n + 1))
    else:
        pi = rho ** np.arange(n + 1) * (1 - rho) / (1 - rho ** (n + 1))
    o1 = sum((k - 1) * pi[k] for k in range(2, n + 1))
    return pi, o1


def test_service_time_evaluation():
    # direct evaluation: half of an 82 kWh pack at 22 kW
    assert service_time(0.5, 82.0, 22.0) == pytest.approx(0.5 * 82.0 / 22.0, rel=1e-15)
    assert service_time(1.0, 22.0, 22.0) == 1.0


def test_service_time_energy_cancellation():
    # power x duration returns the requested energy (up to one rounding)
    t = service_time(0.5, 82.0, 22.0)
    assert 22.0 * t == pytest.approx(0.5 * 82.0, rel=1e-15, abs=0.0)


def test_service_time_domain_errors():
    for bad in [(0.0, 82, 22), (0.5, -1, 22), (0.5, 82, 0.0), (1.5, 82, 22)]:
        with pytest.raises(ValueError):
            service_time(*bad)


def test_offered_load():
    assert offered_load(2.0, 0.5) == 1.0
    assert offered_load(0.0, 123.0) == 0.0
    assert offered_load(4.0, service_time(0.5, 82, 22)) == pytest.approx(4 * 41 / 22, rel=1e-15)
    with pytest.raises(ValueError):
        offered_load(1.0, 0.0)
    with pytest.raises(ValueError):
        offered_load(-1.0, 1.0)


def test_three_state_chain_closed_form():
    # c=1, N=2, rho=1: weights (1, 1, 1) normalize to thirds
    sol = solve(QueueParams(1.0, 1.0, 1, 2))
    assert np.allclose(sol.pi, [1 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-15)
    assert sol.mean_queue == pytest.approx(1 / 3, rel=1e-14)
    assert sol.blocking_prob == pytest.approx(1 / 3, rel=1e-14)


def test_two_server_loss_system_closed_form():
    # c=2, N=2, rho=1: weights (1, 1, 1/2) -> (2/5, 2/5, 1/5)
    sol = solve(QueueParams(2.0, 0.5, 2, 2))
    assert np.allclose(sol.pi, [2 / 5, 2 / 5, 1 / 5], rtol=0, atol=1e-15)
    assert sol.blocking_prob == pytest.approx(erlang_b(2, 1.0), rel=1e-14)


def test_zero_arrivals_degenerate():
    sol = solve(QueueParams(0.0, 1.0, 1, 5))
    assert sol.pi[0] == 1.0 and sol.pi[1:].sum() == 0.0
    assert sol.mean_queue == 0.0 and sol.mean_wait_h == 0.0
    assert sol.blocking_prob == 0.0 and sol.effective_arrival_rate == 0.0


def test_mm1_infinite_limit():
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9]:
        sol = solve(QueueParams(rho, 1.0, 1, 500))
        assert sol.mean_queue == pytest.approx(rho * rho / (1 - rho), abs=1e-6)


def test_mm1n_closed_form_oracle():
    for rho, n in [(0.5, 10), (2.0, 7), (1.0, 4), (0.9, 10000)]:
        sol = solve(QueueParams(rho, 1.0, 1, n))
        pi, o1 = mm1n_closed_form(rho, n)
        assert np.allclose(sol.pi, pi, rtol=1e-11, atol=1e-300)
        assert sol.mean_queue == pytest.approx(o1, rel=1e-11, abs=1e-12)


def test_generator_matrix_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        c = int(rng.integers(1, 9))
        n = c + int(rng.integers(0, 32))
        es = float(rng.uniform(0.2, 2.5))
        lam = float(rng.uniform(0, 3.0) * c / es)
        sol = solve(QueueParams(lam, es, c, n))
        pi = stationary_by_generator_matrix(lam, es, c, n)
        assert np.allclose(sol.pi, pi, atol=1e-9)


def test_erlang_b_recursion_values():
    assert erlang_b(1, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert erlang_b(2, 1.0) == pytest.approx(0.2, rel=1e-15)
    assert erlang_b(2, 2.0) == pytest.approx(0.4, rel=1e-15)
    assert erlang_b(5, 0.0) == 0.0
    with pytest.raises(ValueError):
        erlang_b(0, 1.0)


def test_solve_matches_erlang_b_when_no_waiting_room():
    rng = np.random.default_rng(11)
    for _ in range(200):
        c = int(rng.integers(1, 65))
        rho = float(rng.uniform(0, 100))
        es = float(rng.uniform(0.1, 2.0))
        sol = solve(QueueParams(rho / es, es, c, c))
        assert sol.blocking_prob == pytest.approx(erlang_b(c, rho), rel=1e-12, abs=1e-300)


def test_normalization_and_littles_law_random_draws():
    rng = np.random.default_rng(20240501)
    for _ in range(1000):
        c = int(rng.integers(1, 65))
        n = int(rng.integers(c, 1025))
        rho = float(rng.uniform(0, 100))
        es = float(rng.uniform(0.05, 3.0))
        sol = solve(QueueParams(rho / es, es, c, n))
        assert abs(float(sol.pi.sum()) - 1.0) <= 1e-12
        assert np.all(sol.pi >= 0) and np.all(sol.pi <= 1)
        assert abs(sol.mean_queue - sol.effective_arrival_rate * sol.mean_wait_h) <= 1e-9
        assert sol.mean_total_time_h == sol.mean_wait_h + sol.mean_service_h
        assert 0.0 <= sol.blocking_prob <= 1.0
        assert sol.effective_arrival_rate <= rho / es + 1e-12


def test_mean_queue_monotone_in_arrival_rate():
    lams = np.linspace(0.0, 12.0, 40)
    o1 = [solve(QueueParams(float(l), 1.0, 3, 12)).mean_queue for l in lams]
    assert all(b >= a - 1e-12 for a, b in zip(o1, o1[1:]))


def test_mean_queue_monotone_in_servers():
    for c in range(1, 8):
        a = solve(QueueParams(4.0, 1.0, c, 12)).mean_queue
        b = solve(QueueParams(4.0, 1.0, c + 1, 12)).mean_queue
        assert b <= a + 1e-12


def test_large_capacity_stability():
    sol = solve(QueueParams(100.0, 1.0, 1, 10000))
    assert abs(float(sol.pi.sum()) - 1.0) <= 1e-12
    assert sol.blocking_prob == pytest.approx(0.99, rel=1e-10)  # rho=100, c=1: lam_eff -> mu


def test_param_validation():
    with pytest.raises(ValueError):
        QueueParams(1.0, 1.0, 2, 1)  # capacity < servers
    with pytest.raises(ValueError):
        QueueParams(-1.0, 1.0, 1, 1)
    with pytest.raises(ValueError):
        QueueParams(1.0, 0.0, 1, 1)
    with pytest.raises(ValueError):
        QueueParams(math.inf, 1.0, 1, 1)


def test_energy_per_session_uses_power():
    sol = solve(QueueParams(1.0, 41 / 22, 1, 2, charger_power_kw=22.0))
    assert sol.energy_per_session_kwh == pytest.approx(41.0, rel=1e-15)
    sol_no_power = solve(QueueParams(1.0, 1.0, 1, 2))
    assert sol_no_power.energy_per_session_kwh == 0.0
