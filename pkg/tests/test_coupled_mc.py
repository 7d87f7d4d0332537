import numpy as np
import pytest

from isaacs_lab.coupled_mc import (MCConfig, estimate_exit_decay, estimate_J_I, estimate_rho_sup,
                                   estimate_squared_moment, path_generator, run_paths, simulate_coupled_pair,
                                   verify_representation)
from isaacs_lab.coupled_mc import _JIObserver
from isaacs_lab.errors import ConditionNotMetError, InputError
from isaacs_lab.families import build_family
from isaacs_lab.fd_solver import Mesh, solve
from isaacs_lab.game_model import coupling_transport, identity_transport


@pytest.fixture(scope="module")
def ou():
    return build_family("ou")[0]


def test_config_validation():
    with pytest.raises(InputError):
        MCConfig(xi=(1.0, 1.0), y0=(0.0, 0.0))
    with pytest.raises(InputError):
        MCConfig(bigM=1.0)
    with pytest.raises(InputError):
        MCConfig(base_seed=-1)
    assert MCConfig(dt=0.1, horizon=1.0).n_steps(build_family("ou")[0]) == 10


def test_path_streams_are_counter_based():
    a = path_generator(7, 3).standard_normal(5)
    b = path_generator(7, 3).standard_normal(5)
    c = path_generator(7, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_zero_epsilon_paths_coincide(ou):
    cfg = MCConfig(dt=0.01, horizon=1.0, n_paths=2, epsilon=0.0)
    rec = simulate_coupled_pair(ou, coupling_transport(ou, 1.0), cfg, 0)
    np.testing.assert_array_equal(rec.x_eps, rec.x_0)
    np.testing.assert_array_equal(rec.xi_eps, 0.0)


def test_lambda_below_epsilon_gives_immediate_kappa(ou):
    cfg = MCConfig(dt=0.01, horizon=1.0, n_paths=2, epsilon=0.1, lam=0.05)
    rec = simulate_coupled_pair(ou, coupling_transport(ou, 1.0), cfg, 0)
    assert rec.kappa_time == 0.0


def test_ou_difference_contracts_deterministically(ou):
    dt = 2.0 ** -6
    cfg = MCConfig(dt=dt, horizon=1.0, n_paths=2, epsilon=0.01, lam=1.0)
    rec = simulate_coupled_pair(ou, coupling_transport(ou, 1.0), cfg, 5)
    n = np.arange(rec.times.size)
    np.testing.assert_allclose(rec.xi_eps[:, 0], (1 - 2 * dt) ** n, rtol=1e-10)


def test_weight_identity_holds_along_paths():
    model, _ = build_family("generic")
    cfg = MCConfig(dt=1e-3, horizon=0.5, n_paths=2, epsilon=0.2, lam=1.0)
    rec = simulate_coupled_pair(model, coupling_transport(model, 1.0), cfg, 1)
    np.testing.assert_allclose(rec.z * np.exp(-rec.phi_hat), rec.rho * np.exp(-rec.phi), rtol=1e-12)


def test_shared_noise_drives_both_paths(ou):
    # identity transport, constant sigma: x - y only feels the drift difference
    cfg = MCConfig(dt=0.01, horizon=0.5, n_paths=2, epsilon=0.1, lam=10.0)
    rec = simulate_coupled_pair(ou, identity_transport(ou), cfg, 2)
    n = np.arange(rec.times.size)
    np.testing.assert_allclose(rec.xi_eps[:, 0], (1 - 0.01) ** n, rtol=1e-10)


def test_results_do_not_depend_on_chunking(ou):
    tr = coupling_transport(ou, 1.0)
    cfg = MCConfig(dt=0.01, horizon=1.0, n_paths=20, epsilon=0.01, delta=2.0)
    a, _ = run_paths(ou, tr, cfg, lambda: _JIObserver(cfg.epsilon, cfg.delta, cfg.dt))
    b, _ = run_paths(ou, tr, cfg, lambda: _JIObserver(cfg.epsilon, cfg.delta, cfg.dt), chunk=3)
    np.testing.assert_array_equal(a["values"], b["values"])


def test_ou_path_integral_is_exact(ou):
    dt = 2.0 ** -8
    cfg = MCConfig(dt=dt, horizon=20.0, n_paths=50, epsilon=0.01, delta=2.0)
    J, I = estimate_J_I(ou, coupling_transport(ou, 1.0), cfg)
    N = cfg.n_steps(ou)
    exact = (1 - (1 - 2 * dt) ** N) / 2
    assert J.estimate == pytest.approx(exact, rel=1e-12)
    assert J.within_bound and I.estimate == pytest.approx(1.0)


def test_delta_below_twice_delta1_is_refused(ou):
    with pytest.raises(InputError):
        estimate_J_I(ou, coupling_transport(ou, 1.0), MCConfig(dt=0.1, horizon=1.0, n_paths=4, delta=1.0))


def test_failed_precheck_raises():
    model, _ = build_family("rotating-noise", drift=3.0)
    cfg = MCConfig(dt=0.01, horizon=0.1, n_paths=4, delta=2.0)
    with pytest.raises(ConditionNotMetError):
        estimate_exit_decay(model, coupling_transport(model, 1.0), cfg)


def test_exit_decay_edge_case_is_one():
    model, _ = build_family("generic")
    cfg = MCConfig(dt=0.01, horizon=1.0, n_paths=10, epsilon=0.05, lam=0.05, delta=2.0)
    assert estimate_exit_decay(model, coupling_transport(model, 1.0), cfg).estimate == 1.0


def test_rho_sup_vanishes_without_drift_correction():
    model, _ = build_family("generic")
    model = model.replace(delta1=0.5)
    cfg = MCConfig(dt=0.01, horizon=1.0, n_paths=50, epsilon=0.01, lam=0.05, delta=1.0, bigM=4.0)
    assert estimate_rho_sup(model, identity_transport(model), cfg).estimate == 0.0
    assert estimate_rho_sup(model, coupling_transport(model, 1.0), cfg).estimate > 0.0


def test_squared_moment_below_one(ou):
    dt = 2.0 ** -7
    cfg = MCConfig(dt=dt, horizon=1.0, n_paths=50, epsilon=0.01, delta=2.0)
    rep = estimate_squared_moment(ou, coupling_transport(ou, 1.0), cfg)
    # xi contracts by (1 - 2 dt) per step; discount and delta weight cancel at c = 1, delta = 2
    exact = (1 - 2 * dt) ** (2 * cfg.n_steps(ou))
    assert rep.within_bound and rep.estimate == pytest.approx(exact, rel=1e-9)


def test_representation_with_constant_value(ou):
    # f = c = g = 1: v = 1 everywhere, target z0
    oracle = solve(ou, Mesh(build_family("ou")[1], 801))
    cfg = MCConfig(dt=1e-2, horizon=0.5, n_paths=2000, epsilon=0.2, lam=1.0, bigM=4.0, z0=1.5, delta=2.0)
    rep = verify_representation(ou, coupling_transport(ou, 1.0), cfg, oracle)
    assert rep.bound == pytest.approx(1.5, rel=1e-9)
    assert rep.within_bound


def test_representation_needs_finite_horizon(ou):
    oracle = solve(ou, Mesh(build_family("ou")[1], 101))
    with pytest.raises(InputError):
        verify_representation(ou, coupling_transport(ou, 1.0), MCConfig(n_paths=4), oracle)
