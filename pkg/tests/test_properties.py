import numpy as np
from hypothesis import given, settings, strategies as st

from isaacs_lab.cli import format_cell
from isaacs_lab.conditions import sigma_xi_norm
from isaacs_lab.coupled_mc import MCConfig, simulate_coupled_pair
from isaacs_lab.families import build_family
from isaacs_lab.fd_solver import Mesh, solve, solve_isaacs
from isaacs_lab.game_model import coupling_drift, coupling_transport
from isaacs_lab.recipes import random_monotone_pair

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_floats_round_trip(x):
    assert float(format_cell(x)) == x


@given(st.lists(finite, min_size=4, max_size=4), st.floats(0, 2 * np.pi))
def test_sigma_xi_norm_is_nonnegative(entries, angle):
    sigma = np.array(entries).reshape(2, 2)
    xi = np.array([np.cos(angle), np.sin(angle)])
    xi = xi / np.linalg.norm(xi)
    assert sigma_xi_norm(sigma, xi) >= -1e-9 * (1 + np.sum(sigma ** 2))


@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_coupling_drift_is_bounded(mu, s, d):
    out = coupling_drift(np.array([[[s]]]), np.array([[d]]), mu)
    assert abs(out[0, 0]) <= mu * abs(s) * min(abs(d), 1.0) * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(-1, 1), st.floats(0.1, 3.0), st.floats(-2, 2))
def test_constant_data_gives_f_over_c(sigma, drift, c, value):
    model, domain = build_family("constant", sigma=sigma, drift=drift, c=c, f=c * value, g=value)
    v = solve(model, Mesh(domain, 41)).solution.padded
    np.testing.assert_allclose(v, value, atol=1e-10 * (1 + abs(value)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_discrete_comparison_principle(seed):
    lo, hi, domain = random_monotone_pair(np.random.default_rng(seed))
    mesh = Mesh(domain, 41)
    gap = solve_isaacs(hi, mesh).solution.padded - solve_isaacs(lo, mesh).solution.padded
    assert np.min(gap) >= -1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(0, 10 ** 6))
def test_paths_reproducible_per_index(seed, index):
    model, _ = build_family("generic")
    cfg = MCConfig(dt=0.01, horizon=0.2, n_paths=2, base_seed=seed, epsilon=0.1)
    tr = coupling_transport(model, 1.0)
    a = simulate_coupled_pair(model, tr, cfg, index)
    b = simulate_coupled_pair(model, tr, cfg, index)
    np.testing.assert_array_equal(a.x_eps, b.x_eps)
    np.testing.assert_allclose(a.z * np.exp(-a.phi_hat), a.rho * np.exp(-a.phi), rtol=1e-12)
