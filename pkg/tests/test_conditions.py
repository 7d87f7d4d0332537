import numpy as np
import pytest

from isaacs_lab.conditions import (check_coupling_condition, check_directional_condition, check_ellipticity,
                                   check_level_set_p_independence, check_untransported_coupling, coupling_pairs,
                                   directional_condition_terms, find_degeneracy_index, sigma_xi_norm, tune_mu)
from isaacs_lab.errors import InputError
from isaacs_lab.families import build_family, tanh_switch_transport
from isaacs_lab.game_model import coupling_transport, identity_transport


def test_sigma_xi_norm_matches_hand_value():
    sigma = np.array([[1.0, 2.0], [3.0, 4.0]])
    xi = np.array([0.6, 0.8])
    # ||sigma||^2 - |xi^T sigma|^2
    expect = 30.0 - np.sum((xi @ sigma) ** 2)
    assert sigma_xi_norm(sigma, xi) == pytest.approx(expect, rel=1e-12)


def test_sigma_xi_norm_rejects_non_unit_direction():
    with pytest.raises(InputError):
        sigma_xi_norm(np.eye(2), np.array([1.0, 1.0]))


def test_coupling_pairs_geometry():
    x, y, xi = coupling_pairs(np.zeros((1, 1)), 0.1, n_t=8)
    d = np.abs(x - y)[:, 0]
    assert d.min() == pytest.approx(1e-4) and d.max() == pytest.approx(0.1)
    np.testing.assert_allclose(np.abs(xi), 1.0)


def test_ellipticity_report_is_mesh_relative():
    model, _ = build_family("generic")
    rep = check_ellipticity(model, n_per_axis=51)
    assert rep.satisfied and rep.mesh
    bad = check_ellipticity(model.replace(delta0=1.0), n_per_axis=51)
    assert not bad.satisfied and bad.worst_margin > 0


def test_generic_coupling_condition_holds_at_mu_one():
    model, _ = build_family("generic")
    rep = check_coupling_condition(model, coupling_transport(model, 1.0), 0.2, 0.0, 1.0, n_per_axis=41, n_t=8)
    assert rep.satisfied
    assert "delta" in rep.to_text()


def test_untransported_form_matches_identity_transport():
    model, _ = build_family("generic")
    a = check_coupling_condition(model, identity_transport(model), 0.2, 0.0, 1.0, n_per_axis=41, n_t=8)
    b = check_untransported_coupling(model, 0.2, 1.0, n_per_axis=41, n_t=8)
    assert a.worst_margin == pytest.approx(b.worst_margin, rel=1e-12, abs=1e-15)


def test_coupling_condition_fails_when_drift_expands_too_fast():
    model, _ = build_family("rotating-noise", drift=3.0)
    rep = check_coupling_condition(model, coupling_transport(model, 1.0), 0.2, 0.0, 1.0, n_per_axis=21, n_t=4)
    assert not rep.satisfied


def test_delta_below_twice_delta1_is_refused():
    model, _ = build_family("generic")
    with pytest.raises(InputError):
        check_coupling_condition(model, None, 0.5, 0.5, 1.0, n_per_axis=11)


def test_mu_below_one_is_flagged():
    model, _ = build_family("generic")
    rep = check_coupling_condition(model, identity_transport(model), 0.2, 0.0, 0.0, n_per_axis=11, n_t=4)
    assert any("below 1" in n for n in rep.notes)


def test_tune_mu_stops_at_first_satisfying_value():
    model, _ = build_family("generic")
    mu, rep = tune_mu(model, 0.2, n_per_axis=41, n_t=8)
    assert mu == 1.0 and rep.satisfied


@pytest.mark.parametrize("b, status, n", [(0.5, "found", 2), (2.0, "violated", None)])
def test_degeneracy_index(b, status, n):
    out = find_degeneracy_index(lambda x: 0 * x, lambda x: b * x, lambda x: 1 + 0 * x)
    assert out.status == status
    if n is not None:
        assert out.n == n
    else:
        assert out.witness == pytest.approx(0.0, abs=1e-12)


def test_tanh_switch_directional_condition_vanishes():
    model, _ = build_family("tanh-switch")
    xs = np.linspace(-1.05, 1.05, 401)
    terms = directional_condition_terms(model, tanh_switch_transport(model), 0.0, 0.0, 0.0, xs)
    # both unit directions +-1 per point
    assert terms.lhs.shape == (64, 802)
    assert np.max(np.abs(terms.lhs)) <= 1e-8


def test_tanh_switch_without_p_field_is_positive():
    model, _ = build_family("tanh-switch")
    xs = np.linspace(-1.05, 1.05, 401)
    terms = directional_condition_terms(model, tanh_switch_transport(model, with_p=False), 0.0, 0.0, 0.0, xs)
    assert np.max(terms.lhs) > 1.0


def test_check_directional_condition_report():
    model, _ = build_family("tanh-switch")
    rep = check_directional_condition(model, tanh_switch_transport(model), 0.0, 0.0, 0.0,
                                      x_sample=np.linspace(-1.05, 1.05, 101))
    assert rep.satisfied


def test_level_set_independence_sampled():
    model, _ = build_family("generic")
    rng = np.random.default_rng(0)
    samples = [(rng.uniform(-1, 1, 1), rng.normal(), rng.normal(size=1), rng.normal(size=(1, 1)))
               for _ in range(20)]
    rep = check_level_set_p_independence(model, samples, [[-1.0], [2.0]])
    assert rep.satisfied and "sampled check only" in rep.notes
