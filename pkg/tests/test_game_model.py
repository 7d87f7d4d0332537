import numpy as np
import pytest

from isaacs_lab.errors import BarrierNotFoundError, ConfigurationError, InputError
from isaacs_lab.families import build_family, tanh_switch_transport
from isaacs_lab.game_model import (ControlGrid, Domain, build_barrier, check_transform, coupling_drift,
                                   coupling_transport, differential_transport, hamiltonian, hat_coefficients,
                                   identity_transport)


def test_control_grid_rejects_duplicates_and_overlap():
    with pytest.raises(ConfigurationError):
        ControlGrid((1, 1), (0,))
    with pytest.raises(ConfigurationError):
        ControlGrid((1, 2), (0,), (2,))
    g = ControlGrid((1,), (0, 1), ("aux",))
    assert g.alphas == (1, "aux")
    assert len(g.pairs()) == 4
    assert not g.is_singleton


def test_coefficients_shapes_and_diffusion_matrix():
    model, _ = build_family("generic")
    x = np.linspace(-1, 1, 5)
    co = model.coefficients("0", "0", x)
    assert co.sigma.shape == (5, 1, 1)
    np.testing.assert_allclose(co.a[:, 0, 0], 0.5 * (1 + 0.1 * np.sin(x)) ** 2)
    np.testing.assert_allclose(co.b[:, 0], -x + 0.3 * np.cos(x))


def test_validate_detects_negative_discount():
    model, _ = build_family("constant")
    bad = model.replace(c=lambda a, b, p, x: np.full(x.shape[0], -1.0), delta1=0.0)
    with pytest.raises(ConfigurationError, match="c < 0"):
        bad.validate(np.linspace(-1, 1, 11))


def test_validate_detects_ellipticity_violation():
    model, _ = build_family("constant", sigma=1.0)
    with pytest.raises(ConfigurationError, match="ellipticity"):
        model.replace(delta0=1.0).validate(np.linspace(-1, 1, 11))


def test_hamiltonian_sup_inf_on_drift_sign_game():
    model, _ = build_family("drift-sign-game")
    # with du > 0 the maximizer pushes right, the minimizer brakes
    h = hamiltonian(model, None, [0.3], 0.0, [1.0], [[0.0]])
    assert h.alpha == 1.0 and h.beta == 1.0
    assert h.value == pytest.approx(0.5 + np.tanh(0.3) ** 2)


def test_hamiltonian_rejects_asymmetric_hessian():
    model, _ = build_family("constant", dim=2)
    with pytest.raises(InputError):
        hamiltonian(model, None, [[0.0, 0.0]], 0.0, [0.0, 0.0], [[0.0, 1.0], [0.0, 0.0]])


def test_identity_transport_leaves_coefficients_unchanged():
    model, _ = build_family("generic")
    tr = identity_transport(model)
    x = np.linspace(-1, 1, 7).reshape(-1, 1)
    hat = hat_coefficients(model, tr, "0", "0", x, x[::-1])
    co = model.coefficients("0", "0", x)
    np.testing.assert_array_equal(hat.sigma, co.sigma)
    np.testing.assert_array_equal(hat.c, co.c)


def test_transports_are_identity_on_the_diagonal():
    model, _ = build_family("tanh-switch")
    pts = np.linspace(-2, 2, 21)
    for tr in (identity_transport(model), coupling_transport(model, 2.0), tanh_switch_transport(model)):
        tr.validate(model.controls, pts)


def test_coupling_drift_is_clipped_beyond_unit_distance():
    sig = np.ones((2, 1, 1))
    out = coupling_drift(sig, np.array([[0.5], [3.0]]), 2.0)
    np.testing.assert_allclose(out[:, 0], [1.0, 2.0])


def test_differential_transport_rotation_is_orthogonal():
    model, _ = build_family("rotating-noise")
    tr = differential_transport(model, theta=lambda a, b, y, d: np.einsum("m,ij->mij", d[:, 0],
                                                                          np.array([[0.0, -1.0], [1.0, 0.0]])))
    x = np.linspace(-1, 1, 9).reshape(-1, 1)
    tr.validate(model.controls, (x, np.zeros_like(x)))


def test_hat_coefficients_scale_with_r_squared():
    model, _ = build_family("generic")
    tr = differential_transport(model, r_diff=lambda a, b, y: np.full((y.shape[0], 1), 0.5))
    x, y = np.array([[0.4]]), np.array([[0.0]])
    hat = hat_coefficients(model, tr, "0", "0", x, y)
    co = model.coefficients("0", "0", x)
    r = 1.0 + 0.5 * 0.4
    assert hat.c[0] == pytest.approx(r * r * co.c[0])
    assert hat.sigma[0, 0, 0] == pytest.approx(r * co.sigma[0, 0, 0])


def test_domain_contains_and_grid():
    d = Domain.interval(-1.0, 2.0)
    assert d.contains([[0.0], [2.5]]).tolist() == [True, False]
    assert d.grid(5).shape == (5, 1)
    w = Domain.whole_space(1, 4.0)
    assert not w.bounded and w.with_radius(8.0).truncation_radius == 8.0


def test_barrier_certificate_and_extension_floor():
    model, domain = build_family("linear", sigma=1.0, b1=0.3, c=0.2)
    bar = build_barrier(model, domain)
    assert bar.verified_margin <= -1.0
    s = np.linspace(0, bar.R + 2 * bar.blend_width, 2001)
    assert np.min(bar.psi(s)) >= 1.0
    # C^2 across the blend start
    e = 1e-6
    _, g0, h0 = bar.derivatives(np.array([[bar.R - e], [bar.R + e]]))
    assert abs(g0[0, 0] - g0[1, 0]) < 1e-4 * (1 + abs(g0[0, 0]))
    assert abs(h0[0, 0, 0] - h0[1, 0, 0]) < 1e-3 * (1 + abs(h0[0, 0, 0]))


def test_barrier_not_found_for_tiny_mu_cap():
    model, domain = build_family("linear", sigma=0.1, b1=3.0)
    with pytest.raises(BarrierNotFoundError):
        build_barrier(model, domain, mu_max=0.25)


def test_check_transform_has_no_negative_discount():
    model, domain = build_family("linear", sigma=1.0, b1=0.3, c=0.2)
    checked = check_transform(model, build_barrier(model, domain))
    co = checked.coefficients("0", "0", domain.grid(101))
    assert np.min(co.c) >= 1.0 - 1e-12
