import numpy as np
import pytest

from isaacs_lab.errors import InputError
from isaacs_lab.families import build_family
from isaacs_lab.fd_solver import (GridFunction, Mesh, extrapolated_solve, interior_lipschitz_probe, lipschitz_estimate,
                                  loglog_slope, solve, solve_isaacs, solve_linear, solve_whole_space, sweep_delta0)
from isaacs_lab.game_model import Domain


def test_mesh_geometry():
    mesh = Mesh(Domain.interval(-1.0, 1.0), 3)
    assert mesh.h == (0.5,)
    np.testing.assert_allclose(mesh.padded_axes()[0], [-1, -0.5, 0, 0.5, 1])
    assert mesh.refined().n == 7
    with pytest.raises(InputError):
        Mesh(Domain.interval(0, 1), 2)


def test_constant_solution_is_exact():
    model, domain = build_family("constant", c=2.0, f=3.0, g=1.5)
    v = solve(model, Mesh(domain, 51)).solution.padded
    np.testing.assert_allclose(v, 1.5, atol=1e-12)


def test_affine_solution_is_exact_for_both_schemes():
    sig, b0, b1, c, g0, g1 = 0.8, 0.2, -0.5, 0.7, 0.3, 1.1
    model, domain = build_family("linear", sigma=sig, b0=b0, b1=b1, c=c, f0=c * g0 - b0 * g1, f1=c * g1 - b1 * g1,
                                 g0=g0, g1=g1)
    mesh = Mesh(domain, 101)
    x = mesh.padded_axes()[0]
    for scheme in ("upwind", "central"):
        v = solve(model, mesh, scheme=scheme).solution.padded
        np.testing.assert_allclose(v, g0 + g1 * x, atol=1e-12)


def test_isaacs_and_linear_agree_on_singleton():
    model, domain = build_family("generic")
    mesh = Mesh(domain, 201)
    a = solve_isaacs(model, mesh).solution.padded
    b = solve_linear(model, mesh).solution.padded
    assert np.max(np.abs(a - b)) <= 1e-10


def test_two_dimensional_constant():
    model, domain = build_family("constant", dim=2, c=1.0, f=2.0, g=2.0)
    res = solve(model, Mesh(domain, 15))
    np.testing.assert_allclose(res.solution.padded, 2.0, atol=1e-12)


def test_richardson_improves_on_single_mesh():
    model, domain = build_family("generic")
    mesh = Mesh(domain, 101)
    ref = solve(model, Mesh(domain, 16 * 102 - 1), scheme="central").solution.padded[::16]
    single = solve(model, mesh, scheme="central").solution.padded
    extra = extrapolated_solve(model, mesh).padded
    assert np.max(np.abs(extra - ref)) < 0.1 * np.max(np.abs(single - ref))


def test_lipschitz_estimate_of_linear_function():
    mesh = Mesh(Domain.interval(-1, 1), 99)
    gf = GridFunction.from_function(mesh, lambda x: 3.0 * x[:, 0])
    assert lipschitz_estimate(gf, (-0.5, 0.5)) == pytest.approx(3.0)


def test_loglog_slope_exact_power():
    x = [1, 2, 4, 8]
    slope, err = loglog_slope(x, [5.0 / k for k in x])
    assert slope == pytest.approx(-1.0) and err == pytest.approx(0.0, abs=1e-12)


def test_sweep_delta0_threshold_small_mesh():
    mesh = Mesh(Domain.interval(-1, 1), 401)
    lo = sweep_delta0(lambda d: build_family("expanding-drift", b=0.5, delta0=d)[0], [1e-1, 1e-3], mesh, (-0.9, 0.9))
    assert max(lo.measured) < 2.0
    hi = sweep_delta0(lambda d: build_family("expanding-drift", b=2.0, delta0=d)[0], [1e-1, 1e-3], mesh, (-0.9, 0.9))
    assert hi.measured[1] > hi.measured[0]


def test_interior_probe_boundary_distance():
    model, domain = build_family("generic")
    with pytest.raises(InputError):
        interior_lipschitz_probe(model, [Mesh(domain, 51)], (-1.95, 1.0))
    rep = interior_lipschitz_probe(model, [Mesh(domain, 101), Mesh(domain, 201)], (-1.0, 1.0))
    assert rep.verdict == "bounded"


def test_whole_space_truncation_settles():
    model, domain = build_family("ou", f=1.0, g=1.0)
    out = solve_whole_space(model, domain, 401, (-1.0, 1.0), tol=1e-8)
    # constant data: v = f/c = 1 everywhere
    np.testing.assert_allclose(out.result.solution.padded, 1.0, atol=1e-10)
