import numpy as np
import pytest

from isaacs_lab.errors import ConfigurationError, InputError
from isaacs_lab.families import build_family
from isaacs_lab.fd_solver import Mesh, solve
from isaacs_lab.penalization import (A2Extension, build_penalized_model, drift_extension, spreading_extension,
                                     sweep_K)


@pytest.fixture(scope="module")
def game():
    return build_family("drift-sign-game")


def test_penalized_value_dominates_and_decreases(game):
    model, domain = game
    mesh = Mesh(domain, 1201)
    v = solve(model, mesh).solution.values
    ext = spreading_extension(model)
    prev = None
    for K in (2.0, 8.0, 32.0):
        vk = solve(build_penalized_model(model, ext, K).model, mesh).solution.values
        assert np.min(vk - v) >= -1e-9
        if prev is not None:
            assert np.all(vk <= prev + 1e-9)
        prev = vk


def test_sweep_report_columns_and_rate(game):
    model, domain = game
    rep = sweep_K(model, spreading_extension(model), [4, 8, 16, 32], Mesh(domain, 4001), check_truncation=False)
    assert rep.verdict == "pass"
    assert set(rep.columns) >= {"min_gap", "a2_nodes", "max_d2"}
    assert -1.3 < rep.slope < -0.7


def test_beta_dependent_extension_is_rejected(game):
    model, _ = game
    ext = spreading_extension(model)
    bad = A2Extension(labels=("x",), sigma=ext.sigma, b=lambda a, b, p, x: np.full((x.shape[0], 1), float(b)),
                      c=ext.c, f=ext.f)
    with pytest.raises(ConfigurationError, match="depends on beta"):
        build_penalized_model(model, bad, 1.0)


def test_negative_penalty_is_refused(game):
    model, _ = game
    with pytest.raises(InputError):
        build_penalized_model(model, drift_extension(model), -1.0)


def test_double_extension_is_refused(game):
    model, _ = game
    pm = build_penalized_model(model, spreading_extension(model), 1.0)
    with pytest.raises(ConfigurationError):
        build_penalized_model(pm.model, drift_extension(model), 1.0)
