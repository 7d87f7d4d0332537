"""Built-in coefficient families and the model configuration schema.

A model configuration is an INI-style file::

    [model]
    family = expanding-drift
    b = 0.5
    delta0 = 1e-3

    [domain]            ; optional, overrides the family default
    kind = interval
    lower = -1
    upper = 1

Every key in ``[model]`` other than ``family`` is a numeric family parameter.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .game_model import ControlGrid, Domain, GameModel, TransportStructure, differential_transport

SINGLE = ControlGrid(("0",), ("0",))


@dataclass(frozen=True)
class Family:
    name: str
    build: Callable[..., tuple[GameModel, Domain]]
    defaults: dict
    summary: str


def _const(value, m):
    return np.full(m, float(value))


def _scalar_model(name, sigma_fn, b_fn, c_fn, f_fn, g_fn, params, controls=SINGLE, **kw) -> GameModel:
    """1D single-noise model from scalar functions of (alpha, beta, p, x)."""

    def sigma(alpha, beta, p, x):
        return np.asarray(sigma_fn(alpha, beta, p[:, 0], x[:, 0]), float).reshape(-1, 1, 1) * np.ones((x.shape[0], 1, 1))

    def b(alpha, beta, p, x):
        return np.asarray(b_fn(alpha, beta, p[:, 0], x[:, 0]), float).reshape(-1, 1) * np.ones((x.shape[0], 1))

    def c(alpha, beta, p, x):
        return np.broadcast_to(np.asarray(c_fn(alpha, beta, p[:, 0], x[:, 0]), float), (x.shape[0],))

    def f(alpha, beta, p, x):
        return np.broadcast_to(np.asarray(f_fn(alpha, beta, p[:, 0], x[:, 0]), float), (x.shape[0],))

    def g(x):
        return np.broadcast_to(np.asarray(g_fn(x[:, 0]), float), (x.shape[0],))

    return GameModel(dim=1, noise_dim=1, controls=controls, sigma=sigma, b=b, c=c, f=f, g=g,
                     name=name, params=dict(params), **kw)


def constant_family(sigma=1.0, drift=0.0, c=1.0, f=0.0, g=0.0, lower=-1.0, upper=1.0, dim=1):
    dim = int(dim)
    if dim == 1:
        model = _scalar_model("constant", lambda a, b, p, x: sigma, lambda a, b, p, x: drift,
                              lambda a, b, p, x: c, lambda a, b, p, x: f, lambda x: g * np.ones_like(x),
                              locals(), delta0=0.5 * sigma * sigma, delta1=c)
        return model, Domain.interval(lower, upper)

    def sig(al, be, p, x):
        return np.broadcast_to(sigma * np.eye(2), (x.shape[0], 2, 2))

    model = GameModel(dim=2, noise_dim=2, controls=SINGLE, sigma=sig,
                      b=lambda al, be, p, x: np.full((x.shape[0], 2), float(drift)),
                      c=lambda al, be, p, x: np.full(x.shape[0], float(c)),
                      f=lambda al, be, p, x: np.full(x.shape[0], float(f)),
                      g=lambda x: np.full(x.shape[0], float(g)), name="constant",
                      delta0=0.5 * sigma * sigma, delta1=c)
    return model, Domain.box((lower, lower), (upper, upper))


def linear_family(sigma=1.0, b0=0.0, b1=0.0, c=0.0, f0=0.0, f1=0.0, g0=0.0, g1=1.0, lower=-1.0, upper=1.0):
    """Constant diffusion, affine drift, payoff and boundary data."""
    model = _scalar_model("linear", lambda a, b, p, x: sigma, lambda a, b, p, x: b0 + b1 * x,
                          lambda a, b, p, x: c, lambda a, b, p, x: f0 + f1 * x, lambda x: g0 + g1 * x,
                          locals(), delta0=0.5 * sigma * sigma, delta1=c)
    return model, Domain.interval(lower, upper)


def ou_family(sigma=1.0, theta=1.0, c=1.0, f=1.0, g=1.0, radius=8.0):
    """Ornstein-Uhlenbeck drift -theta x; whole space cut at ``radius``."""
    model = _scalar_model("ou", lambda a, b, p, x: sigma, lambda a, b, p, x: -theta * x,
                          lambda a, b, p, x: c, lambda a, b, p, x: f, lambda x: g * np.ones_like(x),
                          locals(), delta0=0.5 * sigma * sigma, delta1=c, K1=max(abs(theta), 0.0))
    return model, Domain.whole_space(1, radius)


def tanh_drift_family(sigma=1.0, amplitude=1.0, shift=0.0, c=1.0, f=0.0, g=1.0, lower=-1.0, upper=1.0):
    model = _scalar_model("tanh-drift", lambda a, b, p, x: sigma,
                          lambda a, b, p, x: amplitude * np.tanh(x + shift),
                          lambda a, b, p, x: c, lambda a, b, p, x: f, lambda x: g * np.ones_like(x),
                          locals(), delta0=0.5 * sigma * sigma, delta1=c)
    return model, Domain.interval(lower, upper)


def expanding_drift_family(b=0.5, delta0=1e-3, c=1.0, g=1.0):
    """delta0 v'' + b x v' - c v = 0 on (-1, 1) with v(+-1) = g.

    Its vanishing-viscosity limit is |x|^(c/b), Lipschitz only when b <= c.
    """
    s = math.sqrt(2.0 * delta0)
    model = _scalar_model("expanding-drift", lambda a, bb, p, x: s, lambda a, bb, p, x: b * x,
                          lambda a, bb, p, x: c, lambda a, bb, p, x: 0.0, lambda x: g * np.ones_like(x),
                          locals(), delta0=delta0, delta1=c, K1=abs(b))
    return model, Domain.interval(-1.0, 1.0)


def generic_family(c=1.0, f_amp=1.0, lower=-2.0, upper=2.0):
    """sigma = 1 + 0.1 sin x, b = -x + 0.3 cos x, c constant, f = f_amp cos x, g = 0."""
    model = _scalar_model("generic", lambda a, b, p, x: 1.0 + 0.1 * np.sin(x),
                          lambda a, b, p, x: -x + 0.3 * np.cos(x), lambda a, b, p, x: c,
                          lambda a, b, p, x: f_amp * np.cos(x), lambda x: np.zeros_like(x),
                          locals(), delta0=0.5 * 0.9 ** 2, delta1=c, K1=1.3)
    return model, Domain.interval(lower, upper)


def rotating_noise_family(sigma=1.0, omega=4.0, c=1.0, drift=1.0, f=0.0, radius=50.0):
    """One state variable driven by two noises with rotating loadings.

    sigma(x) = s (cos(omega x), sin(omega x)) keeps a = s^2/2 constant while the
    loadings of nearby points separate at rate s*omega; the drift is
    ``drift * x``.
    """

    def sig(al, be, p, x):
        th = omega * x[:, 0]
        return (sigma * np.stack([np.cos(th), np.sin(th)], axis=1)).reshape(-1, 1, 2)

    model = GameModel(dim=1, noise_dim=2, controls=SINGLE, sigma=sig,
                      b=lambda al, be, p, x: drift * x,
                      c=lambda al, be, p, x: np.full(x.shape[0], float(c)),
                      f=lambda al, be, p, x: np.full(x.shape[0], float(f)),
                      g=lambda x: np.zeros(x.shape[0]), name="rotating-noise",
                      params=dict(sigma=sigma, omega=omega, c=c, drift=drift, f=f),
                      delta0=0.5 * sigma * sigma, delta1=c, K1=max(abs(sigma * omega), abs(drift)))
    return model, Domain.whole_space(1, radius)


def sqrt_boundary_family(dim=1, c=1.0):
    """Pure diffusion on (-1, 1)^d with continuous but non-Lipschitz boundary data.

    In 1D g(x) = sqrt|1 - x|; in 2D g(x) = sqrt|x_1| on the boundary of the square.
    """
    dim = int(dim)
    if dim == 1:
        model = _scalar_model("sqrt-boundary", lambda a, b, p, x: math.sqrt(2.0), lambda a, b, p, x: 0.0,
                              lambda a, b, p, x: c, lambda a, b, p, x: 0.0, lambda x: np.sqrt(np.abs(1.0 - x)),
                              dict(dim=dim, c=c), delta0=1.0, delta1=c)
        return model, Domain.interval(-1.0, 1.0)
    model = GameModel(dim=2, noise_dim=2, controls=SINGLE,
                      sigma=lambda al, be, p, x: np.broadcast_to(math.sqrt(2.0) * np.eye(2), (x.shape[0], 2, 2)),
                      b=lambda al, be, p, x: np.zeros((x.shape[0], 2)),
                      c=lambda al, be, p, x: np.full(x.shape[0], float(c)),
                      f=lambda al, be, p, x: np.zeros(x.shape[0]),
                      g=lambda x: np.sqrt(np.abs(x[:, 0])), name="sqrt-boundary",
                      params=dict(dim=dim, c=c), delta0=1.0, delta1=c)
    return model, Domain.box((-1.0, -1.0), (1.0, 1.0))


def _bump(x):
    """Smooth even function, positive exactly for 1 < |x| < 3, peak 1 at |x| = 2."""
    t = np.abs(x) - 2.0
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / np.maximum(1.0 - safe * safe, 1e-300)), 0.0)


def tanh_switch_family(n_controls=64, c=1.5, f=1.0, sigma_amp=1.0, radius=6.0, k_dependent=1):
    """Controlled 1D diffusion dx = sigma(x) dw + tanh(x + 2 cos(alpha + p)) dt.

    The diffusion is a smooth bump supported in 1 < |x| < 3, so the process is
    degenerate elsewhere.  Controls are ``n_controls`` equally spaced angles.
    With ``k_dependent = 0`` the drift ignores p.
    """
    angles = tuple(float(a) for a in 2.0 * np.pi * np.arange(int(n_controls)) / int(n_controls))
    controls = ControlGrid(angles, ("0",))
    use_p = bool(int(k_dependent))

    def sigma(al, be, p, x):
        return (sigma_amp * _bump(x[:, 0])).reshape(-1, 1, 1)

    def b(al, be, p, x):
        shift = al + (p[:, 0] if use_p else 0.0)
        return np.tanh(x[:, 0] + 2.0 * np.cos(shift)).reshape(-1, 1)

    model = GameModel(dim=1, noise_dim=1, controls=controls, sigma=sigma, b=b,
                      c=lambda al, be, p, x: np.full(x.shape[0], float(c)),
                      f=lambda al, be, p, x: np.full(x.shape[0], float(f)),
                      g=lambda x: np.zeros(x.shape[0]), name="tanh-switch",
                      params=dict(n_controls=n_controls, c=c, f=f, sigma_amp=sigma_amp, radius=radius,
                                  k_dependent=k_dependent),
                      delta0=0.0, delta1=c)
    return model, Domain.whole_space(1, radius)


def tanh_switch_transport(model: GameModel, eps: float = 0.05, with_p: bool = True,
                          r_coefficient: float = 1.0) -> TransportStructure:
    """Differential fields for the tanh-switch family.

    Away from the band |x + 2 cos(alpha)| <= eps the field
    r = -r_coefficient / sinh(2x + 4 cos(alpha)) makes the drift term of the
    directional condition vanish for ``r_coefficient = 1``.  Inside the band,
    p = 1 / (2 sin(alpha)) (when |sin(alpha)| > eps) cancels the derivative of
    the drift.
    """

    def r_diff(al, be, x):
        u = x[:, 0] + 2.0 * math.cos(al)
        out = np.abs(u) > eps
        val = np.zeros_like(u)
        val[out] = -r_coefficient / np.sinh(2.0 * u[out])
        return val.reshape(-1, 1)

    def p_diff(al, be, x):
        u = x[:, 0] + 2.0 * math.cos(al)
        s = math.sin(al)
        band = (np.abs(u) <= eps) & (abs(s) > eps)
        val = np.where(band, 0.5 / s if abs(s) > eps else 0.0, 0.0)
        return val.reshape(-1, 1, 1)

    return differential_transport(model, r_diff=r_diff, p_diff=p_diff if with_p else None,
                                  name=f"tanh-switch({'r,p' if with_p else 'r'})")


def drift_sign_game(drift=1.0, delta0=1e-4, c=1.0, brake=0.5, radius=6.0):
    """Two-player 1D game used for penalization.

    The maximizer picks the drift sign alpha in {+1, -1}; the minimizer picks
    beta in {0, 1} and scales the drift by (1 - brake*beta).  Payoff
    f = tanh(x)^2, discount c.  The value has a convex kink at the origin.
    """
    controls = ControlGrid((1.0, -1.0), (0.0, 1.0))
    s = math.sqrt(2.0 * delta0)
    model = _scalar_model("drift-sign-game", lambda a, b, p, x: s,
                          lambda a, b, p, x: drift * a * (1.0 - brake * b),
                          lambda a, b, p, x: c, lambda a, b, p, x: np.tanh(x) ** 2,
                          lambda x: np.tanh(x) ** 2, dict(drift=drift, delta0=delta0, c=c, brake=brake,
                                                          radius=radius),
                          controls=controls, delta0=delta0, delta1=c, K1=1.0)
    return model, Domain.whole_space(1, radius)


FAMILIES: dict[str, Family] = {
    "constant": Family("constant", constant_family, dict(sigma=1.0, drift=0.0, c=1.0, f=0.0, g=0.0, lower=-1.0,
                                                          upper=1.0, dim=1), "constant coefficients"),
    "linear": Family("linear", linear_family, dict(sigma=1.0, b0=0.0, b1=0.0, c=0.0, f0=0.0, f1=0.0, g0=0.0,
                                                    g1=1.0, lower=-1.0, upper=1.0), "affine drift and data"),
    "ou": Family("ou", ou_family, dict(sigma=1.0, theta=1.0, c=1.0, f=1.0, g=1.0, radius=8.0),
                 "Ornstein-Uhlenbeck on the whole line"),
    "tanh-drift": Family("tanh-drift", tanh_drift_family, dict(sigma=1.0, amplitude=1.0, shift=0.0, c=1.0, f=0.0,
                                                                g=1.0, lower=-1.0, upper=1.0), "tanh drift"),
    "expanding-drift": Family("expanding-drift", expanding_drift_family, dict(b=0.5, delta0=1e-3, c=1.0, g=1.0),
                              "delta0 v'' + b x v' - v = 0, Lipschitz threshold b <= 1"),
    "generic": Family("generic", generic_family, dict(c=1.0, f_amp=1.0, lower=-2.0, upper=2.0),
                      "smooth nonconstant 1D diffusion"),
    "rotating-noise": Family("rotating-noise", rotating_noise_family,
                             dict(sigma=1.0, omega=4.0, c=1.0, drift=1.0, f=0.0, radius=50.0),
                             "1D state, two noises with rotating loadings"),
    "sqrt-boundary": Family("sqrt-boundary", sqrt_boundary_family, dict(dim=1, c=1.0),
                            "non-Lipschitz boundary data"),
    "tanh-switch": Family("tanh-switch", tanh_switch_family,
                          dict(n_controls=64, c=1.5, f=1.0, sigma_amp=1.0, radius=6.0, k_dependent=1),
                          "degenerate controlled diffusion with angle controls"),
    "drift-sign-game": Family("drift-sign-game", drift_sign_game,
                              dict(drift=1.0, delta0=1e-4, c=1.0, brake=0.5, radius=6.0),
                              "two-player drift-sign game for penalization"),
}


def available_families() -> list[str]:
    return sorted(FAMILIES)


def build_family(name: str, **params) -> tuple[GameModel, Domain]:
    if name not in FAMILIES:
        raise ConfigurationError(f"unknown model {name!r}; built-ins: {', '.join(available_families())}")
    fam = FAMILIES[name]
    unknown = set(params) - set(fam.defaults)
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    merged = dict(fam.defaults)
    merged.update(params)
    return fam.build(**merged)


def _parse_number(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"key {key!r}: {raw!r} is not a number") from None


def domain_from_section(section) -> Domain:
    kind = section.get("kind", "interval").strip()
    if kind == "whole-space":
        dim = int(_parse_number("dim", section.get("dim", "1")))
        return Domain.whole_space(dim, _parse_number("radius", section.get("radius", "4")))
    try:
        lower = tuple(_parse_number("lower", v) for v in section["lower"].split(","))
        upper = tuple(_parse_number("upper", v) for v in section["upper"].split(","))
    except KeyError as exc:
        raise ConfigurationError(f"domain section is missing key {exc.args[0]!r}") from None
    return Domain(kind, lower, upper)


def read_config(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {str(p)!r} not found")
    parser.read(p)
    return parser


def load_model(ref: str, overrides: dict | None = None) -> tuple[GameModel, Domain]:
    """Resolve a built-in family name or a model config path."""
    overrides = dict(overrides or {})
    if ref in FAMILIES:
        return build_family(ref, **overrides)
    if not Path(ref).exists():
        raise ConfigurationError(f"unknown model {ref!r}; built-ins: {', '.join(available_families())}")
    parser = read_config(ref)
    if "model" not in parser:
        raise ConfigurationError(f"{ref}: missing [model] section")
    sec = parser["model"]
    if "family" not in sec:
        raise ConfigurationError(f"{ref}: key 'family' missing in [model]")
    params = {k: _parse_number(k, v) for k, v in sec.items() if k != "family"}
    params.update(overrides)
    model, domain = build_family(sec["family"].strip(), **params)
    if "domain" in parser:
        domain = domain_from_section(parser["domain"])
    return model, domain
