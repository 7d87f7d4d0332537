"""Sampled checks of the structural conditions behind the Lipschitz estimates.

All verdicts are relative to the sampling mesh, which every report records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .game_model import (GameModel, TransportStructure, as_points, hamiltonian, hat_coefficients,
                         identity_transport)

UNIT_TOL = 1e-10
FD_STEP = 1e-5


@dataclass
class ConditionReport:
    name: str
    satisfied: bool
    worst_margin: float
    worst_point: dict
    parameters_used: dict
    mesh: dict
    tolerance: float = 0.0
    notes: list = field(default_factory=list)

    def to_text(self) -> str:
        """Key-value rendering used by the command line."""
        lines = [f"condition = {self.name}", f"satisfied = {str(self.satisfied).lower()}",
                 f"worst_margin = {self.worst_margin:.17g}", f"tolerance = {self.tolerance:.17g}"]
        for k, v in self.worst_point.items():
            lines.append(f"worst_point.{k} = {_fmt(v)}")
        for k, v in self.parameters_used.items():
            lines.append(f"param.{k} = {_fmt(v)}")
        for k, v in self.mesh.items():
            lines.append(f"mesh.{k} = {_fmt(v)}")
        for i, note in enumerate(self.notes):
            lines.append(f"note.{i} = {note}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, np.ndarray):
        return ",".join(_fmt(float(t)) for t in v.ravel())
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(t) for t in v)
    return str(v)


def _sxn_sq(sigma: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Batched ||(I - xi xi^T) sigma||^2 for sigma (m, d, d1), xi (m, d)."""
    proj = sigma - xi[:, :, None] * np.einsum("mi,mik->mk", xi, sigma)[:, None, :]
    return np.einsum("mik,mik->m", proj, proj)


def sigma_xi_norm(sigma, xi) -> float:
    """||sigma||^2 - |xi^T sigma|^2 for a unit vector xi.

    Both the difference form and the projection form are evaluated and must
    agree to 1e-10 relative error.
    """
    sigma = np.asarray(sigma, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if sigma.ndim == 1:
        sigma = sigma.reshape(xi.size, -1)
    if sigma.shape[0] != xi.size:
        raise InputError("sigma rows must match the dimension of xi")
    if abs(np.linalg.norm(xi) - 1.0) > UNIT_TOL:
        raise InputError(f"xi must be a unit vector (|xi| = {np.linalg.norm(xi):.12g})")
    total = float(np.sum(sigma * sigma))
    along = xi @ sigma
    first = total - float(along @ along)
    proj = (np.eye(xi.size) - np.outer(xi, xi)) @ sigma
    second = float(np.sum(proj * proj))
    if abs(first - second) > 1e-10 * max(total, 1e-300) + 1e-300:
        raise ArithmeticError("the two forms of the sigma-xi norm disagree")
    return max(second, 0.0)


def _directions(dim: int, n_dirs: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    ang = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _default_points(model: GameModel, points, region, n_per_axis: int) -> np.ndarray:
    if points is not None:
        return as_points(points, model.dim)
    lo, hi = region
    axes = [np.linspace(lo, hi, n_per_axis)] * model.dim
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def check_ellipticity(model: GameModel, points=None, p_points=None, region=(-2.0, 2.0),
                      n_per_axis: int = 201, tol: float = 1e-12) -> ConditionReport:
    """Margin delta0 - (smallest sampled eigenvalue of a)."""
    x = _default_points(model, points, region, n_per_axis)
    p_list = [np.zeros(model.k_dim)] if p_points is None else [np.asarray(q, float).reshape(model.k_dim)
                                                                for q in np.atleast_2d(p_points)]
    worst = (math.inf, None)
    for alpha, beta in model.controls.pairs():
        for p in p_list:
            co = model.coefficients(alpha, beta, x, np.broadcast_to(p, (x.shape[0], model.k_dim)))
            lam = np.linalg.eigvalsh(co.a)[:, 0]
            i = int(np.argmin(lam))
            if lam[i] < worst[0]:
                worst = (float(lam[i]), dict(alpha=alpha, beta=beta, p=p.copy(), x=x[i].copy()))
    margin = model.delta0 - worst[0]
    return ConditionReport("ellipticity", margin <= tol, margin, worst[1], dict(delta0=model.delta0),
                           dict(points=x.shape[0], p_values=len(p_list)), tol,
                           [f"min eigenvalue {worst[0]:.6g}"])


def coupling_pairs(points: np.ndarray, eps0: float, n_dirs: int = 64, n_t: int = 16,
                   t_min: float = 1e-4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs (y + t xi, y) with t log-spaced in [t_min, eps0]; returns (x, y, xi)."""
    if eps0 <= 0:
        raise InputError("eps0 must be positive")
    d = points.shape[1]
    dirs = _directions(d, n_dirs)
    ts = np.geomspace(min(t_min, eps0), eps0, n_t)
    Y = np.repeat(points, dirs.shape[0] * ts.size, axis=0)
    XI = np.tile(np.repeat(dirs, ts.size, axis=0), (points.shape[0], 1))
    T = np.tile(ts, points.shape[0] * dirs.shape[0])
    return Y + T[:, None] * XI, Y, XI


def _pair_margins(model, transport, alpha, beta, x, y, delta, mu, use_hat=True, mu_term=True):
    diff = x - y
    dist = np.linalg.norm(diff, axis=1)
    xi = diff / dist[:, None]
    base_y = model.coefficients(alpha, beta, y)
    base_x = model.coefficients(alpha, beta, x)
    if use_hat:
        hat = hat_coefficients(model, transport, alpha, beta, x, y)
        sig_x, b_x = hat.sigma, hat.b
    else:
        sig_x, b_x = base_x.sigma, base_x.b
    lhs = _sxn_sq(sig_x - base_y.sigma, xi) + 2.0 * np.sum(diff * (b_x - base_y.b), axis=1)
    rhs = 2.0 * (base_y.c - delta) * dist ** 2
    if mu_term:
        rhs = rhs + 4.0 * mu * np.einsum("mi,mij,mj->m", diff, base_x.a, diff)
    return lhs, rhs


def _scan_pairs(model, transport, delta, delta1, mu, eps0, points, region, n_per_axis, n_dirs, n_t, pairs,
                use_hat, mu_term, name, tol_rel):
    if delta < 2 * delta1 - 1e-15:
        raise InputError(f"need delta >= 2 delta1 (delta={delta}, delta1={delta1})")
    if mu < 0:
        raise InputError("mu must be nonnegative")
    notes = []
    if mu < 1:
        notes.append(f"mu={mu:g} is below 1")
    if pairs is None:
        y_pts = _default_points(model, points, region, n_per_axis)
        x, y, _ = coupling_pairs(y_pts, eps0, n_dirs, n_t)
        mesh = dict(points=y_pts.shape[0], directions=_directions(model.dim, n_dirs).shape[0], t_values=n_t,
                    t_range=(min(1e-4, eps0), eps0))
    else:
        x, y = (as_points(q, model.dim) for q in pairs)
        mesh = dict(pairs=x.shape[0])
    same = np.linalg.norm(x - y, axis=1) == 0
    if np.any(same):
        notes.append(f"skipped {int(np.count_nonzero(same))} pairs with x = y")
        x, y = x[~same], y[~same]
    if x.shape[0] == 0:
        raise InputError("no admissible pairs to check")
    worst, where, scale = -math.inf, None, 0.0
    for alpha, beta in model.controls.pairs():
        lhs, rhs = _pair_margins(model, transport, alpha, beta, x, y, delta, mu, use_hat, mu_term)
        margin = lhs - rhs
        i = int(np.argmax(margin))
        scale = max(scale, float(np.max(np.abs(lhs) + np.abs(rhs))))
        if margin[i] > worst:
            worst = float(margin[i])
            where = dict(alpha=alpha, beta=beta, x=x[i].copy(), y=y[i].copy())
    tol = tol_rel * max(scale, 1e-300)
    params = dict(delta=delta, delta1=delta1, mu=mu, eps0=eps0)
    return ConditionReport(name, worst <= tol, worst, where, params, mesh, tol, notes)


def check_coupling_condition(model: GameModel, transport: TransportStructure | None, delta: float,
                             delta1: float, mu: float, eps0: float = 0.1, points=None, region=(-2.0, 2.0),
                             n_per_axis: int = 201, n_dirs: int = 64, n_t: int = 16, pairs=None,
                             mu_term: bool = True, tol_rel: float = 1e-12) -> ConditionReport:
    """Pairwise condition on the transported coefficients.

    For pairs 0 < |x - y| <= eps0 and xi = (x - y)/|x - y| it checks
    ||sigma_hat(x,y) - sigma(y)||_xi^2 + 2<x-y, b_hat(x,y) - b(y)>
        <= 2(c(y) - delta)|x-y|^2 + 4 mu <x-y, a(x)(x-y)>.
    ``mu_term=False`` drops the last term.
    """
    transport = identity_transport(model) if transport is None else transport
    return _scan_pairs(model, transport, delta, delta1, mu, eps0, points, region, n_per_axis, n_dirs, n_t,
                       pairs, True, mu_term, "coupling", tol_rel)


def check_untransported_coupling(model: GameModel, delta: float, mu: float, eps0: float = 0.1, points=None,
                                 region=(-2.0, 2.0), n_per_axis: int = 201, n_dirs: int = 64, n_t: int = 16,
                                 pairs=None, mu_term: bool = True, delta1: float = 0.0,
                                 tol_rel: float = 1e-12) -> ConditionReport:
    """The same pairwise condition written directly with sigma(x), b(x)."""
    return _scan_pairs(model, None, delta, delta1, mu, eps0, points, region, n_per_axis, n_dirs, n_t, pairs,
                       False, mu_term, "coupling-untransported", tol_rel)


def heuristic_mu(model: GameModel, delta: float, points=None, region=(-2.0, 2.0)) -> float:
    """(K1^2 + 2 K1 delta + sup c) / (2 delta0), or 1 when a constant is missing."""
    if not (math.isfinite(model.K1) and model.delta0 > 0):
        return 1.0
    x = _default_points(model, points, region, 201)
    sup_c = max(float(np.max(model.coefficients(a, b, x).c)) for a, b in model.controls.pairs())
    return max(1.0, (model.K1 ** 2 + 2 * model.K1 * delta + sup_c) / (2 * model.delta0))


def tune_mu(model: GameModel, delta: float, delta1: float = 0.0, transport_factory=None, mu_start: float = 1.0,
            mu_max: float = 2.0 ** 20, **scan) -> tuple[float, ConditionReport]:
    """Double mu from ``mu_start`` until the coupling condition holds.

    ``transport_factory(mu)`` builds the transport for a given mu (identity by
    default, since the pairwise condition does not involve pi).
    """
    mu = mu_start
    while True:
        transport = transport_factory(mu) if transport_factory else None
        rep = check_coupling_condition(model, transport, delta, delta1, mu, **scan)
        if rep.satisfied:
            return mu, rep
        if mu * 2 > mu_max:
            raise ConfigurationError(f"no mu <= {mu_max:g} satisfies the coupling condition "
                                     f"(worst margin {rep.worst_margin:.4g})")
        mu *= 2.0


def _directional(fn: Callable, alpha, beta, x: np.ndarray, xi: np.ndarray, q: np.ndarray, h: float):
    """Central difference of fn(p, x) along (q, xi) at (0, x)."""
    plus = np.asarray(fn(alpha, beta, h * q, x + h * xi), float)
    minus = np.asarray(fn(alpha, beta, -h * q, x - h * xi), float)
    return (plus - minus) / (2.0 * h)


@dataclass
class DirectionalTerms:
    lhs: np.ndarray
    rhs: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    control: list


def directional_condition_terms(model: GameModel, transport: TransportStructure, delta: float, delta1: float,
                                mu: float, x_sample, xi_sample=None, n_dirs: int = 64,
                                h: float = FD_STEP) -> DirectionalTerms:
    """Both sides of the differential form of the coupling condition.

    LHS = ||d_xi sigma + <r, xi> sigma + sigma Theta(x, xi)||_xi^2 + 2<xi, d_xi b + 2<r, xi> b>,
    RHS = 2(c - delta1 - delta) + 4 mu <xi, a xi>,
    where d_xi u = xi_i u_{x_i}(0, x) + (p(x) xi)_j u_{p_j}(0, x).
    """
    if not transport.has_differential_fields:
        raise ConfigurationError("transport carries no differential fields")
    d, d1, k = model.dim, model.noise_dim, model.k_dim
    xs = as_points(x_sample, d)
    dirs = _directions(d, n_dirs) if xi_sample is None else as_points(xi_sample, d)
    if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > UNIT_TOL):
        raise InputError("xi_sample must contain unit vectors")
    X = np.repeat(xs, dirs.shape[0], axis=0)
    XI = np.tile(dirs, (xs.shape[0], 1))
    m = X.shape[0]
    lhs_all, rhs_all, ctrl = [], [], []
    for alpha, beta in model.controls.pairs():
        r = np.zeros((m, d)) if transport.r_diff is None else \
            np.asarray(transport.r_diff(alpha, beta, X), float).reshape(m, d)
        pd = np.zeros((m, k, d)) if transport.p_diff is None else \
            np.asarray(transport.p_diff(alpha, beta, X), float).reshape(m, k, d)
        th = np.zeros((m, d1, d1)) if transport.theta is None else \
            np.asarray(transport.theta(alpha, beta, X, XI), float).reshape(m, d1, d1)
        q = np.einsum("mkd,md->mk", pd, XI)
        co = model.coefficients(alpha, beta, X)
        dsig = _directional(lambda a_, b_, p, x: model.coefficients(a_, b_, x, p).sigma, alpha, beta, X, XI, q, h)
        db = _directional(lambda a_, b_, p, x: model.coefficients(a_, b_, x, p).b, alpha, beta, X, XI, q, h)
        rxi = np.sum(r * XI, axis=1)
        S = dsig + rxi[:, None, None] * co.sigma + np.einsum("mik,mkj->mij", co.sigma, th)
        lhs = _sxn_sq(S, XI) + 2.0 * np.sum(XI * (db + 2.0 * rxi[:, None] * co.b), axis=1)
        rhs = 2.0 * (co.c - delta1 - delta) + 4.0 * mu * np.einsum("mi,mij,mj->m", XI, co.a, XI)
        lhs_all.append(lhs)
        rhs_all.append(rhs)
        ctrl.append((alpha, beta))
    return DirectionalTerms(np.array(lhs_all), np.array(rhs_all), X, XI, ctrl)


def check_directional_condition(model: GameModel, transport: TransportStructure, delta: float, delta1: float,
                                mu: float, x_sample=None, xi_sample=None, region=(-2.0, 2.0),
                                n_per_axis: int = 201, n_dirs: int = 64, h: float = FD_STEP,
                                tol: float = 1e-8) -> ConditionReport:
    """Differential form of the coupling condition on sampled (x, xi).

    The default tolerance absorbs the central-difference error of ``h``.
    """
    if delta < 2 * delta1 - 1e-15:
        raise InputError(f"need delta >= 2 delta1 (delta={delta}, delta1={delta1})")
    xs = _default_points(model, x_sample, region, n_per_axis)
    terms = directional_condition_terms(model, transport, delta, delta1, mu, xs, xi_sample, n_dirs, h)
    margin = terms.lhs - terms.rhs
    flat = int(np.argmax(margin))
    ci, pi = np.unravel_index(flat, margin.shape)
    alpha, beta = terms.control[ci]
    worst = float(margin[ci, pi])
    notes = [] if mu >= 1 else [f"mu={mu:g} is below 1"]
    return ConditionReport("directional", worst <= tol, worst,
                           dict(alpha=alpha, beta=beta, x=terms.x[pi].copy(), xi=terms.xi[pi].copy()),
                           dict(delta=delta, delta1=delta1, mu=mu, h=h),
                           dict(points=xs.shape[0], directions=int(terms.xi.shape[0] // xs.shape[0])), tol, notes)


@dataclass
class DegeneracySearch:
    """Outcome of the search for the degeneracy index n.

    ``status`` is ``"found"`` (``n`` minimal on the mesh), ``"violated"``
    (some point with a0 = b = 0 has b' >= c, so no n can work) or
    ``"inconclusive"`` (nothing found up to ``n_max`` although the necessary
    condition holds on the mesh).
    """

    status: str
    n: int | None
    witness: float | None
    necessary_holds: bool
    degenerate_points: int
    interval: tuple
    n_points: int
    n_max: int

    @property
    def found(self) -> bool:
        return self.status == "found"


def find_degeneracy_index(a0: Callable, b: Callable, c: Callable, interval=(-2.0, 2.0), n_max: int = 1000,
                          n_points: int = 4001, b_prime: Callable | None = None,
                          zero_tol: float = 1e-12) -> DegeneracySearch:
    """Smallest n with b' <= c - 1/n + n (a0 + b^2) at every mesh point.

    Fields are vectorized callables of x.  The derivative of b is taken by
    central differences unless ``b_prime`` is given.
    """
    lo, hi = interval
    if not lo < hi:
        raise InputError("interval must satisfy lower < upper")
    x = np.linspace(lo, hi, n_points)
    A0 = np.broadcast_to(np.asarray(a0(x), float), x.shape)
    B = np.broadcast_to(np.asarray(b(x), float), x.shape)
    C = np.broadcast_to(np.asarray(c(x), float), x.shape)
    if b_prime is None:
        Bp = (np.asarray(b(x + FD_STEP), float) - np.asarray(b(x - FD_STEP), float)) / (2 * FD_STEP)
    else:
        Bp = np.broadcast_to(np.asarray(b_prime(x), float), x.shape)
    degenerate = (np.abs(A0) <= zero_tol) & (np.abs(B) <= zero_tol)
    bad = degenerate & (Bp >= C)
    necessary = not bool(np.any(bad))
    args = dict(interval=(lo, hi), n_points=n_points, n_max=n_max,
                degenerate_points=int(np.count_nonzero(degenerate)))
    if not necessary:
        return DegeneracySearch("violated", None, float(x[np.argmax(bad)]), False, **args)
    growth = A0 + B * B
    for n in range(1, n_max + 1):
        fails = Bp > C - 1.0 / n + n * growth
        if not np.any(fails):
            return DegeneracySearch("found", n, None, True, **args)
    return DegeneracySearch("inconclusive", None, float(x[np.argmax(fails)]), True, **args)


def check_level_set_p_independence(model: GameModel, samples: Sequence[tuple], p_values,
                                   tol: float = 1e-12) -> ConditionReport:
    """Sampled check that the sign of H(p, x, u, Du, D2u) does not depend on p.

    ``samples`` holds (x, u, du, d2u) tuples.  The margin of a sample is
    -H(0, ...) * H(p, ...), positive exactly when the signs disagree.
    """
    p_values = [np.asarray(p, float).reshape(model.k_dim) for p in p_values]
    worst, where = -math.inf, None
    for idx, (x, u, du, d2u) in enumerate(samples):
        h0 = hamiltonian(model, np.zeros(model.k_dim), x, u, du, d2u).value
        for p in p_values:
            hp = hamiltonian(model, p, x, u, du, d2u).value
            margin = -h0 * hp if (abs(h0) > tol or abs(hp) > tol) else 0.0
            if abs(h0) <= tol and abs(hp) <= tol:
                margin = 0.0
            elif abs(h0) <= tol or abs(hp) <= tol:
                margin = max(abs(h0), abs(hp))
            if margin > worst:
                worst, where = margin, dict(sample=idx, p=p.copy(), h0=h0, hp=hp)
    return ConditionReport("level-set-p-independence", worst <= tol, worst, where or {},
                           dict(p_values=len(p_values)), dict(samples=len(samples)), tol,
                           ["sampled check only"])
