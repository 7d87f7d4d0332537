"""Game data: controls, coefficients, Hamiltonian, transports and barriers.

Coefficient evaluators are vectorized over points.  For a model with spatial
dimension ``d``, noise dimension ``d1`` and parameter dimension ``k`` they are
called as ``sigma(alpha, beta, p, x)`` with ``x`` of shape ``(m, d)`` and
``p`` of shape ``(m, k)`` and return arrays of shape

* ``sigma``: ``(m, d, d1)``
* ``b``: ``(m, d)``
* ``c``, ``f``: ``(m,)``

The terminal payoff is ``g(x) -> (m,)``.  Transport evaluators take
``(alpha, beta, x, y)`` with both point arrays of shape ``(m, d)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import BarrierNotFoundError, ConfigurationError, InputError

Evaluator = Callable[..., np.ndarray]

ORTHOGONALITY_TOL = 1e-12


def as_points(x, dim: int) -> np.ndarray:
    """Return ``x`` as a float array of shape ``(m, dim)``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise InputError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ControlGrid:
    """Finite ordered control sets for both players.

    ``a2_controls`` is the auxiliary set used by penalized games; it is part of
    the maximizer's choices (``alphas``) but kept separate so that its labels can
    be recognized.
    """

    a_controls: tuple
    b_controls: tuple
    a2_controls: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "a_controls", tuple(self.a_controls))
        object.__setattr__(self, "b_controls", tuple(self.b_controls))
        object.__setattr__(self, "a2_controls", tuple(self.a2_controls))
        if not self.a_controls or not self.b_controls:
            raise ConfigurationError("control grids must be non-empty")
        for name, labels in (("a_controls", self.a_controls), ("b_controls", self.b_controls),
                             ("a2_controls", self.a2_controls)):
            if len(set(labels)) != len(labels):
                raise ConfigurationError(f"{name} contains duplicate labels")
        overlap = set(self.a_controls) & set(self.a2_controls)
        if overlap:
            raise ConfigurationError(f"a2_controls overlap a_controls: {sorted(map(str, overlap))}")

    @property
    def alphas(self) -> tuple:
        return self.a_controls + self.a2_controls

    @property
    def betas(self) -> tuple:
        return self.b_controls

    def pairs(self) -> list[tuple[Hashable, Hashable]]:
        return [(a, b) for a in self.alphas for b in self.betas]

    @property
    def is_singleton(self) -> bool:
        return len(self.alphas) == 1 and len(self.betas) == 1


class Coefficients(NamedTuple):
    sigma: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray


def diffusion_matrix(sigma: np.ndarray) -> np.ndarray:
    """a = sigma sigma^T / 2, batched over the leading axis."""
    return 0.5 * np.einsum("...ik,...jk->...ij", sigma, sigma)


@dataclass(frozen=True)
class GameModel:
    """Coefficients of a time-homogeneous two-player diffusion game."""

    dim: int
    noise_dim: int
    controls: ControlGrid
    sigma: Evaluator
    b: Evaluator
    c: Evaluator
    f: Evaluator
    g: Evaluator
    k_dim: int = 1
    K0: float = math.inf
    K1: float = math.inf
    delta0: float = 0.0
    delta1: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 or 2, got {self.dim}")
        if self.noise_dim < self.dim:
            raise ConfigurationError("noise_dim must be at least dim")
        if self.k_dim < 1:
            raise ConfigurationError("k_dim must be positive")
        if self.delta0 < 0 or self.delta1 < 0:
            raise ConfigurationError("delta0 and delta1 must be nonnegative")

    def replace(self, **changes) -> "GameModel":
        return dataclasses.replace(self, **changes)

    def zero_p(self, m: int) -> np.ndarray:
        return np.zeros((m, self.k_dim))

    def coefficients(self, alpha, beta, x, p=None) -> Coefficients:
        """Evaluate (sigma, a, b, c, f) for one control pair at points ``x``."""
        x = as_points(x, self.dim)
        m = x.shape[0]
        p = self.zero_p(m) if p is None else np.asarray(p, dtype=float).reshape(m, self.k_dim)
        sig = np.asarray(self.sigma(alpha, beta, p, x), dtype=float).reshape(m, self.dim, self.noise_dim)
        b = np.asarray(self.b(alpha, beta, p, x), dtype=float).reshape(m, self.dim)
        c = np.broadcast_to(np.asarray(self.c(alpha, beta, p, x), dtype=float), (m,)).copy()
        f = np.broadcast_to(np.asarray(self.f(alpha, beta, p, x), dtype=float), (m,)).copy()
        return Coefficients(sig, diffusion_matrix(sig), b, c, f)

    def terminal(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        return np.broadcast_to(np.asarray(self.g(x), dtype=float), (x.shape[0],)).copy()

    def validate(self, points, p_points=None, tol: float = 1e-12) -> None:
        """Check the sampled invariants; raise ConfigurationError on violation.

        Checks c >= 0, the ellipticity bound, the K0 bound and evaluator purity
        (a second evaluation must agree bitwise).
        """
        x = as_points(points, self.dim)
        p_list = [None] if p_points is None else [np.broadcast_to(np.asarray(q, float), (x.shape[0], self.k_dim))
                                                 for q in np.atleast_2d(p_points)]
        for alpha, beta in self.controls.pairs():
            for p in p_list:
                co = self.coefficients(alpha, beta, x, p)
                again = self.coefficients(alpha, beta, x, p)
                for u, w in zip(co, again):
                    if not np.array_equal(u, w, equal_nan=True):
                        raise ConfigurationError(f"evaluators are not pure at control ({alpha}, {beta})")
                for name, arr in zip(co._fields, co):
                    if not np.all(np.isfinite(arr)):
                        raise ConfigurationError(f"{name} not finite at control ({alpha}, {beta})")
                if np.min(co.c) < -tol:
                    i = int(np.argmin(co.c))
                    raise ConfigurationError(f"c < 0 at x={x[i].tolist()}, control ({alpha}, {beta})")
                lam = np.linalg.eigvalsh(co.a)[:, 0]
                if np.min(lam) < self.delta0 - tol:
                    i = int(np.argmin(lam))
                    raise ConfigurationError(
                        f"ellipticity fails: min eigenvalue {lam[i]:.3g} < delta0={self.delta0} at x={x[i].tolist()}")
                if math.isfinite(self.K0):
                    worst = max(np.max(np.abs(co.sigma)), np.max(np.abs(co.b)), np.max(np.abs(co.c)),
                                np.max(np.abs(co.f)))
                    if worst > self.K0 + tol:
                        raise ConfigurationError(f"coefficient bound K0={self.K0} exceeded ({worst:.3g})")


class HamiltonianValue(NamedTuple):
    value: float
    alpha: Any
    beta: Any


def hamiltonian(model: GameModel, p, x, u: float, du, d2u) -> HamiltonianValue:
    """sup over alpha of inf over beta of a:D2u + b.Du - c u + f at one point.

    Ties are resolved in favour of the first control in list order.
    """
    d = model.dim
    x = as_points(x, d)
    if x.shape[0] != 1:
        raise InputError("hamiltonian evaluates a single point")
    du = np.asarray(du, dtype=float).reshape(d)
    d2u = np.asarray(d2u, dtype=float).reshape(d, d)
    if not np.allclose(d2u, d2u.T, rtol=0, atol=1e-14 * max(1.0, np.max(np.abs(d2u)))):
        raise InputError("d2u must be symmetric")
    p = np.asarray(p if p is not None else np.zeros(model.k_dim), dtype=float).reshape(1, model.k_dim)
    best = None
    for alpha in model.controls.alphas:
        inner = None
        for beta in model.controls.betas:
            co = model.coefficients(alpha, beta, x, p)
            val = float(np.sum(co.a[0] * d2u) + co.b[0] @ du - co.c[0] * u + co.f[0])
            if inner is None or val < inner[0]:
                inner = (val, beta)
        if best is None or inner[0] > best.value:
            best = HamiltonianValue(inner[0], alpha, inner[1])
    return best


# ---------------------------------------------------------------------------
# transports


def _identity_r(alpha, beta, x, y):
    return np.ones(x.shape[0])


@dataclass(frozen=True)
class TransportStructure:
    """Parameter fields of the coupled representation.

    ``r``, ``p``, ``P`` and ``pi`` are evaluators ``(alpha, beta, x, y)``.
    ``identity_fields`` marks r = 1, p = 0, P = I; ``coupling_mu`` marks
    pi = coupling_pi(model, coupling_mu).  Simulations use these flags for a
    faster path, so reset them when replacing the fields.
    The optional differential fields are ``r_diff(alpha, beta, x) -> (m, d)``,
    ``p_diff(alpha, beta, x) -> (m, k, d)`` and
    ``theta(alpha, beta, x, xi) -> (m, d1, d1)`` (skew, linear in ``xi``).
    """

    dim: int
    noise_dim: int
    k_dim: int
    r: Evaluator
    p: Evaluator
    P: Evaluator
    pi: Evaluator
    r_diff: Evaluator | None = None
    p_diff: Evaluator | None = None
    theta: Evaluator | None = None
    name: str = "custom"
    pi_is_zero: bool = False
    identity_fields: bool = False
    coupling_mu: float | None = None

    @property
    def has_differential_fields(self) -> bool:
        return self.r_diff is not None or self.p_diff is not None or self.theta is not None

    def fields(self, alpha, beta, x, y):
        """Return (r, p, P, pi) at the point pairs."""
        m = x.shape[0]
        r = np.broadcast_to(np.asarray(self.r(alpha, beta, x, y), float), (m,))
        p = np.asarray(self.p(alpha, beta, x, y), float).reshape(m, self.k_dim)
        P = np.asarray(self.P(alpha, beta, x, y), float).reshape(m, self.noise_dim, self.noise_dim)
        pi = np.asarray(self.pi(alpha, beta, x, y), float).reshape(m, self.noise_dim)
        return r, p, P, pi

    def validate(self, controls: ControlGrid, points) -> None:
        """Check r(x,x)=1, p(x,x)=0, P(x,x)=I at ``points`` and P orthogonal.

        ``points`` may be a single array (diagonal pairs only) or a tuple
        ``(x, y)`` of pair arrays for the orthogonality check.
        """
        if isinstance(points, tuple):
            xs, ys = (as_points(q, self.dim) for q in points)
        else:
            xs = ys = as_points(points, self.dim)
        eye = np.eye(self.noise_dim)
        for alpha, beta in controls.pairs():
            r, p, P, _ = self.fields(alpha, beta, ys, ys)
            if np.max(np.abs(r - 1.0)) > 1e-14 or np.max(np.abs(p)) > 1e-14 or np.max(np.abs(P - eye)) > 1e-14:
                raise ConfigurationError(f"transport {self.name} is not the identity on the diagonal")
            _, _, P, _ = self.fields(alpha, beta, xs, ys)
            err = np.max(np.abs(np.einsum("mki,mkj->mij", P, P) - eye))
            if err > ORTHOGONALITY_TOL:
                raise ConfigurationError(f"P is not orthogonal (error {err:.2e})")
            if self.theta is not None:
                rng = np.random.default_rng(0)
                e1 = rng.standard_normal((xs.shape[0], self.dim))
                e2 = rng.standard_normal((xs.shape[0], self.dim))
                t1 = np.asarray(self.theta(alpha, beta, xs, e1), float)
                t2 = np.asarray(self.theta(alpha, beta, xs, e2), float)
                t12 = np.asarray(self.theta(alpha, beta, xs, 2.0 * e1 - 3.0 * e2), float)
                scale = 1.0 + np.max(np.abs(t1)) + np.max(np.abs(t2))
                if np.max(np.abs(t1 + np.swapaxes(t1, 1, 2))) > 1e-12 * scale:
                    raise ConfigurationError("theta is not skew-symmetric")
                if np.max(np.abs(t12 - (2.0 * t1 - 3.0 * t2))) > 1e-10 * scale:
                    raise ConfigurationError("theta is not linear in its direction argument")


def identity_transport(model: GameModel) -> TransportStructure:
    """r = 1, p = 0, P = I and pi = 0."""
    d1, k = model.noise_dim, model.k_dim
    return TransportStructure(
        dim=model.dim, noise_dim=d1, k_dim=k, r=_identity_r,
        p=lambda a, b, x, y: np.zeros((x.shape[0], k)),
        P=lambda a, b, x, y: np.broadcast_to(np.eye(d1), (x.shape[0], d1, d1)),
        pi=lambda a, b, x, y: np.zeros((x.shape[0], d1)),
        name="identity", pi_is_zero=True, identity_fields=True, coupling_mu=0.0)


def coupling_drift(sigma_x: np.ndarray, diff: np.ndarray, mu: float) -> np.ndarray:
    """mu sigma(x)^T (x - y), with x - y shortened to unit length beyond 1."""
    norm = np.linalg.norm(diff, axis=1)
    scale = np.where(norm > 1.0, 1.0 / np.maximum(norm, 1.0), 1.0)
    return mu * np.einsum("mik,mi->mk", sigma_x, diff * scale[:, None])


def coupling_pi(model: GameModel, mu: float) -> Evaluator:
    """pi(x, y) = mu sigma(x)^T (x - y), clipped as in :func:`coupling_drift`."""

    def pi(alpha, beta, x, y):
        return coupling_drift(model.coefficients(alpha, beta, x).sigma, x - y, mu)

    return pi


def coupling_transport(model: GameModel, mu: float) -> TransportStructure:
    """Identity r, p, P with the drift correction pi = mu sigma^T(x)(x - y)."""
    base = identity_transport(model)
    if mu == 0:
        return base
    return dataclasses.replace(base, pi=coupling_pi(model, mu), name=f"coupling(mu={mu:g})", pi_is_zero=False,
                               coupling_mu=float(mu))


def differential_transport(model: GameModel, r_diff=None, p_diff=None, theta=None, mu: float = 0.0,
                           name: str = "differential") -> TransportStructure:
    """Transport generated by differential fields.

    r(x, y) = 1 + <r_diff(y), x - y>, p(x, y) = p_diff(y)(x - y) and
    P(x, y) = expm(theta(y, x - y)).  Missing fields are taken as zero.
    """
    d, d1, k = model.dim, model.noise_dim, model.k_dim

    def r(alpha, beta, x, y):
        if r_diff is None:
            return np.ones(x.shape[0])
        rd = np.asarray(r_diff(alpha, beta, y), float).reshape(-1, d)
        return 1.0 + np.sum(rd * (x - y), axis=1)

    def p(alpha, beta, x, y):
        if p_diff is None:
            return np.zeros((x.shape[0], k))
        pd = np.asarray(p_diff(alpha, beta, y), float).reshape(-1, k, d)
        return np.einsum("mkd,md->mk", pd, x - y)

    def P(alpha, beta, x, y):
        m = x.shape[0]
        if theta is None:
            return np.broadcast_to(np.eye(d1), (m, d1, d1))
        th = np.asarray(theta(alpha, beta, y, x - y), float).reshape(m, d1, d1)
        if d1 == 2:
            ang = th[:, 1, 0]
            cs, sn = np.cos(ang), np.sin(ang)
            return np.stack([np.stack([cs, -sn], -1), np.stack([sn, cs], -1)], 1)
        return np.stack([expm(t) for t in th])

    pi = coupling_pi(model, mu) if mu else (lambda a, b, x, y: np.zeros((x.shape[0], d1)))
    return TransportStructure(dim=d, noise_dim=d1, k_dim=k, r=r, p=p, P=P, pi=pi,
                              r_diff=r_diff, p_diff=p_diff, theta=theta, name=name, pi_is_zero=not mu)


class HatCoefficients(NamedTuple):
    sigma: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray


def hat_coefficients(model: GameModel, transport: TransportStructure, alpha, beta, x, y) -> HatCoefficients:
    """Transported coefficients at point pairs (x, y).

    sigma_hat = r sigma(p, x) P and (a, b, c, f)_hat = r^2 (a, b, c, f)(p, x)
    with r, p, P evaluated at (x, y).
    """
    x = as_points(x, model.dim)
    y = as_points(y, model.dim)
    r, p, P, _ = transport.fields(alpha, beta, x, y)
    co = model.coefficients(alpha, beta, x, p)
    sig_hat = r[:, None, None] * np.einsum("mik,mkj->mij", co.sigma, P)
    r2 = r * r
    return HatCoefficients(sig_hat, r2[:, None, None] * co.a, r2[:, None] * co.b, r2 * co.c, r2 * co.f)


# ---------------------------------------------------------------------------
# domains and barriers


@dataclass(frozen=True)
class Domain:
    """An interval, a box, or the whole space cut to a cube of given radius."""

    kind: str
    lower: tuple
    upper: tuple
    truncation_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if self.kind not in ("interval", "box", "whole-space"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        if len(self.lower) != len(self.upper) or not 1 <= len(self.lower) <= 2:
            raise ConfigurationError("domain bounds must have matching dimension 1 or 2")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ConfigurationError("domain requires lower < upper on every axis")
        if self.kind == "whole-space" and not (self.truncation_radius and self.truncation_radius > 0):
            raise ConfigurationError("whole-space domain needs a positive truncation_radius")

    @classmethod
    def interval(cls, lower: float, upper: float) -> "Domain":
        return cls("interval", (lower,), (upper,))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Domain":
        return cls("box", tuple(lower), tuple(upper))

    @classmethod
    def whole_space(cls, dim: int, radius: float) -> "Domain":
        return cls("whole-space", (-radius,) * dim, (radius,) * dim, radius)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounded(self) -> bool:
        return self.kind != "whole-space"

    @property
    def radius(self) -> float:
        """Radius of the smallest origin-centred ball containing the box."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def with_radius(self, radius: float) -> "Domain":
        if self.bounded:
            raise InputError("only whole-space domains can be re-truncated")
        return Domain.whole_space(self.dim, radius)

    def contains(self, points) -> np.ndarray:
        """Membership in the open box (always true for whole-space)."""
        x = as_points(points, self.dim)
        if not self.bounded:
            return np.ones(x.shape[0], dtype=bool)
        return np.all((x > np.array(self.lower)) & (x < np.array(self.upper)), axis=1)

    def grid(self, n_per_axis: int = 201) -> np.ndarray:
        axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _sinh_over_s(mu: float, s: np.ndarray) -> np.ndarray:
    """sinh(mu s) / s with the limit mu at s = 0."""
    ms = mu * s
    small = np.abs(ms) < 1e-4
    safe = np.where(small, 1.0, s)
    return np.where(small, mu * (1.0 + ms * ms / 6.0), np.sinh(ms) / safe)


@dataclass(frozen=True)
class BarrierSpec:
    """Psi(x) = cosh(mu R) - cosh(mu |x|) + 2 for |x| <= R.

    Outside the ball Psi is continued by a quintic Hermite blend over
    [R, R + blend_width] to the constant ``plateau`` so that it stays C^2, has
    bounded derivatives and never drops below 1.
    """

    mu: float
    R: float
    blend_width: float
    plateau: float = 2.0
    verified_margin: float = math.nan
    verification_points: np.ndarray | None = field(default=None, repr=False, compare=False)

    def _radial(self, s: np.ndarray):
        mu, R, w = self.mu, self.R, self.blend_width
        q0 = np.cosh(mu * R) - np.cosh(mu * s) + 2.0
        q1 = -mu * np.sinh(mu * s)
        q2 = -mu * mu * np.cosh(mu * s)
        out = s > R
        if np.any(out):
            p1 = -mu * math.sinh(mu * R)
            p2 = -mu * mu * math.cosh(mu * R)
            t = np.clip((s[out] - R) / w, 0.0, 1.0)
            # quintic Hermite basis on [0, 1]
            h0 = 1 - 10 * t**3 + 15 * t**4 - 6 * t**5
            h0d = -30 * t**2 + 60 * t**3 - 30 * t**4
            h0dd = -60 * t + 180 * t**2 - 120 * t**3
            h1 = t - 6 * t**3 + 8 * t**4 - 3 * t**5
            h1d = 1 - 18 * t**2 + 32 * t**3 - 15 * t**4
            h1dd = -36 * t + 96 * t**2 - 60 * t**3
            h2 = 0.5 * (t**2 - 3 * t**3 + 3 * t**4 - t**5)
            h2d = 0.5 * (2 * t - 9 * t**2 + 12 * t**3 - 5 * t**4)
            h2dd = 0.5 * (2 - 18 * t + 36 * t**2 - 20 * t**3)
            C = self.plateau
            val = 2.0 * h0 + p1 * w * h1 + p2 * w * w * h2 + C * (1 - h0)
            d1 = (2.0 * h0d + p1 * w * h1d + p2 * w * w * h2d - C * h0d) / w
            d2 = (2.0 * h0dd + p1 * w * h1dd + p2 * w * w * h2dd - C * h0dd) / (w * w)
            q0 = q0.copy(); q1 = q1.copy(); q2 = q2.copy()
            q0[out], q1[out], q2[out] = val, d1, d2
        return q0, q1, q2

    def psi(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        x = x.reshape(-1, 1) if x.ndim <= 1 else x
        return self._radial(np.linalg.norm(x, axis=1))[0]

    def derivatives(self, x):
        """Return (Psi, grad Psi, Hessian Psi) at points of shape (m, d)."""
        x = np.asarray(x, float)
        x = x.reshape(-1, 1) if x.ndim <= 1 else x
        m, d = x.shape
        s = np.linalg.norm(x, axis=1)
        q0, q1, q2 = self._radial(s)
        pos = s > 0
        unit = np.zeros_like(x)
        unit[pos] = x[pos] / s[pos, None]
        grad = q1[:, None] * unit
        # q1 / s: inside the ball equal to -mu sinh(mu s) / s, finite at 0
        inside = s <= self.R
        ratio = np.empty(m)
        ratio[inside] = -self.mu * _sinh_over_s(self.mu, s[inside])
        ratio[~inside] = q1[~inside] / s[~inside]
        outer = np.einsum("mi,mj->mij", unit, unit)
        eye = np.eye(d)[None]
        hess = q2[:, None, None] * outer + ratio[:, None, None] * (eye - outer)
        # at the origin the radial direction is undefined; the Hessian is q2 I
        hess[~pos] = q2[~pos, None, None] * np.eye(d)
        return q0, grad, hess


def _barrier_margin(model: GameModel, barrier: BarrierSpec, points: np.ndarray) -> tuple[float, int]:
    psi, grad, hess = barrier.derivatives(points)
    worst, where = -math.inf, -1
    for alpha, beta in model.controls.pairs():
        co = model.coefficients(alpha, beta, points)
        val = np.einsum("mij,mij->m", co.a, hess) + np.einsum("mi,mi->m", co.b, grad)
        i = int(np.argmax(val))
        if val[i] > worst:
            worst, where = float(val[i]), i
    return worst, where


def _blend_width(mu: float, R: float, plateau: float = 2.0) -> float:
    w = 1.0
    for _ in range(60):
        trial = BarrierSpec(mu=mu, R=R, blend_width=w, plateau=plateau)
        s = np.linspace(R, R + w, 401)
        if np.min(trial._radial(s)[0]) >= 1.0:
            return w
        w *= 0.5
    raise BarrierNotFoundError("could not fit the barrier extension", margin=math.nan, mu=mu)


def build_barrier(model: GameModel, domain: Domain, mu_max: float = 64.0, grid=None,
                  mu_start: float = 1.0 / 16.0) -> BarrierSpec:
    """Smallest mu of the doubling sequence with (L + c) Psi <= -1 on the grid.

    The default verification grid has 201 points per axis on the closed box.
    """
    if not domain.bounded:
        raise InputError("build_barrier requires a bounded domain")
    if domain.dim != model.dim:
        raise InputError("domain and model dimensions differ")
    points = domain.grid(201) if grid is None else as_points(grid, model.dim)
    R = domain.radius
    mu = mu_start
    best = None
    while mu <= mu_max * (1 + 1e-12):
        trial = BarrierSpec(mu=mu, R=R, blend_width=1.0)
        margin, where = _barrier_margin(model, trial, points)
        if best is None or margin < best[0]:
            best = (margin, mu)
        if margin <= -1.0:
            w = _blend_width(mu, R)
            return BarrierSpec(mu=mu, R=R, blend_width=w, verified_margin=margin, verification_points=points)
        mu *= 2.0
    raise BarrierNotFoundError(
        f"no mu <= {mu_max} gives (L+c)Psi <= -1; best margin {best[0]:.4g} at mu={best[1]:g}",
        margin=best[0], mu=best[1])


def check_transform(model: GameModel, barrier: BarrierSpec) -> GameModel:
    """Model whose value is v / Psi.

    sigma -> Psi^(1/2) sigma, b -> Psi b + 2 a DPsi, c -> -(a:D2Psi + b.DPsi - c Psi),
    f unchanged and g -> g / Psi.
    """
    if not barrier.verified_margin <= -1.0:
        raise InputError(f"barrier margin {barrier.verified_margin} does not certify (L+c)Psi <= -1")
    base = model

    def sigma(alpha, beta, p, x):
        psi = barrier.psi(x)
        return np.sqrt(psi)[:, None, None] * np.asarray(base.sigma(alpha, beta, p, x), float).reshape(
            x.shape[0], base.dim, base.noise_dim)

    def b(alpha, beta, p, x):
        psi, grad, _ = barrier.derivatives(x)
        co = base.coefficients(alpha, beta, x, p)
        return psi[:, None] * co.b + 2.0 * np.einsum("mij,mj->mi", co.a, grad)

    def c(alpha, beta, p, x):
        psi, grad, hess = barrier.derivatives(x)
        co = base.coefficients(alpha, beta, x, p)
        return -(np.einsum("mij,mij->m", co.a, hess) + np.einsum("mi,mi->m", co.b, grad) - co.c * psi)

    def g(x):
        return base.terminal(x) / barrier.psi(x)

    out = base.replace(sigma=sigma, b=b, c=c, g=g, name=f"{base.name}/check", delta1=1.0,
                       K0=math.inf, K1=math.inf)
    if barrier.verification_points is not None:
        pts = barrier.verification_points
        for alpha, beta in out.controls.pairs():
            cc = out.coefficients(alpha, beta, pts).c
            if np.min(cc) < 1.0 - 1e-9:
                raise InputError(f"transformed discount below 1 ({np.min(cc):.6g})")
    return out
