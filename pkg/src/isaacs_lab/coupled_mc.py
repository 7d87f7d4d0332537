"""Monte Carlo for the coupled diffusion pair and its weight processes.

The pair is driven by shared Brownian increments::

    dy = sigma(y) dw + b(y) dt
    dx = sigma_hat(x, y) dw + (b_hat - sigma_hat pi)(x, y) dt
    dz = z pi . dw
    drho = rho pi . dw + rho (c(y) - c_hat(x, y)) dt

with x(0) = y(0) + eps xi.  The weights are advanced in log space, so they
stay positive, and the identity z exp(-phi_hat) = rho exp(-phi) holds per
step up to rounding.  Stopping times are detected on the time grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conditions import ConditionReport, check_coupling_condition
from .errors import ConditionNotMetError, ConfigurationError, InputError, SimulationError
from .fd_solver import SolveResult
from .game_model import Domain, GameModel, TransportStructure, coupling_drift, hat_coefficients

log = logging.getLogger(__name__)

NOISE_BLOCK = 256
CHUNK_PATHS = 8192
SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class MCConfig:
    """Simulation parameters.

    ``horizon=None`` picks the time at which exp(-delta1 t) drops below 1e-6.
    ``z0`` is the initial value of the martingale weight z.
    """

    dt: float = 1e-3
    horizon: float | None = None
    n_paths: int = 10_000
    base_seed: int = 0
    epsilon: float = 0.01
    xi: tuple = (1.0,)
    lam: float = 1.0
    bigM: float = 2.0
    mu: float = 1.0
    delta: float = 1.0
    y0: tuple = (0.0,)
    z0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(float(v) for v in np.atleast_1d(self.xi)))
        object.__setattr__(self, "y0", tuple(float(v) for v in np.atleast_1d(self.y0)))
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if not self.bigM > 1:
            raise InputError("bigM must exceed 1")
        if not self.lam > 0:
            raise InputError("lambda must be positive")
        if self.epsilon < 0:
            raise InputError("epsilon must be nonnegative")
        if abs(math.fsum(v * v for v in self.xi) - 1.0) > 1e-12:
            raise InputError("xi must be a unit vector")
        if len(self.xi) != len(self.y0):
            raise InputError("xi and y0 must have the same dimension")
        if self.n_paths < 2:
            raise InputError("need at least two paths")
        if self.mu < 0:
            raise InputError("mu must be nonnegative")
        if not 0 <= self.base_seed <= SEED_MASK:
            raise InputError("base_seed must fit in 64 bits")
        if self.horizon is not None and not self.horizon > 0:
            raise InputError("horizon must be positive")

    def replace(self, **kw) -> "MCConfig":
        return MCConfig(**{**self.__dict__, **kw})

    def resolved_horizon(self, model: GameModel) -> float:
        if self.horizon is not None:
            return float(self.horizon)
        rate = model.delta1 if model.delta1 > 0 else 1.0
        return math.log(1e6) / rate

    def n_steps(self, model: GameModel) -> int:
        return int(math.ceil(self.resolved_horizon(model) / self.dt - 1e-9))


def path_generator(base_seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream of path ``path_index``; independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=(int(base_seed) << 64) | int(path_index)))


@dataclass(frozen=True)
class PathRecord:
    times: np.ndarray
    x_eps: np.ndarray
    x_0: np.ndarray
    xi_eps: np.ndarray
    phi: np.ndarray
    phi_hat: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    kappa_time: float
    gamma_time: float
    tau_time: float

    def __post_init__(self):
        for name in ("times", "x_eps", "x_0", "xi_eps", "phi", "phi_hat", "rho", "z"):
            getattr(self, name).setflags(write=False)


@dataclass
class EstimateReport:
    name: str
    estimate: float
    std_error: float
    n_paths: int
    bound: float | None
    within_bound: bool | None
    ratio: float | None = None
    residual: float = 0.0
    params: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.within_bound is None:
            return "reported"
        return "pass" if self.within_bound else "fail"


class _Controls:
    """A fixed control pair or a time-dependent schedule ``t -> (alpha, beta)``."""

    def __init__(self, model: GameModel, control):
        if control is None:
            if not model.controls.is_singleton:
                raise InputError("a control pair or schedule is required for multi-control models")
            control = next(iter(model.controls.pairs()))
        self.fn = control if callable(control) else (lambda t, pair=tuple(control): pair)

    def at(self, t: float):
        return self.fn(t)


# ---------------------------------------------------------------------------
# observers: per-estimator accumulators driven by the simulation kernel


class _Observer:
    """Accumulates one per-path sample.

    ``stop_on`` lists the stopping events that end a path: any of "kappa",
    "gamma" and "tau"; the horizon always ends a path.  Hooks receive the
    chunk state restricted to the active paths, ``rows`` giving their
    positions in the chunk.
    """

    stop_on: tuple = ("kappa",)

    def start(self, n: int, st: "_State") -> None:
        self.values = np.zeros(n)

    def before_step(self, st: "_State", t0: float, coeffs: dict) -> None:
        pass

    def after_step(self, st: "_State", t1: float) -> None:
        pass

    def stopped(self, st: "_State", mask: np.ndarray, t: float, horizon_hit: bool) -> None:
        pass


@dataclass
class _State:
    x: np.ndarray
    y: np.ndarray
    logz: np.ndarray
    logrho: np.ndarray
    phi: np.ndarray
    phi_hat: np.ndarray
    rows: np.ndarray
    aux: dict = field(default_factory=dict)

    def take(self, keep: np.ndarray) -> None:
        for name in ("x", "y", "logz", "logrho", "phi", "phi_hat", "rows"):
            setattr(self, name, getattr(self, name)[keep])
        for key in list(self.aux):
            self.aux[key] = self.aux[key][keep]


@dataclass
class _StopTimes:
    kappa: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    residual_discount: np.ndarray


def _simulate_chunk(model: GameModel, transport: TransportStructure, cfg: MCConfig, indices: np.ndarray,
                    observer: _Observer, controls: _Controls, domain: Domain | None,
                    record: list | None = None) -> _StopTimes:
    """Advance one chunk of paths until each is stopped or reaches the horizon."""
    d1 = model.noise_dim
    n = indices.size
    dt = cfg.dt
    sqdt = math.sqrt(dt)
    steps = cfg.n_steps(model)
    y = np.tile(np.array(cfg.y0, float), (n, 1))
    x = y + cfg.epsilon * np.array(cfg.xi, float)
    logz0 = math.log(cfg.z0) if cfg.z0 > 0 else -math.inf
    st = _State(x, y, np.full(n, logz0), np.zeros(n), np.zeros(n), np.zeros(n), np.arange(n))
    kappa, gamma, tau = np.full(n, np.inf), np.full(n, np.inf), np.full(n, np.inf)
    observer.start(n, st)
    gens = [path_generator(cfg.base_seed, int(i)) for i in indices]
    log_lo, log_hi = -math.log(cfg.bigM), math.log(cfg.bigM)
    stops = set(observer.stop_on)
    noise = np.zeros((n, 0, d1))
    fast = transport.identity_fields and transport.coupling_mu is not None

    def detect(t: float) -> None:
        nonlocal gens, noise
        rows = st.rows
        hit = (np.linalg.norm(st.x - st.y, axis=1) >= cfg.lam) & ~np.isfinite(kappa[rows])
        kappa[rows[hit]] = t
        hit = ((st.logrho <= log_lo) | (st.logrho >= log_hi)) & ~np.isfinite(gamma[rows])
        gamma[rows[hit]] = t
        if domain is not None and domain.bounded:
            hit = ~(domain.contains(st.x) & domain.contains(st.y)) & ~np.isfinite(tau[rows])
            tau[rows[hit]] = t
        done = np.zeros(rows.size, dtype=bool)
        for name, times in (("kappa", kappa), ("gamma", gamma), ("tau", tau)):
            if name in stops:
                done |= np.isfinite(times[rows])
        if np.any(done):
            observer.stopped(st, done, t, False)
            keep = ~done
            gens = [g for g, k in zip(gens, keep) if k]
            noise = noise[keep]
            st.take(keep)

    detect(0.0)
    if record is not None:
        record.append(_snapshot(st, 0.0))
    t1 = 0.0
    for k in range(steps):
        if st.rows.size == 0:
            break
        j = k % NOISE_BLOCK
        if j == 0:
            block = min(NOISE_BLOCK, steps - k)
            noise = np.stack([g.standard_normal((block, d1)) for g in gens])
        dw = noise[:, j, :] * sqdt
        t0, t1 = k * dt, (k + 1) * dt
        alpha, beta = controls.at(t0)
        cy = model.coefficients(alpha, beta, st.y)
        if fast:
            hat = model.coefficients(alpha, beta, st.x)
            pi = coupling_drift(hat.sigma, st.x - st.y, transport.coupling_mu) if transport.coupling_mu \
                else np.zeros((st.x.shape[0], d1))
        else:
            hat = hat_coefficients(model, transport, alpha, beta, st.x, st.y)
            pi = np.asarray(transport.pi(alpha, beta, st.x, st.y), float).reshape(-1, d1)
        observer.before_step(st, t0, dict(c_y=cy.c, c_hat=hat.c, f_hat=hat.f))
        st.x = st.x + np.einsum("mij,mj->mi", hat.sigma, dw) + (hat.b - np.einsum("mij,mj->mi", hat.sigma, pi)) * dt
        st.y = st.y + np.einsum("mij,mj->mi", cy.sigma, dw) + cy.b * dt
        mart = np.sum(pi * dw, axis=1) - 0.5 * np.sum(pi * pi, axis=1) * dt
        st.logz = st.logz + mart
        st.logrho = st.logrho + mart + (cy.c - hat.c) * dt
        st.phi = st.phi + cy.c * dt
        st.phi_hat = st.phi_hat + hat.c * dt
        if not (np.all(np.isfinite(st.x)) and np.all(np.isfinite(st.y))):
            raise SimulationError(f"non-finite state at step {k + 1}", k + 1)
        observer.after_step(st, t1)
        if record is not None:
            record.append(_snapshot(st, t1))
        detect(t1)
    residual = np.exp(-st.phi)
    if st.rows.size:
        observer.stopped(st, np.ones(st.rows.size, dtype=bool), t1, True)
    return _StopTimes(kappa, gamma, tau, residual)


def _snapshot(st: _State, t: float) -> tuple | None:
    if not st.rows.size:
        return None
    return (t, st.x[0].copy(), st.y[0].copy(), float(st.phi[0]), float(st.phi_hat[0]), float(st.logrho[0]),
            float(st.logz[0]))


def _xi(st: _State, eps: float) -> np.ndarray:
    """|x - y| / eps with the 0/0 := 0 convention."""
    if eps == 0:
        return np.zeros(st.x.shape[0])
    return np.linalg.norm(st.x - st.y, axis=1) / eps


def simulate_coupled_pair(model: GameModel, transport: TransportStructure, cfg: MCConfig, path_index: int,
                          control=None, domain: Domain | None = None) -> PathRecord:
    """Simulate one path to the horizon and return its trajectory.

    Stopping events are recorded but do not end the path.
    """
    rec: list = []
    obs = _Observer()
    obs.stop_on = ()
    times = _simulate_chunk(model, transport, cfg, np.array([path_index]), obs, _Controls(model, control),
                            domain, record=rec)
    rec = [r for r in rec if r is not None]
    t = np.array([r[0] for r in rec])
    x = np.array([r[1] for r in rec])
    y = np.array([r[2] for r in rec])
    xi = np.zeros_like(x) if cfg.epsilon == 0 else (x - y) / cfg.epsilon
    return PathRecord(t, x, y, xi, np.array([r[3] for r in rec]), np.array([r[4] for r in rec]),
                      np.exp(np.array([r[5] for r in rec])), np.exp(np.array([r[6] for r in rec])),
                      float(times.kappa[0]), float(times.gamma[0]), float(times.tau[0]))


def run_paths(model: GameModel, transport: TransportStructure, cfg: MCConfig, observer_factory: Callable,
              control=None, domain: Domain | None = None, chunk: int = CHUNK_PATHS,
              fields: Sequence[str] = ("values",)):
    """Simulate ``cfg.n_paths`` paths chunk by chunk.

    Returns the per-path arrays named in ``fields`` (in path order) and the
    mean residual discount e^{-phi} of paths still running at the horizon.
    """
    controls = _Controls(model, control)
    parts = {name: [] for name in fields}
    resid = []
    for start in range(0, cfg.n_paths, chunk):
        idx = np.arange(start, min(cfg.n_paths, start + chunk))
        obs = observer_factory()
        times = _simulate_chunk(model, transport, cfg, idx, obs, controls, domain)
        for name in fields:
            parts[name].append(getattr(obs, name))
        resid.append(times.residual_discount)
    out = {name: np.concatenate(v) for name, v in parts.items()}
    residual = np.concatenate(resid)
    return out, float(np.sum(residual) / cfg.n_paths)


def _mean_se(samples: np.ndarray) -> tuple[float, float]:
    return float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def _params(cfg: MCConfig) -> dict:
    return dict(dt=cfg.dt, horizon=cfg.horizon, epsilon=cfg.epsilon, lam=cfg.lam, bigM=cfg.bigM, mu=cfg.mu,
                delta=cfg.delta, base_seed=cfg.base_seed, z0=cfg.z0)


def require_condition(model: GameModel, transport: TransportStructure, cfg: MCConfig, eps0: float = 0.1,
                      region=(-2.0, 2.0)) -> ConditionReport:
    """Run the pairwise coupling check for (delta, mu, eps0); raise if it fails."""
    rep = check_coupling_condition(model, transport, cfg.delta, model.delta1, cfg.mu, eps0=eps0, region=region)
    if not rep.satisfied:
        raise ConditionNotMetError(f"coupling condition fails (worst margin {rep.worst_margin:.4g}) "
                                   f"at {rep.worst_point}", rep)
    return rep


def _precheck(model, transport, cfg, check, eps0, region):
    if cfg.mu < 1:
        log.warning("mu=%g is below 1", cfg.mu)
    if cfg.delta < 2 * model.delta1 - 1e-15:
        raise InputError(f"need delta >= 2 delta1 (delta={cfg.delta}, delta1={model.delta1})")
    if check:
        require_condition(model, transport, cfg, eps0, region)


# ---------------------------------------------------------------------------
# estimators


class _JIObserver(_Observer):
    """Left Riemann sum of |xi| e^{-phi + delta t/2} over [0, kappa) and its running sup."""

    stop_on = ("kappa",)

    def __init__(self, eps: float, delta: float, dt: float):
        self.eps, self.delta, self.dt = eps, delta, dt

    def start(self, n, st):
        self.values = np.zeros(n)
        self.sup = np.zeros(n)

    def before_step(self, st, t0, coeffs):
        w = _xi(st, self.eps) * np.exp(-st.phi + 0.5 * self.delta * t0)
        self.values[st.rows] += w * self.dt
        self.sup[st.rows] = np.maximum(self.sup[st.rows], w)


def estimate_J_I(model: GameModel, transport: TransportStructure, cfg: MCConfig, control=None, check: bool = True,
                 eps0: float = 0.1, region=(-2.0, 2.0)) -> tuple[EstimateReport, EstimateReport]:
    """J = E int_0^kappa |xi_t| e^{-phi_t + delta t/2} dt (bound 2/delta) and I = E sup_{t<kappa} of the integrand."""
    _precheck(model, transport, cfg, check, eps0, region)
    out, residual = run_paths(model, transport, cfg, lambda: _JIObserver(cfg.epsilon, cfg.delta, cfg.dt), control,
                              fields=("values", "sup"))
    jm, jse = _mean_se(out["values"])
    im, ise = _mean_se(out["sup"])
    bound = 2.0 / cfg.delta
    rj = EstimateReport("J", jm, jse, cfg.n_paths, bound, jm <= bound + 3 * jse, residual=residual,
                        params=_params(cfg))
    ri = EstimateReport("I", im, ise, cfg.n_paths, None, None, residual=residual, params=_params(cfg),
                        notes=["bound is an unspecified constant; judge by the trend in epsilon"])
    return rj, ri


class _ExitDecayObserver(_Observer):
    stop_on = ("kappa",)

    def __init__(self, delta: float):
        self.delta = delta

    def stopped(self, st, mask, t, horizon_hit):
        if not horizon_hit:
            self.values[st.rows[mask]] = np.exp(-st.phi[mask] + 0.5 * self.delta * t)


def estimate_exit_decay(model: GameModel, transport: TransportStructure, cfg: MCConfig, control=None,
                        check: bool = True, eps0: float = 0.1, region=(-2.0, 2.0)) -> EstimateReport:
    """E e^{-phi_kappa + delta kappa/2} 1{kappa < inf}; ``ratio`` is estimate * lambda / eps."""
    _precheck(model, transport, cfg, check, eps0, region)
    out, residual = run_paths(model, transport, cfg, lambda: _ExitDecayObserver(cfg.delta), control)
    m, se = _mean_se(out["values"])
    ratio = m * cfg.lam / cfg.epsilon if cfg.epsilon > 0 else None
    return EstimateReport("exit_decay", m, se, cfg.n_paths, None, None, ratio=ratio, residual=residual,
                          params=_params(cfg), notes=["bound N eps / lambda with unspecified N"])


class _RhoSupObserver(_Observer):
    """sup over grid times t < gamma_M ^ kappa of |rho - 1| e^{-phi + delta1 t/2}."""

    stop_on = ("kappa", "gamma")

    def __init__(self, delta1: float):
        self.delta1 = delta1

    def before_step(self, st, t0, coeffs):
        w = np.abs(np.expm1(st.logrho)) * np.exp(-st.phi + 0.5 * self.delta1 * t0)
        self.values[st.rows] = np.maximum(self.values[st.rows], w)


def estimate_rho_sup(model: GameModel, transport: TransportStructure, cfg: MCConfig, control=None,
                     check: bool = True, eps0: float = 0.1, region=(-2.0, 2.0)) -> EstimateReport:
    """E sup_{t < gamma_M ^ kappa} |rho_t - 1| e^{-phi_t + delta1 t/2}; ``ratio`` is estimate / eps."""
    _precheck(model, transport, cfg, check, eps0, region)
    if model.delta1 <= 0:
        raise InputError("the rho estimate needs c >= delta1 > 0")
    out, residual = run_paths(model, transport, cfg, lambda: _RhoSupObserver(model.delta1), control)
    m, se = _mean_se(out["values"])
    ratio = m / cfg.epsilon if cfg.epsilon > 0 else None
    return EstimateReport("rho_sup", m, se, cfg.n_paths, None, None, ratio=ratio, residual=residual,
                          params=_params(cfg), notes=["bound proportional to eps with unspecified N"])


class _DiscountedExitObserver(_Observer):
    stop_on = ("kappa", "gamma")

    def stopped(self, st, mask, t, horizon_hit):
        if not horizon_hit:
            self.values[st.rows[mask]] = np.exp(-st.phi[mask])


def estimate_discounted_exit(model: GameModel, transport: TransportStructure, cfg: MCConfig, control=None,
                             check: bool = True, eps0: float = 0.1, region=(-2.0, 2.0)) -> EstimateReport:
    """E e^{-phi} at gamma_M ^ kappa; only the prefactor estimate / eps is reported."""
    _precheck(model, transport, cfg, check, eps0, region)
    out, residual = run_paths(model, transport, cfg, _DiscountedExitObserver, control)
    m, se = _mean_se(out["values"])
    ratio = m / cfg.epsilon if cfg.epsilon > 0 else None
    return EstimateReport("discounted_exit", m, se, cfg.n_paths, None, None, ratio=ratio, residual=residual,
                          params=_params(cfg), notes=["prefactor fitted only; no bound asserted"])


class _SquaredMomentObserver(_Observer):
    stop_on = ("kappa",)

    def __init__(self, eps: float, delta: float):
        self.eps, self.delta = eps, delta

    def stopped(self, st, mask, t, horizon_hit):
        xi = _xi(st, self.eps)[mask]
        self.values[st.rows[mask]] = xi * xi * np.exp(-2.0 * st.phi[mask] + self.delta * t)


def estimate_squared_moment(model: GameModel, transport: TransportStructure, cfg: MCConfig, control=None,
                            check: bool = True, eps0: float = 0.1, region=(-2.0, 2.0)) -> EstimateReport:
    """E |xi_gamma|^2 e^{-2 phi_gamma + delta gamma} for gamma = kappa ^ horizon; bound 1 when delta >= K1^2."""
    _precheck(model, transport, cfg, check, eps0, region)
    notes = []
    if not cfg.delta >= model.K1 ** 2:
        notes.append(f"delta={cfg.delta:g} < K1^2={model.K1 ** 2:g}; the unit bound is not implied")
    out, residual = run_paths(model, transport, cfg, lambda: _SquaredMomentObserver(cfg.epsilon, cfg.delta),
                              control)
    m, se = _mean_se(out["values"])
    return EstimateReport("squared_moment", m, se, cfg.n_paths, 1.0, m <= 1.0 + 3 * se, residual=residual,
                          params=_params(cfg), notes=notes)


class _RepresentationObserver(_Observer):
    """Trapezoid integral of z f_hat e^{-phi_hat} plus z v(x) e^{-phi_hat} at the stop."""

    stop_on = ("kappa", "gamma", "tau")

    def __init__(self, model, transport, control, v, dt):
        self.model, self.transport, self.control = model, transport, control
        self.v, self.dt = v, dt

    def _weighted_f(self, st):
        hat = hat_coefficients(self.model, self.transport, *self.control, st.x, st.y)
        return np.exp(st.logz - st.phi_hat) * hat.f

    def start(self, n, st):
        self.values = np.zeros(n)
        st.aux["w"] = self._weighted_f(st)

    def after_step(self, st, t1):
        w = self._weighted_f(st)
        self.values[st.rows] += 0.5 * self.dt * (st.aux["w"] + w)
        st.aux["w"] = w

    def stopped(self, st, mask, t, horizon_hit):
        self.values[st.rows[mask]] += np.exp(st.logz[mask] - st.phi_hat[mask]) * self.v(st.x[mask])


def verify_representation(model: GameModel, transport: TransportStructure, cfg: MCConfig,
                          pde_oracle: SolveResult, domain: Domain | None = None, floor: float = 1e-6,
                          check: bool = False, eps0: float = 0.1, region=(-2.0, 2.0)) -> EstimateReport:
    """Compare E[int_0^gamma z f_hat e^{-phi_hat} dt + z_gamma v(x_gamma) e^{-phi_hat}] with z0 v(x0).

    gamma is the first of: x or y leaving the domain, the horizon, kappa and
    gamma_M.  v is the FD solution inside the domain and g outside.  The
    check passes when the gap is at most 3 standard errors plus ``floor``.
    """
    if not model.controls.is_singleton:
        raise ConfigurationError("the representation check simulates a single control pair only")
    if cfg.horizon is None:
        raise InputError("the representation check needs a finite horizon T")
    if check:
        _precheck(model, transport, cfg, True, eps0, region)
    domain = pde_oracle.solution.mesh.domain if domain is None else domain
    gf = pde_oracle.solution
    control = next(iter(model.controls.pairs()))

    def v(points):
        points = np.asarray(points, float).reshape(-1, model.dim)
        out = model.terminal(points)
        inside = domain.contains(points)
        if np.any(inside):
            out[inside] = gf.interpolate(points[inside])
        return out

    out, _ = run_paths(model, transport, cfg,
                       lambda: _RepresentationObserver(model, transport, control, v, cfg.dt), control, domain)
    m, se = _mean_se(out["values"])
    x0 = np.array(cfg.y0) + cfg.epsilon * np.array(cfg.xi)
    target = cfg.z0 * float(v(x0.reshape(1, -1))[0])
    return EstimateReport("representation", m, se, cfg.n_paths, target, abs(m - target) <= 3 * se + floor,
                          ratio=m - target, params=_params(cfg),
                          notes=[f"target z0 v(x0) = {target:.17g}", f"oracle residual {pde_oracle.residual:.3g}"])


def calibrate_lambda1(model: GameModel, mu: float, eps0: float = 0.1, transport: TransportStructure | None = None,
                      points=None, region=(-2.0, 2.0), n_per_axis: int = 201, n_dirs: int = 16, n_t: int = 8,
                      factors: Sequence[float] = (0.5, 0.25, 0.1, 0.05)) -> float:
    """Largest lambda1 in ``factors * eps0`` that keeps the rho drift nonpositive.

    The drift is 2 C + delta1/2 + |pi|^2 - (2 c(y) - delta1) with
    C = c(y) - c_hat(x, y), sampled on pairs with |x - y| <= lambda1 / mu.
    """
    from .conditions import _default_points, coupling_pairs
    from .game_model import coupling_transport
    if mu < 1:
        raise InputError("mu must be at least 1")
    transport = coupling_transport(model, mu) if transport is None else transport
    ys = _default_points(model, points, region, n_per_axis)
    d1 = model.delta1
    for lam1 in sorted((f * eps0 for f in factors), reverse=True):
        x, y, _ = coupling_pairs(ys, lam1 / mu, n_dirs, n_t)
        worst = -math.inf
        for alpha, beta in model.controls.pairs():
            cy = model.coefficients(alpha, beta, y).c
            hat = hat_coefficients(model, transport, alpha, beta, x, y)
            pi = np.asarray(transport.pi(alpha, beta, x, y), float).reshape(x.shape[0], -1)
            drift = 2 * (cy - hat.c) + 0.5 * d1 + np.sum(pi * pi, axis=1) - (2 * cy - d1)
            worst = max(worst, float(np.max(drift)))
        if worst <= 0:
            return lam1
    raise ConfigurationError(f"no lambda1 in {list(factors)} x eps0 keeps the rho drift nonpositive")
