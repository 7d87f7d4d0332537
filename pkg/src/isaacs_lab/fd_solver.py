"""Monotone finite-difference solver for the Isaacs equation.

The discrete problem at every interior node is

    max_alpha min_beta [ sum_j W_j (v_j - v_0) - c v_0 + f ] = 0,

with nonnegative stencil weights ``W`` (central second differences, drift either
upwinded, centred, or centred where that stays monotone).  It is solved exactly
by policy iteration: an outer improvement over alpha, and for each alpha policy
an inner Howard iteration over beta.  Dirichlet data come from ``g`` on bounded
domains and from the zeroth-order balance ``max min (f - c v) = 0`` on the
artificial boundary of truncated whole-space problems.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import (ConfigurationError, InputError, MonotonicityError, NonConvergenceError,
                     SingularOperatorError)
from .game_model import Domain, GameModel
from .parallel import parallel_map

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
SCHEMES = ("upwind", "central", "hybrid")

_OFFSETS = {
    1: [(-1,), (1,)],
    2: [(-1, 0), (1, 0), (0, -1), (0, 1), (1, 1), (-1, -1), (1, -1), (-1, 1)],
}


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh with ``n`` interior nodes per axis."""

    domain: Domain
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InputError(f"mesh needs n >= 3 interior nodes per axis, got {self.n}")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def h(self) -> tuple:
        return tuple((hi - lo) / (self.n + 1) for lo, hi in zip(self.domain.lower, self.domain.upper))

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def padded_shape(self) -> tuple:
        return (self.n + 2,) * self.dim

    def padded_axes(self) -> list[np.ndarray]:
        out = []
        for lo, hi, h in zip(self.domain.lower, self.domain.upper, self.h):
            ax = lo + h * np.arange(self.n + 2)
            ax[-1] = hi
            out.append(ax)
        return out

    def axes(self) -> list[np.ndarray]:
        return [ax[1:-1] for ax in self.padded_axes()]

    def _points(self, axes) -> np.ndarray:
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def interior_points(self) -> np.ndarray:
        return self._points(self.axes())

    def padded_points(self) -> np.ndarray:
        return self._points(self.padded_axes())

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.padded_shape, dtype=bool)
        for axis in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        return mask

    def refined(self) -> "Mesh":
        """Mesh with half the spacing; its odd nodes coincide with these nodes."""
        return Mesh(self.domain, 2 * self.n + 1)


@dataclass(frozen=True)
class GridFunction:
    """Node values on a mesh, stored with the boundary layer attached."""

    mesh: Mesh
    padded: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.padded, dtype=float)
        if arr.shape != self.mesh.padded_shape:
            raise InputError(f"grid function shape {arr.shape} != {self.mesh.padded_shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("grid function has non-finite values")
        object.__setattr__(self, "padded", arr)

    @property
    def values(self) -> np.ndarray:
        inner = (slice(1, -1),) * self.mesh.dim
        return self.padded[inner]

    @property
    def boundary_values(self) -> np.ndarray:
        return self.padded[self.mesh.boundary_mask()]

    def interpolate(self, x) -> np.ndarray:
        """Piecewise-linear interpolation inside the closed mesh box."""
        x = np.asarray(x, dtype=float)
        if self.mesh.dim == 1:
            return np.interp(x.reshape(-1), self.mesh.padded_axes()[0], self.padded)
        interp = RegularGridInterpolator(tuple(self.mesh.padded_axes()), self.padded)
        return interp(x.reshape(-1, 2))

    @classmethod
    def from_function(cls, mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        vals = np.asarray(fn(mesh.padded_points()), float).reshape(mesh.padded_shape)
        return cls(mesh, vals)


@dataclass(frozen=True)
class SolveResult:
    solution: GridFunction
    iterations: int
    residual: float
    policy_index: np.ndarray
    controls: tuple
    history: tuple = ()
    scheme: str = "upwind"

    @property
    def policy(self) -> list:
        """Optimal (alpha, beta) label pair per interior node (C order)."""
        alphas, betas = self.controls
        return [(alphas[i], betas[j]) for i, j in self.policy_index]

    @property
    def values(self) -> np.ndarray:
        return self.solution.values


# ---------------------------------------------------------------------------
# assembly


@dataclass
class _Problem:
    mesh: Mesh
    alphas: tuple
    betas: tuple
    W: np.ndarray          # (nA, nB, N, K)
    c: np.ndarray          # (nA, nB, N)
    f: np.ndarray          # (nA, nB, N)
    nb_padded: np.ndarray  # (N, K) flat padded index of each neighbour
    nb_interior: np.ndarray  # (N, K) interior index or -1
    padded_template: np.ndarray  # flat padded values with boundary data, interior zero
    inner_flat: np.ndarray  # flat padded index of each interior node
    scale: np.ndarray      # (N,) diagonal magnitude used to scale residuals
    scheme: str = "upwind"


def _neighbour_maps(mesh: Mesh):
    d, n = mesh.dim, mesh.n
    pshape = mesh.padded_shape
    idx = np.indices(mesh.shape).reshape(d, -1).T + 1  # padded coordinates of interior nodes
    inner_flat = np.ravel_multi_index(idx.T, pshape)
    offsets = np.array(_OFFSETS[d])
    nb_coords = idx[:, None, :] + offsets[None, :, :]
    nb_padded = np.ravel_multi_index(np.moveaxis(nb_coords, -1, 0), pshape)
    interior = np.all((nb_coords >= 1) & (nb_coords <= n), axis=-1)
    lin = np.ravel_multi_index(np.moveaxis(np.clip(nb_coords - 1, 0, n - 1), -1, 0), mesh.shape)
    nb_interior = np.where(interior, lin, -1)
    return nb_padded, nb_interior, inner_flat


def _weights(a: np.ndarray, b: np.ndarray, h: tuple, scheme: str, points: np.ndarray, label) -> np.ndarray:
    """Stencil weights (N, K) for one control pair."""
    d = len(h)
    N = a.shape[0]
    if d == 1:
        diff = a[:, 0, 0] / h[0] ** 2
        bb = b[:, 0]
        up = np.maximum(bb, 0.0) / h[0]
        dn = np.maximum(-bb, 0.0) / h[0]
        cen = 0.5 * bb / h[0]
        if scheme == "upwind":
            wm, wp = diff + dn, diff + up
        else:
            wm_c, wp_c = diff - cen, diff + cen
            ok = (wm_c >= 0) & (wp_c >= 0)
            if scheme == "central" and not np.all(ok):
                i = int(np.argmin(ok))
                raise MonotonicityError(
                    f"central drift differencing is not monotone at x={points[i].tolist()} for control {label}; "
                    f"need h <= 2a/|b|", node=(i,))
            wm = np.where(ok, wm_c, diff + dn)
            wp = np.where(ok, wp_c, diff + up)
        return np.stack([wm, wp], axis=1)
    h1, h2 = h
    a11, a22, a12 = a[:, 0, 0], a[:, 1, 1], 0.5 * (a[:, 0, 1] + a[:, 1, 0])
    cross = np.abs(a12) / (h1 * h2)
    e1 = a11 / h1 ** 2 - cross
    e2 = a22 / h2 ** 2 - cross
    W = np.zeros((N, 8))
    pos = np.where(a12 > 0, cross, 0.0)
    neg = np.where(a12 < 0, cross, 0.0)
    drift = []
    for axis, hh in ((0, h1), (1, h2)):
        bb = b[:, axis]
        if scheme == "upwind":
            drift.append((np.maximum(-bb, 0.0) / hh, np.maximum(bb, 0.0) / hh))
        else:
            drift.append((-0.5 * bb / hh, 0.5 * bb / hh))
    W[:, 0], W[:, 1] = e1 + drift[0][0], e1 + drift[0][1]
    W[:, 2], W[:, 3] = e2 + drift[1][0], e2 + drift[1][1]
    if scheme == "hybrid":
        for axis, cols, hh in ((0, (0, 1), h1), (1, (2, 3), h2)):
            bad = (W[:, cols[0]] < 0) | (W[:, cols[1]] < 0)
            bb = b[:, axis]
            base = e1 if axis == 0 else e2
            W[bad, cols[0]] = base[bad] + np.maximum(-bb[bad], 0.0) / hh
            W[bad, cols[1]] = base[bad] + np.maximum(bb[bad], 0.0) / hh
    W[:, 4] = W[:, 5] = pos
    W[:, 6] = W[:, 7] = neg
    if np.min(W) < -1e-12 * np.max(np.abs(W)):
        i = int(np.argmin(np.min(W, axis=1)))
        raise MonotonicityError(
            f"stencil is not monotone at x={points[i].tolist()} for control {label} "
            f"(cross-derivative or drift too large for the mesh)", node=tuple(np.unravel_index(i, (N,))))
    return np.maximum(W, 0.0)


def _zeroth_order_boundary(model: GameModel, points: np.ndarray) -> np.ndarray:
    """Root of max_alpha min_beta (f - c v) = 0 at each point, by bisection."""
    pairs = [(a, b) for a in model.controls.alphas for b in model.controls.betas]
    cs, fs = [], []
    for alpha, beta in pairs:
        co = model.coefficients(alpha, beta, points)
        cs.append(co.c)
        fs.append(co.f)
    c = np.array(cs).reshape(len(model.controls.alphas), len(model.controls.betas), -1)
    f = np.array(fs).reshape(c.shape)
    if np.min(c) <= 0:
        raise InputError("whole-space truncation needs c > 0 on the artificial boundary")
    bound = np.max(np.abs(f) / c, axis=(0, 1))
    lo, hi = -bound - 1.0, bound + 1.0

    def F(v):
        return np.max(np.min(f - c * v[None, None, :], axis=1), axis=0)

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = F(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def _assemble(model: GameModel, mesh: Mesh, scheme: str) -> _Problem:
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown drift scheme {scheme!r}; choose from {SCHEMES}")
    if mesh.dim != model.dim:
        raise InputError("mesh and model dimensions differ")
    pts = mesh.interior_points()
    alphas, betas = model.controls.alphas, model.controls.betas
    N = pts.shape[0]
    K = len(_OFFSETS[mesh.dim])
    W = np.empty((len(alphas), len(betas), N, K))
    c = np.empty((len(alphas), len(betas), N))
    f = np.empty_like(c)
    for i, alpha in enumerate(alphas):
        for j, beta in enumerate(betas):
            co = model.coefficients(alpha, beta, pts)
            if np.min(co.c) < 0:
                raise InputError(f"discount c is negative for control ({alpha}, {beta})")
            W[i, j] = _weights(co.a, co.b, mesh.h, scheme, pts, (alpha, beta))
            c[i, j], f[i, j] = co.c, co.f
    nb_padded, nb_interior, inner_flat = _neighbour_maps(mesh)
    template = np.zeros(int(np.prod(mesh.padded_shape)))
    bmask = mesh.boundary_mask().ravel()
    bpts = mesh.padded_points()[bmask]
    if mesh.domain.bounded:
        template[bmask] = model.terminal(bpts)
    else:
        template[bmask] = _zeroth_order_boundary(model, bpts)
    scale = np.maximum(1.0, np.max(np.sum(W, axis=-1) + c, axis=(0, 1)))
    return _Problem(mesh, alphas, betas, W, c, f, nb_padded, nb_interior, template, inner_flat, scale, scheme)


def _apply_all(prob: _Problem, v: np.ndarray) -> np.ndarray:
    """Scaled residual expressions for every control pair, shape (nA, nB, N)."""
    full = prob.padded_template.copy()
    full[prob.inner_flat] = v
    diff = full[prob.nb_padded] - v[:, None]
    L = np.einsum("abnk,nk->abn", prob.W, diff) - prob.c * v + prob.f
    return L / prob.scale


def _solve_policy(prob: _Problem, ia: np.ndarray, ib: np.ndarray, use_sparse: bool = False) -> np.ndarray:
    N = ia.shape[0]
    nodes = np.arange(N)
    W = prob.W[ia, ib, nodes]
    c = prob.c[ia, ib, nodes]
    f = prob.f[ia, ib, nodes]
    diag = -np.sum(W, axis=1) - c
    boundary = prob.nb_interior < 0
    rhs = -f - np.sum(np.where(boundary, W * prob.padded_template[prob.nb_padded], 0.0), axis=1)
    if np.any(diag == 0):
        raise SingularOperatorError("discrete operator has a zero diagonal entry")
    if prob.mesh.dim == 1 and not use_sparse:
        ab = np.zeros((3, N))
        ab[1] = diag
        ab[0, 1:] = W[:-1, 1]
        ab[2, :-1] = W[1:, 0]
        try:
            v = solve_banded((1, 1), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularOperatorError(str(exc)) from exc
    else:
        rows = np.repeat(nodes, W.shape[1])
        cols = prob.nb_interior.ravel()
        vals = W.ravel()
        keep = cols >= 0
        A = sp.coo_matrix((np.concatenate([vals[keep], diag]),
                           (np.concatenate([rows[keep], nodes]), np.concatenate([cols[keep], nodes]))),
                          shape=(N, N)).tocsc()
        v = spsolve(A, rhs)
    if not np.all(np.isfinite(v)):
        raise SingularOperatorError("linear solve produced non-finite values (singular operator?)")
    return v


def _finish(prob: _Problem, v: np.ndarray, ia, ib, iterations: int, history, tol: float) -> SolveResult:
    full = prob.padded_template.copy()
    full[prob.inner_flat] = v
    L = _apply_all(prob, v)
    inner = np.min(L, axis=1)
    H = np.max(inner, axis=0)
    residual = float(np.max(np.abs(H)))
    # reported policy: first control (list order) attaining the optimum up to round-off
    slack = 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(v))
    best_a = np.argmax(inner >= H[None, :] - slack[None, :], axis=0)
    nodes = np.arange(v.shape[0])
    row = L[best_a, :, nodes]  # (N, nB)
    best_b = np.argmax(row <= np.min(row, axis=1, keepdims=True) + slack[:, None], axis=1)
    gf = GridFunction(prob.mesh, full.reshape(prob.mesh.padded_shape))
    if residual > tol:
        raise NonConvergenceError(
            f"policy iteration stalled with residual {residual:.3e} > tol {tol:.1e}", residual, iterations)
    return SolveResult(gf, iterations, residual, np.stack([best_a, best_b], axis=1),
                       (prob.alphas, prob.betas), tuple(history), prob.scheme)


def solve_isaacs(model: GameModel, mesh: Mesh, tol: float = DEFAULT_TOL, max_iter: int = 500,
                 scheme: str = "upwind") -> SolveResult:
    """Solve the discrete Isaacs equation by policy iteration.

    The reported residual is the max over nodes of the discrete Hamiltonian
    divided by max(1, diagonal size), i.e. it is measured in value units.
    """
    prob = _assemble(model, mesh, scheme)
    nA, nB, N = prob.c.shape
    eps = np.finfo(float).eps
    nodes = np.arange(N)
    if nA * nB == 1:
        ia = np.zeros(N, dtype=int)
        v = _solve_policy(prob, ia, ia)
        return _finish(prob, v, ia, ia, 1, [], tol)

    # start from the best constant policies
    const = np.empty((nA, nB, N))
    for i in range(nA):
        for j in range(nB):
            const[i, j] = _solve_policy(prob, np.full(N, i), np.full(N, j))
    v = np.max(np.min(const, axis=1), axis=0)
    L = _apply_all(prob, v)
    ia = np.argmax(np.min(L, axis=1), axis=0)
    history = []
    iterations = 0
    while True:
        # inner Howard iteration over beta for the current alpha policy
        Lsel = L[ia, :, nodes]
        ib = np.argmin(Lsel, axis=1)
        while True:
            v = _solve_policy(prob, ia, ib)
            iterations += 1
            if iterations > max_iter:
                H = np.max(np.min(_apply_all(prob, v), axis=1), axis=0)
                raise NonConvergenceError(f"policy iteration exceeded {max_iter} iterations",
                                          float(np.max(np.abs(H))), iterations)
            L = _apply_all(prob, v)
            thr = 64 * eps * np.maximum(1.0, np.abs(v))
            Lsel = L[ia, :, nodes]
            cand = np.argmin(Lsel, axis=1)
            better = Lsel[nodes, cand] < Lsel[nodes, ib] - thr
            history.append(float(np.max(np.abs(np.max(np.min(L, axis=1), axis=0)))))
            if not np.any(better):
                break
            ib = np.where(better, cand, ib)
        inner = np.min(L, axis=1)
        cand = np.argmax(inner, axis=0)
        better = inner[cand, nodes] > inner[ia, nodes] + thr
        if not np.any(better):
            break
        ia = np.where(better, cand, ia)
    return _finish(prob, v, ia, ib, iterations, history, tol)


def solve_linear(model: GameModel, mesh: Mesh, tol: float = DEFAULT_TOL, scheme: str = "upwind") -> SolveResult:
    """Direct sparse solve for a model with exactly one control pair."""
    if not model.controls.is_singleton:
        raise InputError("solve_linear needs exactly one (alpha, beta) pair")
    prob = _assemble(model, mesh, scheme)
    N = prob.c.shape[-1]
    if not mesh.domain.bounded and np.max(prob.c) == 0:
        raise SingularOperatorError("c vanishes identically on a whole-space problem")
    ia = np.zeros(N, dtype=int)
    v = _solve_policy(prob, ia, ia, use_sparse=True)
    return _finish(prob, v, ia, ia, 1, [], tol)


def solve(model: GameModel, mesh: Mesh, tol: float = DEFAULT_TOL, scheme: str = "upwind",
          max_iter: int = 500) -> SolveResult:
    if model.controls.is_singleton:
        return solve_linear(model, mesh, tol, scheme)
    return solve_isaacs(model, mesh, tol, max_iter, scheme)


@dataclass(frozen=True)
class WholeSpaceSolve:
    result: SolveResult
    radii: tuple
    roi_change: float


def solve_whole_space(model: GameModel, domain: Domain, n: int, roi, tol: float = 1e-8,
                      max_doublings: int = 4, scheme: str = "upwind") -> WholeSpaceSolve:
    """Truncate, then double the radius at fixed spacing until values on ``roi`` settle.

    ``roi`` is a (lower, upper) interval in 1D or a list of such pairs in 2D.
    Returns the last solve together with the radii tried and the final change.
    """
    if domain.bounded:
        raise InputError("solve_whole_space expects a whole-space domain")
    mesh = Mesh(domain, n)
    prev = solve(model, mesh, scheme=scheme)
    radii = [domain.truncation_radius]
    change = math.inf
    for _ in range(max_doublings):
        new_domain = domain.with_radius(2 * radii[-1])
        new_mesh = Mesh(new_domain, 2 * (mesh.n + 1) - 1)
        cur = solve(model, new_mesh, scheme=scheme)
        mask_old = _region_mask(mesh, roi)
        mask_new = _region_mask(new_mesh, roi)
        change = float(np.max(np.abs(prev.solution.padded[mask_old] - cur.solution.padded[mask_new])))
        radii.append(new_domain.truncation_radius)
        prev, mesh = cur, new_mesh
        if change < tol:
            break
    return WholeSpaceSolve(prev, tuple(radii), change)


def extrapolated_solve(model: GameModel, mesh: Mesh, scheme: str = "central", tol: float = DEFAULT_TOL,
                       order: int = 2) -> GridFunction:
    """Richardson extrapolation from ``mesh`` and its refinement.

    With a second-order (central) scheme the leading h^2 error cancels, which
    makes solutions of equivalent continuous problems comparable node-wise far
    below the single-mesh discretization error.
    """
    coarse = solve(model, mesh, tol, scheme)
    fine = solve(model, mesh.refined(), tol, scheme)
    sub = (slice(None, None, 2),) * mesh.dim
    w = 2.0 ** order
    vals = (w * fine.solution.padded[sub] - coarse.solution.padded) / (w - 1.0)
    return GridFunction(mesh, vals)


# ---------------------------------------------------------------------------
# Lipschitz measurements


def _region_mask(mesh: Mesh, region) -> np.ndarray:
    bounds = _region_bounds(mesh.dim, region)
    axes = mesh.padded_axes()
    masks = []
    for ax, (lo, hi) in zip(axes, bounds):
        span = max(abs(lo), abs(hi), 1.0)
        masks.append((ax >= lo - 1e-12 * span) & (ax <= hi + 1e-12 * span))
    grid = np.meshgrid(*masks, indexing="ij")
    return np.logical_and.reduce(grid)


def _region_bounds(dim: int, region) -> list[tuple[float, float]]:
    arr = np.asarray(region, dtype=float)
    if dim == 1:
        arr = arr.reshape(1, 2)
    if arr.shape != (dim, 2) or np.any(arr[:, 0] > arr[:, 1]):
        raise InputError(f"region {region!r} is not a valid sub-interval/sub-box")
    return [tuple(r) for r in arr]


def lipschitz_estimate(gf: GridFunction, region) -> float:
    """Largest difference quotient between axis-adjacent nodes inside ``region``."""
    mesh = gf.mesh
    mask = _region_mask(mesh, region)
    if np.count_nonzero(mask) < 2:
        raise InputError("region contains fewer than two mesh nodes")
    best = 0.0
    found = False
    for axis, h in enumerate(mesh.h):
        sl0 = [slice(None)] * mesh.dim
        sl1 = [slice(None)] * mesh.dim
        sl0[axis] = slice(None, -1)
        sl1[axis] = slice(1, None)
        pair = mask[tuple(sl0)] & mask[tuple(sl1)]
        if np.any(pair):
            found = True
            dv = np.abs(gf.padded[tuple(sl1)] - gf.padded[tuple(sl0)])[pair] / h
            best = max(best, float(np.max(dv)))
    if not found:
        raise InputError("region contains no adjacent node pair")
    return best


@dataclass
class SweepReport:
    """Table of a swept parameter against a measured quantity.

    ``slope`` is the least-squares slope of log(measured) against log(param)
    over the entries with positive measurements, ``slope_stderr`` its standard
    error.
    """

    param_name: str
    params: list
    measured_name: str
    measured: list
    slope: float = math.nan
    slope_stderr: float = math.nan
    verdict: str | None = None
    columns: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def rows(self) -> tuple[list[str], list[list]]:
        header = [self.param_name, self.measured_name] + list(self.columns)
        body = []
        for i, (p, m) in enumerate(zip(self.params, self.measured)):
            body.append([p, m] + [self.columns[k][i] for k in self.columns])
        return header, body


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        return math.nan, math.nan
    lx, ly = np.log(x[keep]), np.log(y[keep])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    m = lx.size
    if m <= 2:
        return float(coef[0]), 0.0
    resid = ly - A @ coef
    s2 = float(resid @ resid) / (m - 2)
    var = s2 / float(np.sum((lx - lx.mean()) ** 2))
    return float(coef[0]), math.sqrt(var)


def sweep_delta0(family: Callable[[float], GameModel], delta0_list: Sequence[float], mesh: Mesh, region,
                 scheme: str = "upwind", threads: int | None = None) -> SweepReport:
    """Lipschitz estimate on ``region`` for each ellipticity level."""

    def run(delta0):
        try:
            res = solve(family(delta0), mesh, scheme=scheme)
        except Exception as exc:
            log.error("solve failed for delta0=%g: %s", delta0, exc)
            raise
        return lipschitz_estimate(res.solution, region), res

    out = parallel_map(run, list(delta0_list), threads)
    lips = [o[0] for o in out]
    slope, err = loglog_slope(delta0_list, lips)
    report = SweepReport("delta0", list(delta0_list), "lipschitz", lips, slope, err)
    report.notes.append(f"mesh n={mesh.n}, h={mesh.h}, region={region}, scheme={scheme}")
    return report


def interior_lipschitz_probe(model: GameModel, mesh_list: Sequence[Mesh], region,
                             threads: int | None = None, rel_tol: float = 0.10) -> SweepReport:
    """Interior Lipschitz estimates under mesh refinement."""
    if not mesh_list:
        raise InputError("need at least one mesh")
    domain = mesh_list[0].domain
    bounds = _region_bounds(model.dim, region)
    for (lo, hi), dlo, dhi in zip(bounds, domain.lower, domain.upper):
        if lo - dlo < 0.1 - 1e-12 or dhi - hi < 0.1 - 1e-12:
            raise InputError("probe region must keep a distance of at least 0.1 from the boundary")

    def run(mesh):
        return lipschitz_estimate(solve(model, mesh).solution, region)

    lips = parallel_map(run, list(mesh_list), threads)
    hs = [m.h[0] for m in mesh_list]
    slope, err = loglog_slope(hs, lips)
    verdict = None
    if len(lips) >= 2:
        verdict = "bounded" if abs(lips[-1] - lips[-2]) <= rel_tol * abs(lips[-1]) else "unbounded"
    return SweepReport("h", hs, "lipschitz", lips, slope, err, verdict,
                       columns={"n": [m.n for m in mesh_list]})
