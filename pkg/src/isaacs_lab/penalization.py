"""Games enlarged by penalized auxiliary controls, and the K sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .fd_solver import Mesh, SolveResult, SweepReport, loglog_slope, solve
from .game_model import ControlGrid, Domain, Evaluator, GameModel
from .parallel import parallel_map


@dataclass(frozen=True)
class A2Extension:
    """Coefficients for the auxiliary maximizer controls.

    Evaluators have the usual ``(alpha, beta, p, x)`` signature but must not
    depend on ``beta``.
    """

    labels: tuple
    sigma: Evaluator
    b: Evaluator
    c: Evaluator
    f: Evaluator
    name: str = "a2"

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ConfigurationError("A2 extension needs at least one control label")


@dataclass(frozen=True)
class PenalizedModel:
    base: GameModel
    a2_extension: A2Extension
    K: float
    model: GameModel

    def uses_a2(self, result: SolveResult) -> np.ndarray:
        """Boolean per interior node: the optimal alpha is an auxiliary control."""
        n1 = len(self.base.controls.a_controls)
        return result.policy_index[:, 0] >= n1


def _check_beta_independence(base: GameModel, ext: A2Extension, points: np.ndarray) -> None:
    betas = base.controls.betas
    if len(betas) < 2:
        return
    p = base.zero_p(points.shape[0])
    for alpha in ext.labels:
        for name in ("sigma", "b", "c", "f"):
            fn = getattr(ext, name)
            first = np.asarray(fn(alpha, betas[0], p, points), float)
            for beta in betas[1:]:
                other = np.asarray(fn(alpha, beta, p, points), float)
                if not np.array_equal(first, other):
                    raise ConfigurationError(f"A2 coefficient {name} for control {alpha!r} depends on beta")


def build_penalized_model(base: GameModel, a2_extension: A2Extension, K: float,
                          sample_points=None) -> PenalizedModel:
    """Merge A1 and A2 and charge K per unit time spent on A2 controls."""
    if K < 0:
        raise InputError("penalty K must be nonnegative")
    if base.controls.a2_controls:
        raise ConfigurationError("base model already carries auxiliary controls")
    controls = ControlGrid(base.controls.a_controls, base.controls.b_controls, a2_extension.labels)
    if sample_points is None:
        sample_points = np.linspace(-2.0, 2.0, 41).reshape(-1, 1) if base.dim == 1 else \
            np.stack(np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-2, 2, 21)), -1).reshape(-1, 2)
    _check_beta_independence(base, a2_extension, np.asarray(sample_points, float))
    aux = set(a2_extension.labels)
    K = float(K)

    def pick(name):
        main, extra = getattr(base, name), getattr(a2_extension, name)
        if name == "f":
            return lambda al, be, p, x: (np.asarray(extra(al, be, p, x), float) - K) if al in aux \
                else main(al, be, p, x)
        return lambda al, be, p, x: extra(al, be, p, x) if al in aux else main(al, be, p, x)

    model = base.replace(controls=controls, sigma=pick("sigma"), b=pick("b"), c=pick("c"), f=pick("f"),
                         name=f"{base.name}+{a2_extension.name}(K={K:g})")
    return PenalizedModel(base, a2_extension, K, model)


def spreading_extension(base: GameModel, sigma: float = 1.0, label="spread") -> A2Extension:
    """One auxiliary control with strong diffusion, no drift, and the base f and c.

    The base f and c are taken from the first base control pair, which must
    not depend on the controls for the extension to be beta-independent.
    """
    a0, b0 = base.controls.a_controls[0], base.controls.b_controls[0]
    d, d1 = base.dim, base.noise_dim

    def sig(al, be, p, x):
        out = np.zeros((x.shape[0], d, d1))
        for i in range(d):
            out[:, i, i] = sigma
        return out

    return A2Extension(
        labels=(label,), sigma=sig,
        b=lambda al, be, p, x: np.zeros((x.shape[0], d)),
        c=lambda al, be, p, x: base.c(a0, b0, p, x),
        f=lambda al, be, p, x: base.f(a0, b0, p, x),
        name=f"spread({sigma:g})")


def drift_extension(base: GameModel, drift: float = 4.0, label="push") -> A2Extension:
    """One auxiliary control with a strong constant drift to the right."""
    a0, b0 = base.controls.a_controls[0], base.controls.b_controls[0]
    d = base.dim
    return A2Extension(
        labels=(label,), sigma=lambda al, be, p, x: base.sigma(a0, b0, p, x),
        b=lambda al, be, p, x: np.full((x.shape[0], d), float(drift)),
        c=lambda al, be, p, x: base.c(a0, b0, p, x),
        f=lambda al, be, p, x: base.f(a0, b0, p, x),
        name=f"push({drift:g})")


A2_BUILTINS: dict[str, Callable[..., A2Extension]] = {
    "spread": spreading_extension,
    "push": drift_extension,
}


def max_second_difference(result: SolveResult) -> float:
    gf = result.solution
    if gf.mesh.dim != 1:
        return math.nan
    v = gf.padded
    h = gf.mesh.h[0]
    return float(np.max(np.abs(v[2:] - 2 * v[1:-1] + v[:-2])) / (h * h))


def sweep_K(base: GameModel, a2_extension: A2Extension, K_list: Sequence[float], mesh: Mesh,
            v_reference: SolveResult | None = None, tol: float = 1e-9, fit_min_K: float = 4.0,
            threads: int | None = None, check_truncation: bool = True) -> SweepReport:
    """sup |v_K - v| for each K, with the checks that v <= v_K and v_K decreases in K.

    Columns: ``min_gap`` (min over nodes of v_K - v), ``a2_nodes`` (nodes whose
    optimal control is auxiliary) and ``max_d2`` (largest discrete second
    difference of v_K, reported only).
    """
    K_list = sorted(float(k) for k in K_list)
    if v_reference is None:
        v_reference = solve(base, mesh)
    if v_reference.solution.mesh != mesh:
        raise InputError("reference solution must live on the sweep mesh")
    v = v_reference.solution.values

    def run(K):
        pm = build_penalized_model(base, a2_extension, K)
        return pm, solve(pm.model, mesh)

    results = parallel_map(run, K_list, threads)
    gaps, mins, usage, d2 = [], [], [], []
    prev = None
    monotone = True
    nested = True
    prev_use = None
    for (pm, res) in results:
        diff = res.solution.values - v
        gaps.append(float(np.max(np.abs(diff))))
        mins.append(float(np.min(diff)))
        use = pm.uses_a2(res)
        usage.append(int(np.count_nonzero(use)))
        d2.append(max_second_difference(res))
        if prev is not None and np.any(res.solution.values > prev + tol):
            monotone = False
        if prev_use is not None and np.any(use & ~prev_use):
            nested = False
        prev, prev_use = res.solution.values, use
    fit = [(k, g) for k, g in zip(K_list, gaps) if k >= fit_min_K]
    slope, err = loglog_slope([k for k, _ in fit], [g for _, g in fit])
    report = SweepReport("K", K_list, "sup_gap", gaps, slope, err,
                         columns={"min_gap": mins, "a2_nodes": usage, "max_d2": d2})
    ordered = all(m >= -tol for m in mins)
    nonincreasing = all(b <= a + tol for a, b in zip(gaps, gaps[1:]))
    report.notes.append(f"v<=v_K: {ordered}; v_K decreasing in K: {monotone}; "
                        f"sup gap non-increasing: {nonincreasing}; A2 usage nested: {nested}")
    report.verdict = "pass" if (ordered and monotone and nonincreasing) else "fail"
    if check_truncation and not mesh.domain.bounded:
        big = Mesh(mesh.domain.with_radius(2 * mesh.domain.truncation_radius), 2 * (mesh.n + 1) - 1)
        pm = build_penalized_model(base, a2_extension, K_list[-1])
        wide = solve(pm.model, big).solution
        pts = mesh.interior_points()
        central = np.all(np.abs(pts) <= 0.5 * mesh.domain.truncation_radius, axis=1)
        narrow = results[-1][1].solution.values.reshape(-1)
        change = float(np.max(np.abs(wide.interpolate(pts[central]) - narrow[central])))
        report.notes.append(f"truncation check at K={K_list[-1]:g}: central-half change {change:.3e} "
                            f"after doubling the radius")
        report.columns["truncation_change"] = [math.nan] * (len(K_list) - 1) + [change]
    return report
