"""Command-line entry point: ``isaacs-lab <command> ...``.

Every artifact starts with ``# manifest-sha256=<hash>``, where the hash
covers the command, its configuration, the seed and the package version.
Wall time and output paths are kept out of the hash so that rerunning a
command reproduces the artifact byte for byte; both are recorded in the
``<out>.manifest.json`` file written next to each artifact.

Exit status: 0 success, 1 numerical failure (including a failed check),
2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (check_coupling_condition, check_directional_condition, check_ellipticity,
                         check_untransported_coupling, find_degeneracy_index)
from .coupled_mc import (MCConfig, estimate_discounted_exit, estimate_exit_decay, estimate_J_I, estimate_rho_sup,
                         estimate_squared_moment, verify_representation)
from .errors import ConditionNotMetError, ConfigurationError, InputError, IsaacsLabError, NumericalError
from .families import available_families, load_model, read_config, tanh_switch_transport
from .fd_solver import SCHEMES, Mesh, interior_lipschitz_probe, solve, sweep_delta0
from .game_model import coupling_transport, identity_transport
from .parallel import THREADS_ENV, default_threads
from .penalization import A2_BUILTINS, sweep_K
from .recipes import RECIPES

log = logging.getLogger("isaacs_lab")

TRANSPORTS = ("identity", "coupling", "tanh-switch")
ESTIMATORS = ("path-integral", "exit-decay", "weight-deviation", "discounted-exit", "squared-moment",
              "representation")
CONDITIONS = ("ellipticity", "coupling", "untransported-coupling", "directional", "degeneracy-index")


# ---------------------------------------------------------------------------
# artifacts


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def manifest_hash(command: str, config: dict, seed) -> str:
    payload = json.dumps({"command": command, "config": config, "seed": seed, "version": __version__},
                         sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


def render_csv(digest: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# manifest-sha256={digest}\n")
    buf.write(",".join(format_cell(h) for h in header) + "\n")
    for row in rows:
        buf.write(",".join(format_cell(v) for v in row) + "\n")
    return buf.getvalue()


class Artifacts:
    """Collects one command's configuration and writes its files."""

    def __init__(self, command: str, config: dict, seed=None):
        self.command = command
        self.config = config
        self.seed = seed
        self.digest = manifest_hash(command, config, seed)
        self.started = time.perf_counter()

    def write_text(self, out: str | None, body: str) -> None:
        if out is None:
            sys.stdout.write(body)
            return
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(body)
        manifest = {"manifest_sha256": self.digest, "command": self.command, "config": self.config,
                    "seed": self.seed, "version": __version__, "output": str(path),
                    "wall_time_seconds": time.perf_counter() - self.started}
        with open(str(path) + ".manifest.json", "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    def write_csv(self, out: str | None, header, rows) -> None:
        self.write_text(out, render_csv(self.digest, header, rows))


# ---------------------------------------------------------------------------
# argument helpers


def parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        try:
            out[key] = float(raw)
        except ValueError:
            raise ConfigurationError(f"key {key!r}: {raw!r} is not a number") from None
    return out


def parse_floats(text: str, key: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigurationError(f"{key}: {text!r} is not a comma-separated list of numbers") from None
    if not vals:
        raise ConfigurationError(f"{key}: empty list")
    return vals


def parse_region(text: str | None, domain):
    if text is None:
        return None
    vals = parse_floats(text, "--region")
    if len(vals) != 2 * domain.dim:
        raise ConfigurationError(f"--region needs {2 * domain.dim} numbers (lo,hi per axis)")
    pairs = [(vals[2 * i], vals[2 * i + 1]) for i in range(domain.dim)]
    return pairs[0] if domain.dim == 1 else pairs


def require_positive(value, key: str, minimum: float = 0.0, strict: bool = True):
    bad = value <= minimum if strict else value < minimum
    if bad or (isinstance(value, float) and not math.isfinite(value)):
        raise ConfigurationError(f"{key} must be {'>' if strict else '>='} {minimum:g}, got {value!r}")
    return value


def model_config(args) -> dict:
    return {"model": args.model, "set": dict(sorted(parse_overrides(args.set).items()))}


def load(args):
    model, domain = load_model(args.model, parse_overrides(args.set))
    delta1 = getattr(args, "delta1", None)
    if delta1 is not None:
        model = model.replace(delta1=require_positive(delta1, "--delta1", strict=False))
    return model, domain


def build_transport(name: str, model, mu: float, eps: float = 0.05):
    if name == "identity":
        return identity_transport(model)
    if name == "coupling":
        return coupling_transport(model, mu)
    if name == "tanh-switch":
        if model.name != "tanh-switch":
            raise ConfigurationError("transport 'tanh-switch' applies to the tanh-switch model only")
        return tanh_switch_transport(model, eps=eps)
    raise ConfigurationError(f"unknown transport {name!r}; choose from {', '.join(TRANSPORTS)}")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    require_positive(args.tol, "--tol")
    model, domain = load(args)
    mesh = Mesh(domain, args.n)
    res = solve(model, mesh, tol=args.tol, scheme=args.scheme)
    cfg = model_config(args) | {"n": args.n, "tol": args.tol, "scheme": args.scheme}
    art = Artifacts("solve", cfg)
    pts = mesh.padded_points()
    header = ["x"] if model.dim == 1 else ["x1", "x2"]
    rows = [list(p) + [v] for p, v in zip(pts, res.solution.padded.reshape(-1))]
    art.write_csv(args.out, header + ["v"], rows)
    log.info("solve: %d iterations, scaled residual %.3g", res.iterations, res.residual)
    return 0


def _conditions_settings(args) -> dict:
    settings = {"checks": ",".join(args.check) if args.check else "ellipticity,coupling",
                "delta": args.delta, "delta1": args.delta1_cond, "mu": args.mu, "eps0": args.eps0,
                "transport": args.transport, "n_per_axis": args.n_per_axis, "n_dirs": args.n_dirs,
                "region": args.region}
    if args.conditions:
        parser = read_config(args.conditions)
        if "conditions" not in parser:
            raise ConfigurationError(f"{args.conditions}: missing [conditions] section")
        for key, raw in parser["conditions"].items():
            if key not in settings:
                raise ConfigurationError(f"{args.conditions}: unknown key {key!r}; allowed: "
                                         f"{', '.join(sorted(settings))}")
            settings[key] = raw
    for key in ("delta", "delta1", "mu", "eps0"):
        try:
            settings[key] = None if settings[key] is None else float(settings[key])
        except ValueError:
            raise ConfigurationError(f"key {key!r}: {settings[key]!r} is not a number") from None
    for key in ("n_per_axis", "n_dirs"):
        try:
            settings[key] = int(settings[key])
        except ValueError:
            raise ConfigurationError(f"key {key!r}: {settings[key]!r} is not an integer") from None
    checks = [c.strip() for c in str(settings["checks"]).split(",") if c.strip()]
    for c in checks:
        if c not in CONDITIONS:
            raise ConfigurationError(f"key 'checks': unknown condition {c!r}; choose from {', '.join(CONDITIONS)}")
    settings["checks"] = checks
    return settings


def _degeneracy_report(model, region):
    if model.dim != 1 or not model.controls.is_singleton:
        raise ConfigurationError("degeneracy-index applies to 1D single-control models")
    al, be = next(iter(model.controls.pairs()))

    def coeff(name):
        def fn(x):
            co = model.coefficients(al, be, np.asarray(x, float).reshape(-1, 1))
            return {"a0": co.a[:, 0, 0], "b": co.b[:, 0], "c": co.c}[name]
        return fn

    return find_degeneracy_index(coeff("a0"), coeff("b"), coeff("c"), interval=region)


def cmd_check_conditions(args) -> int:
    model, domain = load(args)
    s = _conditions_settings(args)
    region = parse_region(s["region"], domain) if s["region"] else \
        ((-2.0, 2.0) if not domain.bounded else
         (domain.lower[0], domain.upper[0]) if domain.dim == 1 else list(zip(domain.lower, domain.upper)))
    delta = s["delta"] if s["delta"] is not None else 2.0 * model.delta1
    delta1 = s["delta1"] if s["delta1"] is not None else model.delta1
    mu = s["mu"]
    transport = build_transport(s["transport"], model, mu)
    scan = dict(region=region, n_per_axis=s["n_per_axis"], n_dirs=s["n_dirs"])
    lines, all_ok = [], True
    for name in s["checks"]:
        if name == "ellipticity":
            rep = check_ellipticity(model, region=region, n_per_axis=s["n_per_axis"])
        elif name == "coupling":
            rep = check_coupling_condition(model, transport, delta, delta1, mu, eps0=s["eps0"], **scan)
        elif name == "untransported-coupling":
            rep = check_untransported_coupling(model, delta, mu, eps0=s["eps0"], delta1=delta1, **scan)
        elif name == "directional":
            rep = check_directional_condition(model, transport, delta, delta1, mu, **scan)
        else:
            deg = _degeneracy_report(model, region)
            ok = deg.status == "found"
            all_ok &= ok
            print(f"degeneracy-index: {deg.status} (n = {deg.n}, witness = {deg.witness})")
            lines += ["[degeneracy-index]", f"status = {deg.status}", f"n = {deg.n}", f"witness = {deg.witness}",
                      f"interval = {deg.interval}", f"n_points = {deg.n_points}", ""]
            continue
        all_ok &= rep.satisfied
        print(f"{name}: {'satisfied' if rep.satisfied else 'NOT satisfied'} "
              f"(worst margin {rep.worst_margin:.6g} at {rep.worst_point})")
        lines += [f"[{name}]", rep.to_text(), ""]
    cfg = model_config(args) | {k: v for k, v in s.items()}
    art = Artifacts("check-conditions", cfg)
    body = f"# manifest-sha256={art.digest}\n" + "\n".join(lines).rstrip("\n") + "\n"
    if args.out:
        art.write_text(args.out, body)
    print("verdict:", "all conditions satisfied" if all_ok else "some condition fails")
    return 0 if all_ok else 1


def cmd_mc_verify(args) -> int:
    model, domain = load(args)
    require_positive(args.paths, "--paths")
    require_positive(args.dt, "--dt")
    estimators = args.estimator or ["path-integral"]
    xi = tuple(parse_floats(args.xi, "--xi")) if args.xi else (1.0,) + (0.0,) * (model.dim - 1)
    y0 = tuple(parse_floats(args.y0, "--y0")) if args.y0 else (0.0,) * model.dim
    cfg = MCConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths, base_seed=args.seed, epsilon=args.epsilon,
                   xi=xi, lam=args.lam, bigM=args.bigM, mu=args.mu, delta=args.delta, y0=y0, z0=args.z0)
    transport = build_transport(args.transport, model, args.mu)
    check = not args.no_check
    rows = []
    for name in estimators:
        if name == "path-integral":
            reps = estimate_J_I(model, transport, cfg, check=check)
        elif name == "exit-decay":
            reps = [estimate_exit_decay(model, transport, cfg, check=check)]
        elif name == "weight-deviation":
            reps = [estimate_rho_sup(model, transport, cfg, check=check)]
        elif name == "discounted-exit":
            reps = [estimate_discounted_exit(model, transport, cfg, check=check)]
        elif name == "squared-moment":
            reps = [estimate_squared_moment(model, transport, cfg, check=check)]
        else:
            if cfg.horizon is None:
                raise ConfigurationError("key 'horizon': the representation estimator needs a finite --horizon")
            oracle = solve(model, Mesh(domain, args.fd_n))
            reps = [verify_representation(model, transport, cfg, oracle, check=check)]
        for r in reps:
            rows.append([r.name, r.estimate, r.std_error, r.bound, r.verdict, r.ratio, r.n_paths, r.residual])
            print(f"{r.name}: estimate {r.estimate:.6g} +- {r.std_error:.2g}, bound {r.bound}, {r.verdict}")
    conf = model_config(args) | {"transport": args.transport, "estimators": estimators,
                                 "mc": {k: v for k, v in vars(cfg).items() if k != "base_seed"}}
    art = Artifacts("mc-verify", conf, seed=args.seed)
    art.write_csv(args.out, ["estimator", "estimate", "std_error", "bound", "verdict", "ratio", "n_paths",
                             "horizon_residual"], rows)
    return 1 if any(r[4] == "fail" for r in rows) else 0


def _sweep_rows(rep):
    return [[p, m, rep.slope] for p, m in zip(rep.params, rep.measured)]


def cmd_sweep_delta0(args) -> int:
    overrides = parse_overrides(args.set)
    deltas = parse_floats(args.delta0, "--delta0")
    for d in deltas:
        require_positive(d, "--delta0")
    _, domain = load_model(args.model, overrides)
    region = parse_region(args.region, domain) or (-0.9, 0.9)

    def family(d0):
        return load_model(args.model, overrides | {"delta0": d0})[0]

    rep = sweep_delta0(family, deltas, Mesh(domain, args.n), region, threads=args.threads)
    art = Artifacts("sweep-delta0", model_config(args) | {"delta0": deltas, "n": args.n, "region": region})
    art.write_csv(args.out, ["param", "lipschitz", "exponent"], _sweep_rows(rep))
    return 0


def cmd_interior_probe(args) -> int:
    model, domain = load(args)
    ns = [int(v) for v in parse_floats(args.n, "--n")]
    region = parse_region(args.region, domain) or (-0.9, 0.9)
    rep = interior_lipschitz_probe(model, [Mesh(domain, n) for n in ns], region, threads=args.threads)
    art = Artifacts("interior-probe", model_config(args) | {"n": ns, "region": region})
    rows = [[h, L, rep.slope, n] for h, L, n in zip(rep.params, rep.measured, rep.columns["n"])]
    art.write_csv(args.out, ["param", "lipschitz", "exponent", "n"], rows)
    print(f"interior-probe verdict: {rep.verdict}")
    return 0


def cmd_penalize_sweep(args) -> int:
    model, domain = load(args)
    if args.a2 not in A2_BUILTINS:
        raise ConfigurationError(f"unknown --a2 {args.a2!r}; built-ins: {', '.join(sorted(A2_BUILTINS))}")
    require_positive(args.kmin, "--kmin")
    if args.kfactor <= 1:
        raise ConfigurationError("--kfactor must be > 1")
    if args.kmax < args.kmin:
        raise ConfigurationError("--kmax must be >= --kmin")
    Ks, k = [], args.kmin
    while k <= args.kmax * (1 + 1e-12):
        Ks.append(k)
        k *= args.kfactor
    a2_params = parse_overrides(args.a2_set)
    try:
        ext = A2_BUILTINS[args.a2](model, **a2_params)
    except TypeError as exc:
        raise ConfigurationError(f"--a2-set: {exc}") from None
    rep = sweep_K(model, ext, Ks, Mesh(domain, args.n), threads=args.threads)
    header, body = rep.rows()
    art = Artifacts("penalize-sweep", model_config(args) | {"a2": args.a2, "a2_set": a2_params, "K": Ks,
                                                            "n": args.n})
    art.write_csv(args.out, header + ["exponent"], [row + [rep.slope] for row in body])
    for note in rep.notes:
        print(note)
    print(f"fitted slope {rep.slope:.4f}, verdict {rep.verdict}")
    return 0 if rep.verdict == "pass" else 1


def cmd_reproduce(args) -> int:
    if args.list or args.recipe is None:
        for name, fn in RECIPES.items():
            print(f"{name}: {(fn.__doc__ or '').strip().splitlines()[0]}")
        return 0
    if args.recipe not in RECIPES:
        raise ConfigurationError(f"unknown recipe {args.recipe!r}; available: {', '.join(RECIPES)}")
    res = RECIPES[args.recipe]()
    for c in res.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {res.name}: {c.label}: {c.detail}")
    art = Artifacts("reproduce", {"recipe": args.recipe})
    art.write_csv(args.out, res.header, res.rows)
    print(f"{res.name}: {'PASS' if res.passed else 'FAIL'} ({res.seconds:.1f} s)")
    return 0 if res.passed else 1


# ---------------------------------------------------------------------------
# parser


def _model_args(p):
    p.add_argument("--model", required=True, help=f"built-in ({', '.join(available_families())}) or config path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a model parameter")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isaacs-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--threads", type=int, default=None,
                    help=f"worker threads for independent sub-tasks (default: ${THREADS_ENV} or 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the Isaacs equation on a mesh")
    _model_args(p)
    p.add_argument("--n", type=int, default=401, help="interior nodes per axis")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--scheme", choices=SCHEMES, default="upwind")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check-conditions", help="sampled structural condition checks")
    _model_args(p)
    p.add_argument("--conditions", help="INI file with a [conditions] section")
    p.add_argument("--check", action="append", choices=CONDITIONS)
    p.add_argument("--transport", choices=TRANSPORTS, default="coupling")
    p.add_argument("--delta", type=float, default=None, help="default: 2 delta1")
    p.add_argument("--delta1", dest="delta1_cond", type=float, default=None, help="default: the model's")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--eps0", type=float, default=0.1)
    p.add_argument("--n-per-axis", type=int, default=201)
    p.add_argument("--n-dirs", type=int, default=64)
    p.add_argument("--region", help="lo,hi per axis")
    p.set_defaults(func=cmd_check_conditions)

    p = sub.add_parser("mc-verify", help="coupled-diffusion Monte Carlo estimators")
    _model_args(p)
    p.add_argument("--transport", choices=TRANSPORTS, default="coupling")
    p.add_argument("--estimator", action="append", choices=ESTIMATORS)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--bigM", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--delta1", type=float, default=None, help="override the model's discount lower bound")
    p.add_argument("--xi", help="unit direction, comma-separated")
    p.add_argument("--y0", help="start point, comma-separated")
    p.add_argument("--z0", type=float, default=1.0)
    p.add_argument("--fd-n", type=int, default=2001, help="FD oracle nodes for the representation estimator")
    p.add_argument("--no-check", action="store_true", help="skip the coupling-condition precheck")
    p.set_defaults(func=cmd_mc_verify)

    p = sub.add_parser("sweep-delta0", help="interior Lipschitz estimate against delta0")
    _model_args(p)
    p.add_argument("--delta0", default="1e-1,1e-2,1e-3,1e-4")
    p.add_argument("--n", type=int, default=2001)
    p.add_argument("--region", help="lo,hi")
    p.set_defaults(func=cmd_sweep_delta0)

    p = sub.add_parser("interior-probe", help="interior Lipschitz estimate under mesh refinement")
    _model_args(p)
    p.add_argument("--n", default="251,501,1001,2001", help="comma-separated interior node counts")
    p.add_argument("--region", help="lo,hi")
    p.set_defaults(func=cmd_interior_probe)

    p = sub.add_parser("penalize-sweep", help="sup |v_K - v| against the penalty K")
    _model_args(p)
    p.add_argument("--a2", default="spread", help=f"auxiliary controls ({', '.join(sorted(A2_BUILTINS))})")
    p.add_argument("--a2-set", action="append", metavar="KEY=VALUE", help="parameter of the A2 builder")
    p.add_argument("--kmin", type=float, default=4.0)
    p.add_argument("--kmax", type=float, default=128.0)
    p.add_argument("--kfactor", type=float, default=2.0)
    p.add_argument("--n", type=int, default=12001)
    p.set_defaults(func=cmd_penalize_sweep)

    p = sub.add_parser("reproduce", help="run a named acceptance recipe")
    p.add_argument("recipe", nargs="?")
    p.add_argument("--list", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    elif args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigurationError, InputError, ConditionNotMetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, IsaacsLabError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
