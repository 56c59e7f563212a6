"""Command-line frontend.

Subcommands: optimal, table, pareto, sweep, check, efficiency.

Exit codes distinguish certificate strength so scripts can rely on them:
  0   success; for `optimal`/`check`, an equivalence certificate holds
  1   runtime failure (including a failed `check`)
  2   best-found result without a certificate (non-convex criteria)
  64  usage or configuration error

Options may come from flags or from a JSON config file (--config); flags
override the file.  OPTDESIGN_SEED provides the default seed.  File outputs
are written atomically (write to a temp file, then rename); with a fixed seed
every run is byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .criteria import (
    CONVEX_KINDS,
    CriterionSpec,
    correlation,
    criterion_value,
    derivative_report,
    phi_d,
    phi_r,
    phi_r2,
)
from .designs import DesignSpace, Model, design_from_json, design_to_json, fim, slr_model
from .errors import OptDesignError, ValidationError
from .mm import MMParams, mm_model
from .optimize import (
    OptimizeRequest,
    OptimizeResult,
    mm_designs_csv,
    mm_efficiencies_csv,
    mm_tables,
    optimize_design,
    sa_references,
)
from .pareto import (
    compound_sweep,
    compound_sweep_csv,
    criterion_sweep,
    evaluate_front_points,
    front_csv,
    pareto_front,
    sample_two_point_designs,
    sweep_csv,
)
from .slr import table_slr, table_slr_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BEST_FOUND = 2
EXIT_USAGE = 64

SEED_ENV_VAR = "OPTDESIGN_SEED"

CRITERION_KINDS = ("D", "R", "R2", "C", "SA", "EM", "CPB", "COMPOUND")


class UsageError(Exception):
    """Bad flags or config; maps to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI run; JSON round-trips unchanged."""

    command: str
    model: str | None = None
    model_params: dict = field(default_factory=dict)
    criterion: str | None = None
    criterion_params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "RunConfig":
        return RunConfig(**obj)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        _atomic_write(output, text)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _setting(args: argparse.Namespace, cfg: dict, name: str, default=None):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, name.replace("-", "_"), None)
    if val is not None:
        return val
    if name in cfg:
        return cfg[name]
    return default


def _resolve_seed(args: argparse.Namespace, cfg: dict) -> int:
    val = _setting(args, cfg, "seed")
    if val is not None:
        return int(val)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return 0


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _build_model(args: argparse.Namespace, cfg: dict) -> tuple[Model, dict]:
    name = _setting(args, cfg, "model")
    if name is None:
        raise UsageError("--model is required (slr or mm)")
    name = str(name).lower()
    if name == "slr":
        a = _setting(args, cfg, "a")
        b = _setting(args, cfg, "b")
        if a is None or b is None:
            raise UsageError("model slr needs --a and --b")
        model = slr_model(DesignSpace(float(a), float(b)))
        return model, {"model": "slr", "a": float(a), "b": float(b)}
    if name in ("mm", "michaelis_menten", "michaelis-menten"):
        b = _setting(args, cfg, "b")
        if b is None:
            raise UsageError("model mm needs --b (upper end of the space, in K units)")
        params = MMParams(
            V=float(_setting(args, cfg, "V", 43.73)),
            K=float(_setting(args, cfg, "K", 227.27)),
            b=float(b),
            eps=float(_setting(args, cfg, "eps", 0.0)),
            eps_in_k_units=not bool(_setting(args, cfg, "eps_absolute", False)),
        )
        return mm_model(params), {
            "model": "michaelis_menten", "V": params.V, "K": params.K,
            "b": params.b, "eps": params.eps, "eps_in_k_units": params.eps_in_k_units,
        }
    raise UsageError(f"unknown model {name!r}; choose slr or mm")


def _result_json(result: OptimizeResult, model: Model, config: RunConfig) -> str:
    payload = {
        "design": design_to_json(result.design, model.space),
        "criterion_value": result.criterion_value,
        "converged": result.converged,
        "iterations": result.iterations,
        "label": result.label,
        "min_dd": None if result.derivative_report is None else result.derivative_report.min_dd,
        "argmin_x": None if result.derivative_report is None else result.derivative_report.argmin_x,
        "config": config.to_dict(),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _build_criterion(kind: str, args: argparse.Namespace, cfg: dict, model: Model,
                     grid: int, wtol: float, seed: int) -> CriterionSpec:
    kind = kind.upper()
    if kind not in CRITERION_KINDS:
        raise UsageError(f"unknown criterion {kind!r}; choose from {CRITERION_KINDS}")
    if kind == "C":
        c = _setting(args, cfg, "c")
        if c is None:
            raise UsageError("criterion C needs --c 'c1,c2'")
        vec = _parse_floats(c) if isinstance(c, str) else [float(v) for v in c]
        if len(vec) != 2:
            raise UsageError("--c must hold exactly two numbers")
        return CriterionSpec("C", c=(vec[0], vec[1]))
    if kind == "SA":
        ref1, ref2 = sa_references(model, grid_resolution=grid, weight_tolerance=wtol, seed=seed)
        return CriterionSpec("SA", sa_refs=(ref1, ref2))
    if kind == "COMPOUND":
        lam = _setting(args, cfg, "lam")
        if lam is None:
            raise UsageError("criterion COMPOUND needs --lam in [0, 1]")
        d_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("D"),
                                                 grid_resolution=grid, weight_tolerance=wtol,
                                                 seed=seed)).criterion_value
        r_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("R"),
                                                 grid_resolution=grid, weight_tolerance=wtol,
                                                 seed=seed)).criterion_value
        return CriterionSpec("COMPOUND", lam=float(lam), phi_d_star=d_star, phi_r_star=r_star)
    return CriterionSpec(kind)


# --- subcommand implementations ----------------------------------------------

def _cmd_optimal(args: argparse.Namespace, cfg: dict) -> int:
    model, model_info = _build_model(args, cfg)
    seed = _resolve_seed(args, cfg)
    grid = int(_setting(args, cfg, "grid", 201))
    wtol = float(_setting(args, cfg, "weight_tolerance", 1e-8))
    kind = _setting(args, cfg, "criterion")
    if kind is None:
        raise UsageError("--criterion is required")
    spec = _build_criterion(str(kind), args, cfg, model, grid, wtol, seed)
    request = OptimizeRequest(model=model, criterion=spec,
                              n_support=int(_setting(args, cfg, "n_support", 2)),
                              grid_resolution=grid, weight_tolerance=wtol, seed=seed)
    result = optimize_design(request)
    config = RunConfig(command="optimal", model=model_info["model"], model_params=model_info,
                       criterion=spec.kind,
                       criterion_params={"lam": spec.lam,
                                         "c": None if spec.c is None else list(spec.c)},
                       options={"grid": grid, "n_support": request.n_support},
                       output=args.output, seed=seed)
    _emit(_result_json(result, model, config), args.output)
    return EXIT_OK if result.converged else EXIT_BEST_FOUND


def _cmd_table(args: argparse.Namespace, cfg: dict) -> int:
    name = args.table
    seed = _resolve_seed(args, cfg)
    if name == "slr":
        b = _setting(args, cfg, "b")
        if b is None:
            raise UsageError("table slr needs --b")
        a_list = _setting(args, cfg, "a_list")
        if a_list is None:
            raise UsageError("table slr needs --a-list 'a1,a2,...'")
        a_values = _parse_floats(a_list) if isinstance(a_list, str) else [float(v) for v in a_list]
        rows = table_slr(a_values, float(b))
        _emit(table_slr_csv(rows), args.output)
        return EXIT_OK
    if name in ("mm-designs", "mm-efficiencies"):
        eps_list = _setting(args, cfg, "eps_list", "0,0.05,0.5,1")
        eps_values = _parse_floats(eps_list) if isinstance(eps_list, str) else [float(v) for v in eps_list]
        params = MMParams(
            V=float(_setting(args, cfg, "V", 43.73)),
            K=float(_setting(args, cfg, "K", 227.27)),
            b=float(_setting(args, cfg, "b", 5.0)),
        )
        tables = mm_tables(params, eps_values,
                           compat=not bool(_setting(args, cfg, "strict", False)),
                           grid_resolution=int(_setting(args, cfg, "grid", 201)),
                           weight_tolerance=float(_setting(args, cfg, "weight_tolerance", 1e-8)),
                           seed=seed)
        text = mm_designs_csv(tables) if name == "mm-designs" else mm_efficiencies_csv(tables)
        _emit(text, args.output)
        return EXIT_OK
    raise UsageError(f"unknown table {name!r}; choose slr, mm-designs, or mm-efficiencies")


def _cmd_pareto(args: argparse.Namespace, cfg: dict) -> int:
    model, model_info = _build_model(args, cfg)
    seed = _resolve_seed(args, cfg)
    n = int(_setting(args, cfg, "n", 1000))
    grid = int(_setting(args, cfg, "grid", 201))
    wtol = float(_setting(args, cfg, "weight_tolerance", 1e-8))
    d_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("D"),
                                             grid_resolution=grid, weight_tolerance=wtol,
                                             seed=seed)).criterion_value
    r_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("R"),
                                             grid_resolution=grid, weight_tolerance=wtol,
                                             seed=seed)).criterion_value
    designs = sample_two_point_designs(model, n, seed)
    points = evaluate_front_points(model, designs, d_star, r_star)
    front = pareto_front(points)
    x_scale = model.nominal_params[1] if model.name == "michaelis_menten" else 1.0
    _emit(front_csv(front, x_scale=x_scale), args.output)
    meta = {"seed": seed, "n": n, "front_size": len(front), "model": model_info,
            "phi_d_star": d_star, "phi_r_star": r_star}
    sys.stderr.write(json.dumps(meta, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace, cfg: dict) -> int:
    model, model_info = _build_model(args, cfg)
    seed = _resolve_seed(args, cfg)
    a_fixed = _setting(args, cfg, "a_fixed")
    kind = str(_setting(args, cfg, "sweep_kind", "criteria"))
    if kind == "compound":
        lam_list = _setting(args, cfg, "lam_list", "0,0.25,0.5,0.75,1")
        lams = _parse_floats(lam_list) if isinstance(lam_list, str) else [float(v) for v in lam_list]
        grid = int(_setting(args, cfg, "grid", 201))
        wtol = float(_setting(args, cfg, "weight_tolerance", 1e-8))
        d_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("D"),
                                                 grid_resolution=grid, weight_tolerance=wtol,
                                                 seed=seed)).criterion_value
        r_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("R"),
                                                 grid_resolution=grid, weight_tolerance=wtol,
                                                 seed=seed)).criterion_value
        rows = compound_sweep(model, lams, d_star, r_star, grid_resolution=grid,
                              weight_tolerance=wtol, seed=seed)
        _emit(compound_sweep_csv(rows), args.output)
        return EXIT_OK
    if a_fixed is None:
        raise UsageError("sweep needs --a-fixed (lower support point; K units for mm)")
    n_p = int(_setting(args, cfg, "p_points", 199))
    p_grid = [(i + 1) / (n_p + 1) for i in range(n_p)]
    rows = criterion_sweep(model, float(a_fixed), p_grid)
    _emit(sweep_csv(rows), args.output)
    return EXIT_OK


def _cmd_check(args: argparse.Namespace, cfg: dict) -> int:
    model, _ = _build_model(args, cfg)
    kind = _setting(args, cfg, "criterion")
    if kind is None:
        raise UsageError("--criterion is required")
    kind = str(kind).upper()
    if kind not in CONVEX_KINDS:
        raise UsageError(
            f"criterion {kind} is not convex: no equivalence certificate exists, refusing to check")
    design_path = _setting(args, cfg, "design")
    if design_path is None:
        raise UsageError("check needs --design FILE (design JSON)")
    try:
        with open(design_path) as fh:
            design, _space = design_from_json(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read design {design_path}: {exc}") from exc
    seed = _resolve_seed(args, cfg)
    grid = int(_setting(args, cfg, "grid", 201))
    wtol = float(_setting(args, cfg, "weight_tolerance", 1e-8))
    spec = _build_criterion(kind, args, cfg, model, grid, wtol, seed)
    n_grid = int(_setting(args, cfg, "check_grid", 1000))
    report = derivative_report(model, design, spec, grid_points=n_grid)
    value = criterion_value(fim(model, design), spec)
    passed = report.passes(value)
    if args.output is not None:
        _atomic_write(args.output, report.to_csv())
    summary = {"criterion": spec.kind, "criterion_value": value, "min_dd": report.min_dd,
               "argmin_x": report.argmin_x, "grid_points": n_grid, "certified": passed}
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_ERROR


def _cmd_efficiency(args: argparse.Namespace, cfg: dict) -> int:
    model, model_info = _build_model(args, cfg)
    seed = _resolve_seed(args, cfg)
    paths = _setting(args, cfg, "designs")
    if paths is None:
        raise UsageError("efficiency needs --designs file1[,file2,...]")
    path_list = paths.split(",") if isinstance(paths, str) else list(paths)
    grid = int(_setting(args, cfg, "grid", 201))
    wtol = float(_setting(args, cfg, "weight_tolerance", 1e-8))
    d_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("D"),
                                             grid_resolution=grid, weight_tolerance=wtol,
                                             seed=seed)).criterion_value
    r_star = optimize_design(OptimizeRequest(model=model, criterion=CriterionSpec("R"),
                                             grid_resolution=grid, weight_tolerance=wtol,
                                             seed=seed)).criterion_value
    entries = []
    for path in path_list:
        with open(path) as fh:
            design, _space = design_from_json(json.load(fh))
        m = fim(model, design)
        singular = m.is_singular
        entries.append({
            "path": path,
            "phi_D": phi_d(m) if not singular else None,
            "phi_R": phi_r(m) if not singular else None,
            "phi_r2": phi_r2(m) if not singular else None,
            "corr": correlation(m) if not singular else None,
            "eff_D": d_star / phi_d(m) if not singular else None,
            "eff_R": r_star / phi_r(m) if not singular else None,
            "singular": singular,
        })
    payload = {"model": model_info, "phi_d_star": d_star, "phi_r_star": r_star,
               "designs": entries}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.output)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["slr", "mm"], default=None)
    p.add_argument("--a", type=float, default=None, help="lower end of the SLR interval")
    p.add_argument("--b", type=float, default=None,
                   help="upper end (SLR: raw units; mm: units of K)")
    p.add_argument("--V", type=float, default=None, help="mm nominal maximum rate")
    p.add_argument("--K", type=float, default=None, help="mm nominal half-saturation constant")
    p.add_argument("--eps", type=float, default=None,
                   help="mm lower extreme (units of K unless --eps-absolute)")
    p.add_argument("--eps-absolute", action="store_const", const=True, default=None,
                   help="interpret --eps in raw units instead of K units")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--grid", type=int, default=None, help="optimizer grid resolution")
    p.add_argument("--weight-tolerance", type=float, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="optdesign",
                     description="Optimal experimental designs for two-parameter models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimal", help="compute an optimal design", parents=[])
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--criterion", default=None, help=f"one of {CRITERION_KINDS}")
    p.add_argument("--c", default=None, help="c vector for criterion C, e.g. '1,0'")
    p.add_argument("--lam", type=float, default=None, help="compound weight in [0, 1]")
    p.add_argument("--n-support", type=int, default=None)
    p.set_defaults(func=_cmd_optimal)

    p = sub.add_parser("table", help="emit a reference table as CSV")
    p.add_argument("table", choices=["slr", "mm-designs", "mm-efficiencies"])
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--a-list", default=None, help="comma-separated interval lower ends")
    p.add_argument("--eps-list", default=None, help="comma-separated lower extremes")
    p.add_argument("--strict", action="store_const", const=True, default=None,
                   help="report best-found designs instead of degenerate-limit rows")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("pareto", help="sampled two-point designs and their Pareto front")
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--n", type=int, default=None, help="number of sampled designs")
    p.set_defaults(func=_cmd_pareto)

    p = sub.add_parser("sweep", help="criterion values along a weight sweep")
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--a-fixed", type=float, default=None,
                   help="fixed lower support point (K units for mm)")
    p.add_argument("--p-points", type=int, default=None, help="number of interior weights")
    p.add_argument("--sweep-kind", choices=["criteria", "compound"], default=None)
    p.add_argument("--lam-list", default=None, help="compound sweep weights")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("check", help="equivalence-theorem check of a design JSON")
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--design", default=None, help="design JSON file")
    p.add_argument("--criterion", default=None, help="a convex criterion")
    p.add_argument("--c", default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--check-grid", type=int, default=None)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("efficiency", help="criterion values and efficiencies of designs")
    _add_model_args(p)
    _add_common_args(p)
    p.add_argument("--designs", default=None, help="comma-separated design JSON files")
    p.set_defaults(func=_cmd_efficiency)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(getattr(args, "config", None))
        return args.func(args, cfg)
    except UsageError as exc:
        sys.stderr.write(f"optdesign: {exc}\n")
        return EXIT_USAGE
    except ValidationError as exc:
        sys.stderr.write(f"optdesign: {exc}\n")
        return EXIT_USAGE
    except OptDesignError as exc:
        sys.stderr.write(f"optdesign: {exc}\n")
        return EXIT_ERROR
    except OSError as exc:
        sys.stderr.write(f"optdesign: {exc}\n")
        return EXIT_ERROR


def console_main() -> None:
    sys.exit(main())
