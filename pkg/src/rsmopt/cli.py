"""Batch front end: ingest CSV data, fit, evaluate, optimize, report.

Subcommands::

    rsmopt fit      --config cfg.json [--data file.csv] [--wide] --out model.json
    rsmopt eval     --model model.json --x 1,1,-1
    rsmopt optimize --config cfg.json --method kataoka-epsilon [--seed N]
    rsmopt report   --config cfg.json [--format json|md] [--out path]

Exit codes: 0 ok, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import programs as prog
from .fit import FittedModel, covariance_at, fit_ols, predict, unit_variance
from .model import ExperimentData, Region, Run, TermSpec, build_design_matrix
from .programs import MethodConfig, ScalarProgram
from .solve import DEFAULT_PENALTY_SCHEDULE, SolveResult, multistart

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class DataError(ValueError):
    pass


METHOD_CONSTRUCTORS = {
    "v-model": prog.v_model,
    "mean-weighting": prog.mean_weighting,
    "modified-e-weighting": prog.modified_e_weighting,
    "modified-e-epsilon": prog.modified_e_epsilon,
    "p-model-weighting": prog.p_model_weighting,
    "p-model-epsilon": prog.p_model_epsilon,
    "kataoka-weighting": prog.kataoka_weighting,
    "kataoka-epsilon": prog.kataoka_epsilon,
    "goal-programming": prog.goal_programming,
}


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def ingest_csv(path: str | Path, response_order: list[str] | None = None) -> ExperimentData:
    """Read long-format data: run_id,x1..xn,response,replicate,value.

    Responses are ordered by first appearance unless overridden.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        x_cols = sorted(
            (h for h in header if h.startswith("x") and h[1:].isdigit()),
            key=lambda h: int(h[1:]),
        )
        required = {"run_id", "response", "replicate", "value"}
        missing = required - set(header)
        if missing or not x_cols:
            raise DataError(f"{path}: missing columns {sorted(missing) or 'x1..xn'}")
        if [int(h[1:]) for h in x_cols] != list(range(1, len(x_cols) + 1)):
            raise DataError(f"{path}: factor columns must be x1..xn")

        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                run_id = int(row["run_id"])
                x = tuple(float(row[c]) for c in x_cols)
                resp = row["response"].strip()
                rep = int(row["replicate"])
                value = float(row["value"])
            except (TypeError, ValueError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: bad row ({exc})") from exc
            rows.append((run_id, x, resp, rep, value))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return _assemble(rows, response_order, str(path))


def ingest_csv_wide(path: str | Path, response_order: list[str] | None = None) -> ExperimentData:
    """Read wide-format data: ID,x1..xn,<resp>_1..<resp>_m per response."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        x_cols = sorted(
            (h for h in header if h.startswith("x") and h[1:].isdigit()),
            key=lambda h: int(h[1:]),
        )
        if "ID" not in header or not x_cols:
            raise DataError(f"{path}: wide format needs ID and x1..xn columns")
        rep_cols = [h for h in header if "_" in h and h not in x_cols]
        responses: list[str] = []
        for h in rep_cols:
            name = h.rsplit("_", 1)[0]
            if name not in responses:
                responses.append(name)
        if not responses:
            raise DataError(f"{path}: no response replicate columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                run_id = int(row["ID"])
                x = tuple(float(row[c]) for c in x_cols)
                for h in rep_cols:
                    name, rep = h.rsplit("_", 1)
                    rows.append((run_id, x, name, int(rep), float(row[h])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad row ({exc})") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    return _assemble(rows, response_order, str(path))


def _assemble(rows, response_order, origin: str) -> ExperimentData:
    responses: list[str] = []
    for _, _, resp, _, _ in rows:
        if resp not in responses:
            responses.append(resp)
    if response_order:
        if set(response_order) != set(responses):
            raise DataError(f"{origin}: response order {response_order} does not "
                            f"match observed responses {responses}")
        responses = list(response_order)
    by_run: dict[int, dict] = {}
    for run_id, x, resp, rep, value in rows:
        entry = by_run.setdefault(run_id, {"x": x, "obs": {}})
        if entry["x"] != x:
            raise DataError(f"{origin}: run {run_id} has inconsistent factor settings")
        entry["obs"].setdefault(resp, {})[rep] = value
    runs = []
    for run_id in sorted(by_run):
        entry = by_run[run_id]
        reps_per_resp = {resp: sorted(d) for resp, d in entry["obs"].items()}
        for resp in responses:
            if resp not in reps_per_resp or not reps_per_resp[resp]:
                raise DataError(f"{origin}: run {run_id} has no replicates for {resp}")
        rep_ids = reps_per_resp[responses[0]]
        for resp in responses[1:]:
            if reps_per_resp[resp] != rep_ids:
                raise DataError(f"{origin}: run {run_id} replicate sets differ "
                                f"between responses")
        y = np.array(
            [[entry["obs"][resp][rep] for resp in responses] for rep in rep_ids]
        )
        runs.append(Run(run_id=run_id, x=np.array(entry["x"]), y=y))
    return ExperimentData(runs=tuple(runs), response_names=tuple(responses))


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

@dataclass
class SolverSettings:
    resolution: float = 0.01
    tol: float = 1e-12
    penalty_schedule: tuple[float, ...] = DEFAULT_PENALTY_SCHEDULE
    seed: int = 0
    multistart_k: int = 16


@dataclass
class MethodSpec:
    name: str
    config: MethodConfig


@dataclass
class RunConfig:
    data_path: str
    terms: TermSpec
    region: Region
    methods: list[MethodSpec] = field(default_factory=list)
    fixed_points: list[tuple[str, np.ndarray]] = field(default_factory=list)
    responses: list[str] | None = None
    wide: bool = False
    solver: SolverSettings = field(default_factory=SolverSettings)
    output_format: str = "markdown"


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        n = len(doc["region"]["lower"]) if doc["region"]["kind"] == "hypercube" \
            else int(doc["region"].get("dim"))
        terms = TermSpec.from_names(doc["terms"], n)
        reg = doc["region"]
        if reg["kind"] == "hypercube":
            region = Region.hypercube(reg["lower"], reg["upper"])
        else:
            region = Region.hypersphere(float(reg["radius"]), dim=n)
        methods = []
        for m in doc.get("methods", []):
            name = m["name"]
            if name not in METHOD_CONSTRUCTORS:
                raise ValueError(f"unknown method {name!r}")
            kwargs = {}
            for key, attr in (
                ("tau", "tau"), ("w", "w"), ("confidence", "confidence"),
                ("r1", "r1"), ("r2", "r2"), ("variance_scale", "variance_scale"),
                ("primary", "primary_index"), ("epsilon", "epsilon"),
            ):
                if key in m:
                    kwargs[attr] = m[key]
            methods.append(MethodSpec(name=name, config=MethodConfig(**kwargs)))
        fixed = [
            (fp["label"], np.asarray(fp["x"], dtype=float))
            for fp in doc.get("fixed_points", [])
        ]
        solver_doc = doc.get("solver", {})
        solver = SolverSettings(
            resolution=float(solver_doc.get("resolution", 0.01)),
            tol=float(solver_doc.get("tol", 1e-12)),
            penalty_schedule=tuple(
                solver_doc.get("penalty_schedule", DEFAULT_PENALTY_SCHEDULE)
            ),
            seed=int(solver_doc.get("seed", 0)),
            multistart_k=int(solver_doc.get("multistart", 16)),
        )
        data_path = doc["data"]
        if not Path(data_path).is_absolute():
            # relative to the config file, not the working directory
            data_path = str((Path(path).resolve().parent / data_path))
        return RunConfig(
            data_path=data_path,
            terms=terms,
            region=region,
            methods=methods,
            fixed_points=fixed,
            responses=doc.get("responses"),
            wide=bool(doc.get("wide", False)),
            solver=solver,
            output_format=doc.get("format", "markdown"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad config {path}: {exc}") from exc


def _load_data(config: RunConfig, data_path: str | None = None,
               wide: bool | None = None) -> ExperimentData:
    path = data_path or config.data_path
    use_wide = config.wide if wide is None else wide
    reader = ingest_csv_wide if use_wide else ingest_csv
    return reader(path, response_order=config.responses)


def fit_from_config(config: RunConfig, data: ExperimentData) -> FittedModel:
    X, Y = build_design_matrix(data, config.terms)
    return fit_ols(X, Y, config.terms)


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------

def model_to_doc(model: FittedModel) -> dict:
    return {
        "n": model.terms.n,
        "terms": model.terms.term_names(),
        "b_hat": model.b_hat.tolist(),
        "sigma_hat": model.sigma_hat.tolist(),
        "xtx_inv": model.xtx_inv.tolist(),
        "residuals": model.residuals.tolist(),
        "N": model.n_obs,
        "p": model.p,
        "r": model.r,
    }


def model_from_doc(doc: dict) -> FittedModel:
    terms = TermSpec.from_names(doc["terms"], int(doc["n"]))
    return FittedModel(
        terms=terms,
        b_hat=np.asarray(doc["b_hat"], dtype=float),
        sigma_hat=np.asarray(doc["sigma_hat"], dtype=float),
        xtx_inv=np.asarray(doc["xtx_inv"], dtype=float),
        residuals=np.asarray(doc["residuals"], dtype=float),
        n_obs=int(doc["N"]),
    )


def save_model(model: FittedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_doc(model), indent=2) + "\n")


def load_model(path: str | Path) -> FittedModel:
    with open(path) as fh:
        return model_from_doc(json.load(fh))


# ---------------------------------------------------------------------------
# Report rows
# ---------------------------------------------------------------------------

def build_program(model: FittedModel, spec: MethodSpec, region: Region) -> ScalarProgram:
    ctor = METHOD_CONSTRUCTORS[spec.name]
    return ctor(model, spec.config, region=region)


def _row_from_x(model: FittedModel, label: str, x: np.ndarray,
                f_star: float | None = None,
                residuals: np.ndarray | None = None,
                converged: bool | None = None) -> dict:
    # Var/Cov columns are always recomputed from the model at x.
    cov = covariance_at(model, x)
    y_hat = predict(model, x)
    row = {
        "method": label,
        "x": [float(v) for v in x],
        "F": None if f_star is None else float(f_star),
        "y_hat": [float(v) for v in y_hat],
        "var": [float(cov[k, k]) for k in range(model.r)],
        "cov": [
            float(cov[j, k])
            for j in range(model.r) for k in range(j + 1, model.r)
        ],
        "residuals": [] if residuals is None else [float(v) for v in residuals],
        "converged": converged,
    }
    return row


def optimize_method(model: FittedModel, spec: MethodSpec, region: Region,
                    solver: SolverSettings) -> tuple[SolveResult, dict]:
    program = build_program(model, spec, region)
    result = multistart(
        program,
        k=solver.multistart_k,
        seed=solver.seed,
        schedule=solver.penalty_schedule,
    )
    row = _row_from_x(
        model, spec.name, result.x_star,
        f_star=result.f_star,
        residuals=result.constraint_residuals,
        converged=result.converged,
    )
    return result, row


def build_report(model: FittedModel, config: RunConfig) -> dict:
    rows = []
    failed = False
    for spec in config.methods:
        try:
            result, row = optimize_method(model, spec, config.region, config.solver)
            if not result.converged:
                row["error"] = "did not converge"
                failed = True
        except Exception as exc:  # one bad method must not sink the report
            row = {"method": spec.name, "error": str(exc), "converged": False}
            failed = True
        rows.append(row)
    for label, x in config.fixed_points:
        rows.append(_row_from_x(model, label, x))
    return {"rows": rows, "failed": failed, "seed": config.solver.seed}


def report_markdown(report: dict, response_names: list[str] | None = None) -> str:
    r = 0
    for row in report["rows"]:
        if "y_hat" in row:
            r = len(row["y_hat"])
            break
    names = response_names or [f"Y{k + 1}" for k in range(r)]
    head = ["method"]
    n_x = max((len(row.get("x", [])) for row in report["rows"]), default=0)
    head += [f"x{i + 1}" for i in range(n_x)]
    head += ["F"]
    head += [f"{nm}(x)" for nm in names]
    head += [f"Var({nm})" for nm in names]
    head += [f"Cov({a},{b})" for i, a in enumerate(names) for b in names[i + 1:]]
    lines = ["| " + " | ".join(head) + " |",
             "|" + "---|" * len(head)]

    def fmt(v):
        return "--" if v is None else f"{v:.3f}"

    for row in report["rows"]:
        if "x" not in row:
            lines.append(f"| {row['method']} | " + " | ".join(["--"] * (len(head) - 1)) + " |")
            continue
        cells = [row["method"]]
        cells += [fmt(v) for v in row["x"]]
        cells += [fmt(row.get("F"))]
        cells += [fmt(v) for v in row["y_hat"]]
        cells += [fmt(v) for v in row["var"]]
        cells += [fmt(v) for v in row["cov"]]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> int:
    config = load_config(args.config)
    data = _load_data(config, args.data, args.wide or None)
    model = fit_from_config(config, data)
    out = args.out or "model.json"
    save_model(model, out)
    print(f"wrote {out} (N={model.n_obs}, p={model.p}, r={model.r})")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    x = np.array([float(v) for v in args.x.split(",")])
    if x.size != model.n:
        raise DataError(f"expected {model.n} coordinates, got {x.size}")
    record = {
        "x": x.tolist(),
        "y_hat": predict(model, x).tolist(),
        "q": float(unit_variance(model, x)),
        "cov": covariance_at(model, x).tolist(),
    }
    _emit(json.dumps(record, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.solver.seed = args.seed
    spec = next((m for m in config.methods if m.name == args.method), None)
    if spec is None:
        if args.method not in METHOD_CONSTRUCTORS:
            print(f"unknown method: {args.method}", file=sys.stderr)
            return EXIT_USAGE
        print(f"method {args.method} not configured in {args.config}",
              file=sys.stderr)
        return EXIT_USAGE
    data = _load_data(config)
    model = fit_from_config(config, data)
    result, row = optimize_method(model, spec, config.region, config.solver)
    _emit(json.dumps(row, indent=2) + "\n", args.out)
    if not result.converged:
        print(f"solver failed: max residual "
              f"{np.max(result.constraint_residuals):.3g}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_report(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.solver.seed = args.seed
    if args.format:
        config.output_format = {"json": "json", "md": "markdown"}[args.format]
    data = _load_data(config)
    model = fit_from_config(config, data)
    report = build_report(model, config)
    if config.output_format == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = report_markdown(report, list(data.response_names))
    _emit(text, args.out)
    return EXIT_SOLVER if report["failed"] else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsmopt")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model from experiment data")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--data", help="override the config data path")
    p_fit.add_argument("--wide", action="store_true",
                       help="data is in wide (replicates-as-columns) layout")
    p_fit.add_argument("--out")
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("eval", help="evaluate a stored model at a point")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--x", required=True, help="comma-separated coordinates")
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_opt = sub.add_parser("optimize", help="run one configured method")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--method", required=True)
    p_opt.add_argument("--seed", type=int)
    p_opt.add_argument("--out")
    p_opt.set_defaults(func=cmd_optimize)

    p_rep = sub.add_parser("report", help="run every configured method")
    p_rep.add_argument("--config", required=True)
    p_rep.add_argument("--format", choices=["json", "md"])
    p_rep.add_argument("--seed", type=int)
    p_rep.add_argument("--out")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
