"""Command-line driver: train, eval, ablate, classify.

Exit codes: 0 success, 2 usage/config error, 3 runtime or numerical error,
4 I/O error. All outputs are deterministic for a fixed seed; wall-clock
columns are zeroed under --reproducible so files are byte-identical
across runs.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import encoder, geometry, tasks
from .config import RunConfig, load_run_config
from .errors import ConfigError, FencError, ModelFormatError, NumericalError
from .hilbert import norm
from .reporting import svg_line_plot, write_csv, write_json

SCHEMA_VERSION = 1

METRICS_HEADER = [
    "step", "train_loss", "reg_loss",
    "type1_abs_sq", "type1_rel", "type2_abs_sq", "type2_rel",
    "type3_abs_sq", "type3_rel", "wall_clock_s",
]

_TYPE_NAMES = ("type1", "type2", "type3")


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def _eval_task_samples(run: RunConfig, kind: str, seeds) -> list[tasks.TaskSample]:
    if run.family == "classification":
        spec = run.classification_spec()
        if kind == "type2":
            return []
        heldout = kind == "type3"
        return [tasks.sample_classification_task(int(s), heldout, spec)
                for s in seeds]
    if kind == "type1":
        spec = run.polynomial_spec()
        return [tasks.sample_type1_polynomial(int(s), spec) for s in seeds]
    if kind == "type2":
        return [tasks.sample_type2_polynomial(int(s), run.type2_spec())
                for s in seeds]
    return [tasks.sample_type3_cubic(int(s), run.type3_spec()) for s in seeds]


def evaluate_tasks(model, task_samples, method_override=None) -> dict:
    """Fit coefficients on each example set, score on the query set.

    Returns per-task absolute squared H-norm errors, relative errors, and
    (for logit-space models) argmax accuracies.
    """
    abs_sq, rel, acc = [], [], []
    for task in task_samples:
        coeffs = encoder.solve_coefficients(model, task.example_set,
                                            method=method_override)
        pred = encoder.predict(task.query_set.inputs, model, coeffs)
        space = task.query_set.space
        err = norm(task.query_set.outputs - pred, space)
        target_norm = norm(task.query_set.outputs, space)
        abs_sq.append(err ** 2)
        rel.append(err / target_norm if target_norm > 0 else err)
        labels = task.descriptor.get("query_labels")
        if labels is not None:
            acc.append(float(np.mean(np.argmax(pred, axis=1) == labels)))
    out = {"abs_sq": abs_sq, "rel": rel}
    if acc:
        out["accuracy"] = acc
    return out


def _eval_row_metrics(run: RunConfig, model, step: int) -> dict:
    row = {}
    for idx, kind in enumerate(_TYPE_NAMES):
        seeds = np.random.default_rng(
            [run.seed, step, idx, 31]).integers(0, 2**31, run.tasks_per_type)
        samples = _eval_task_samples(run, kind, seeds)
        if not samples:
            row[f"{kind}_abs_sq"] = float("nan")
            row[f"{kind}_rel"] = float("nan")
            continue
        res = evaluate_tasks(model, samples)
        row[f"{kind}_abs_sq"] = float(np.median(res["abs_sq"]))
        row[f"{kind}_rel"] = float(np.median(res["rel"]))
    return row


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _training_sampler(run: RunConfig):
    if run.family == "classification":
        return tasks.classification_training_sampler(run.classification_spec())
    return tasks.polynomial_training_sampler(run.polynomial_spec())


def cmd_train(run: RunConfig) -> dict:
    os.makedirs(run.out, exist_ok=True)
    enc_config = run.encoder_config()
    sampler = _training_sampler(run)
    rows = []
    started = time.perf_counter()

    def eval_hook(step, model):
        if run.eval_cadence <= 0 or step % run.eval_cadence:
            return
        metrics = _eval_row_metrics(run, model, step)
        log = model.metrics_log[-1]
        elapsed = 0.0 if run.reproducible else time.perf_counter() - started
        rows.append([step, log["loss"], log["reg_loss"],
                     metrics["type1_abs_sq"], metrics["type1_rel"],
                     metrics["type2_abs_sq"], metrics["type2_rel"],
                     metrics["type3_abs_sq"], metrics["type3_rel"],
                     elapsed])

    model = encoder.train(sampler, enc_config, eval_hook=eval_hook)

    metrics_csv = os.path.join(run.out, "metrics.csv")
    write_csv(metrics_csv, METRICS_HEADER, rows)
    model_path = os.path.join(run.out, "model.fenc")
    encoder.save_model(model, model_path)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_echo": run.echo(),
        "results": {
            "steps": enc_config.steps,
            "parameter_count": model.parameter_count(),
            "final": dict(zip(METRICS_HEADER,
                              rows[-1])) if rows else None,
        },
    }
    write_json(os.path.join(run.out, "metrics.json"), report)
    steps_axis = [row[0] for row in rows]
    svg_line_plot(
        os.path.join(run.out, "metrics.svg"),
        {"train loss": (steps_axis, [row[1] for row in rows]),
         "type1 rel": (steps_axis, [row[4] for row in rows]),
         "type2 rel": (steps_axis, [row[6] for row in rows]),
         "type3 rel": (steps_axis, [row[8] for row in rows])},
        title="training metrics", x_label="step", y_label="value",
        log_y=True, smooth_window=40, reproducible=run.reproducible)
    return {"model": model_path, "metrics": metrics_csv}


def cmd_eval(model_path: str, run: RunConfig, seeds: list[int],
             compare_ip: bool = False) -> dict:
    if not seeds:
        raise ConfigError("eval needs a non-empty seed list")
    model = encoder.load_model(model_path)
    expect_space = run.encoder_config().space
    if model.config.space != expect_space:
        raise ConfigError(
            f"model space {model.config.space} does not match task family "
            f"space {expect_space}")
    os.makedirs(run.out, exist_ok=True)

    def run_method(method_override):
        per_type = {}
        for idx, kind in enumerate(_TYPE_NAMES):
            per_seed = []
            accuracies = []
            for seed in seeds:
                task_seeds = np.random.default_rng(
                    [int(seed), idx, 37]).integers(0, 2**31, run.eval_tasks)
                samples = _eval_task_samples(run, kind, task_seeds)
                if not samples:
                    break
                res = evaluate_tasks(model, samples, method_override)
                per_seed.append(float(np.median(res["rel"])))
                if "accuracy" in res:
                    accuracies.append(float(np.median(res["accuracy"])))
            if not per_seed:
                continue
            entry = {
                "median": float(np.median(per_seed)),
                "min": float(np.min(per_seed)),
                "max": float(np.max(per_seed)),
                "per_seed": per_seed,
            }
            if accuracies:
                entry["accuracy_median"] = float(np.median(accuracies))
                entry["accuracy_per_seed"] = accuracies
            per_type[kind] = entry
        return per_type

    results = {"ls" if model.config.method == "ls" else "ip": run_method(None)}
    if compare_ip:
        results["ip"] = run_method("ip")
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_echo": run.echo(),
        "results": {"model": model_path, "seeds": [int(s) for s in seeds],
                    "relative_error": results},
    }
    write_json(os.path.join(run.out, "eval.json"), report)
    return report


def cmd_ablate(run: RunConfig, sweep: str, values: list[int],
               n_seeds: int) -> dict:
    if sweep not in ("basis_counts", "example_counts"):
        raise ConfigError(f"unknown sweep {sweep!r}")
    if not values:
        raise ConfigError("ablate needs a non-empty value list")
    if n_seeds < 1:
        raise ConfigError("ablate needs seeds >= 1")
    os.makedirs(run.out, exist_ok=True)

    results = {}  # value -> {"rel": {type: [per seed]}, "seconds": [...]}
    for value in values:
        per_type = {kind: [] for kind in _TYPE_NAMES}
        seconds = []
        for seed_idx in range(n_seeds):
            sub = RunConfig(raw={name: dict(sect)
                                 for name, sect in run.raw.items()},
                            seed=run.seed + seed_idx, out=run.out,
                            reproducible=run.reproducible)
            if sweep == "basis_counts":
                sub.raw.setdefault("encoder", {})["k"] = int(value)
            else:
                sub.raw.setdefault("tasks", {})["m_example"] = int(value)
            started = time.perf_counter()
            model = encoder.train(_training_sampler(sub), sub.encoder_config())
            seconds.append(time.perf_counter() - started)
            for idx, kind in enumerate(_TYPE_NAMES):
                task_seeds = np.random.default_rng(
                    [sub.seed, idx, 41]).integers(0, 2**31, run.tasks_per_type)
                samples = _eval_task_samples(sub, kind, task_seeds)
                if not samples:
                    per_type[kind].append(float("nan"))
                    continue
                res = evaluate_tasks(model, samples)
                per_type[kind].append(float(np.median(res["rel"])))
        results[value] = {"rel": per_type, "seconds": seconds}

    base_seconds = float(np.median(results[values[0]]["seconds"]))
    header = ["sweep_value"]
    for kind in _TYPE_NAMES:
        header += [f"{kind}_rel_min", f"{kind}_rel_median", f"{kind}_rel_max"]
    header.append("relative_wall_clock")
    rows = []
    for value in values:
        rel_cost = (0.0 if run.reproducible else
                    float(np.median(results[value]["seconds"]) /
                          max(base_seconds, 1e-12)))
        row = [int(value)]
        for kind in _TYPE_NAMES:
            errs = results[value]["rel"][kind]
            row += [float(np.min(errs)), float(np.median(errs)),
                    float(np.max(errs))]
        row.append(rel_cost)
        rows.append(row)
    csv_path = os.path.join(run.out, "ablation.csv")
    write_csv(csv_path, header, rows)
    series = {}
    for kind in _TYPE_NAMES:
        ys = [float(np.median(results[v]["rel"][kind])) for v in values]
        series[f"{kind} median rel"] = ([float(v) for v in values], ys)
    svg_line_plot(os.path.join(run.out, "ablation.svg"), series,
                  title=f"{sweep} ablation", x_label=sweep,
                  y_label="median relative error", log_y=True,
                  reproducible=run.reproducible)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_echo": run.echo(),
        "results": {
            "sweep": sweep,
            "values": [int(v) for v in values],
            "per_value": {
                str(v): {
                    "rel": results[v]["rel"],
                    "seconds": ([0.0] * len(results[v]["seconds"])
                                if run.reproducible else results[v]["seconds"]),
                } for v in values},
        },
    }
    write_json(os.path.join(run.out, "ablation.json"), report)
    return report


def cmd_classify(target_path: str, source_paths: list[str], run: RunConfig,
                 hull_tol: float, span_tol: float) -> dict:
    if not source_paths:
        raise ConfigError("classify needs at least one --source file")
    target = tasks.load_task_csv(target_path)
    sources = []
    for path in source_paths:
        src = tasks.load_task_csv(path)
        if not np.array_equal(src.inputs, target.inputs):
            raise ConfigError(
                f"{path}: input samples do not match the target's input samples")
        sources.append(src)
    report = geometry.classify_transfer(target, sources, hull_tol, span_tol)
    os.makedirs(run.out, exist_ok=True)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config_echo": run.echo(),
        "results": {
            "target": target_path,
            "sources": list(source_paths),
            "transfer_type": report.transfer_type,
            "hull": {
                "weights": [float(w) for w in report.hull.weights],
                "residual_norm": report.hull.residual_norm,
                "relative_residual": report.hull.relative_residual,
            },
            "span": {
                "weights": [float(w) for w in report.span.weights],
                "residual_norm": report.span.residual_norm,
                "relative_residual": report.span.relative_residual,
            },
            "hull_tol": hull_tol,
            "span_tol": span_tol,
        },
    }
    write_json(os.path.join(run.out, "classify.json"), payload)
    return payload


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--reproducible", action="store_true",
                        help="suppress timestamps and wall-clock values")
    parser.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="SECTION.KEY=VALUE",
                        help="override one config value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fenc",
        description="train and evaluate learned basis-function models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model, logging metrics")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    _add_common(p_eval)
    p_eval.add_argument("--model", required=True, help="model file")
    p_eval.add_argument("--seeds", default="",
                        help="comma-separated evaluation seeds")
    p_eval.add_argument("--compare-ip", action="store_true",
                        help="also report inner-product-method coefficients")

    p_ablate = sub.add_parser("ablate", help="sweep one hyperparameter")
    _add_common(p_ablate)
    p_ablate.add_argument("--sweep", required=True,
                          choices=["basis_counts", "example_counts"])
    p_ablate.add_argument("--values", required=True,
                          help="comma-separated integer sweep values")
    p_ablate.add_argument("--n-seeds", type=int, default=3)

    p_classify = sub.add_parser(
        "classify", help="classify a target task against source tasks")
    _add_common(p_classify)
    p_classify.add_argument("--target", required=True, help="target task CSV")
    p_classify.add_argument("--source", action="append", default=[],
                            dest="sources", help="source task CSV (repeat)")
    p_classify.add_argument("--hull-tol", type=float,
                            default=geometry.DEFAULT_HULL_TOL)
    p_classify.add_argument("--span-tol", type=float,
                            default=geometry.DEFAULT_SPAN_TOL)
    return parser


def _parse_int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list: {text!r}") from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_run_config(args.config, args.seed, args.out,
                              args.reproducible, args.overrides)
        if args.command == "train":
            out = cmd_train(run)
            print(f"model: {out['model']}")
            print(f"metrics: {out['metrics']}")
        elif args.command == "eval":
            report = cmd_eval(args.model, run, _parse_int_list(args.seeds),
                              args.compare_ip)
            for method, per_type in report["results"]["relative_error"].items():
                for kind, entry in per_type.items():
                    print(f"{method} {kind}: median rel err "
                          f"{entry['median']:.6g}")
        elif args.command == "ablate":
            cmd_ablate(run, args.sweep, _parse_int_list(args.values),
                       args.n_seeds)
            print(f"ablation: {os.path.join(run.out, 'ablation.csv')}")
        elif args.command == "classify":
            payload = cmd_classify(args.target, args.sources, run,
                                   args.hull_tol, args.span_tol)
            print(payload["results"]["transfer_type"])
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ModelFormatError, FencError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
