"""Command-line experiment harness.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 model error, 4 I/O error, 5 frontier cap exceeded.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analysis, gaussian, tree, zoo
from .errors import ConfigError, Extinction, FrontierExplosion, ModelError
from .finite import FiniteModel, evolve_finite, perron_eigenpair

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_MODEL, EXIT_IO, EXIT_EXPLOSION = 0, 1, 2, 3, 4, 5

CONFIG_FIELDS = {"engine", "model", "params", "steps", "prune_threshold", "traits", "analyses",
                 "outputs", "seed", "x0", "particles", "window", "merge_states"}
OUTPUT_KEYS = {"csv", "json", "frontier"}
ENGINES = ("finite", "tree", "gaussian")
BUILTIN_TAGS = ("locked", "spine", "burst", "dead", "ray_a", "ray_b")


# ---------------------------------------------------------------- config

def plain(value):
    """Make a value strict-JSON friendly (non-finite floats become strings)."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    return value


def dumps(doc) -> str:
    return json.dumps(plain(doc), sort_keys=True, indent=2) + "\n"


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def validate_config(cfg: dict) -> dict:
    """Check field names and types, fill defaults, and return a normalized copy."""
    unknown = sorted(set(cfg) - CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}", unknown[0])
    out = copy.deepcopy(cfg)
    engine = out.get("engine", "tree")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {', '.join(ENGINES)}, got {engine!r}", "engine")
    out["engine"] = engine
    steps = out.get("steps", 0)
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 0:
        raise ConfigError("steps must be a non-negative integer", "steps")
    out["steps"] = steps
    prune = out.get("prune_threshold", tree.DEFAULT_PRUNE)
    if not isinstance(prune, (int, float)) or not 0 <= prune < 1:
        raise ConfigError("prune_threshold must lie in [0, 1)", "prune_threshold")
    out["prune_threshold"] = float(prune)
    for key in ("traits", "analyses"):
        value = out.get(key, [])
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key} must be a list of strings", key)
        out[key] = value
    outputs = out.get("outputs", {})
    if not isinstance(outputs, dict) or set(outputs) - OUTPUT_KEYS:
        raise ConfigError(f"outputs must be an object with keys among {sorted(OUTPUT_KEYS)}", "outputs")
    out["outputs"] = outputs
    merge = out.get("merge_states", False)
    if not isinstance(merge, bool):
        raise ConfigError("merge_states must be true or false", "merge_states")
    out["merge_states"] = merge
    seed = out.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", "seed")
    out["seed"] = seed
    if "params" in out and not isinstance(out["params"], dict):
        raise ConfigError("params must be an object", "params")
    model = out.get("model")
    if isinstance(model, dict) and "name" in model:
        if "params" in out:
            raise ConfigError("give params either inside model or at top level, not both", "params")
        extra = set(model) - {"name", "params"}
        if extra:
            raise ConfigError(f"model has unknown key(s): {', '.join(sorted(extra))}", "model")
        out["model"], out["params"] = model["name"], dict(model.get("params", {}))
    if engine == "tree":
        if not isinstance(out.get("model"), str):
            raise ConfigError("tree engine needs a model name", "model")
        if out["model"] not in zoo.REGISTRY:
            raise ConfigError(f"unknown model {out['model']!r}", "model")
        for name in out["traits"]:
            trait_from_name(name)
        for name in out["analyses"]:
            _analysis_kind(name)
    if engine == "finite" and out.get("model") is None:
        raise ConfigError("finite engine needs a model document or path", "model")
    return out


def trait_from_name(name: str) -> tree.TraitPredicate:
    if name == "zero_fitness":
        return tree.zero_fitness_trait()
    if name == "all":
        return tree.all_trait()
    if name in BUILTIN_TAGS:
        return tree.tag_trait(name)
    if name.startswith("tag:") and len(name) > 4:
        return tree.tag_trait(name[4:], name)
    if name.startswith("subtree:"):
        digits = name[len("subtree:"):]
        try:
            path = [int(c) for c in (digits.split(".") if "." in digits else digits)]
        except ValueError:
            raise ConfigError(f"bad subtree path in trait {name!r}", "traits")
        return tree.subtree_trait(path, name)
    raise ConfigError(f"unknown trait {name!r}", "traits")


TREE_ANALYSES = ("exponents", "preservation_check", "geometric_floor", "concentration", "utility",
                 "coordinates", "oracle")


def _analysis_kind(name: str) -> tuple[str, str | None]:
    kind, _, arg = name.partition(":")
    if kind not in TREE_ANALYSES:
        raise ConfigError(f"unknown analysis {name!r}", "analyses")
    if kind == "utility":
        try:
            analysis.utility_profile(arg)
        except ValueError as exc:
            raise ConfigError(str(exc), "analyses")
    return kind, arg or None


def _resolve(out_dir: Path | None, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() or out_dir is None else out_dir / p


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------- engines

def _finite_model(spec) -> FiniteModel:
    if isinstance(spec, str):
        return FiniteModel.from_json(Path(spec))
    if isinstance(spec, dict):
        return FiniteModel.from_dict(spec)
    raise ConfigError("finite model must be a document or a path", "model")


def run_finite(cfg: dict) -> tuple[dict, str]:
    model = _finite_model(cfg["model"])
    x0 = cfg.get("x0")
    x0 = np.full(model.size, 1.0 / model.size) if x0 is None else np.asarray(x0, dtype=float)
    traj = evolve_finite(model, x0, cfg["steps"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "mean_fitness", *(f"x{i}" for i in range(model.size))])
    for t, (x, mean) in enumerate(traj):
        writer.writerow([t, repr(float(mean)), *(repr(float(v)) for v in x)])
    report: dict[str, Any] = {
        "engine": "finite",
        "steps": cfg["steps"],
        "final_state": traj.final,
        "final_mean_fitness": float(traj.mean_fitness[-1]),
        "extinct_at": traj.extinct_at,
    }
    if "perron" in cfg["analyses"] or not cfg["analyses"]:
        pr = perron_eigenpair(model)
        report["perron"] = {
            "eigenvalue": pr.eigenvalue, "right_vector": pr.right_vector, "left_vector": pr.left_vector,
            "iterations": pr.iterations, "converged": pr.converged,
        }
    return report, buf.getvalue()


def gaussian_report(peak: gaussian.GaussianPeak, discretize: bool = False,
                    half_width: float | None = None, grid_points: int = 2001) -> dict:
    width_form, ratio_form = gaussian.both_eigenvalue_forms(peak)
    report = {
        "peak_height": peak.peak_height,
        "landscape_variance": peak.landscape_variance,
        "mutation_variance": peak.mutation_variance,
        "dimension": peak.dimension,
        "width": gaussian.equilibrium_width(peak),
        "eigenvalue": gaussian.peak_eigenvalue(peak),
        "eigenvalue_width_form": width_form,
        "eigenvalue_ratio_form": ratio_form,
    }
    if discretize:
        report["discretized_eigenvalue"] = gaussian.discretized_dominant_eigenvalue(peak, half_width, grid_points)
    return report


def _peak_from_params(params: dict) -> gaussian.GaussianPeak:
    allowed = {"peak_height", "landscape_variance", "mutation_variance", "dimension", "center",
               "discretize", "half_width", "grid_points"}
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown gaussian parameter(s): {', '.join(sorted(extra))}", "params")
    keys = ("peak_height", "landscape_variance", "mutation_variance", "dimension", "center")
    try:
        return gaussian.GaussianPeak(**{k: params[k] for k in keys if k in params})
    except (TypeError, ValueError) as exc:
        raise ModelError(f"bad gaussian parameters: {exc}")


def run_gaussian(cfg: dict) -> dict:
    params = cfg.get("params", {})
    peak = _peak_from_params(params)
    try:
        return gaussian_report(peak, bool(params.get("discretize", False)), params.get("half_width"),
                               int(params.get("grid_points", 2001)))
    except ValueError as exc:
        raise ModelError(str(exc))


def _trait_estimates(traj: tree.Trajectory, name: str, window: int | None) -> dict:
    log_z = traj.log_sizes()[:-1]
    share = traj.column(name)
    with np.errstate(divide="ignore"):
        inside = log_z + np.log(share)
        outside = log_z + np.log1p(-np.minimum(share, 1.0))
    est_s = tree.exponent_estimate(inside, window)
    est_t = tree.exponent_estimate(outside, window)
    verdict = analysis.classify_partition(est_s, est_t)
    return {"trait": est_s._asdict(), "complement": est_t._asdict(), "verdict": verdict.verdict,
            "min_trailing_share": analysis.min_trailing_share(traj, name)}


def run_tree_experiment(cfg: dict) -> tuple[dict, tree.Trajectory, dict]:
    model = zoo.build(cfg["model"], cfg.get("params", {}))
    traits = [trait_from_name(n) for n in cfg["traits"]]
    kinds = [_analysis_kind(a) for a in cfg["analyses"]]
    per_step: dict[str, list] = {}
    hooks = []
    for kind, arg in kinds:
        if kind == "coordinates":
            per_step["coordinate_means"] = []
            hooks.append(lambda fr, rec: per_step["coordinate_means"].append(analysis.coordinate_means(fr, model)))
        elif kind == "utility":
            profile = analysis.utility_profile(arg)
            key = f"utility:{arg}"
            per_step[key] = []
            hooks.append(lambda fr, rec, p=profile, k=key: per_step[k].append(analysis.expected_utility(fr, model, p)))

    def on_step(fr, rec):
        for hook in hooks:
            hook(fr, rec)

    if cfg["merge_states"]:
        path_traits = [tr.name for tr in traits if not tr.ray_invariant]
        if path_traits:
            raise ConfigError(f"merge_states cannot track path traits: {', '.join(path_traits)}", "merge_states")
    extinct_at = None
    try:
        traj = tree.run_tree(model, cfg["steps"], cfg["prune_threshold"], traits,
                             on_step=on_step if hooks else None, merge_states=cfg["merge_states"])
    except Extinction as exc:
        traj = exc.trajectory
        extinct_at = exc.record.time
    final = traj.final
    report: dict[str, Any] = {
        "engine": "tree",
        "model": model.describe(),
        "steps": cfg["steps"],
        "prune_threshold": cfg["prune_threshold"],
        "merge_states": cfg["merge_states"],
        "extinct_at": extinct_at,
        "final": {
            "depth": final.depth,
            "entries": len(final),
            "mean_fitness": final.mean_fitness if len(final) else 0.0,
            "log_total_mass": final.log_total_mass,
            "truncated_share_bound": final.truncated_share_bound,
            "trait_shares": traj.final_trait_shares,
        },
        "analyses": {},
    }
    out = report["analyses"]
    eta = cfg.get("params", {}).get("eta")
    for (kind, arg), name in zip(kinds, cfg["analyses"]):
        if kind == "exponents":
            if len(traj) < 2:
                out[name] = None
                continue
            window = cfg.get("window")
            entry = {"root": tree.exponent_estimate(traj.log_sizes(), window)._asdict(), "traits": {}}
            for tr_name in traj.trait_names:
                entry["traits"][tr_name] = _trait_estimates(traj, tr_name, window)
            out[name] = entry
        elif kind == "preservation_check":
            if eta is None:
                raise ConfigError("preservation_check needs an eta parameter", "analyses")
            depth = int(arg) if arg else 10
            out[name] = analysis.eta_preservation_check(model, depth, eta).to_dict()
        elif kind == "geometric_floor":
            if eta is None:
                raise ConfigError("geometric_floor needs an eta parameter", "analyses")
            if len(traj) == 0:
                out[name] = None
                continue
            f_star = analysis.resolve_f_star(model, float(traj.mean_fitness.max()))
            check = analysis.geometric_mean_floor_check(traj, eta, f_star)
            out[name] = {"floor_estimate": check.floor_estimate, "passes": check.passes, "target": eta * f_star}
        elif kind == "concentration":
            eps = float(arg) if arg else 0.05
            f_star = model.declared_fitness_supremum
            if f_star is not None and math.isinf(f_star):
                f_star = None
            out[name] = analysis.concentration_mass(final, model, f_star, eps) if len(final) else 0.0
        elif kind == "utility":
            values = per_step[name]
            out[name] = {
                "final": analysis.expected_utility(final, model, analysis.utility_profile(arg))._asdict()
                if len(final) else None,
                "per_step": [v.value for v in values],
                "negative_infinite_share": [v.negative_infinite_share for v in values],
            }
        elif kind == "coordinates":
            means = per_step["coordinate_means"]
            out[name] = {
                "final": analysis.coordinate_means(final, model) if len(final) else None,
                "mean_c": [m[0] for m in means],
                "mean_d": [m[1] for m in means],
            }
        elif kind == "oracle":
            particles = int(cfg.get("particles", 10000))
            steps = len(traj)
            oracle = tree.particle_oracle(model, particles, steps, cfg["seed"], traits)
            dev = [abs(o[0] - r.mean_fitness) for o, r in zip(oracle, traj.records)]
            out[name] = {"particles": particles, "seed": cfg["seed"],
                         "max_mean_fitness_deviation": max(dev) if dev else 0.0,
                         "tolerance": 5 / math.sqrt(particles)}
    return report, traj, {}


def _execute(cfg: dict, out_dir: str | os.PathLike | None = None):
    cfg = validate_config(cfg)
    out_dir = Path(out_dir) if out_dir is not None else None
    outputs = dict(cfg["outputs"])
    if not outputs and out_dir is not None:
        outputs = {"json": "report.json"}
        if cfg["engine"] != "gaussian":
            outputs["csv"] = "trajectory.csv"
    table = None
    traj = None
    if cfg["engine"] == "finite":
        report, table = run_finite(cfg)
    elif cfg["engine"] == "gaussian":
        report = run_gaussian(cfg)
    else:
        report, traj, _ = run_tree_experiment(cfg)
        table = tree.trajectory_csv(traj)
    written = {}
    if "csv" in outputs and table is not None:
        path = _resolve(out_dir, outputs["csv"])
        _write(path, table)
        written["csv"] = str(path)
    if "frontier" in outputs and traj is not None:
        path = _resolve(out_dir, outputs["frontier"])
        _write(path, json.dumps(plain(traj.final.snapshot()), sort_keys=True) + "\n")
        written["frontier"] = str(path)
    if "json" in outputs:
        path = _resolve(out_dir, outputs["json"])
        _write(path, dumps(report))
        written["json"] = str(path)
    return report, traj, written


def run_experiment(cfg: dict, out_dir: str | os.PathLike | None = None) -> dict:
    """Run one experiment, write its artifacts and return the report.

    Without explicit ``outputs`` the artifacts go to ``out_dir`` under
    default names; with neither, nothing is written.  The paths written are
    listed under the report's ``_written`` key.
    """
    report, _, written = _execute(cfg, out_dir)
    report["_written"] = written
    return report


# ---------------------------------------------------------------- sweep

def _set_path(cfg: dict, axis: str, value) -> None:
    parts = axis.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"sweep axis {axis!r} does not name a parameter", "axis")
        node = node[part]
    node[parts[-1]] = value


def _sweep_row(cfg: dict, value) -> dict:
    row: dict[str, Any] = {"value": value}
    try:
        report, traj, _ = _execute(cfg)
    except (ConfigError, ModelError, FrontierExplosion, OSError, ValueError) as exc:
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row["status"] = "ok"
    if traj is None:
        row["report"] = report
        return row
    final = report["final"]
    row["final_mean_fitness"] = final["mean_fitness"]
    row["final_trait_shares"] = final["trait_shares"]
    row["truncated_share_bound"] = final["truncated_share_bound"]
    row["extinct_at"] = report["extinct_at"]
    row["analyses"] = report["analyses"]
    mf = traj.mean_fitness
    row["tail_mean_fitness_odd"] = float(mf[1::2][-1]) if mf.size > 1 else None
    row["tail_mean_fitness_even"] = float(mf[0::2][-1]) if mf.size else None
    if traj.trait_names:
        row["min_trait_shares_after_start"] = {
            n: float(traj.column(n)[1:].min()) if len(traj) > 1 else None for n in traj.trait_names}
    params = cfg.get("params", cfg.get("model", {}).get("params", {}) if isinstance(cfg.get("model"), dict) else {})
    name = cfg["model"]["name"] if isinstance(cfg.get("model"), dict) else cfg["model"]
    refs = zoo.build(name, params).references
    refs = {k: v for k, v in refs.items() if isinstance(v, (int, float))}
    if refs:
        row["references"] = refs
    return row


def sweep(template: dict, axis: str, values: Sequence, workers: int | None = None) -> list[dict]:
    """One run per value of ``axis`` (a dotted path such as ``params.b``).

    Runs execute on a thread pool; rows come back in input order, and a
    failing value yields an error row without stopping the others.
    """
    cfgs = []
    for v in values:
        cfg = copy.deepcopy(template)
        model = cfg.get("model")
        if axis.startswith("params.") and isinstance(model, dict) and "name" in model and "params" not in cfg:
            # let "params.x" reach a nested {"name", "params"} model
            cfg["model"], cfg["params"] = model["name"], dict(model.get("params", {}))
        _set_path(cfg, axis, v)
        cfgs.append(cfg)
    if not cfgs:
        return []
    with ThreadPoolExecutor(max_workers=workers or min(8, len(cfgs))) as pool:
        return list(pool.map(_sweep_row, cfgs, values))


# ---------------------------------------------------------------- argparse

def _global_parent(defaults: bool) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    parent.add_argument("--config", help="experiment config (JSON)", **kw)
    parent.add_argument("--out", help="output directory", **kw)
    parent.add_argument("--seed", type=int, help="seed for the particle oracle", **kw)
    parent.add_argument("--prune", type=float, help="prune threshold for tree runs", **kw)
    return parent


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _param_pairs(pairs: Sequence[str] | None) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}", "params")
        out[key] = _parse_value(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evotree", parents=[_global_parent(True)],
                                     description="Selection-mutation dynamics on finite genotype sets and infinite trees.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_parent(False)

    finite = sub.add_parser("finite", help="finite selection-mutation model")
    fsub = finite.add_subparsers(dest="action", required=True)
    frun = fsub.add_parser("run", parents=[common], help="evolve a finite model")
    frun.add_argument("--model", help="path to a finite model document")
    frun.add_argument("--steps", type=int)

    tr = sub.add_parser("tree", help="tree model runs")
    tsub = tr.add_subparsers(dest="action", required=True)
    trun = tsub.add_parser("run", parents=[common], help="evolve a zoo model")
    trun.add_argument("--model", help="zoo model name")
    trun.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter (JSON value)")
    trun.add_argument("--steps", type=int)
    trun.add_argument("--trait", action="append", help="trait to track (repeatable)")
    trun.add_argument("--analysis", action="append", help="analysis to run (repeatable)")

    gs = sub.add_parser("gaussian", parents=[common], help="Gaussian peak closed forms")
    gs.add_argument("--peak-height", type=float, default=1.0)
    gs.add_argument("--landscape-variance", type=float, default=1.0)
    gs.add_argument("--mutation-variance", type=float, default=1.0)
    gs.add_argument("--dimension", type=int, default=1)
    gs.add_argument("--discretize", action="store_true", help="also compute the grid eigenvalue")
    gs.add_argument("--half-width", type=float)
    gs.add_argument("--grid-points", type=int, default=2001)

    ln = sub.add_parser("lineage", parents=[common], help="lineage exponent estimate below a node")
    ln.add_argument("--model", help="zoo model name")
    ln.add_argument("--param", action="append", metavar="KEY=VALUE")
    ln.add_argument("--path", default="", help="child indices from the root, e.g. 011 or 0.1.1")
    ln.add_argument("--steps", type=int, default=100)
    ln.add_argument("--window", type=int)

    sw = sub.add_parser("sweep", parents=[common], help="run a config over a list of parameter values")
    sw.add_argument("--axis", required=True, help="dotted config path, e.g. params.b")
    sw.add_argument("--values", default="", help="comma-separated values")
    sw.add_argument("--workers", type=int)

    vf = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    vf.add_argument("--only", help="comma-separated criterion ids")
    vf.add_argument("--fixture", help="finite model document for the validation criterion")
    return parser


def _config_from_args(args) -> dict:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    return cfg


def _emit(report: dict, out_dir, name: str) -> None:
    text = dumps(report)
    if out_dir:
        _write(Path(out_dir) / name, text)
    else:
        sys.stdout.write(text)


def _cmd_run(args, engine: str) -> int:
    cfg = _config_from_args(args)
    cfg.setdefault("engine", engine)
    if cfg["engine"] != engine:
        raise ConfigError(f"config engine {cfg['engine']!r} does not match command {engine!r}", "engine")
    if getattr(args, "model", None):
        cfg["model"] = args.model
    if getattr(args, "param", None):
        params = cfg.get("params", {})
        if isinstance(cfg.get("model"), dict) and "params" in cfg["model"]:
            params = cfg["model"]["params"]
        params.update(_param_pairs(args.param))
        if isinstance(cfg.get("model"), dict) and "name" in cfg["model"]:
            cfg["model"]["params"] = params
        else:
            cfg["params"] = params
    if getattr(args, "steps", None) is not None:
        cfg["steps"] = args.steps
    if getattr(args, "trait", None):
        cfg["traits"] = list(cfg.get("traits", [])) + args.trait
    if getattr(args, "analysis", None):
        cfg["analyses"] = list(cfg.get("analyses", [])) + args.analysis
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "prune", None) is not None:
        cfg["prune_threshold"] = args.prune
    out_dir = getattr(args, "out", None)
    report = run_experiment(cfg, out_dir)
    written = report.pop("_written")
    if not written.get("json"):
        sys.stdout.write(dumps(report))
    return EXIT_OK


def _cmd_gaussian(args) -> int:
    if getattr(args, "config", None):
        cfg = _config_from_args(args)
        cfg.setdefault("engine", "gaussian")
        report = run_experiment(cfg, getattr(args, "out", None))
        if report.pop("_written"):
            return EXIT_OK
        _emit(report, None, "")
        return EXIT_OK
    try:
        peak = gaussian.GaussianPeak(args.peak_height, args.landscape_variance, args.mutation_variance,
                                     args.dimension)
        report = gaussian_report(peak, args.discretize, args.half_width, args.grid_points)
    except ValueError as exc:
        raise ModelError(str(exc))
    _emit(report, getattr(args, "out", None), "gaussian.json")
    return EXIT_OK


def _cmd_lineage(args) -> int:
    cfg = _config_from_args(args)
    name = args.model or cfg.get("model")
    if isinstance(name, dict):
        cfg = dict(cfg, params=name.get("params", {}))
        name = name.get("name")
    if not name:
        raise ConfigError("lineage needs a model", "model")
    params = dict(cfg.get("params", {}))
    params.update(_param_pairs(args.param))
    model = zoo.build(name, params)
    text = args.path.strip()
    try:
        path = [int(c) for c in (text.split(".") if "." in text else text)]
    except ValueError:
        raise ConfigError(f"bad node path {args.path!r}", "path")
    origin = model.node_at(path)
    prune = getattr(args, "prune", None)
    if prune is None:
        prune = cfg.get("prune_threshold", 0.0)
    logs = tree.lineage_sizes(model, origin, args.steps, prune)
    est = tree.exponent_estimate(logs, args.window)
    report = {"model": model.describe(), "path": path, "steps": args.steps, "prune_threshold": prune,
              "estimate": est._asdict(), "log_sizes": logs}
    if isinstance(model, zoo.BinaryDyadic):
        report["closed_form_exponent"] = zoo.binary_closed_form_exponent(origin)
    _emit(report, getattr(args, "out", None), "lineage.json")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if not getattr(args, "config", None):
        raise ConfigError("sweep needs --config with a template", "config")
    template = _config_from_args(args)
    if getattr(args, "prune", None) is not None:
        template["prune_threshold"] = args.prune
    if getattr(args, "seed", None) is not None:
        template["seed"] = args.seed
    template.pop("outputs", None)
    values = [_parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
    rows = sweep(template, args.axis, values, args.workers)
    _emit({"axis": args.axis, "rows": rows}, getattr(args, "out", None), "sweep.json")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import run_all

    only = [s.strip() for s in args.only.split(",")] if args.only else None
    results = run_all(only=only, fixture=args.fixture, stream=sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "finite":
            return _cmd_run(args, "finite")
        if args.command == "tree":
            return _cmd_run(args, "tree")
        if args.command == "gaussian":
            return _cmd_gaussian(args)
        if args.command == "lineage":
            return _cmd_lineage(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_verify(args)
    except ConfigError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FrontierExplosion as exc:
        print(f"frontier cap exceeded: {exc}", file=sys.stderr)
        return EXIT_EXPLOSION
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
