"""Batch experiment runner: ``fwlab run|report|check-model``.

One run reads a TOML experiment file, executes exactly one task, and writes
plain CSV / JSON-lines artifacts plus a run manifest into the output
directory.  Outputs are byte-reproducible given (config, seed): float cells
are written with repr round-tripping and thread count never changes results.

Config schema (strict: unknown sections or keys fail validation)::

    [model]
    family = "rotational-ou"        # rotational-ou | bounded-rotation |
                                    # double-well | anisotropic-ou
    gamma  = 1.0                    # rotational-ou / bounded-rotation
    # c0 = 0.0                      # double-well
    # a = [[2.0,1.0],[1.0,2.0]]     # anisotropic-ou (SPD)
    # k = [[1.0,0.0],[0.0,1.0]]     # anisotropic-ou quadratic form (SPD)
    # c = [[0.0,-1.0],[1.0,0.0]]    # anisotropic-ou linear circulation

    [run]
    task    = "rate-curve"          # simulate | action | minimize |
                                    # rate-curve | mc | ft-check | check-model
    seed    = 1234                  # 64-bit stream seed
    out_dir = "out"                 # overridden by --out
    threads = 1                     # overridden by FWLAB_THREADS, then --threads

    [simulate]                      # one section matching the task
    eps = 0.1 ; T = 50.0 ; dt = 0.01
    x0 = [1.0, 0.0]
    batch = 100 ; r_max = 1000.0 ; save_paths = 1

    [action]
    path_csv = "path.csv" ; eps = 0.1

    [minimize]
    nodes = 256 ; s0 = 4.5 ; s_min = 2.0 ; s_max = 12.0
    init = "auto" ; init_center = [1.0] ; init_scale = 0.5 ; gtol = 1e-9

    [rate-curve]
    q_grid = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]
    nodes = 256 ; s0 = 4.5 ; s_min = 2.0 ; s_max = 12.0
    gtol = 1e-9 ; constraint_tol = 1e-8 ; golden_rel_tol = 1e-3
    dual = false ; lambda_grid = []

    [mc]
    eps_grid = [0.1] ; T_grid = [30.0] ; dt = 0.01
    q = 0.25 ; delta = 0.0125 ; M = 10000
    estimator = "both"              # direct | importance | both
    x0 = [0.0, 0.0] ; stiffness = 2.0 ; opt_nodes = 128 ; burn_in = 0.0

    [ft-check]
    eps = 0.1 ; T = 30.0 ; dt = 0.01
    q = 0.2 ; delta = 0.01 ; M = 100000 ; stiffness = 2.0 ; opt_nodes = 128

    [check-model]
    radii = [1.0, 2.0, 4.0, 8.0] ; eps0 = 1.0

Exit codes: 0 success, 1 validation error (nothing written), 2 numerical
failure (non-convergence, infeasible points, all-exploded batches; partial
artifacts and the manifest are still flushed).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import io
import json
import math
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigError, InvalidArgumentError
from .models import make_model, check_assumptions, MODEL_FAMILIES
from .montecarlo import EventSpec, McRecord, estimate_direct, estimate_importance, ft_ratio
from .optimize import (
    OptimizerConfig,
    dual_scan,
    ft_defect,
    legendre_conjugate,
    minimize_rate,
    rate_curve,
)
from .paths import TimeGrid, path_from_csv, path_to_csv
from .simulate import SimConfig, batch_simulate, build_tilt
from .action import fw_action, gc_observable

TASKS = ("simulate", "action", "minimize", "rate-curve", "mc", "ft-check", "check-model")


# ---------------------------------------------------------------------------
# Schema validation
# ---------------------------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _as_float(section, key, v) -> float:
    if not _is_number(v):
        raise ConfigError(f"[{section}] {key} must be a number")
    return float(v)


def _as_int(section, key, v) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"[{section}] {key} must be an integer")
    return v


def _as_bool(section, key, v) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"[{section}] {key} must be a boolean")
    return v


def _as_str(section, key, v) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"[{section}] {key} must be a string")
    return v


def _as_float_list(section, key, v) -> list:
    if not isinstance(v, list) or not all(_is_number(x) for x in v):
        raise ConfigError(f"[{section}] {key} must be a list of numbers")
    return [float(x) for x in v]


def _as_matrix(section, key, v) -> list:
    if not isinstance(v, list) or not all(
        isinstance(r, list) and all(_is_number(x) for x in r) for r in v
    ):
        raise ConfigError(f"[{section}] {key} must be a matrix (list of rows)")
    return [[float(x) for x in r] for r in v]


_MODEL_KEYS = {
    "rotational-ou": {"gamma": _as_float},
    "bounded-rotation": {"gamma": _as_float},
    "double-well": {"c0": _as_float},
    "anisotropic-ou": {"a": _as_matrix, "k": _as_matrix, "c": _as_matrix},
}

_TASK_KEYS = {
    "simulate": {
        "eps": (_as_float, None),
        "T": (_as_float, None),
        "dt": (_as_float, None),
        "x0": (_as_float_list, None),
        "batch": (_as_int, 1),
        "r_max": (_as_float, 1e3),
        "save_paths": (_as_int, 1),
    },
    "action": {"path_csv": (_as_str, None), "eps": (_as_float, 0.0)},
    "minimize": {
        "nodes": (_as_int, 256),
        "s0": (_as_float, 4.5),
        "s_min": (_as_float, 2.0),
        "s_max": (_as_float, 12.0),
        "init": (_as_str, "auto"),
        "init_center": (_as_float_list, []),
        "init_scale": (_as_float, 0.5),
        "gtol": (_as_float, 1e-9),
    },
    "rate-curve": {
        "q_grid": (_as_float_list, None),
        "nodes": (_as_int, 256),
        "s0": (_as_float, 4.5),
        "s_min": (_as_float, 2.0),
        "s_max": (_as_float, 12.0),
        "gtol": (_as_float, 1e-9),
        "constraint_tol": (_as_float, 1e-8),
        "golden_rel_tol": (_as_float, 1e-3),
        "dual": (_as_bool, False),
        "lambda_grid": (_as_float_list, []),
    },
    "mc": {
        "eps_grid": (_as_float_list, None),
        "T_grid": (_as_float_list, None),
        "dt": (_as_float, None),
        "q": (_as_float, None),
        "delta": (_as_float, -1.0),
        "M": (_as_int, None),
        "estimator": (_as_str, "direct"),
        "x0": (_as_float_list, []),
        "stiffness": (_as_float, 2.0),
        "opt_nodes": (_as_int, 128),
        "burn_in": (_as_float, 0.0),
    },
    "ft-check": {
        "eps": (_as_float, None),
        "T": (_as_float, None),
        "dt": (_as_float, None),
        "q": (_as_float, None),
        "delta": (_as_float, -1.0),
        "M": (_as_int, None),
        "stiffness": (_as_float, 2.0),
        "opt_nodes": (_as_int, 128),
    },
    "check-model": {"radii": (_as_float_list, [1.0, 2.0, 4.0, 8.0]), "eps0": (_as_float, 1.0)},
}


def load_config(path: str) -> dict:
    """Parse and strictly validate an experiment file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    known_sections = {"model", "run"} | set(TASKS)
    for section in raw:
        if section not in known_sections:
            raise ConfigError(f"unknown section [{section}]")
    for required in ("model", "run"):
        if required not in raw:
            raise ConfigError(f"missing required section [{required}]")

    model_raw = raw["model"]
    family = _as_str("model", "family", model_raw.get("family", ""))
    if family not in MODEL_FAMILIES:
        raise ConfigError(f"unknown model family {family!r}")
    model_params = {}
    for key, value in model_raw.items():
        if key == "family":
            continue
        if key not in _MODEL_KEYS[family]:
            raise ConfigError(f"unknown key {key!r} in [model] for family {family}")
        model_params[key] = _MODEL_KEYS[family][key]("model", key, value)

    run_raw = raw["run"]
    run = {"task": None, "seed": 0, "out_dir": "out", "threads": 1}
    for key, value in run_raw.items():
        if key == "task":
            run["task"] = _as_str("run", key, value)
        elif key == "seed":
            run["seed"] = _as_int("run", key, value)
        elif key == "out_dir":
            run["out_dir"] = _as_str("run", key, value)
        elif key == "threads":
            run["threads"] = _as_int("run", key, value)
        else:
            raise ConfigError(f"unknown key {key!r} in [run]")
    task = run["task"]
    if task not in TASKS:
        raise ConfigError(f"run.task must be one of {TASKS}, got {task!r}")
    for section in TASKS:
        if section in raw and section != task:
            raise ConfigError(f"config declares task {task!r} but has section [{section}]")

    spec = _TASK_KEYS[task]
    section_raw = raw.get(task, {})
    task_cfg = {}
    for key, value in section_raw.items():
        if key not in spec:
            raise ConfigError(f"unknown key {key!r} in [{task}]")
        task_cfg[key] = spec[key][0](task, key, value)
    for key, (_, default) in spec.items():
        if key not in task_cfg:
            if default is None:
                raise ConfigError(f"missing required key {key!r} in [{task}]")
            task_cfg[key] = default
    return {"model": {"family": family, **model_params}, "run": run, task: task_cfg}


def config_hash(cfg: dict) -> str:
    """Hash of the experiment content; execution details do not enter."""
    scrubbed = {k: dict(v) for k, v in cfg.items()}
    scrubbed["run"] = {
        k: v for k, v in scrubbed["run"].items() if k not in ("threads", "out_dir")
    }
    blob = json.dumps(scrubbed, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, header: list, rows: list, footer_comments=()):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    for comment in footer_comments:
        buf.write(f"# {comment}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _write_json(path: str, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


class _Run:
    """Collects artifacts for one run and writes the manifest at the end."""

    def __init__(self, out_dir: str, cfg: dict):
        self.out_dir = out_dir
        self.cfg = cfg
        self.files: list[str] = []
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        full = os.path.join(self.out_dir, name)
        self.files.append(name)
        return full

    def finish(self):
        manifest = {
            "tool_version": __version__,
            "config": self.cfg,
            "config_sha256": config_hash(self.cfg),
            "seed": self.cfg["run"]["seed"],
            "started_utc": self.started,
            "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "outputs": {
                name: _sha256_file(os.path.join(self.out_dir, name))
                for name in sorted(set(self.files))
                if os.path.exists(os.path.join(self.out_dir, name))
            },
        }
        tmp = os.path.join(self.out_dir, "manifest.json.tmp")
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, os.path.join(self.out_dir, "manifest.json"))


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def _model_from_cfg(cfg: dict):
    params = {k: v for k, v in cfg["model"].items() if k != "family"}
    return make_model(cfg["model"]["family"], **params)


def _task_simulate(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["simulate"]
    grid = TimeGrid(horizon=c["T"], n_steps=int(round(c["T"] / c["dt"])))
    sim = SimConfig(
        eps=c["eps"], grid=grid, seed=cfg["run"]["seed"], r_max=c["r_max"], batch=c["batch"]
    )
    keep = c["save_paths"] > 0 and c["batch"] <= 10000
    result = batch_simulate(model, sim, c["x0"], keep_paths=keep, threads=threads)
    with open(run.path("summaries.jsonl"), "w") as fh:
        for s in result.summaries:
            fh.write(json.dumps(s.as_record(), sort_keys=True) + "\n")
    if keep:
        for i in range(min(c["save_paths"], len(result.paths))):
            with open(run.path(f"path_{i:04d}.csv"), "w") as fh:
                fh.write(path_to_csv(result.paths[i]))
    if result.n_exploded == len(result.summaries):
        return 2
    return 0


def _task_action(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["action"]
    with open(c["path_csv"]) as fh:
        path = path_from_csv(fh.read())
    act = fw_action(model, path)
    gc = gc_observable(model, path, c["eps"])
    _write_json(run.path("action.json"), {**act.as_dict(), **gc.as_dict()})
    return 0


def _optimizer_config(c: dict, seed: int, extra=None) -> OptimizerConfig:
    kwargs = dict(
        n_nodes=c.get("nodes", 256),
        s0=c.get("s0", 4.5),
        s_min=c.get("s_min", 2.0),
        s_max=c.get("s_max", 12.0),
        gtol=c.get("gtol", 1e-9),
        seed=seed,
    )
    if "constraint_tol" in c:
        kwargs["constraint_tol"] = c["constraint_tol"]
    if "golden_rel_tol" in c:
        kwargs["golden_rel_tol"] = c["golden_rel_tol"]
    if extra:
        kwargs.update(extra)
    return OptimizerConfig(**kwargs)


def _task_minimize(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["minimize"]
    extra = {"init_mode": c["init"], "init_scale": c["init_scale"]}
    if c.get("init_center"):
        extra["init_center"] = tuple(c["init_center"])
    opt = _optimizer_config(c, cfg["run"]["seed"], extra)
    res = minimize_rate(model, opt)
    with open(run.path("minimizer_path.csv"), "w") as fh:
        fh.write(path_to_csv(res.measure.path.one_period()))
    _write_json(
        run.path("minimize.json"),
        {
            "rate": res.rate,
            "period": res.measure.period,
            "converged": res.converged,
            "n_iter": res.n_iter,
        },
    )
    return 0 if res.converged else 2


def _task_rate_curve(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["rate-curve"]
    opt = _optimizer_config(c, cfg["run"]["seed"])
    curve = rate_curve(model, c["q_grid"], opt)
    symmetric = all(
        any(abs(q + p) < 1e-12 for p in curve.q) for q in curve.q
    )
    defect = ft_defect(curve) if symmetric else math.nan
    rows = [
        [q, s, lam, conv]
        for q, s, lam, conv in zip(curve.q, curve.s, curve.multipliers, curve.converged)
    ]
    _write_csv(
        run.path("rate_curve.csv"),
        ["q", "s", "lambda", "converged"],
        rows,
        footer_comments=[f"ft_defect = {_fmt(float(defect))}"],
    )
    for q, measure in zip(curve.q, curve.measures):
        if measure is None:
            continue
        with open(run.path(f"path_q{q:+.4f}.csv"), "w") as fh:
            fh.write(path_to_csv(measure.path.one_period()))
    summary = {
        "ft_defect": float(defect),
        "convexity_violation": curve.convexity_violation,
        "converged": list(curve.converged),
        "infeasible": list(curve.infeasible),
    }
    if c["dual"]:
        lambdas = c["lambda_grid"] or list(OptimizerConfig().lambda_grid)
        scan = dual_scan(model, lambdas, opt)
        s_dual = legendre_conjugate(scan.lambdas, scan.values, curve.q)
        rows = [
            [lam, (val if math.isfinite(val) else "inf")]
            for lam, val in zip(scan.lambdas, scan.values)
        ]
        _write_csv(run.path("dual_scan.csv"), ["lambda", "Lambda"], rows)
        finite = [
            abs(sd - sp) / max(1.0, abs(sp))
            for sd, sp in zip(s_dual, curve.s)
            if math.isfinite(sp)
        ]
        summary["dual_max_rel_gap"] = max(finite) if finite else math.nan
        _write_csv(
            run.path("dual_curve.csv"),
            ["q", "s_dual"],
            [[q, sd] for q, sd in zip(curve.q, s_dual)],
        )
    _write_json(run.path("summary.json"), summary)
    ok = all(curve.converged) and not any(curve.infeasible)
    return 0 if ok else 2


def _task_mc(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["mc"]
    q = c["q"]
    delta = c["delta"] if c["delta"] > 0 else 0.05 * max(1.0, abs(q))
    event = EventSpec(q=q, delta=delta, burn_in=c["burn_in"])
    x0 = c["x0"] or [0.0] * model.dim
    records: list[McRecord] = []
    tilt = None
    if c["estimator"] in ("importance", "both"):
        from .optimize import rate_point

        opt = OptimizerConfig(n_nodes=c["opt_nodes"], seed=cfg["run"]["seed"])
        point = rate_point(model, q, opt)
        if point.measure is None:
            print("no minimizing orbit for the requested q", file=sys.stderr)
            return 2
        tilt = build_tilt(model, point.measure, stiffness=c["stiffness"])
    for i, eps in enumerate(c["eps_grid"]):
        for j, T in enumerate(c["T_grid"]):
            grid = TimeGrid(horizon=T, n_steps=int(round(T / c["dt"])))
            seed = cfg["run"]["seed"] + 1000 * i + j
            sim = SimConfig(eps=eps, grid=grid, seed=seed, batch=c["M"])
            if c["estimator"] in ("direct", "both"):
                records.extend(
                    estimate_direct(model, sim, event, x0=x0, threads=threads)
                )
            if c["estimator"] in ("importance", "both"):
                records.append(
                    estimate_importance(model, tilt, sim, event, threads=threads)
                )
    _write_csv(
        run.path("mc.csv"), McRecord.csv_header(), [r.as_row() for r in records]
    )
    with open(run.path("mc.jsonl"), "w") as fh:
        for r in records:
            fh.write(json.dumps(r.as_record(), sort_keys=True) + "\n")
    return 0 if all(r.valid for r in records) else 2


def _task_ft_check(cfg, run: _Run, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["ft-check"]
    delta = c["delta"] if c["delta"] > 0 else 0.05 * max(1.0, abs(c["q"]))
    opt = OptimizerConfig(n_nodes=c["opt_nodes"], seed=cfg["run"]["seed"])
    res = ft_ratio(
        model,
        eps=c["eps"],
        T=c["T"],
        q=c["q"],
        delta=delta,
        M=c["M"],
        dt=c["dt"],
        seed=cfg["run"]["seed"],
        opt_cfg=opt,
        stiffness=c["stiffness"],
        threads=threads,
    )
    _write_json(
        run.path("ft_check.json"),
        {
            "log_ratio": res.log_ratio,
            "predicted": res.predicted,
            "normalized": res.normalized,
            "valid": res.valid,
            "record_plus": res.record_plus.as_record(),
            "record_minus": res.record_minus.as_record(),
        },
    )
    return 0 if res.valid else 2


def _task_check_model(cfg, run: _Run | None, threads: int) -> int:
    model = _model_from_cfg(cfg)
    c = cfg["check-model"]
    report = check_assumptions(model, c["radii"], eps0=c["eps0"])
    payload = {
        "eps0": report.eps0,
        "verdict": report.verdict,
        "warnings": list(report.warnings),
        "rows": [dataclasses.asdict(r) for r in report.rows],
    }
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ["radius", "radial_growth", "coercivity", "min_eig_a", "max_norm_c"]
    )
    for r in report.rows:
        writer.writerow(
            [_fmt(r.radius), _fmt(r.radial_growth), _fmt(r.coercivity),
             _fmt(r.min_eig_a), _fmt(r.max_norm_c)]
        )
    print(f"verdict: {report.verdict}")
    for w in report.warnings:
        print(f"warning: {w}")
    if run is not None:
        _write_json(run.path("check_model.json"), payload)
    return 0


_TASK_FN = {
    "simulate": _task_simulate,
    "action": _task_action,
    "minimize": _task_minimize,
    "rate-curve": _task_rate_curve,
    "mc": _task_mc,
    "ft-check": _task_ft_check,
    "check-model": _task_check_model,
}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def _read_csv_rows(path: str):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


def report(dirs) -> int:
    """Aggregate artifact directories into plot-ready tables on stdout."""
    curves = {}
    mc_rows = []
    found = False
    for d in dirs:
        if not os.path.exists(os.path.join(d, "manifest.json")):
            print(f"no manifest in {d}", file=sys.stderr)
            return 1
        curve_path = os.path.join(d, "rate_curve.csv")
        if os.path.exists(curve_path):
            header, rows = _read_csv_rows(curve_path)
            for row in rows:
                curves[float(row[0])] = [float(row[1]), float(row[2]), row[3]]
            found = True
        mc_path = os.path.join(d, "mc.csv")
        if os.path.exists(mc_path):
            header, rows = _read_csv_rows(mc_path)
            mc_rows.extend(rows)
            found = True
    if not found:
        print("no artifacts found", file=sys.stderr)
        return 1
    out = csv.writer(sys.stdout, lineterminator="\n")
    if curves:
        print("# rate curve")
        out.writerow(["q", "s", "lambda", "converged"])
        for q in sorted(curves):
            out.writerow([_fmt(q)] + [_fmt(v) for v in curves[q]])
        print("# fluctuation symmetry")
        out.writerow(["q", "s_plus", "s_minus", "defect"])
        for q in sorted(q for q in curves if q > 0):
            if -q in curves:
                s_p, s_m = curves[q][0], curves[-q][0]
                out.writerow([_fmt(q), _fmt(s_p), _fmt(s_m), _fmt(s_m - s_p - q)])
    if mc_rows:
        print("# monte carlo")
        header = McRecord.csv_header() + (["s", "rate_over_s"] if curves else [])
        out.writerow(header)
        for row in mc_rows:
            extra = []
            if curves:
                q = float(row[2])
                nearest = min(curves, key=lambda c: abs(c - q))
                s = curves[nearest][0]
                rate = float(row[9]) if row[9] not in ("inf", "nan") else math.nan
                extra = [_fmt(s), _fmt(rate / s if s else math.nan)]
            out.writerow(row + extra)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fwlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_rep = sub.add_parser("report", help="summarize artifact directories")
    p_rep.add_argument("dirs", nargs="+")
    p_chk = sub.add_parser("check-model", help="run assumption diagnostics")
    p_chk.add_argument("config")
    args = parser.parse_args(argv)

    if args.command == "report":
        return report(args.dirs)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "check-model":
        cfg["check-model"] = cfg.get(
            "check-model", {"radii": [1.0, 2.0, 4.0, 8.0], "eps0": 1.0}
        )
        return _task_check_model(cfg, None, 1)

    if args.seed is not None:
        cfg["run"]["seed"] = args.seed
    threads = cfg["run"]["threads"]
    if os.environ.get("FWLAB_THREADS"):
        try:
            threads = int(os.environ["FWLAB_THREADS"])
        except ValueError:
            print("FWLAB_THREADS must be an integer", file=sys.stderr)
            return 1
    if args.threads is not None:
        threads = args.threads
    out_dir = args.out if args.out is not None else cfg["run"]["out_dir"]
    cfg["run"]["out_dir"] = out_dir
    cfg["run"]["threads"] = threads

    task = cfg["run"]["task"]
    if task == "action" and not os.path.exists(cfg["action"]["path_csv"]):
        print(f"config error: missing input file {cfg['action']['path_csv']}", file=sys.stderr)
        return 1

    run = _Run(out_dir, cfg)
    try:
        code = _TASK_FN[task](cfg, run, threads)
    except (InvalidArgumentError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish()
        return 1
    except Exception as exc:  # numerical failure: flush what we have
        print(f"numerical failure: {exc}", file=sys.stderr)
        run.finish()
        return 2
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
