"""Command-line pipeline: simulate -> tabulate -> fit -> report.

Configuration is a single JSON file with optional sections "simulate",
"tabulate", and "fit"; unknown keys are rejected.  All randomness flows
from one root seed: the per-experiment simulation seed is derived from
(root, purpose tag, experiment index), and fit restarts derive from the
fit seed the same way.  Output files are written atomically.

Exit codes: 0 ok, 1 usage/config error, 2 fit did not converge,
3 inconsistent data.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .counts import CountTable, read_count_tables, write_count_tables
from .errors import ConfigError, DataInconsistencyError, EprbError
from .eventsim import (SimConfig, match_coincidences, read_event_log,
                       simulate_experiment, tabulate_counts, write_event_log)
from .fitting import FitProblem, FitResult, OptimizerConfig, evaluate_model4, fit
from .quantum import density_from_json, density_to_json, singlet_state
from .scan import scan_series, theta_for
from .stats import FitStatistics

_PURPOSE_SIMULATE = 1
_PURPOSE_FIT = 2

_SIMULATE_KEYS = {
    "experiments", "duration_ns", "pairs_per_quadrant", "offset_ns",
    "clock_drift_ns_per_s", "inter_experiment_gap_s", "cycle_ns",
    "switch_time_ns", "alice_detect_prob", "bob_detect_prob", "rho",
    "periodic_switching",
}
_TABULATE_KEYS = {"delta_ns", "window_ns"}
_FIT_KEYS = {"model", "seed", "restarts", "max_iter", "tol", "method",
             "window_ns", "duration_ns", "cv", "refit_model4"}


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic(path: str, writer) -> None:
    tmp = path + ".tmp"
    writer(tmp)
    os.replace(tmp, path)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"simulate": _SIMULATE_KEYS, "tabulate": _TABULATE_KEYS, "fit": _FIT_KEYS}
    for section, keys in cfg.items():
        if section not in allowed:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(keys, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        unknown = set(keys) - allowed[section]
        if unknown:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return cfg


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _derived_seed(root: int, purpose: int, index: int) -> int:
    return int(np.random.SeedSequence([root, purpose, index]).generate_state(1)[0])


def _sig6(x: float) -> float:
    if x == 0 or not np.isfinite(x):
        return float(x)
    return float(f"{x:.6g}")


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config).get("simulate", {})
    n_exp = args.experiments or int(cfg.get("experiments", 41))
    series = scan_series(n_exp)
    rho_cfg = cfg.get("rho", "singlet")
    rho = singlet_state() if rho_cfg == "singlet" else density_from_json(rho_cfg)
    gap_s = float(cfg.get("inter_experiment_gap_s", 460.0 / 40.0))
    os.makedirs(args.out, exist_ok=True)
    manifest = {
        "run_id": f"simulate-{_config_hash({'simulate': cfg})}-seed{args.seed}",
        "version": __version__,
        "config_hash": _config_hash({"simulate": cfg}),
        "root_seed": args.seed,
        "experiments": [],
    }
    for idx, exp in enumerate(series):
        seed = _derived_seed(args.seed, _PURPOSE_SIMULATE, idx)
        sim = SimConfig(
            theta=exp.theta,
            rho=rho,
            pairs_per_quadrant=float(cfg.get("pairs_per_quadrant", 1e6)),
            duration_ns=float(cfg.get("duration_ns", 5e9)),
            cycle_ns=int(cfg.get("cycle_ns", 100)),
            switch_time_ns=int(cfg.get("switch_time_ns", 14)),
            offset_ns=float(cfg.get("offset_ns", 15.0)),
            clock_drift_ns_per_s=float(cfg.get("clock_drift_ns_per_s", 0.0)),
            experiment_start_s=idx * gap_s,
            periodic_switching=bool(cfg.get("periodic_switching", True)),
            seed=seed,
        )
        if "alice_detect_prob" in cfg:
            sim.alice_profiles[:] = float(cfg["alice_detect_prob"])
        if "bob_detect_prob" in cfg:
            sim.bob_profiles[:] = float(cfg["bob_detect_prob"])
        log_a, log_b, truth = simulate_experiment(sim)
        fa = os.path.join(args.out, f"{exp.experiment_id}_alice.csv")
        fb = os.path.join(args.out, f"{exp.experiment_id}_bob.csv")
        ft = os.path.join(args.out, f"{exp.experiment_id}_truth.json")
        _atomic(fa, lambda p: write_event_log(p, log_a))
        _atomic(fb, lambda p: write_event_log(p, log_b))
        _atomic_write_text(ft, json.dumps({
            "experiment_id": exp.experiment_id,
            "n_pairs_generated": truth.n_pairs_generated,
            "quadrant_counts": truth.quadrant_counts.tolist(),
            "alice_pair_ids": truth.alice_pair_ids.tolist(),
            "bob_pair_ids": truth.bob_pair_ids.tolist(),
        }, sort_keys=True))
        manifest["experiments"].append({
            "experiment_id": exp.experiment_id,
            "theta_over_pi": exp.theta_over_pi,
            "seed": seed,
            "alice_log": os.path.basename(fa),
            "bob_log": os.path.basename(fb),
            "truth": os.path.basename(ft),
        })
    _atomic_write_text(os.path.join(args.out, "manifest.json"),
                       json.dumps(manifest, indent=2, sort_keys=True))
    print(f"simulated {len(series)} experiments into {args.out}")
    return 0


# --- tabulate ---------------------------------------------------------------

def cmd_tabulate(args) -> int:
    cfg = _load_config(args.config).get("tabulate", {})
    delta = args.delta if args.delta is not None else float(cfg.get("delta_ns", 15.0))
    window = args.window if args.window is not None else float(cfg.get("window_ns", 30.0))
    manifest_path = os.path.join(args.logs, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"no manifest.json in {args.logs}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    tables: list[tuple[str, CountTable]] = []
    for entry in manifest["experiments"]:
        log_a = read_event_log(os.path.join(args.logs, entry["alice_log"]))
        log_b = read_event_log(os.path.join(args.logs, entry["bob_log"]))
        if len(log_a) == 0 or len(log_b) == 0:
            print(f"warning: empty log for {entry['experiment_id']}, skipping",
                  file=sys.stderr)
            continue
        coinc = match_coincidences(log_a, log_b, delta=delta, w=window)
        tables.append((entry["experiment_id"], tabulate_counts(log_a, log_b, coinc)))
    _atomic(args.out, lambda p: write_count_tables(p, tables))
    meta = {"delta_ns": delta, "window_ns": window, "n_experiments": len(tables),
            "source_manifest": manifest.get("run_id")}
    _atomic_write_text(args.out + ".meta.json", json.dumps(meta, indent=2, sort_keys=True))
    print(f"tabulated {len(tables)} experiments -> {args.out} "
          f"(delta={delta} ns, window={window} ns)")
    return 0


# --- fit --------------------------------------------------------------------

_CHANNEL_NAMES = ([f"ua_{i}{j}" for i in range(2) for j in range(2)]
                  + [f"ub_{k}{l}" for k in range(2) for l in range(2)]
                  + [f"c_{i}{j}{k}{l}" for i in range(2) for j in range(2)
                     for k in range(2) for l in range(2)])


def _fit_result_json(result: FitResult, stats4: FitStatistics | None = None) -> dict:
    p = result.params
    out = {
        "model": result.model_id,
        "X": _sig6(result.statistics.x),
        "DF": result.statistics.df,
        "Z": _sig6(result.statistics.z),
        "accepted": result.statistics.accepted,
        "converged": result.converged,
        "n_evaluations": result.n_evaluations,
        "rho": [[[_sig6(re), _sig6(im)] for re, im in row]
                for row in density_to_json(result.rho)],
        "pa": [_sig6(v) for v in np.asarray(p.pa).ravel()],
        "pb": [_sig6(v) for v in np.asarray(p.pb).ravel()],
    }
    if p.n_pairs is not None:
        out["N"] = _sig6(p.n_pairs)
    if p.pc is not None:
        out["pc"] = [_sig6(v) for v in p.pc.ravel()]
        out["window_ns"] = _sig6(p.window_w)
        out["duration_ns"] = _sig6(p.duration_T)
    if stats4 is not None:
        out["model4"] = {"Xrev": _sig6(stats4.x), "DF": stats4.df,
                         "Z": _sig6(stats4.z), "accepted": stats4.accepted,
                         "cv_fitted": False}
    return out


def _write_residuals(path, experiment_ids, observed, predictions, model4: bool):
    import csv as _csv

    def writer(p):
        with open(p, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["experiment", "channel", "observed", "predicted", "std_error"])
            for eid, obs, pred in zip(experiment_ids, observed, predictions):
                ua, ub = obs.unpaired()
                obs_vals = np.concatenate([ua.ravel(), ub.ravel(), obs.c.ravel()])
                pred_vals = np.concatenate([pred.ua.ravel(), pred.ub.ravel(),
                                            pred.c.ravel()])
                if model4 and pred.var_ua is not None:
                    se = np.sqrt(np.concatenate([pred.var_ua.ravel(),
                                                 pred.var_ub.ravel(),
                                                 pred.var_c.ravel()]))
                else:
                    se = np.sqrt(np.maximum(pred_vals, 0.0))
                for name, o, pr, s in zip(_CHANNEL_NAMES, obs_vals, pred_vals, se):
                    w.writerow([eid, name, repr(float(o)), f"{pr:.6g}", f"{s:.6g}"])
    _atomic(path, writer)


def cmd_fit(args) -> int:
    cfg = _load_config(args.config).get("fit", {})
    model = args.model or int(cfg.get("model", 2))
    if model not in (1, 2, 3, 4):
        raise ConfigError(f"model must be 1..4, got {model}")
    tables = read_count_tables(args.counts)
    if not tables:
        raise DataInconsistencyError("count table file has no experiments")
    experiment_ids = [eid for eid, _ in tables]
    observed = [t for _, t in tables]
    from .quantum import geometry_for_experiment
    geometries = [geometry_for_experiment(theta_for(eid)) for eid in experiment_ids]
    opt = OptimizerConfig(
        max_iter=int(cfg.get("max_iter", 3000)),
        tol=float(cfg.get("tol", 1e-10)),
        restarts=int(cfg.get("restarts", 3)),
        seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)),
        method=str(cfg.get("method", "gradient")),
    )
    window = args.window if args.window is not None else float(cfg.get("window_ns", 30.0))
    duration = float(cfg.get("duration_ns", 5e9))
    fit_model = 3 if model == 4 else model
    problem = FitProblem(model_id=fit_model, observed=observed,
                         geometries=geometries, window_w=window,
                         duration_T=duration, config=opt)
    result = fit(problem)
    stats4 = None
    predictions = None
    if model == 4:
        cv = cfg.get("cv", {})
        if args.cv_file:
            with open(args.cv_file) as fh:
                cv = json.load(fh)
        cva = np.full((2, 2), float(cv.get("cva", 0.004)))
        cvb = np.full((2, 2), float(cv.get("cvb", 0.005)))
        cvc = np.full((2, 2, 2, 2), float(cv.get("cvc", 0.05)))
        stats4, params4 = evaluate_model4(problem, result, cva, cvb, cvc,
                                          refit=bool(cfg.get("refit_model4", False)))
        from .fitting import predictions_for
        predictions = predictions_for(problem, params4, result.rho)
    else:
        from .fitting import predictions_for
        predictions = predictions_for(problem, result.params, result.rho)
    payload = _fit_result_json(result, stats4)
    payload["experiments"] = experiment_ids
    _atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True))
    residual_path = os.path.splitext(args.out)[0] + "_residuals.csv"
    _write_residuals(residual_path, experiment_ids, observed, predictions,
                     model4=(model == 4))
    shown = stats4 if stats4 is not None else result.statistics
    print(f"model {model}: X={shown.x:.2f} DF={shown.df} Z={shown.z:.2f} "
          f"accepted={shown.accepted}")
    return 0 if result.converged else 2


# --- report -----------------------------------------------------------------

def cmd_report(args) -> int:
    import csv as _csv
    rows = []
    for path in args.results:
        with open(path) as fh:
            data = json.load(fh)
        if "model4" in data:
            rows.append((data["model"], data["model4"]["Xrev"], data["model4"]["DF"],
                         data["model4"]["Z"], data["model4"]["accepted"], path))
        else:
            rows.append((data["model"], data["X"], data["DF"], data["Z"],
                         data["accepted"], path))
    rows.sort(key=lambda r: r[3])
    os.makedirs(args.out, exist_ok=True)
    summary = os.path.join(args.out, "summary.csv")

    def writer(p):
        with open(p, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["model", "X", "DF", "Z", "accepted", "source"])
            for r in rows:
                w.writerow(r)
    _atomic(summary, writer)
    print(f"wrote {summary} ({len(rows)} fits)")
    return 0


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprb",
                                     description="EPRB count-model pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic event logs")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--experiments", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tabulate", help="match coincidences and build count tables")
    p.add_argument("--config", default=None)
    p.add_argument("--logs", required=True, help="directory with logs + manifest.json")
    p.add_argument("--delta", type=float, default=None, help="sync offset, ns")
    p.add_argument("--window", type=float, default=None, help="window width, ns")
    p.add_argument("--out", required=True, help="output counts CSV")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("fit", help="fit a filter model to a count table")
    p.add_argument("--config", default=None)
    p.add_argument("--counts", required=True)
    p.add_argument("--model", type=int, choices=(1, 2, 3, 4), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--cv-file", default=None,
                   help="JSON with cva/cvb/cvc for model 4")
    p.add_argument("--out", required=True, help="output fit JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="summarize fit results")
    p.add_argument("results", nargs="*", help="fit JSON files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataInconsistencyError as exc:
        print(f"data inconsistency: {exc}", file=sys.stderr)
        return 3
    except EprbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
