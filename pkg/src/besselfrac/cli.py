"""Command-line front end.

``besselfrac <experiment> [--config FILE] [flags]`` runs one experiment and
writes its result table (CSV or JSON) atomically.  CSV output is accompanied
by ``<stem>.summary.json``.  Exit status: 0 on success, 1 for an invalid
configuration, 2 for a numerical failure.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import (ConfigError, Experiment, ExperimentConfig, parse_config, serialize,
                     to_json_dict)
from .fractal import DEFAULT_SCALES, dimension_experiment
from .model import RootSystem, edge_distance, k_prime
from .probe import (OCCUPATION_FIELDS, PROBE_FIELDS, edge_probability_sweep,
                    fit_exponent, joint_edge_sweep, occupation_sweep, window_hitting_sweep)
from .sde import (SimulationError, THREADS_ENV, _x0_array, default_threads,
                  exact_bessel_transition, scaled_pair, simulate_ensemble, simulate_path)
from .stats import ks_two_sample

SCHEMA_VERSION = 1


@dataclass
class Output:
    kind: str
    columns: list
    rows: list
    summary: dict
    line: str


# -- experiments -------------------------------------------------------------

def _x0(cfg):
    return _x0_array(cfg.params, None if cfg.probe.x0 is None else np.array(cfg.probe.x0))


def _threads(cfg):
    return cfg.threads or default_threads()


def _k_label(params, factor):
    lead = "4k" if factor == 2 else "2k"
    if params.is_type_b:
        return f"{lead} min(1,alpha)+{factor}"
    return f"{lead}+{factor}"


def _probe_rows(results):
    return [[getattr(p, f) for f in PROBE_FIELDS] for p in results]


def _try_fit(results, x="r"):
    """Exponent fit, or ``None`` when fewer than two estimates are positive."""
    try:
        return fit_exponent(results, x=x)
    except ValueError:
        return None


def _slope_text(fit):
    return "slope n/a (fewer than two nonzero estimates)" if fit is None else \
        f"slope {fit.exponent:.2f}"


def _fit_output(kind, cfg, results, target, label, columns=PROBE_FIELDS, x="r"):
    fit = _try_fit(results, x=x)
    rows = ([[getattr(p, f) for f in columns] for p in results])
    summary = {"fit": None if fit is None else fit.to_dict(), "target": target,
               "target_label": label}
    line = f"{_slope_text(fit)} target {target:.2f} ({label})"
    return Output(kind, list(columns), rows, summary, line)


def _simulate(cfg):
    p = simulate_path(cfg.params, _x0(cfg), cfg.probe.horizon, cfg.integrator, cfg.seed,
                      path_index=cfg.probe.path_index, zero_drift=cfg.probe.zero_drift)
    n = cfg.params.n_particles
    cols = ["t"] + [f"x_{i + 1}" for i in range(n)]
    rows = np.column_stack([p.times, p.states]).tolist()
    d_end = float(edge_distance(cfg.params, p.states[-1]))
    summary = {"n_steps": p.n_steps, "n_rows": len(p), "t_end": float(p.times[-1]),
               "stopped_at_R": p.stopped_at_R, "final_edge_distance": d_end}
    line = (f"simulated {p.n_steps} steps to t={p.times[-1]:g}; "
            f"final edge distance {d_end:.3g}")
    return Output("path", cols, rows, summary, line)


def _edge_prob(cfg):
    params = cfg.params
    res = edge_probability_sweep(params, _x0(cfg), cfg.sweep, cfg.probe.t, cfg.n_samples,
                                 cfg.integrator, cfg.seed, threads=_threads(cfg))
    return _fit_output("probe", cfg, res, 2 * k_prime(params) + 1, _k_label(params, 1))


def _occupation(cfg):
    params = cfg.params
    res = occupation_sweep(params, _x0(cfg), cfg.sweep, cfg.probe.horizon, cfg.n_samples,
                           cfg.integrator, cfg.seed, threads=_threads(cfg))
    return _fit_output("occupation", cfg, res, 2 * k_prime(params) + 1,
                       _k_label(params, 1), columns=OCCUPATION_FIELDS)


def _window_hit(cfg):
    params, pr = cfg.params, cfg.probe
    R = cfg.integrator.ball_radius
    if pr.sweep_over == "t2":
        windows = [(pr.t1, pr.t1 + w) for w in cfg.sweep]
        res = [row[0] for row in window_hitting_sweep(
            params, _x0(cfg), [pr.r], windows, R, cfg.n_samples, cfg.integrator, cfg.seed,
            threads=_threads(cfg))]
        fit = _try_fit(res, x="window")
        ref = k_prime(params) + 0.5
        summary = {"fit": None if fit is None else fit.to_dict(), "reference": ref,
                   "reference_label": "k'+1/2 (upper growth rate)"}
        line = f"window {_slope_text(fit)} reference {ref:.2f} (k'+1/2, one-sided)"
        return Output("probe", list(PROBE_FIELDS), _probe_rows(res), summary, line)
    res = window_hitting_sweep(params, _x0(cfg), cfg.sweep, [(pr.t1, pr.t2)], R,
                               cfg.n_samples, cfg.integrator, cfg.seed,
                               threads=_threads(cfg))[0]
    fit = _try_fit(res)
    summary = {"fit": None if fit is None else fit.to_dict()}
    line = f"r-{_slope_text(fit)} over window [{pr.t1:g}, {pr.t2:g}]"
    return Output("probe", list(PROBE_FIELDS), _probe_rows(res), summary, line)


def _joint_prob(cfg):
    params, pr = cfg.params, cfg.probe
    res = joint_edge_sweep(params, _x0(cfg), cfg.sweep, pr.s1, pr.s2, cfg.n_samples,
                           cfg.integrator, cfg.seed, threads=_threads(cfg))
    return _fit_output("probe", cfg, res, 4 * k_prime(params) + 2, _k_label(params, 2))


def _selfsim(cfg):
    pr = cfg.probe
    a, b = scaled_pair(cfg.params, pr.t, pr.c, cfg.n_samples, cfg.integrator, cfg.seed,
                       statistic=pr.statistic, x0=cfg.probe.x0, threads=_threads(cfg))
    d, p = ks_two_sample(a, b)
    summary = {"ks_statistic": d, "p_value": p, "c": pr.c, "t": pr.t,
               "statistic": pr.statistic}
    line = f"KS D={d:.4f} p={p:.3f} (c={pr.c:g}, t={pr.t:g}, {pr.statistic})"
    return Output("selfsim", ["scaled_time", "scaled_space"],
                  np.column_stack([a, b]).tolist(), summary, line)


def _dimension_target(params):
    return 0.5 * (1.0 - min(1.0, 2.0 * k_prime(params)))


def _dimension(cfg):
    pr = cfg.probe
    kwargs = dict(horizon=pr.horizon, cfg=cfg.integrator, seed=cfg.seed,
                  coupling_c=pr.coupling_c, window=(pr.window_start, None),
                  threads=_threads(cfg), zero_drift=pr.zero_drift, x0=pr.x0)
    if pr.sweep_over == "k":
        rows, per_k = [], []
        for k in cfg.sweep:
            params = replace(cfg.params, k=k)
            est = dimension_experiment(params, cfg.n_samples, **kwargs)
            target = _dimension_target(params)
            rows.append([k, est.d_hat, est.d_raw, est.stderr, est.ci_low, est.ci_high,
                         target, est.insufficient_visits])
            per_k.append({"k": k, "target": target, **est.to_dict()})
        cols = ["k", "d_hat", "d_raw", "stderr", "ci_low", "ci_high", "target",
                "insufficient_visits"]
        line = "d_hat by k: " + ", ".join(f"{r[0]:g}:{r[1]:.3f}" for r in rows)
        return Output("dimension-sweep", cols, rows, {"estimates": per_k}, line)
    scales = np.array(cfg.sweep) if cfg.sweep else DEFAULT_SCALES
    est = dimension_experiment(cfg.params, cfg.n_samples, scales=scales, **kwargs)
    target = _dimension_target(cfg.params)
    cols = ["delta", "r", "mean_count"] + [f"n_{i}" for i in range(cfg.n_samples)]
    rows = [[float(d), float(r), float(m)] + est.path_counts[:, j].tolist()
            for j, (d, r, m) in enumerate(zip(est.scales, est.thresholds, est.counts))]
    summary = {"estimate": est.to_dict(), "target": target,
               "target_label": "(1 - min(1, 2k'))/2"}
    line = f"d_hat {est.d_hat:.3f} target {target:.3f} ((1 - min(1, 2k'))/2)"
    if est.insufficient_visits:
        line += " [insufficient visits]"
    return Output("dimension", cols, rows, summary, line)


def _oracle_check(cfg):
    params, pr = cfg.params, cfg.probe
    x0 = _x0(cfg)
    ens = simulate_ensemble(params, x0, [pr.t], cfg.n_samples, cfg.integrator, cfg.seed,
                            threads=_threads(cfg))
    if params.root_system is RootSystem.A:
        sim = edge_distance(params, ens.states[:, 0, :]) / math.sqrt(2.0)
        y0 = float(edge_distance(params, x0)) / math.sqrt(2.0)
        k_eff = params.k
    else:
        sim = ens.states[:, 0, 0]
        y0 = float(x0[0])
        k_eff = params.k * params.alpha
    exact = exact_bessel_transition(y0, pr.t, k_eff, seed=cfg.seed, size=cfg.n_samples)
    d, p = ks_two_sample(sim, exact)
    summary = {"ks_statistic": d, "p_value": p, "k_effective": k_eff, "y0": y0, "t": pr.t}
    line = f"KS D={d:.4f} p={p:.3f} vs exact Bessel law (k={k_eff:g}, n={cfg.n_samples})"
    return Output("oracle", ["simulated", "exact"], np.column_stack([sim, exact]).tolist(),
                  summary, line)


DISPATCH = {
    Experiment.SIMULATE: _simulate,
    Experiment.EDGE_PROB: _edge_prob,
    Experiment.OCCUPATION: _occupation,
    Experiment.WINDOW_HIT: _window_hit,
    Experiment.JOINT_PROB: _joint_prob,
    Experiment.SELFSIM: _selfsim,
    Experiment.DIMENSION: _dimension,
    Experiment.ORACLE_CHECK: _oracle_check,
}


# -- output ------------------------------------------------------------------

def meta_block(cfg):
    """Everything needed to reproduce a run (thread count and output path excluded,
    since results do not depend on them)."""
    conf = to_json_dict(cfg)
    conf.pop("threads", None)
    conf.pop("output_path", None)
    return {"config": conf, "seed": cfg.seed, "version": __version__}


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _dumps(obj):
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.generic):
        return str(v.item())
    if v is None:
        return ""
    return str(v)


def render_csv(out, meta):
    buf = io.StringIO()
    buf.write(f"# besselfrac-csv schema_version={SCHEMA_VERSION} kind={out.kind}\n")
    buf.write("# meta " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    for row in out.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_summary(out, meta):
    return _dumps({"schema_version": SCHEMA_VERSION, "kind": out.kind, "meta": meta,
                   "summary": out.summary, "line": out.line})


def render_json(out, meta):
    return _dumps({"schema_version": SCHEMA_VERSION, "kind": out.kind, "meta": meta,
                   "summary": out.summary, "line": out.line, "columns": out.columns,
                   "rows": out.rows})


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary_path(path):
    stem, _ = os.path.splitext(path)
    return stem + ".summary.json"


def output_paths(cfg):
    path = cfg.output_path or f"{cfg.experiment.value}.{cfg.output_format}"
    if cfg.output_format == "csv":
        return path, summary_path(path)
    return path, None


def run(cfg, stdout=None, stderr=None):
    """Run the experiment described by ``cfg``; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        out = DISPATCH[cfg.experiment](cfg)
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=stderr)
        print(json.dumps(_jsonable(exc.payload()), sort_keys=True), file=stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return 2
    meta = meta_block(cfg)
    main_path, side_path = output_paths(cfg)
    if cfg.output_format == "csv":
        write_atomic(main_path, render_csv(out, meta))
        write_atomic(side_path, render_summary(out, meta))
    else:
        write_atomic(main_path, render_json(out, meta))
    print(out.line, file=stdout)
    return 0


# -- argument parsing ----------------------------------------------------------

# flag -> config key
FLAGS = {
    "--seed": "seed",
    "--threads": "threads",
    "--out": "output_path",
    "--format": "output_format",
    "--n-samples": "n_samples",
    "--sweep": "sweep",
    "--root-system": "model.root_system",
    "--n-particles": "model.n_particles",
    "--k": "model.k",
    "--alpha": "model.alpha",
    "--dt-max": "integrator.dt_max",
    "--gap-safety": "integrator.gap_safety",
    "--r-floor": "integrator.r_floor",
    "--ball-radius": "integrator.ball_radius",
    "--scheme": "integrator.scheme",
    "--record-spacing": "integrator.record_spacing",
    "--t": "probe.t",
    "--horizon": "probe.horizon",
    "--r": "probe.r",
    "--t1": "probe.t1",
    "--t2": "probe.t2",
    "--s1": "probe.s1",
    "--s2": "probe.s2",
    "--c": "probe.c",
    "--statistic": "probe.statistic",
    "--coupling-c": "probe.coupling_c",
    "--window-start": "probe.window_start",
    "--x0": "probe.x0",
    "--sweep-over": "probe.sweep_over",
    "--path-index": "probe.path_index",
}

HELP = {
    Experiment.SIMULATE: "simulate one path and write its grid",
    Experiment.EDGE_PROB: "edge-set probability at time t over a sweep of r",
    Experiment.OCCUPATION: "expected time in the edge set over a sweep of r",
    Experiment.WINDOW_HIT: "hitting probability of the edge set in a time window",
    Experiment.JOINT_PROB: "two-time joint edge probability over a sweep of r",
    Experiment.SELFSIM: "two-sample test of 1/2-self-similarity",
    Experiment.DIMENSION: "box-counting dimension of near-collision times",
    Experiment.ORACLE_CHECK: "compare with the exact one-dimensional Bessel law",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="besselfrac",
        description="Monte Carlo experiments for multivariate Bessel processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for exp in Experiment:
        sp = sub.add_parser(exp.value, help=HELP[exp], description=HELP[exp])
        sp.add_argument("--config", metavar="PATH", help="key = value or JSON config file")
        for flag, key in FLAGS.items():
            help_text = f"sets {key}"
            if flag == "--threads":
                help_text += f" (default: ${THREADS_ENV} or 1)"
            sp.add_argument(flag, dest=key, metavar="VALUE", help=help_text)
        sp.add_argument("--zero-drift", dest="probe.zero_drift", action="store_const",
                        const="true", help="switch the drift off (noise calibration)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="set any config key (repeatable)")
        sp.add_argument("--print-config", action="store_true",
                        help="print the resolved config and exit")
    return parser


def config_from_args(args):
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file ({exc.strerror})", "--config") from None
    overrides = {"experiment": args.experiment}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in list(FLAGS.values()) + ["probe.zero_drift"]:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return parse_config(text, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.print_config:
        sys.stdout.write(serialize(cfg))
        return 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
