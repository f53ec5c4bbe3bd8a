"""Config-driven experiment runner.

Subcommands: ``run`` (ingest, featurize, split, fit every requested
model, evaluate, emit tables and curves), ``sweep-depth``,
``sweep-fraction``, ``predict`` (load a saved model plus a feature file
and emit curves) and ``selftest`` (condensed oracle suites).  One YAML
file fully describes a run; ``--seed`` and ``--out`` override the
config.  Exit codes: 0 success, 2 config error, 3 data error,
4 numeric failure.
"""

import argparse
import datetime
import os
import sys

import numpy as np
import yaml
from sklearn.preprocessing import StandardScaler

from . import oracles
from .exceptions import (
    BatsurvError,
    ConfigError,
    DegenerateDurationsError,
    DegenerateTimeError,
    EmptySampleError,
    EmptyTraceError,
    GridMismatchError,
    MalformedRowError,
    MissingFileError,
    NoComparablePairsError,
    NoEventsError,
    NonConvergenceError,
    NonFiniteLossError,
    ShapeMismatchError,
    TooFewRecordsError,
)
from .ingest import (
    PHASE_CHARGE,
    PHASE_DISCHARGE,
    RawDatasetConfig,
    clean_nasa,
    label_failure,
    label_nasa_cycle,
    load_cycle_series,
)
from .metrics import c_index, evaluate_model, ibs, t_auc
from .models import (
    CoxRegression,
    CoxTime,
    DeepHit,
    Mtlr,
    NeuralCoxPH,
    SurvivalCurve,
    deephit_loss,
    load_model,
    mtlr_loss,
    save_model,
)
from .nncore import Mlp, MlpSpec, grad_check
from .signature import (
    _signature_levels,
    augment_time,
    chen_product,
    signature,
    signature_dim,
)
from .survdata import (
    SurvivalDataset,
    TimeGrid,
    generate_synthetic,
    km_estimate,
    make_grid,
    split,
    subsample_fraction,
    write_snapshot,
)
from .validation import make_survival_y

MODEL_NAMES = ("cox", "coxph", "coxtime", "deephit", "mtlr")

_CONFIG_ERRORS = (ConfigError, yaml.YAMLError)
_DATA_ERRORS = (
    MissingFileError,
    MalformedRowError,
    EmptySampleError,
    EmptyTraceError,
    TooFewRecordsError,
    DegenerateDurationsError,
    ShapeMismatchError,
)
_NUMERIC_ERRORS = (
    NonFiniteLossError,
    NonConvergenceError,
    NoEventsError,
    NoComparablePairsError,
    DegenerateTimeError,
    GridMismatchError,
    np.linalg.LinAlgError,
)


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = {
        "dataset": raw.get("dataset", {}),
        "phase": raw.get("phase", PHASE_DISCHARGE),
        "depth": int(raw.get("depth", 3)),
        "models": list(raw.get("models", list(MODEL_NAMES))),
        "split": raw.get("split", {}),
        "metrics": raw.get("metrics", {}),
        "model_params": raw.get("model_params", {}),
        "sweep": raw.get("sweep", {}),
        "output_dir": raw.get("output_dir", "out"),
    }
    ds = cfg["dataset"]
    if ds.get("format") not in ("toyota", "nasa", "synthetic"):
        raise ConfigError("dataset.format must be toyota, nasa or synthetic")
    if ds["format"] != "synthetic" and not ds.get("root"):
        raise ConfigError(f"dataset.root required for format {ds['format']}")
    if cfg["phase"] not in (PHASE_CHARGE, PHASE_DISCHARGE):
        raise ConfigError(f"unknown phase {cfg['phase']!r}")
    if cfg["depth"] < 1:
        raise ConfigError("depth must be >= 1")
    if not cfg["models"]:
        raise ConfigError("at least one model must be requested")
    for name in cfg["models"]:
        if name not in MODEL_NAMES:
            raise ConfigError(f"unknown model {name!r} (choose from {MODEL_NAMES})")
    fractions = cfg["split"].get("fractions", [0.8, 0.05, 0.15])
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ConfigError("split.fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split.fractions must sum to 1, got {sum(fractions)}")
    cfg["split"] = {
        "fractions": [float(f) for f in fractions],
        "seed": int(cfg["split"].get("seed", 10)),
    }
    cfg["metrics"] = {
        "grid_points": int(cfg["metrics"].get("grid_points", 50)),
        "average": cfg["metrics"].get("average", "event_density"),
    }
    return cfg


def _log(out_dir, message):
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    line = f"[{stamp}] {message}"
    print(line)
    with open(os.path.join(out_dir, "run.log"), "a") as fh:
        fh.write(line + "\n")


def build_model(name, overrides=None, seed=0):
    overrides = dict(overrides or {})
    if name == "cox":
        overrides.setdefault("ridge", 1e-3)
        return CoxRegression(**overrides)
    overrides.setdefault("seed", seed)
    if name == "coxph":
        return NeuralCoxPH(**overrides)
    if name == "coxtime":
        return CoxTime(**overrides)
    if name == "deephit":
        return DeepHit(**overrides)
    if name == "mtlr":
        return Mtlr(**overrides)
    raise ConfigError(f"unknown model {name!r}")


def load_labeled_paths(cfg):
    """Load raw series and attach failure labels; returns per-sample tuples
    ``(sample_id, group, paths, tau, zeta)`` plus the duration unit."""
    ds = cfg["dataset"]
    raw_cfg = RawDatasetConfig(
        format=ds["format"],
        failure_threshold_fraction=float(ds.get("failure_threshold_fraction", 0.8)),
        max_cycles_used=int(ds.get("max_cycles_used", 50)),
        truncation_time_s=ds.get("truncation_time_s"),
    )
    samples = load_cycle_series(ds["root"], raw_cfg)
    labeled = []
    if ds["format"] == "toyota":
        for s in samples:
            tau, zeta = label_failure(
                s.capacity, raw_cfg.failure_threshold_fraction
            )
            labeled.append((s.sample_id, s.group, s.paths, float(tau), int(zeta)))
        unit = "cycles"
    else:
        cutoff = raw_cfg.truncation_time_s
        if cutoff is None:
            cutoff = 2520.0
            raw_cfg = RawDatasetConfig(
                format="nasa",
                failure_threshold_fraction=raw_cfg.failure_threshold_fraction,
                max_cycles_used=raw_cfg.max_cycles_used,
                truncation_time_s=cutoff,
            )
        labels = {
            s.sample_id: label_nasa_cycle(s.paths[PHASE_DISCHARGE], cutoff)
            for s in samples
        }
        cleaned = clean_nasa([s.paths[PHASE_DISCHARGE] for s in samples], raw_cfg)
        kept = {p.sample_id: p for p in cleaned}
        for s in samples:
            if s.sample_id not in kept:
                continue
            tau, zeta = labels[s.sample_id]
            labeled.append(
                (s.sample_id, s.group, {PHASE_DISCHARGE: kept[s.sample_id]},
                 float(tau), int(zeta))
            )
        unit = "seconds"
    if not labeled:
        raise EmptySampleError("no usable samples after cleaning")
    return labeled, unit


def featurize_labeled(labeled, unit, phase, depth):
    """Signature features for each labeled sample at the given depth."""
    ids, rows, taus, zetas, groups = [], [], [], [], {}
    for sample_id, group, paths, tau, zeta in labeled:
        if phase not in paths:
            raise ConfigError(f"sample {sample_id} has no {phase} path")
        rows.append(signature(augment_time(paths[phase]), depth))
        ids.append(sample_id)
        taus.append(tau)
        zetas.append(zeta)
        if group is not None:
            groups[sample_id] = group
    return SurvivalDataset.from_arrays(
        np.vstack(rows), np.array(taus), np.array(zetas), sample_ids=ids,
        duration_unit=unit, group_labels=groups,
    )


def build_dataset(cfg, depth=None):
    ds = cfg["dataset"]
    if ds["format"] == "synthetic":
        syn = ds.get("synthetic", {})
        beta = syn.get("beta")
        dim = int(syn.get("feature_dim", 4))
        if beta is None:
            beta = [1.0] + [0.0] * (dim - 1)
        return generate_synthetic(
            n=int(syn.get("n", 400)),
            feature_dim=dim,
            true_beta=np.asarray(beta, dtype=np.float64),
            censor_rate=float(syn.get("censor_rate", 0.3)),
            seed=int(syn.get("seed", 0)),
        )
    labeled, unit = load_labeled_paths(cfg)
    return featurize_labeled(labeled, unit, cfg["phase"], depth or cfg["depth"])


def _scaled_split(dataset, cfg, seed):
    train, val, test = split(dataset, cfg["split"]["fractions"], seed)
    scaler = StandardScaler().fit(train.X)
    parts = []
    for part in (train, val, test):
        parts.append(SurvivalDataset.from_arrays(
            scaler.transform(part.X), part.durations, part.events,
            sample_ids=part.sample_ids, duration_unit=part.duration_unit,
            group_labels=part.group_labels,
        ))
    return (*parts, scaler)


def _fit_one(name, cfg, seed, train, val):
    model = build_model(name, cfg["model_params"].get(name), seed)
    y_train = make_survival_y(train.durations, train.events)
    y_val = make_survival_y(val.durations, val.events)
    if isinstance(model, CoxRegression):
        model.fit(train.X, y_train)
    else:
        model.fit(train.X, y_train, X_val=val.X, y_val=y_val)
    return model


def _format_row(values):
    out = []
    for v in values:
        out.append(repr(float(v)) if isinstance(v, float) else str(v))
    return ",".join(out)


def run(cfg, out_dir, seed, dump_features=False):
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "models"), exist_ok=True)
    _log(out_dir, f"run start: format={cfg['dataset']['format']} "
                  f"phase={cfg['phase']} depth={cfg['depth']} seed={seed}")
    dataset = build_dataset(cfg)
    _log(out_dir, f"dataset: {len(dataset)} records, "
                  f"{int(dataset.events.sum())} events, "
                  f"feature_dim={dataset.feature_dim}")
    if dump_features:
        with open(os.path.join(out_dir, "features.csv"), "w") as fh:
            write_snapshot(dataset, fh, depth=cfg["depth"])
    train, val, test, scaler = _scaled_split(dataset, cfg, seed)
    np.savez(os.path.join(out_dir, "scaler.npz"),
             mean=scaler.mean_, scale=scaler.scale_)
    results_path = os.path.join(out_dir, "results.csv")
    report_path = os.path.join(out_dir, "report.txt")
    curves_path = os.path.join(out_dir, "curves.csv")
    with open(results_path, "w") as results_fh, \
            open(report_path, "w") as report_fh, \
            open(curves_path, "w") as curves_fh:
        results_fh.write("model,phase,t_auc,c_index,ibs,n_test,seed\n")
        curves_fh.write("time,probability,model,sample_id\n")
        for name in cfg["models"]:
            model = _fit_one(name, cfg, seed, train, val)
            report = evaluate_model(
                model, test, n_grid=cfg["metrics"]["grid_points"],
                average=cfg["metrics"]["average"],
            )
            results_fh.write(_format_row([
                name, cfg["phase"], report.t_auc, report.c_index, report.ibs,
                report.n_test, seed,
            ]) + "\n")
            results_fh.flush()
            report_fh.write(report.as_text(model=name, phase=cfg["phase"],
                                           seed=seed))
            report_fh.write("\n")
            grid_times = report.eval_grid.cut_points
            surv = model.predict_survival(test.X, grid_times)
            for rid, row in zip(test.sample_ids, surv):
                for t, p in zip(grid_times, row):
                    curves_fh.write(_format_row([float(t), float(p), name, rid]) + "\n")
            save_model(model, os.path.join(out_dir, "models", f"{name}.npz"))
            _log(out_dir, f"{name}: t_auc={report.t_auc:.4f} "
                          f"c_index={report.c_index:.4f} ibs={report.ibs:.4f}")
    _log(out_dir, "run complete")
    return 0


def sweep_depth(cfg, out_dir, seed, depths=None):
    os.makedirs(out_dir, exist_ok=True)
    depths = depths or cfg["sweep"].get("depths")
    if not depths:
        raise ConfigError("sweep.depths missing from config")
    if cfg["dataset"]["format"] == "synthetic":
        raise ConfigError("depth sweep needs a path-based dataset, not synthetic")
    _log(out_dir, f"depth sweep over {list(depths)}")
    labeled, unit = load_labeled_paths(cfg)
    path = os.path.join(out_dir, "sweep_depth.csv")
    with open(path, "w") as fh:
        fh.write("depth,feature_dim,model,t_auc,c_index,ibs,n_test,seed\n")
        for depth in depths:
            dataset = featurize_labeled(labeled, unit, cfg["phase"], int(depth))
            assert dataset.feature_dim == signature_dim(int(depth), 2)
            train, val, test, _ = _scaled_split(dataset, cfg, seed)
            for name in cfg["models"]:
                model = _fit_one(name, cfg, seed, train, val)
                report = evaluate_model(
                    model, test, n_grid=cfg["metrics"]["grid_points"],
                    average=cfg["metrics"]["average"],
                )
                fh.write(_format_row([
                    int(depth), dataset.feature_dim, name, report.t_auc,
                    report.c_index, report.ibs, report.n_test, seed,
                ]) + "\n")
                fh.flush()
                _log(out_dir, f"depth={depth} {name}: c_index={report.c_index:.4f}")
    _log(out_dir, "depth sweep complete")
    return 0


def sweep_fraction(cfg, out_dir, seed, fractions=None):
    os.makedirs(out_dir, exist_ok=True)
    fractions = fractions or cfg["sweep"].get("fractions")
    if not fractions:
        raise ConfigError("sweep.fractions missing from config")
    fractions = [float(f) for f in fractions]
    if any(not 0 < f <= 1 for f in fractions) or fractions != sorted(fractions):
        raise ConfigError("sweep.fractions must be sorted values in (0, 1]")
    _log(out_dir, f"fraction sweep over {fractions}")
    dataset = build_dataset(cfg)
    # test and validation splits stay frozen so the legs are comparable
    train_full, val, test = split(dataset, cfg["split"]["fractions"], seed)
    c_index_by = {}
    path = os.path.join(out_dir, "sweep_fraction.csv")
    with open(path, "w") as fh:
        fh.write("fraction,model,t_auc,c_index,ibs,n_train,n_test,seed\n")
        for fraction in fractions:
            train = subsample_fraction(train_full, fraction, seed)
            scaler = StandardScaler().fit(train.X)
            scaled = []
            for part in (train, val, test):
                scaled.append(SurvivalDataset.from_arrays(
                    scaler.transform(part.X), part.durations, part.events,
                    sample_ids=part.sample_ids, duration_unit=part.duration_unit,
                ))
            s_train, s_val, s_test = scaled
            for name in cfg["models"]:
                model = _fit_one(name, cfg, seed, s_train, s_val)
                report = evaluate_model(
                    model, s_test, n_grid=cfg["metrics"]["grid_points"],
                    average=cfg["metrics"]["average"],
                )
                fh.write(_format_row([
                    float(fraction), name, report.t_auc, report.c_index,
                    report.ibs, len(s_train), report.n_test, seed,
                ]) + "\n")
                fh.flush()
                c_index_by[(name, fraction)] = report.c_index
                _log(out_dir, f"fraction={fraction} {name}: "
                              f"c_index={report.c_index:.4f}")
    notes_path = os.path.join(out_dir, "notes.txt")
    with open(notes_path, "w") as fh:
        lo, hi = fractions[0], fractions[-1]
        for name in cfg["models"]:
            if (name, lo) in c_index_by and (name, hi) in c_index_by:
                if c_index_by[(name, hi)] >= c_index_by[(name, lo)]:
                    fh.write(f"{name}: c_index at fraction {hi} >= fraction {lo} "
                             "(improves with more data)\n")
                else:
                    fh.write(f"{name}: c_index at fraction {hi} < fraction {lo}\n")
    _log(out_dir, "fraction sweep complete")
    return 0


def _read_feature_file(path):
    if not os.path.exists(path):
        raise MissingFileError(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise EmptySampleError(f"{path}: no feature rows")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if header[0] != "sample_id":
        raise MalformedRowError(path, 1, "first column must be sample_id")
    x_start = 3 if header[1:3] == ["tau", "zeta"] else 1
    ids = [r[0] for r in rows]
    X = np.array([[float(v) for v in r[x_start:]] for r in rows])
    return ids, X


def predict_cmd(model_path, features_path, out_dir, times=None, scaler_path=None):
    os.makedirs(out_dir, exist_ok=True)
    model = load_model(model_path)
    ids, X = _read_feature_file(features_path)
    if scaler_path is None:
        sibling = os.path.join(os.path.dirname(model_path) or ".", "..", "scaler.npz")
        sibling = os.path.normpath(sibling)
        scaler_path = sibling if os.path.exists(sibling) else None
    if scaler_path:
        blob = np.load(scaler_path)
        if blob["mean"].shape[0] != X.shape[1]:
            raise ShapeMismatchError(
                f"feature file has {X.shape[1]} columns but the scaler expects "
                f"{blob['mean'].shape[0]}"
            )
        X = (X - blob["mean"]) / blob["scale"]
    if X.shape[1] != model.n_features_in_:
        raise ShapeMismatchError(
            f"feature file has {X.shape[1]} columns but the model expects "
            f"{model.n_features_in_}"
        )
    if times is None:
        eval_times = np.asarray(model._native_times(), dtype=np.float64)
    else:
        eval_times = np.asarray(sorted(set(times)), dtype=np.float64)
    surv = model.predict_survival(X, eval_times)
    path = os.path.join(out_dir, "curves.csv")
    with open(path, "w") as fh:
        fh.write("time,probability,model,sample_id\n")
        tag = type(model).__name__
        for rid, row in zip(ids, surv):
            for t, p in zip(eval_times, row):
                fh.write(_format_row([float(t), float(p), tag, rid]) + "\n")
    print(f"wrote {path}")
    return 0


def selftest():
    """Condensed oracle suites; exits nonzero when any check fails."""
    failures = 0
    rng = np.random.default_rng(42)

    worst = 0.0
    for _ in range(20):
        n_pts = int(rng.integers(3, 12))
        pts = np.cumsum(rng.uniform(-1, 1, size=(n_pts, 2)), axis=0)
        sig = signature(pts, 3)
        ref = oracles.signature_by_quadrature(pts, 3, n_sub=600)
        scale = np.maximum(np.abs(ref), 1e-6)
        worst = max(worst, float(np.max(np.abs(sig - ref) / scale)))
    ok = worst < 1e-6
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] signature quadrature oracle "
          f"(max rel err {worst:.2e})")

    worst = 0.0
    for _ in range(20):
        n_pts = int(rng.integers(4, 12))
        pts = np.cumsum(rng.uniform(-1, 1, size=(n_pts, 2)), axis=0)
        cut = int(rng.integers(1, n_pts - 1))
        whole = signature(pts, 4)
        left = _signature_levels(pts[: cut + 1], 4)
        right = _signature_levels(pts[cut:], 4)
        combined = np.concatenate(chen_product(left, right, 4))
        worst = max(worst, float(np.max(np.abs(whole - combined))))
    ok = worst < 1e-10
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] Chen split consistency "
          f"(max abs err {worst:.2e})")

    worst = 0.0
    for rep in range(5):
        n = int(rng.integers(10, 40))
        durations = rng.uniform(1, 10, size=n)
        events = (rng.random(n) < 0.7).astype(int)
        events[rng.integers(0, n)] = 1
        data = SurvivalDataset.from_arrays(
            rng.standard_normal((n, 2)), durations, events
        )
        mesh = np.unique(np.concatenate([durations, rng.uniform(1, 10, size=8)]))
        curves = [
            SurvivalCurve(mesh, np.minimum.accumulate(
                np.clip(rng.uniform(0.3, 1.0, size=mesh.size), 0, 1)))
            for _ in range(n)
        ]
        grid = TimeGrid(np.linspace(durations.min(), durations.max() - 1e-9, 8))
        km_c = km_estimate(data, censoring_distribution=True)
        try:
            a = c_index(data, curves)
            b = oracles.naive_c_index(durations, events, curves)
            worst = max(worst, abs(a - b))
            a = t_auc(data, curves, grid, km_c)
            b = oracles.naive_t_auc(durations, events, curves, grid.cut_points)
            worst = max(worst, abs(a - b))
            a = ibs(data, curves, grid, km_c)
            b = oracles.naive_ibs(durations, events, curves, grid.cut_points)
            worst = max(worst, abs(a - b))
        except (NoComparablePairsError, DegenerateTimeError):
            continue
    ok = worst < 1e-12
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] metric brute-force equivalence "
          f"(max abs err {worst:.2e})")

    n = 20
    data = generate_synthetic(n, 3, np.array([1.0, -0.5, 0.0]), 0.3, seed=5)
    X, durations, events = data.X, data.durations, data.events
    spec = MlpSpec(input_dim=3, hidden_layers=(8,), output_dim=1,
                   batch_norm=False, dropout_rate=0.0)
    net = Mlp(spec, seed=1)

    def coxph_closure():
        from .models import cox_partial_loss
        g = net.forward(X)
        loss, dg = cox_partial_loss(g.ravel(), durations, events)
        net.backward(dg.reshape(-1, 1))
        return loss, net.grads()

    err = grad_check(net.parameters(), coxph_closure)
    ok = err < 1e-4
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] CoxPH gradient check (max rel {err:.2e})")

    grid = make_grid(durations, 5)
    theta = np.random.default_rng(2).standard_normal((5, 3)) * 0.1

    def mtlr_closure():
        loss, dtheta = mtlr_loss(theta, X, durations, events, grid, 0.01, 0.01)
        return loss, [dtheta]

    err = grad_check([theta], mtlr_closure)
    ok = err < 1e-4
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] MTLR gradient check (max rel {err:.2e})")

    net2 = Mlp(MlpSpec(input_dim=3, hidden_layers=(8,), output_dim=len(grid) + 1,
                       batch_norm=False, dropout_rate=0.0), seed=3)
    bins = np.searchsorted(grid.cut_points, durations, side="left")
    bins = np.minimum(bins, len(grid) - 1)

    def deephit_closure():
        logits = net2.forward(X)
        loss, dlogits = deephit_loss(logits, bins, events, 0.4, 0.2, durations)
        net2.backward(dlogits)
        return loss, net2.grads()

    err = grad_check(net2.parameters(), deephit_closure)
    ok = err < 1e-4
    failures += not ok
    print(f"[{'PASS' if ok else 'FAIL'}] DeepHit gradient check (max rel {err:.2e})")

    return 0 if failures == 0 else 4


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="batsurv",
        description="Battery failure-free probability experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd in ("run", "sweep-depth", "sweep-fraction"):
        p = sub.add_parser(cmd)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if cmd == "run":
            p.add_argument("--dump-features", action="store_true",
                           help="also write the feature matrix as CSV")

    p = sub.add_parser("predict")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--times", default=None,
                   help="comma-separated evaluation times")
    p.add_argument("--scaler", default=None)

    sub.add_parser("selftest")

    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            return selftest()
        if args.command == "predict":
            times = None
            if args.times:
                times = [float(v) for v in args.times.split(",")]
            return predict_cmd(args.model, args.features, args.out,
                               times=times, scaler_path=args.scaler)
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg["split"]["seed"]
        out_dir = args.out or cfg["output_dir"]
        if args.command == "run":
            return run(cfg, out_dir, seed, dump_features=args.dump_features)
        if args.command == "sweep-depth":
            return sweep_depth(cfg, out_dir, seed)
        if args.command == "sweep-fraction":
            return sweep_fraction(cfg, out_dir, seed)
        raise ConfigError(f"unknown command {args.command}")
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except BatsurvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
