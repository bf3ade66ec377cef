"""Command-line entry point: ``nkdcd {generate,train,infer,eval,baseline,heatmap}``.

Exit codes: 0 success, 1 numeric failure (divergence, undefined metric,
integration blow-up), 2 I/O or validation failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy import stats

from . import io, presets
from .baseline import BaselineConfig, fit_var
from .datagen import IntegrationError, Lorenz96Spec, Var3Spec, generate_lorenz96, generate_var
from .inference import UndefinedMetricError, evaluate, score_gc, threshold_adjacency
from .optim import DivergedError, TrainConfig, train

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _need(path: Optional[str], what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}")
    return p


def _out_path(path: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.is_dir():
        raise CliError(f"output directory does not exist: {p.parent}")
    return p


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    if args.kind == "var3":
        spec = Var3Spec(n=args.n or 10, T=args.t, seed=args.seed,
                        noise_std=0.1 if args.noise is None else args.noise)
        data = generate_var(spec)
    else:
        spec = Lorenz96Spec(n=args.n or 20, F=args.f, T=args.t, seed=args.seed,
                            substeps=args.substeps,
                            obs_noise=0.0 if args.noise is None else args.noise)
        data = generate_lorenz96(spec)
    out = _out_path(args.out)
    truth_out = _out_path(args.truth_out or str(out.with_suffix("")) + ".truth.csv")
    io.write_dataset(out, data)
    io.write_int_matrix(truth_out, data.truth)
    params = ", ".join(f"{k}={v}" for k, v in data.metadata.items() if k not in ("n", "T"))
    print(f"wrote {out} (T={data.T}, n={data.n}; {params})")
    print(f"wrote {truth_out} ({int(data.truth.sum())} causal pairs)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def load_train_config(path: Optional[str], preset: Optional[str], overrides: dict):
    """Merge preset, config file and overrides; return ``(TrainConfig, standardize)``."""
    d = presets.get(preset) if preset else {}
    if path:
        d.update(io.read_config_file(_need(path, "config file")))
    d.update({k: v for k, v in overrides.items() if v is not None})
    standardize = d.pop("standardize", None)
    cfg = TrainConfig.from_dict(d)
    if standardize is None:
        standardize = cfg.activation != "linear"
    return cfg, bool(standardize)


def _standardize(values: np.ndarray):
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    scale[scale == 0] = 1.0
    return (values - mean) / scale, mean, scale


def _train_one(x, cfg: TrainConfig, log_every: int, label: str):
    def on_epoch(epoch, bd):
        if log_every and epoch % log_every == 0:
            print(f"{label}epoch {epoch}: j1={bd.j1:.6g} penalty={bd.penalty:.6g} "
                  f"avg_j1={bd.average_j1(x.shape[1], x.shape[0]):.6g}", flush=True)

    start = time.perf_counter()
    model, report = train(x, cfg, on_epoch=on_epoch)
    return model, report, time.perf_counter() - start


def _seed_job(job):
    x, cfg_dict, log_every, label = job
    cfg = TrainConfig.from_dict(cfg_dict)
    try:
        model, report, wall = _train_one(x, cfg, log_every, label)
    except DivergedError as exc:
        return None, str(exc)
    return (model, report, wall), None


def _seed_path(out: Path, seed: int) -> Path:
    return out.with_name(f"{out.stem}.seed{seed}{out.suffix}")


def mean_ci(values: List[float], level: float = 0.95):
    """Mean and half-width of the Student-t interval."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    half = stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / np.sqrt(v.size)
    return float(v.mean()), float(half)


def cmd_train(args) -> int:
    data = io.read_dataset(_need(args.data, "data file"))
    truth = io.read_truth(_need(args.truth, "truth file")) if args.truth else None
    overrides = {"max_epochs": args.max_epochs, "seed": args.seed}
    cfg, standardize = load_train_config(args.config, args.preset, overrides)
    if args.standardize is not None:
        standardize = args.standardize
    x = data.values
    stats_ = None
    if standardize:
        x, mean, scale = _standardize(x)
        stats_ = (mean, scale)
    out = _out_path(args.out_checkpoint)

    seeds = [cfg.seed + k for k in range(args.seeds)]
    jobs = []
    for s in seeds:
        d = cfg.to_dict()
        d["seed"] = s
        jobs.append((x, d, args.log_every, f"[seed {s}] " if len(seeds) > 1 else ""))
    if len(jobs) == 1:
        results = [_seed_job(jobs[0])]
    else:
        workers = max(1, min(len(jobs), int(os.environ.get("NKDCD_THREADS", os.cpu_count() or 1))))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_job, jobs))

    failed = [(s, err) for s, (res, err) in zip(seeds, results) if err]
    aurocs, auprs = [], []
    for s, (res, err) in zip(seeds, results):
        if err:
            print(f"seed {s}: {err}", file=sys.stderr)
            continue
        model, report, wall = res
        run_cfg = TrainConfig.from_dict(dict(cfg.to_dict(), seed=s))
        path = out if len(seeds) == 1 else _seed_path(out, s)
        ckpt = io.checkpoint_dict(model, run_cfg, report, stats_, _dataset_meta(data, standardize))
        io.write_json(path, ckpt)
        print(f"seed {s}: stopped after {report.epochs} epochs ({report.stop_reason}); "
              f"wrote {path}")
        if truth is not None:
            m = evaluate(score_gc(model.lags), truth, run_cfg.epsilon, not args.exclude_self)
            aurocs.append(m.auroc)
            auprs.append(m.aupr)
            print(f"seed {s}: auroc={m.auroc:.4f} aupr={m.aupr:.4f}")
            if args.results:
                rpath = Path(args.results) if len(seeds) == 1 else _seed_path(Path(args.results), s)
                io.write_json(rpath, io.results_dict(m, run_cfg.to_dict(),
                                                     _dataset_meta(data, standardize), wall))
    if len(aurocs) > 1:
        m, h = mean_ci(aurocs)
        pm, ph = mean_ci(auprs)
        print(f"auroc {m:.4f} +/- {h:.4f}, aupr {pm:.4f} +/- {ph:.4f} over {len(aurocs)} seeds")
    if failed:
        raise CliError(f"{len(failed)} of {len(seeds)} runs diverged", EXIT_NUMERIC)
    return EXIT_OK


def _dataset_meta(data, standardized: bool) -> dict:
    d = {k: v for k, v in data.metadata.items() if k != "columns"}
    d.update({"T": data.T, "n": data.n, "standardized": standardized})
    return d


# ---------------------------------------------------------------------------
# infer / eval


def _scores_from_checkpoint(path: str):
    kind, model, cfg, raw = io.load_checkpoint(_need(path, "checkpoint"))
    return score_gc(model.lags), cfg, raw


def cmd_infer(args) -> int:
    scores, cfg, _ = _scores_from_checkpoint(args.checkpoint)
    eps = getattr(cfg, "epsilon", 0.0) if args.epsilon is None else args.epsilon
    adj = threshold_adjacency(scores, eps)
    out = _out_path(args.out)
    io.write_int_matrix(out, adj)
    if args.scores_out:
        io.write_float_matrix(_out_path(args.scores_out), scores.scores)
    print(f"wrote {out}: {int(adj.sum())} edges at epsilon={eps}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if bool(args.scores) == bool(args.checkpoint):
        raise CliError("give exactly one of --scores or --checkpoint")
    start = time.perf_counter()
    cfg_dict, meta = {}, {}
    if args.scores:
        scores, _ = io.read_matrix_csv(_need(args.scores, "scores file"), allow_header=False)
        eps = 0.0 if args.epsilon is None else args.epsilon
    else:
        gc, cfg, raw = _scores_from_checkpoint(args.checkpoint)
        scores, cfg_dict, meta = gc.scores, cfg.to_dict(), raw.get("dataset", {})
        eps = getattr(cfg, "epsilon", 0.0) if args.epsilon is None else args.epsilon
    truth = io.read_truth(_need(args.truth, "truth file"))
    if truth.shape != scores.shape:
        raise CliError(f"truth is {truth.shape} but scores are {scores.shape}")
    m = evaluate(scores, truth, eps, not args.exclude_self)
    res = io.results_dict(m, cfg_dict, meta, time.perf_counter() - start)
    if args.out:
        io.write_json(_out_path(args.out), res)
    print(f"auroc={m.auroc:.6f} aupr={m.aupr:.6f} edges={int(m.adjacency.sum())}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# baseline / heatmap


def cmd_baseline(args) -> int:
    data = io.read_dataset(_need(args.data, "data file"))
    d = io.read_config_file(_need(args.config, "config file")) if args.config else {}
    cfg = BaselineConfig.from_dict(d)
    start = time.perf_counter()
    model = fit_var(data, cfg)
    wall = time.perf_counter() - start
    meta = _dataset_meta(data, cfg.standardize)
    io.write_json(_out_path(args.out), io.baseline_checkpoint_dict(model, meta))
    print(f"baseline: {model.iterations} iterations, objective={model.objective:.6g}; wrote {args.out}")
    if args.truth:
        truth = io.read_truth(_need(args.truth, "truth file"))
        m = evaluate(score_gc(model.lags), truth, 0.0, not args.exclude_self)
        print(f"auroc={m.auroc:.6f} aupr={m.aupr:.6f}")
        if args.results:
            io.write_json(_out_path(args.results), io.results_dict(m, cfg.to_dict(), meta, wall))
    return EXIT_OK


def cmd_heatmap(args) -> int:
    scores, _, _ = _scores_from_checkpoint(args.checkpoint)
    paths = io.write_heatmaps(scores.per_lag, args.out)
    print(f"wrote {len(paths)} heat maps to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nkdcd", description="Granger-causal discovery with "
                                "Koopman-lifted lag-sparse autoregression.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a benchmark dataset")
    g.add_argument("kind", choices=("var3", "lorenz96"))
    g.add_argument("--n", type=int, help="number of series (var3: 10, lorenz96: 20)")
    g.add_argument("--t", type=int, default=1000, help="number of time steps")
    g.add_argument("--f", type=float, default=10.0, help="Lorenz-96 forcing")
    g.add_argument("--noise", type=float, help="var3 innovation std / lorenz96 observation noise")
    g.add_argument("--substeps", type=int, default=4000, help="RK4 steps per Lorenz-96 sample")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--truth-out")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit an NKDCD model")
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="JSON or YAML training config")
    t.add_argument("--preset", choices=sorted(presets.PRESETS))
    t.add_argument("--out-checkpoint", required=True)
    std = t.add_mutually_exclusive_group()
    std.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    std.add_argument("--no-standardize", dest="standardize", action="store_false")
    t.add_argument("--seeds", type=int, default=1, help="independent initializations to run")
    t.add_argument("--seed", type=int, help="first parameter seed (overrides config)")
    t.add_argument("--max-epochs", type=int)
    t.add_argument("--log-every", type=int, default=10, help="print the loss every k epochs (0: never)")
    t.add_argument("--truth", help="score each run against this truth file")
    t.add_argument("--results", help="results JSON path (needs --truth)")
    t.add_argument("--exclude-self", action="store_true")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="threshold a checkpoint into an adjacency matrix")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--epsilon", type=float)
    i.add_argument("--out", required=True)
    i.add_argument("--scores-out")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", help="AUROC/AUPR against a truth matrix")
    e.add_argument("--scores")
    e.add_argument("--checkpoint")
    e.add_argument("--truth", required=True)
    e.add_argument("--epsilon", type=float)
    sel = e.add_mutually_exclusive_group()
    sel.add_argument("--include-self", dest="exclude_self", action="store_false", default=False)
    sel.add_argument("--exclude-self", dest="exclude_self", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("baseline", help="fit the linear VAR group-lasso baseline")
    b.add_argument("--data", required=True)
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--truth")
    b.add_argument("--results")
    b.add_argument("--exclude-self", action="store_true")
    b.set_defaults(func=cmd_baseline)

    h = sub.add_parser("heatmap", help="SVG heat maps of per-lag block norms")
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--out", required=True, help="output directory")
    h.set_defaults(func=cmd_heatmap)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DivergedError, UndefinedMetricError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
