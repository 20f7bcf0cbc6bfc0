"""Command-line surface tying the pipeline together.

Subcommands: ``quantify``, ``train``, ``evaluate``, ``ablate``,
``synth``, ``export-plots``.  Exit codes: 0 success, 2 user error
(bad config, missing files, parse failures), 3 numerical failure
(training divergence).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dsiq, ingest, synth, train_eval
from .core import Source, chronological_split, make_windows, training_cutoff
from .errors import ConfigError, DivergenceError, NumericsError, SideError

USER_ERROR = 2
NUMERIC_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="side", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_common(p):
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--backend", choices=cfgmod.BACKENDS, default=None)
        p.add_argument("--state", choices=cfgmod.STATES, default=None)
        return p

    with_common(sub.add_parser("quantify", help="text -> weekly impact distributions"))
    with_common(sub.add_parser("train", help="fit the joint forecaster"))
    with_common(sub.add_parser("evaluate", help="metrics on the test split"))
    with_common(sub.add_parser("ablate", help="train/evaluate all four variants"))

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--weeks", type=int, default=330)
    sp.add_argument("--amplitude", type=float, default=120.0)
    sp.add_argument("--period", type=float, default=52.0)
    sp.add_argument("--noise", type=float, default=18.0)
    sp.add_argument("--lead", type=int, default=4)
    sp.add_argument("--docs-per-week", type=float, default=10.0)

    ep = sub.add_parser("export-plots", help="plot-ready CSVs from a finished run")
    ep.add_argument("--run", required=True, help="run directory holding predictions")
    ep.add_argument("--state", choices=cfgmod.STATES, default="synth")
    return parser


def _load_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config)
    return cfgmod.apply_overrides(cfg, seed=args.seed, backend=args.backend, state=args.state)


def _require_files(*paths) -> None:
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        raise ConfigError(f"missing input files: {', '.join(missing)}")


def _out_path(cfg: cfgmod.RunConfig, suffix: str) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{cfg.state}_{suffix}"


def _ingest_documents(cfg, series):
    entities = ingest.EntityList.from_file(cfg.entities_path)
    loads = {}
    for path, source in ((cfg.social_path, Source.SOCIAL), (cfg.news_path, Source.NEWS)):
        result = ingest.load_documents(path, source, series)
        loads[source] = ingest.geofilter(result.documents, entities)
    return loads[Source.SOCIAL], loads[Source.NEWS]


def cmd_quantify(cfg: cfgmod.RunConfig) -> int:
    _require_files(cfg.dsci_path, cfg.social_path, cfg.news_path, cfg.entities_path)
    series = ingest.load_severity(cfg.dsci_path)
    social_docs, news_docs = _ingest_documents(cfg, series)

    lexicon = dsiq.load_lexicon(cfg.lexicon_path)
    backend = dsiq.backend_from_env(cfg.backend, lexicon)
    determinants = dsiq.DeterminantSet()
    cutoff = training_cutoff(len(series), cfg.lookback, cfg.horizon, cfg.split)

    models = {}
    for source, docs in (("social", social_docs), ("news", news_docs)):
        fit_docs = [d for d in docs if d.timestep < cutoff]
        models[source] = dsiq.fit_topic_model(
            fit_docs or docs,
            Source(source),
            determinants,
            backend,
            topic_count=cfg.topic_count,
            seed=cfg.seed,
            map_threshold=cfg.map_threshold,
        )

    impacts = dsiq.build_impact_series(
        social_docs, news_docs, len(series), models["social"], models["news"], determinants
    )
    impact_path = _out_path(cfg, "impact.csv")
    dsiq.write_impact_csv(impact_path, impacts)

    topics_path = _out_path(cfg, "topics.csv")
    with open(topics_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("source,cluster_id,determinant,doc_count,keywords\n")
        for source in ("social", "news"):
            for cluster in models[source].clusters:
                name = determinants.names[cluster.determinant_index]
                fh.write(
                    f"{source},{cluster.id},\"{name}\",{len(cluster.member_doc_ids)},"
                    f"{' '.join(cluster.keywords)}\n"
                )
    print(f"wrote {impact_path} and {topics_path}")
    return 0


def _load_windows(cfg: cfgmod.RunConfig):
    _require_files(cfg.dsci_path)
    impact_path = _out_path(cfg, "impact.csv")
    _require_files(impact_path)
    series = ingest.load_severity(cfg.dsci_path)
    impacts = dsiq.read_impact_csv(impact_path)
    if len(impacts) != len(series):
        raise ConfigError(
            f"impact series has {len(impacts)} rows but severity has {len(series)}"
        )
    samples = make_windows(series, impacts, cfg.lookback, cfg.horizon)
    return chronological_split(samples, cfg.split)


def cmd_train(cfg: cfgmod.RunConfig) -> int:
    train_s, val_s, _ = _load_windows(cfg)
    try:
        result = train_eval.train(train_s, val_s, cfg.model_config(), cfg.train_config())
    except DivergenceError as exc:
        if exc.checkpoint is not None:
            fallback = train_eval.TrainResult(
                params=exc.checkpoint,
                model_config=cfg.model_config(),
                train_config=cfg.train_config(),
                standardizer=train_eval.Standardizer.fit(train_s),
                history=exc.history or [],
                best_val_loss=float("nan"),
                best_epoch=0,
            )
            train_eval.save_run_checkpoint(_out_path(cfg, "checkpoint.json"), fallback)
        print(f"training diverged: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    train_eval.save_run_checkpoint(_out_path(cfg, "checkpoint.json"), result)
    train_eval.write_history_csv(_out_path(cfg, "history.csv"), result.history)
    print(
        f"trained {len(result.history)} epochs, best val loss "
        f"{result.best_val_loss:.6f} at epoch {result.best_epoch}"
    )
    return 0


def _write_predictions_csv(path, predictions, lookback: int, delta: int) -> None:
    names = [f"s_{i}" for i in range(1, delta + 1)] + [f"n_{i}" for i in range(1, delta + 1)]
    header = (
        ["start", "step", "timestep", "severity_true", "severity_pred"]
        + [f"true_{n}" for n in names]
        + [f"pred_{n}" for n in names]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        n, horizon = predictions.severity_true.shape
        for i in range(n):
            for step in range(horizon):
                cells = [
                    str(predictions.starts[i]),
                    str(step),
                    str(predictions.starts[i] + lookback + step),
                    repr(float(predictions.severity_true[i, step])),
                    repr(float(predictions.severity_pred[i, step])),
                ]
                cells += [repr(float(v)) for v in predictions.impact_true[i, step]]
                cells += [repr(float(v)) for v in predictions.impact_pred[i, step]]
                fh.write(",".join(cells) + "\n")


def cmd_evaluate(cfg: cfgmod.RunConfig) -> int:
    checkpoint_path = _out_path(cfg, "checkpoint.json")
    _require_files(checkpoint_path)
    train_s, _, test_s = _load_windows(cfg)
    params, model_cfg, _, standardizer = train_eval.load_run_checkpoint(checkpoint_path)

    result = train_eval.evaluate(params, model_cfg, standardizer, test_s)
    reports = {
        model_cfg.ablation: result.report,
        "persistence": train_eval.baseline_persistence(test_s),
        "linear_ar": train_eval.baseline_linear_ar(train_s, test_s),
    }
    train_eval.write_metrics_csv(_out_path(cfg, "metrics.csv"), reports)
    _write_predictions_csv(
        _out_path(cfg, "predictions.csv"),
        result.predictions,
        model_cfg.lookback,
        model_cfg.determinant_count,
    )
    severity = result.report.per_target["severity"]
    print(
        f"severity MAE {severity.mae:.3f} RMSE {severity.rmse:.3f} MFA {severity.mfa:.3f}"
    )
    return 0


def cmd_ablate(cfg: cfgmod.RunConfig) -> int:
    train_s, val_s, test_s = _load_windows(cfg)
    results = train_eval.run_ablation(
        train_s, val_s, test_s, cfg.model_config(), cfg.train_config()
    )
    reports = {variant: res.report for variant, res in results.items()}
    train_eval.write_metrics_csv(_out_path(cfg, "metrics.csv"), reports)
    for variant, res in results.items():
        sev = res.report.per_target["severity"]
        print(f"{variant}: severity MAE {sev.mae:.3f}")
    return 0


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        weeks=args.weeks,
        seasonal_amplitude=args.amplitude,
        seasonal_period=args.period,
        noise_scale=args.noise,
        social_lead=args.lead,
        docs_per_week=args.docs_per_week,
    )
    paths = synth.write_dataset(args.out, spec, args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_export_plots(run_dir, state: str) -> int:
    run = Path(run_dir)
    pred_path = run / f"{state}_predictions.csv"
    if not pred_path.exists():
        raise ConfigError(f"missing evaluation artifact: {pred_path}")

    with open(pred_path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    col = {name: i for i, name in enumerate(header)}

    severity_path = run / f"{state}_plot_severity.csv"
    with open(severity_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("start,step,timestep,actual,predicted\n")
        for cells in rows:
            fh.write(
                ",".join(
                    cells[col[k]]
                    for k in ("start", "step", "timestep", "severity_true", "severity_pred")
                )
                + "\n"
            )

    determinants = dsiq.DeterminantSet()
    bars_path = run / f"{state}_plot_determinants.csv"
    with open(bars_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("source,determinant,predicted,actual\n")
        for source, prefix in (("social", "s"), ("news", "n")):
            for i, name in enumerate(determinants.names, start=1):
                true_col = col[f"true_{prefix}_{i}"]
                pred_col = col[f"pred_{prefix}_{i}"]
                actual = float(np.mean([float(c[true_col]) for c in rows]))
                predicted = float(np.mean([float(c[pred_col]) for c in rows]))
                fh.write(f'{source},"{name}",{predicted!r},{actual!r}\n')
    print(f"wrote {severity_path} and {bars_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "export-plots":
            return cmd_export_plots(args.run, args.state)
        cfg = _load_config(args)
        if args.command == "quantify":
            return cmd_quantify(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (DivergenceError, NumericsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (SideError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
