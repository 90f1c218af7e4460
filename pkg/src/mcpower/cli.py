"""Command-line front end: ``mcpower {ingest,train,predict,evaluate,ablate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric/training failure.
Set ``MCPOWER_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) for log verbosity.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import plots
from .config import PROFILES, ConfigError, RunConfig, load_config
from .data import (
    CHANNELS,
    ColumnMapping,
    DataError,
    FeatureSpec,
    build_features,
    clean,
    load_scada,
    summarize_inputs,
)
from .evaluate import (
    NominalCurve,
    ablation,
    binned_uncertainty,
    improvement_vs_nominal,
    mae,
    method_of_bins,
    nominal_predict,
    power_distribution,
    predict_bins,
    write_csv,
)
from .pipeline import fit, prepare, split_records
from .train import Checkpoint, CheckpointError, TrainingDiverged, load_checkpoint, save_checkpoint
from .uq import McConfig, predictions_frame, summarize

log = logging.getLogger("mcpower")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def load_records(cfg: RunConfig, require_power: bool = True):
    """Load, concatenate, window and clean every configured file.

    Returns ``(records, rejects, counts)``.
    """
    if not cfg.paths:
        raise ConfigError("data.paths", "no dataset files configured")
    frames, rejects = [], []
    for p in cfg.paths:
        res = load_scada(p, cfg.mapping, sep=cfg.sep, row_filter=cfg.row_filter)
        frames.append(res.records.assign(source=p.name))
        rejects.append(res.rejects.assign(file=p.name))
    records = pd.concat(frames, ignore_index=True)
    loaded = len(records)
    if "timestamp" in records.columns:
        if cfg.start:
            records = records[records["timestamp"] >= pd.Timestamp(cfg.start, tz="UTC")]
        if cfg.end:
            records = records[records["timestamp"] < pd.Timestamp(cfg.end, tz="UTC")]
        records = records.sort_values("timestamp", kind="stable")
    windowed = len(records)
    cleaned = clean(records.reset_index(drop=True), require_power=require_power)
    rej = pd.concat(rejects, ignore_index=True)[["file", "row_number", "reason"]]
    counts = {"loaded_rows": loaded, "rejected_rows": len(rej), "rows_in_window": windowed,
              "clean_rows": len(cleaned), "dropped_by_cleaning": windowed - len(cleaned)}
    if cleaned.empty:
        raise DataError("no records left after cleaning")
    return cleaned, rej, counts


def _outdir(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def cmd_ingest(cfg: RunConfig, args) -> int:
    records, rejects, counts = load_records(cfg)
    out = _outdir(cfg)
    summary = summarize_inputs(records)
    write_csv(summary, out / "input_summary.csv")
    write_csv(rejects, out / "rejects.csv")
    _write_json(counts, out / "ingest.json")
    print(f"{counts['clean_rows']} clean rows ({counts['rejected_rows']} rejected, "
          f"{counts['dropped_by_cleaning']} dropped by cleaning)")
    print(summary.to_string(index=False))
    return 0


def _checkpoint_name(cfg: RunConfig) -> str:
    return "vanilla.ckpt" if cfg.train.loss_mode == "mse" else "model.ckpt"


def cmd_train(cfg: RunConfig, args) -> int:
    if args.loss_mode:
        cfg.train = dataclasses.replace(cfg.train, loss_mode=args.loss_mode)
    records, _, _ = load_records(cfg)
    prep = prepare(records, cfg.features, cfg.fractions, cfg.split_mode, cfg.seed)
    fitted = fit(prep, cfg.network, cfg.train)
    out = _outdir(cfg)
    ckpt = Checkpoint(fitted.network, prep.standardizer, cfg.features, cfg.mapping,
                      {"seed": cfg.seed, "epochs": len(fitted.history),
                       "loss_mode": cfg.train.loss_mode})
    path = out / (args.name or _checkpoint_name(cfg))
    save_checkpoint(ckpt, path)
    fitted.history.to_csv(out / (path.stem + "_history.csv"))
    mc = cfg.mc if cfg.train.loss_mode != "mse" else McConfig(passes=1, seed=cfg.seed, mask_mode="off")
    summ = summarize(fitted.network, prep.raw.x_val, mc, prep.standardizer)
    val_mae = mae(prep.raw.y_val, summ.mean)
    print(f"checkpoint: {path}")
    print(f"final validation MAE: {val_mae:.3f} kW")
    return 0


def _predict_mapping(ckpt_mapping: ColumnMapping, header: list[str], spec: FeatureSpec) -> ColumnMapping:
    inv = {v: k for k, v in CHANNELS.items()}
    needed = {inv[c] for c in spec.channels()}
    bound = ckpt_mapping.bound()
    missing = [f"{ch} ({bound.get(ch, 'unmapped')})" for ch in sorted(needed)
               if ch not in bound or bound[ch] not in header]
    if missing:
        raise DataError("input lacks channel(s) needed by the model: " + ", ".join(missing))
    keep = needed | {ch for ch in ("power_avg", "timestamp") if bound.get(ch) in header}
    return ColumnMapping(**{f.name: (bound.get(f.name) if f.name in keep else None)
                            for f in dataclasses.fields(ColumnMapping)})


def cmd_predict(cfg: RunConfig | None, args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    mapping = cfg.mapping if cfg is not None else (ckpt.mapping or ColumnMapping())
    sep = cfg.sep if cfg is not None else args.sep
    seed = args.seed if args.seed is not None else (cfg.seed if cfg is not None else 0)
    base_mc = cfg.mc if cfg is not None else McConfig(seed=seed)
    mc = McConfig(passes=args.passes or base_mc.passes, seed=seed,
                  mask_mode=args.mc_mode or base_mc.mask_mode)
    header = [c.strip() for c in pd.read_csv(args.input, sep=sep, nrows=0).columns]
    mapping = _predict_mapping(mapping, header, ckpt.feature_spec)
    res = load_scada(args.input, mapping, sep=sep,
                     required=[ch for ch in mapping.bound() if ch != "power_avg"])
    records = clean(res.records, require_power=False)
    if records.empty:
        raise DataError("no usable input rows")
    x = build_features(records, ckpt.feature_spec)
    summ = summarize(ckpt.network, x, mc, ckpt.standardizer)
    actual = records["power"].to_numpy() if "power" in records.columns else None
    df = predictions_frame(summ, records["v_bar"], actual, row_id=records["row_number"])
    if args.output:
        dest = Path(args.output)
        dest.parent.mkdir(parents=True, exist_ok=True)
    else:
        out = Path(args.out) if args.out else (cfg.output_dir if cfg is not None else Path("."))
        out.mkdir(parents=True, exist_ok=True)
        dest = out / "predictions.csv"
    write_csv(df, dest)
    print(f"{len(df)} predictions written to {dest}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    out = _outdir(cfg)
    ckpt = load_checkpoint(args.checkpoint or out / "model.ckpt")
    records, _, _ = load_records(cfg)
    prep = prepare(records, ckpt.feature_spec, cfg.fractions, cfg.split_mode, cfg.seed)
    test = split_records(prep, "test")
    train_recs = split_records(prep, "train")
    y = prep.raw.y_test
    ws = test["v_bar"].to_numpy()

    summ = summarize(ckpt.network, prep.raw.x_test, cfg.mc, ckpt.standardizer)
    rows = [("mc_dropout_nn", mae(y, summ.mean))]
    if args.vanilla:
        van = load_checkpoint(args.vanilla)
        xv = build_features(test, van.feature_spec)
        vs = summarize(van.network, xv, McConfig(passes=1, mask_mode="off"), van.standardizer)
        rows.append(("vanilla_nn", mae(y, vs.mean)))
    mob = method_of_bins(train_recs["v_bar"], train_recs["power"], cfg.bin_width)
    rows.append(("method_of_bins", mae(y, predict_bins(mob, ws))))

    nominal_path = Path(args.nominal) if args.nominal else cfg.nominal_curve
    curve = None
    if nominal_path is None:
        log.warning("no nominal curve configured; nominal rows omitted")
    else:
        curve = NominalCurve.from_csv(nominal_path)
        rows.append(("nominal_curve", mae(y, nominal_predict(curve, ws))))
    mae_table = pd.DataFrame(rows, columns=["model", "mae_kw"])

    artifacts = {}
    artifacts["mae_table"] = write_csv(mae_table, out / "mae_table.csv")
    headline = {r[0] + "_mae_kw": r[1] for r in rows}
    improvements = {}
    if curve is not None:
        nominal_mae = dict(rows)["nominal_curve"]
        improvements = {m: improvement_vs_nominal(v, nominal_mae) for m, v in rows if m != "nominal_curve"}
        imp = pd.DataFrame(list(improvements.items()), columns=["model", "improvement_pct"])
        artifacts["improvement"] = write_csv(imp, out / "improvement.csv")
        headline["improvement_pct"] = improvements["mc_dropout_nn"]

    bins = binned_uncertainty(summ, ws, cfg.bin_width)
    artifacts["bin_report"] = write_csv(bins.table, out / "bin_report.csv")
    headline["spearman_freq_vs_epistemic"] = bins.rho if bins.rho_defined else None
    dist = power_distribution(summ.mean, y, cfg.power_bin_kw)
    dist_df = pd.DataFrame({"bin_lo_kw": dist.edges[:-1], "bin_hi_kw": dist.edges[1:],
                            "predicted_fraction": dist.predicted, "actual_fraction": dist.actual})
    artifacts["power_distribution"] = write_csv(dist_df, out / "power_distribution.csv")
    headline["power_tv_distance"] = dist.tv_distance
    artifacts["predictions"] = write_csv(
        predictions_frame(summ, ws, y, row_id=test["row_number"]), out / "test_predictions.csv")

    artifacts["epistemic_svg"] = plots.uncertainty_scatter(
        ws, summ.mean, summ.epistemic_std, out / "epistemic.svg", "epistemic")
    artifacts["aleatoric_svg"] = plots.uncertainty_scatter(
        ws, summ.mean, summ.aleatoric_std, out / "aleatoric.svg", "aleatoric")
    artifacts["bin_report_svg"] = plots.bin_frequency(bins.table, out / "bin_report.svg")
    artifacts["power_distribution_svg"] = plots.power_histograms(dist, out / "power_distribution.svg")
    if curve is not None:
        artifacts["nominal_svg"] = plots.nominal_vs_actual(curve, ws, y, improvements, out / "nominal.svg")

    manifest = {"artifacts": {k: p.name for k, p in artifacts.items()}, "headline": headline,
                "test_rows": int(len(y))}
    _write_json(manifest, out / "evaluation.json")
    print(mae_table.to_string(index=False))
    return 0


def cmd_ablate(cfg: RunConfig, args) -> int:
    if args.sets:
        try:
            sets = [FeatureSpec.parse(s) for s in args.sets]
        except ValueError as exc:
            raise ConfigError("--sets", str(exc)) from None
        labels = [s.label for s in sets]
        if len(set(labels)) != len(labels):
            raise ConfigError("--sets", f"duplicate feature-set labels in {labels}")
    else:
        sets = cfg.ablation_sets
    runs = args.runs or cfg.ablation_runs
    records, _, _ = load_records(cfg)
    report = ablation(records, sets, runs, cfg.network, cfg.train, cfg.mc, cfg.fractions,
                      cfg.split_mode, cfg.seed)
    out = _outdir(cfg)
    write_csv(report.table, out / "ablation.csv")
    plots.ablation_bars(report.table, out / "ablation.svg")
    print(report.table.to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcpower", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="YAML/JSON run config")
        sp.add_argument("--seed", type=int, help="global seed (overrides config)")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--profile", choices=sorted(PROFILES), help="desk: width 64, paper: width 1024")

    common(sub.add_parser("ingest", help="load and clean SCADA data, write input statistics"))
    sp = sub.add_parser("train", help="train a model and write a checkpoint")
    common(sp)
    sp.add_argument("--loss-mode", choices=["heteroscedastic", "mse"])
    sp.add_argument("--name", help="checkpoint file name inside the output directory")
    sp = sub.add_parser("predict", help="MC-dropout predictions for a CSV of inputs")
    common(sp, config_required=False)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", help="prediction CSV path (default: OUT/predictions.csv)")
    sp.add_argument("--passes", type=int, help="number of MC forward passes B")
    sp.add_argument("--mc-mode", choices=["hard", "relaxed", "off"])
    sp.add_argument("--sep", default=",", help="CSV separator when no config is given")
    sp = sub.add_parser("evaluate", help="accuracy and uncertainty reports on the test split")
    common(sp)
    sp.add_argument("--checkpoint", help="default: OUT/model.ckpt")
    sp.add_argument("--vanilla", help="checkpoint trained with --loss-mode mse")
    sp.add_argument("--nominal", help="nominal power curve CSV (speed,power)")
    sp = sub.add_parser("ablate", help="test MAE for several feature sets")
    common(sp)
    sp.add_argument("--sets", nargs="+", help='feature sets, e.g. "WS" "WS,TI"')
    sp.add_argument("--runs", type=int)
    return p


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "ablate": cmd_ablate}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MCPOWER_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config, {"seed": args.seed, "output_dir": args.out,
                                            "profile": args.profile})
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
