"""Command-line front end.

Commands: synth, preprocess, train, crossval, predict, explain, pick. Each
accepts --config (JSON RunConfig), --seed, and --out; flag values override
the file, which overrides defaults. Every command writes the fully resolved
configuration (`run_config.json`) next to its outputs and exits nonzero with
a descriptive message when anything fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from .config import RunConfig
from .evaluation import compare_models, format_comparison, nested_cv, write_cv_report
from .explain import (
    explain_instance,
    fit_discretizer,
    model_predictor,
    sample_pool,
    submodular_pick,
)
from .net import load_checkpoint, predict, save_checkpoint, train
from .pipeline import apply_scaler, build_dataset, fit_scaler, load_dataset, partition, save_dataset
from .records import load_records, save_records
from .svg import loss_curve_svg, weight_bars_svg
from .synth import generate_synthetic


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    return p


def _resolve(args) -> tuple[RunConfig, Path]:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _finish(cfg: RunConfig, out: Path, written: list[Path]) -> None:
    cfg.write_json(out / "run_config.json")
    missing = [str(p) for p in written if not p.exists()]
    if missing:
        raise RuntimeError(f"expected outputs were not written: {missing}")
    for p in written:
        print(f"wrote {p}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> None:
    cfg, out = _resolve(args)
    if args.clients is not None:
        cfg = replace(cfg, synth=replace(cfg.synth, n_clients=args.clients))
    rs = generate_synthetic(cfg.synth, seed=cfg.seed)
    save_records(rs, out, cfg.schema())
    print(f"{len(rs.clients)} clients, {len(rs.events)} events, data_end {rs.data_end}")
    _finish(cfg, out, [out / "clients.csv", out / "events.csv", out / "meta.json"])


def cmd_preprocess(args) -> None:
    cfg, out = _resolve(args)
    schema = cfg.schema()
    rs = load_records(cfg.data_dir if args.data is None else args.data, schema)
    ds = build_dataset(rs, schema, cfg.horizon_days, cfg.window_days)
    path = out / "dataset.csv"
    save_dataset(ds, path)
    print(f"{len(ds)} examples, positive rate {ds.positive_rate:.4f}")
    _finish(cfg, out, [path, path.with_suffix(".json")])


def _load_raw_dataset(args, cfg: RunConfig, out: Path):
    path = Path(args.dataset) if args.dataset else out / "dataset.csv"
    if not path.exists():
        raise FileNotFoundError(f"{path}: dataset not found (run `preprocess` first?)")
    return load_dataset(path)


def cmd_train(args) -> None:
    cfg, out = _resolve(args)
    ds = _load_raw_dataset(args, cfg, out)
    train_raw, val_raw, test_raw = partition(ds, 1)
    scaler = fit_scaler(train_raw)
    tr, va = apply_scaler(scaler, train_raw), apply_scaler(scaler, val_raw)

    params, report = train(cfg.model, tr, va)
    ck = out / "checkpoint.json"
    save_checkpoint(ck, params, cfg.model, ds.schema, scaler, report)
    load_checkpoint(ck, schema=ds.schema)  # round-trip validation

    report_path = out / "train_report.csv"
    with open(report_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tl, vl) in enumerate(zip(report.train_losses, report.val_losses), 1):
            w.writerow([i, repr(tl), repr(vl)])
    curve_path = out / "loss_curve.svg"
    curve_path.write_text(loss_curve_svg(report.train_losses, report.val_losses))

    probs, labels = predict(params, apply_scaler(scaler, test_raw), cfg.model.threshold)
    correct = int((labels == test_raw.y).sum())
    print(
        f"stopped at epoch {report.stopped_epoch} (best {report.best_epoch}); "
        f"holdout step accuracy {correct}/{len(test_raw)}"
    )
    _finish(cfg, out, [ck, report_path, curve_path])


def cmd_crossval(args) -> None:
    cfg, out = _resolve(args)
    ds = _load_raw_dataset(args, cfg, out)
    if args.compare:
        results = compare_models(ds, cfg.model, cfg.folds)
    else:
        results = {f"rnn_mlp_{cfg.model.loss}": nested_cv(ds, cfg.model, cfg.folds)}
    path = out / "cv_report.csv"
    write_cv_report(results, path)
    print(format_comparison(results))
    _finish(cfg, out, [path])


def cmd_predict(args) -> None:
    cfg, out = _resolve(args)
    ds = _load_raw_dataset(args, cfg, out)
    params, mcfg, _, scaler, _ = load_checkpoint(args.checkpoint, schema=ds.schema)
    X = scaler.transform(ds.X) if scaler is not None else ds.X
    probs, labels = predict(params, X, mcfg.threshold)
    path = out / "predictions.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ClientID", "Date", "probability", "label", "y"])
        for ex, p, lab in zip(ds.examples, probs, labels):
            w.writerow([ex.client_id, ex.date.isoformat(), repr(float(p)), int(lab), ex.y])
    print(f"{int(labels.sum())}/{len(ds)} predicted positive at threshold {mcfg.threshold}")
    _finish(cfg, out, [path])


def _lime_cfg(args, cfg: RunConfig):
    lime = cfg.lime
    if args.samples is not None:
        lime = replace(lime, n_samples=args.samples)
    return lime


def cmd_explain(args) -> None:
    cfg, out = _resolve(args)
    ds = _load_raw_dataset(args, cfg, out)
    params, _, _, scaler, _ = load_checkpoint(args.checkpoint, schema=ds.schema)
    disc = fit_discretizer(ds, ds.schema)
    predict_fn = model_predictor(params, scaler)

    if args.client is not None:
        if args.date is None:
            raise ValueError("--client requires --date YYYY-MM-DD")
        want = (args.client, date.fromisoformat(args.date))
        matches = [e for e in ds.examples if (e.client_id, e.date) == want]
        if not matches:
            raise ValueError(f"no example for client {want[0]} on {want[1]}")
        ex = matches[0]
    else:
        if not 0 <= args.index < len(ds):
            raise ValueError(f"--index {args.index} outside [0, {len(ds)})")
        ex = ds.examples[args.index]

    e = explain_instance(
        predict_fn, ex.x, disc, _lime_cfg(args, cfg),
        client_id=str(ex.client_id), date=ex.date,
    )
    stem = f"explanation_{ex.client_id}_{ex.date.isoformat()}"
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(e.to_dict(), indent=2) + "\n")
    svg_path = out / f"{stem}.svg"
    svg_path.write_text(
        weight_bars_svg(e.entries, title=f"Client {ex.client_id} @ {ex.date} "
                                         f"(p={e.predicted_probability:.3f})")
    )
    print(f"p={e.predicted_probability:.4f}, fidelity R^2={e.local_fidelity_r2:.3f}, "
          f"{e.runtime_seconds:.2f}s")
    for stmt, wgt in e.entries:
        print(f"  {wgt:+.4f}  {stmt}")
    _finish(cfg, out, [json_path, svg_path])


def cmd_pick(args) -> None:
    cfg, out = _resolve(args)
    ds = _load_raw_dataset(args, cfg, out)
    params, _, _, scaler, _ = load_checkpoint(args.checkpoint, schema=ds.schema)
    disc = fit_discretizer(ds, ds.schema)
    predict_fn = model_predictor(params, scaler)

    pool = sample_pool(ds.examples, fraction=args.fraction, cap=args.cap, seed=cfg.seed)
    g = submodular_pick(predict_fn, pool, args.budget, disc, _lime_cfg(args, cfg))
    json_path = out / "global_explanation.json"
    json_path.write_text(json.dumps(g.to_dict(), indent=2) + "\n")
    svg_path = out / "global_explanation.svg"
    svg_path.write_text(weight_bars_svg(g.entries, title="Global explanation (submodular pick)"))
    print(f"picked {len(g.picked_instance_ids)} of {len(pool)} pooled instances; "
          f"coverage {g.coverage:.3f} / {g.total_importance:.3f}")
    for stmt, wgt in g.entries[:10]:
        print(f"  {wgt:+.4f}  {stmt}")
    _finish(cfg, out, [json_path, svg_path])


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    p = argparse.ArgumentParser(
        prog="shelterrisk",
        description="Forecast chronic homelessness risk from shelter service records.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate synthetic records")
    s.add_argument("--clients", type=int, help="override synth.n_clients")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("preprocess", parents=[common], help="records -> labeled dataset")
    s.add_argument("--data", metavar="DIR", help="records directory (default: config data_dir)")
    s.set_defaults(fn=cmd_preprocess)

    s = sub.add_parser("train", parents=[common], help="train on the most recent fold")
    s.add_argument("--dataset", metavar="PATH", help="dataset CSV (default: OUT/dataset.csv)")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("crossval", parents=[common], help="nested rolling-origin CV")
    s.add_argument("--dataset", metavar="PATH")
    s.add_argument("--compare", action="store_true",
                   help="also run the BCE variants and the logistic baseline")
    s.set_defaults(fn=cmd_crossval)

    s = sub.add_parser("predict", parents=[common], help="score a dataset with a checkpoint")
    s.add_argument("--checkpoint", required=True, metavar="PATH")
    s.add_argument("--dataset", metavar="PATH")
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("explain", parents=[common], help="LIME explanation for one example")
    s.add_argument("--checkpoint", required=True, metavar="PATH")
    s.add_argument("--dataset", metavar="PATH")
    s.add_argument("--client", type=int, help="client id (with --date)")
    s.add_argument("--date", help="example date YYYY-MM-DD")
    s.add_argument("--index", type=int, default=0, help="example index (default 0)")
    s.add_argument("--samples", type=int, help="LIME sample size (e.g. 40000)")
    s.set_defaults(fn=cmd_explain)

    s = sub.add_parser("pick", parents=[common], help="submodular-pick global explanation")
    s.add_argument("--checkpoint", required=True, metavar="PATH")
    s.add_argument("--dataset", metavar="PATH")
    s.add_argument("--budget", type=int, default=15, help="explanations to pick (default 15)")
    s.add_argument("--fraction", type=float, default=0.2, help="pool fraction (default 0.2)")
    s.add_argument("--cap", type=int, default=300, help="pool size cap (default 300)")
    s.add_argument("--samples", type=int, help="LIME sample size per explanation")
    s.set_defaults(fn=cmd_pick)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
