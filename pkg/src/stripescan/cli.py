"""Command-line pipeline: synth, features, train-eval, predict, roc-plot.

Exit codes: 0 success, 1 user/data error, 2 internal error. Every run is a
pure function of its config file, inputs, and flags; outputs carry no
timestamps so re-execution is byte-identical.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import features as feat
from .classify import RandomForest, load_model, save_model
from .config import config_fingerprint, load_config, resolved_json
from .errors import DimensionMismatch, IoFailure, StripescanError
from .evaluation import roc_curve, write_roc_csv, write_summary_json
from .fsutil import atomic_write_text
from .imagecore import LABEL_ARTIFACT, detect_fov, extract_slices, quantile_compress, read_image, read_manifest
from .matrix import parse_label, read_feature_csv, read_feature_meta, write_feature_csv
from .pipeline import (
    CLASSIFIER_RF,
    CLASSIFIER_SVM,
    CV_GROUPED5,
    CV_LOPO,
    PreprocessConfig,
    SliceConfig,
    build_feature_matrix,
    run_cv,
)
from .plotting import write_roc_svg
from .synth import generate_dataset

SCORE_HEADER = ["patient_id", "sequence_id", "image_id", "row_start", "label", "score"]


class _UserError(StripescanError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UserError(message)


def _say(args, message):
    if not args.quiet:
        print(message)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _write_resolved(out: Path, cfg, command: str, extras=None) -> str:
    text = resolved_json(cfg, command, extras)
    atomic_write_text(out / "resolved-config.json", text)
    return config_fingerprint(text)


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    manifest = generate_dataset(cfg.synth, out)
    _write_resolved(out, cfg, "synth")
    n_artifact = sum(1 for e in manifest if e.intervals)
    _say(args, f"wrote {len(manifest)} images ({n_artifact} with artifacts) to {out}")
    return 0


def cmd_features(args) -> int:
    cfg = _load_cfg(args)
    manifest_path = Path(args.manifest)
    manifest = read_manifest(manifest_path)
    out = _out_dir(args)
    matrix, report = build_feature_matrix(
        manifest, manifest_path.parent, args.feature,
        pre=cfg.preprocess, slices=cfg.slices,
        hog_cfg=cfg.hog, corr_cfg=cfg.corrangle,
    )
    feature_cfg = cfg.hog if args.feature == feat.KIND_HOG else cfg.corrangle
    meta = {
        "feature_config": feature_cfg.as_dict(),
        "preprocess": cfg.preprocess.as_dict(),
        "slices": cfg.slices.as_dict(),
        "overlap_used": cfg.slices.overlap_for(args.feature),
    }
    csv_path = out / f"features-{args.feature}.csv"
    write_feature_csv(csv_path, matrix, meta)
    _write_resolved(out, cfg, "features", {"feature": args.feature})
    if args.dump_slices:
        from .imagecore import dump_slices
        from .pipeline import process_entry
        dump_dir = Path(args.dump_slices)
        for entry in manifest:
            outcome = process_entry(entry, manifest_path.parent, cfg.preprocess,
                                    cfg.slices.height, cfg.slices.overlap_for(args.feature),
                                    cfg.slices.positive_fraction)
            if outcome.slices:
                dump_slices(outcome.slices, dump_dir)
    for image_id, reason in report.excluded:
        _say(args, f"excluded {image_id}: {reason}")
    for image_id, message in report.failures:
        print(f"failed {image_id}: {message}", file=sys.stderr)
    _say(args, f"wrote {csv_path} ({report.n_slices} slices from {report.n_images} images, "
               f"{report.n_positive} artifact, {len(report.excluded)} excluded, "
               f"{len(report.failures)} failed)")
    return 0


def cmd_train_eval(args) -> int:
    cfg = _load_cfg(args)
    features_path = Path(args.features)
    matrix = read_feature_csv(features_path)
    feature_meta = read_feature_meta(features_path)
    cv_mode = args.cv or cfg.cv.mode
    out = _out_dir(args)

    result = run_cv(matrix, args.classifier, cv_mode, train=cfg.train, k=cfg.cv.k)
    fingerprint = _write_resolved(out, cfg, "train-eval", {
        "classifier": args.classifier, "cv": cv_mode, "features": features_path.name,
    })

    model_meta = {"feature": feature_meta, "classifier": args.classifier, "cv": cv_mode}
    for fold in result.folds:
        save_model(out / f"model_fold{fold.fold}.json", fold.model, model_meta)

    agg = result.aggregate
    write_roc_csv(out / "roc_pooled.csv", agg.pooled)
    write_roc_svg(out / "roc.svg",
                  [(f"{matrix.kind}+{args.classifier} pooled", agg.pooled)],
                  title=f"{matrix.kind} / {args.classifier} / {cv_mode}")
    summary = {
        "feature_kind": matrix.kind,
        "classifier": args.classifier,
        "cv_mode": cv_mode,
        "k": result.assignment.k,
        "pooled_auc": agg.pooled.auc,
        "fold_aucs": agg.fold_aucs,
        "mean_auc": agg.mean_auc,
        "std_auc": agg.std_auc,
        "skipped_folds": agg.skipped_folds,
        "leakage": result.leakage,
        "train_class_counts": {str(f.fold): f.train_counts for f in result.folds},
        "fold_sizes": {str(f.fold): [f.n_train, f.n_test] for f in result.folds},
        "config_fingerprint": fingerprint,
    }
    write_summary_json(out / "summary.json", summary)
    _say(args, f"pooled AUC {agg.pooled.auc:.4f}, per-fold mean {agg.mean_auc:.4f} "
               f"+/- {agg.std_auc:.4f}, leakage {result.leakage}")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_cfg(args)
    model, meta = load_model(args.model)
    feature_meta = meta.get("feature", {})
    kind = feature_meta.get("kind")
    if kind not in (feat.KIND_HOG, feat.KIND_CORRANGLE):
        raise IoFailure(f"model file lacks a usable feature kind (got {kind!r})")

    pre = PreprocessConfig(**feature_meta.get("preprocess", cfg.preprocess.as_dict()))
    slice_meta = feature_meta.get("slices", cfg.slices.as_dict())
    slices_cfg = SliceConfig(**slice_meta)
    overlap = feature_meta.get("overlap_used", slices_cfg.overlap_for(kind))

    raw = read_image(args.image)
    mask = detect_fov(raw, pre.fov_intensity_floor)
    compressed = quantile_compress(raw, pre.q_low, pre.q_high, mask)
    from .imagecore import ManifestEntry
    entry = ManifestEntry(path=str(args.image), patient_id="-", sequence_id="-",
                          image_id=Path(args.image).stem)
    records = extract_slices(compressed, mask, entry, height=slices_cfg.height,
                             overlap=overlap,
                             positive_fraction=slices_cfg.positive_fraction)

    if kind == feat.KIND_HOG:
        fcfg = feat.HogConfig(**feature_meta.get("feature_config", cfg.hog.as_dict()))
        matrix = feat.HogFeaturizer(fcfg).transform(records)
    else:
        fcfg = feat.CorrAngleConfig(**feature_meta.get("feature_config", cfg.corrangle.as_dict()))
        matrix = feat.CorrAngleFeaturizer(fcfg).transform(records)

    if matrix.n_features != getattr(model, "n_features_", matrix.n_features):
        raise DimensionMismatch(
            f"model expects {model.n_features_} features, extracted {matrix.n_features}"
        )
    scores = model.predict_score(matrix.X)
    threshold = 0.5 if isinstance(model, RandomForest) else 0.0
    rows = []
    _say(args, f"{'rows':>12}  {'score':>10}  label")
    for record, score in zip(records, scores):
        label = LABEL_ARTIFACT if score >= threshold else "clean"
        _say(args, f"{record.row_start:>5}..{record.row_end:<5}  {score:>10.4f}  {label}")
        rows.append({"row_start": record.row_start, "row_end": record.row_end,
                     "score": float(score), "label": label})
    if args.json:
        atomic_write_text(args.json, json.dumps(
            {"image": str(args.image), "threshold": threshold, "slices": rows},
            sort_keys=True, indent=2) + "\n")
    return 0


def _read_scores_csv(path):
    path = Path(path)
    labels, scores = [], []
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SCORE_HEADER:
                raise IoFailure(f"{path}: expected header {','.join(SCORE_HEADER)}")
            for row in reader:
                if not row:
                    continue
                labels.append(parse_label(row[4]))
                scores.append(float(row[5]))
    except OSError as exc:
        raise IoFailure(f"cannot read scores {path}: {exc}") from exc
    except ValueError as exc:
        raise IoFailure(f"cannot parse scores {path}: {exc}") from exc
    if not scores:
        raise IoFailure(f"{path}: no score rows")
    return np.asarray(scores), np.asarray(labels)


def cmd_roc_plot(args) -> int:
    curves = []
    for path in args.scores:
        scores, labels = _read_scores_csv(path)
        curve = roc_curve(scores, labels)
        curves.append((Path(path).stem, curve))
        print(f"{path}: AUC {curve.auc:.4f}")
    if args.out:
        out = _out_dir(args)
        write_roc_svg(out / "roc.svg", curves, title="ROC")
        for name, curve in curves:
            write_roc_csv(out / f"roc_{name}.csv", curve)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="stripescan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def seed_type(value):
        seed = int(value)
        if seed < 0:
            raise argparse.ArgumentTypeError("seed must be >= 0")
        return seed

    def common(p, seed=True):
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if seed:
            p.add_argument("--seed", type=seed_type, default=None,
                           help="override every configured seed")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("features", help="extract slice features from a manifest")
    common(p)
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--feature", required=True, choices=[feat.KIND_HOG, feat.KIND_CORRANGLE])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-slices", default=None, help="debug: dump slice PNGs here")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("train-eval", help="grouped CV training and ROC evaluation")
    common(p)
    p.add_argument("--features", required=True, help="feature CSV from `features`")
    p.add_argument("--classifier", required=True, choices=[CLASSIFIER_RF, CLASSIFIER_SVM])
    p.add_argument("--cv", default=None, choices=[CV_GROUPED5, CV_LOPO])
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_train_eval)

    p = sub.add_parser("predict", help="score one image with a trained model")
    common(p, seed=False)
    p.add_argument("--model", required=True, help="model JSON from train-eval")
    p.add_argument("--image", required=True, help="PNG or PGM image")
    p.add_argument("--json", default=None, help="also write results as JSON")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("roc-plot", help="plot ROC curves from score CSVs")
    common(p, seed=False)
    p.add_argument("--scores", nargs="+", required=True,
                   help="score CSVs (patient_id,...,label,score)")
    p.add_argument("--out", default=None, help="write SVG and ROC CSVs here")
    p.set_defaults(fn=cmd_roc_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StripescanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary between CLI and bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
