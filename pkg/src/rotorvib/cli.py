"""``rotorvib`` command line.

Subcommands: synth, extract, train, eval, study.  Results go to files and
stdout; progress goes to stderr.  On failure a single JSON line
``{"error": ..., "message": ..., "exit_code": ...}`` is written to stderr and
the process exits with 2 (config), 3 (data) or 4 (numeric).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .config import ALGORITHMS, STUDIES, load_config
from .exceptions import ConfigInvalid, NoConvergence, RotorVibError, SchemaMismatch
from .features import FeatureSchema, WindowFeatureExtractor, read_feature_csv, write_feature_csv
from .features.transforms import magnitude
from .ingest import assemble_corpus, read_manifest, stack_pairs
from .models import accuracy, majority_baseline, make_model, model_from_dict, model_to_dict
from .pipeline import Dataset, Preprocessor, select_family, stratified_split
from .synth import generate_paper_shaped_corpus

log = logging.getLogger("rotorvib")

BUNDLE_FORMAT = "rotorvib-model/1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--out-dir", dest="out_dir", default=default)
    parser.add_argument("--format", choices=("json", "csv"), default=default)
    parser.add_argument("-q", "--quiet", action="store_true", default=default,
                        help="no progress output")


def build_parser():
    parser = _Parser(prog="rotorvib", description="Rotor-blade defect detection from vibration data.")
    parser.add_argument("--version", action="version", version=f"rotorvib {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic corpus")
    p.add_argument("--duration", dest="duration_s", type=float)
    p.add_argument("--noise-only", action="store_true",
                   help="zero harmonics and defect signatures")

    p = sub.add_parser("extract", parents=[common], help="manifest -> feature matrix")
    p.add_argument("manifest", nargs="?")
    p.add_argument("--output", dest="features")
    p.add_argument("--workers", dest="n_workers", type=int)
    p.add_argument("--magnitude", metavar="CSV",
                   help="also write per-window magnitude summaries")

    p = sub.add_parser("train", parents=[common], help="feature matrix -> model bundle")
    p.add_argument("features", nargs="?")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--family")
    p.add_argument("--pca-components", dest="pca_components", type=int)
    p.add_argument("--pca-family", dest="pca_family")
    p.add_argument("--output", dest="model")

    p = sub.add_parser("eval", parents=[common], help="accuracy of a model bundle on the test split")
    p.add_argument("model", nargs="?")
    p.add_argument("features", nargs="?")

    p = sub.add_parser("study", parents=[common], help="run one of the analysis studies")
    p.add_argument("study", choices=STUDIES)
    p.add_argument("features", nargs="?")
    p.add_argument("--output", dest="reports")
    return parser


_NOT_CONFIG = {"command", "config", "quiet", "noise_only", "magnitude", "study"}


def resolve_config(args):
    cfg = load_config(getattr(args, "config", None))
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if getattr(args, "noise_only", False):
        overrides.update(harmonic_scale=0.0, defect_scale=0.0)
    return cfg.with_overrides(overrides)


def _require(path, what):
    if path is None:
        raise ConfigInvalid(f"no {what} given")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(2, f"{what} not found", str(path))
    return path


def _distinct(inputs, outputs):
    resolved = {Path(p).resolve() for p in inputs}
    for out in outputs:
        if Path(out).resolve() in resolved:
            raise ConfigInvalid(f"{out} is both an input and an output")


def schema_path(features_path):
    p = Path(features_path)
    return p.with_name(p.stem + ".schema.json")


def load_dataset(path):
    path = _require(path, "feature matrix")
    sp = schema_path(path)
    if not sp.exists():
        raise SchemaMismatch(f"schema file {sp} is missing")
    schema = FeatureSchema.from_json(sp.read_text(encoding="utf-8"))
    X, names, ids, labels = read_feature_csv(path)
    if list(names) != list(schema.names):
        raise SchemaMismatch(f"{path} columns do not match {sp}")
    return Dataset(X, labels, ids, schema)


def _filtered(dataset, family):
    return dataset if family in (None, "all") else select_family(dataset, family)


def _emit(result, fmt, stream=None):
    """Print a flat result dict to stdout as JSON or a two-row CSV."""
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(result) + "\n")
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(result))
        writer.writeheader()
        writer.writerow(result)
        stream.write(buf.getvalue())


def cmd_synth(cfg, args):
    out = Path(cfg.out_dir) / "corpus"
    t0 = time.perf_counter()
    log.info("generating corpus in %s (seed %d)", out, cfg.seed)
    manifest = generate_paper_shaped_corpus(out, cfg.seed, cfg.snr(), cfg.duration_s)
    log.info("done in %.1f s", time.perf_counter() - t0)
    _emit({"manifest": str(manifest), "experiments": len(read_manifest(manifest))}, cfg.format)
    return 0


def cmd_extract(cfg, args):
    manifest = _require(cfg.manifest, "manifest")
    out = cfg.path("features", "features.csv")
    outputs = [out, schema_path(out)] + ([args.magnitude] if args.magnitude else [])
    _distinct([manifest], outputs)
    entries = read_manifest(manifest)
    _distinct([p for p, _ in entries], outputs)
    log.info("loading %d experiments", len(entries))
    pairs = assemble_corpus(entries, n_workers=cfg.n_workers)
    windows, labels, ids = stack_pairs(pairs)
    params = cfg.feature_params()
    extractor = WindowFeatureExtractor(
        segment_length=params.stft.segment_length, hop=params.stft.hop,
        window_fn=params.stft.window_fn, entropy_bins=params.entropy_bins,
        wavelet_levels=params.wavelet_levels, wavelet=params.wavelet, band=params.band,
    )
    log.info("extracting features from %d window pairs", len(pairs))
    X = extractor.fit_transform(windows)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(out, X, extractor.schema_, ids, labels)
    schema_path(out).write_text(extractor.schema_.to_json(), encoding="utf-8")
    if args.magnitude:
        _write_magnitude(args.magnitude, windows, ids)
    _emit({"features": str(out), "rows": int(X.shape[0]), "columns": int(X.shape[1]),
           "schema_fingerprint": extractor.schema_.fingerprint(),
           "degenerate_skewness": int(extractor.n_degenerate_)}, cfg.format)
    return 0


def _write_magnitude(path, windows, ids):
    """Per window and sensor: mean and peak of sqrt(x² + y² + z²)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment_id", "window", "sensor", "mean_magnitude", "max_magnitude"])
        counter = {}
        for win, eid in zip(windows, ids):
            w = counter.get(eid, 0)
            counter[eid] = w + 1
            for s, sensor in enumerate(("Central", "Outer")):
                m = magnitude(*win[s])
                writer.writerow([eid, w, sensor, repr(float(m.mean())), repr(float(m.max()))])


def _split_for(cfg, dataset):
    return stratified_split(dataset, cfg.train_fraction, cfg.seed, cfg.split_mode)


def cmd_train(cfg, args):
    features = _require(cfg.features, "feature matrix")
    out = cfg.path("model", f"model-{cfg.algorithm}.json")
    _distinct([features, schema_path(features)], [out])
    dataset = _filtered(load_dataset(features), cfg.family)
    split = _split_for(cfg, dataset)
    pre = Preprocessor(cfg.pca_components, cfg.pca_family).fit(dataset, split)
    Xtr, ytr, Xte, yte = pre.train_test(dataset)
    params = cfg.model_params()
    if cfg.algorithm == "rf":
        params.setdefault("random_state", cfg.seed)
    log.info("training %s on %d rows x %d columns", cfg.algorithm, *Xtr.shape)
    t0 = time.perf_counter()
    model = make_model(cfg.algorithm, **params).fit(Xtr, ytr)
    metrics = {
        "algorithm": cfg.algorithm,
        "train_accuracy": accuracy(model.predict(Xtr), ytr),
        "test_accuracy": accuracy(model.predict(Xte), yte),
        "majority_baseline": majority_baseline(dataset.y),
        "n_train": int(split.train.size),
        "n_test": int(split.test.size),
        "seconds": round(time.perf_counter() - t0, 3),
    }
    bundle = {
        "format": BUNDLE_FORMAT,
        "schema_fingerprint": dataset.schema.fingerprint(),
        "family": cfg.family,
        "split": {"seed": cfg.seed, "train_fraction": cfg.train_fraction, "mode": cfg.split_mode},
        "preprocessor": pre.to_dict(),
        "classifier": model_to_dict(model, pre.schema_out_.fingerprint()),
        "metrics": metrics,
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(bundle), encoding="utf-8")
    _emit({"model": str(out), **metrics}, cfg.format)
    return 0


def load_bundle(path):
    path = _require(path, "model")
    try:
        bundle = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path} is not a model bundle: {exc.msg}") from None
    if not isinstance(bundle, dict) or bundle.get("format") != BUNDLE_FORMAT:
        raise SchemaMismatch(f"{path} is not a {BUNDLE_FORMAT} bundle")
    return bundle


def cmd_eval(cfg, args):
    bundle = load_bundle(cfg.model)
    dataset = _filtered(load_dataset(cfg.features), bundle["family"])
    dataset.schema.check(bundle["schema_fingerprint"])
    pre = Preprocessor.from_dict(bundle["preprocessor"], dataset.schema)
    model = model_from_dict(bundle["classifier"], pre.schema_out_.fingerprint())
    s = bundle["split"]
    split = stratified_split(dataset, s["train_fraction"], s["seed"], s["mode"])
    Xte = pre.transform(dataset.X[split.test])
    acc = accuracy(model.predict(Xte), dataset.y[split.test])
    _emit({"algorithm": bundle["classifier"]["algorithm"], "accuracy": acc,
           "n_test": int(split.test.size), "majority_baseline": majority_baseline(dataset.y)},
          cfg.format)
    return 0


def cmd_study(cfg, args):
    features = _require(cfg.features, "feature matrix")
    out = cfg.path("reports", f"study-{args.study}.{cfg.format}")
    _distinct([features, schema_path(features)], [out])
    dataset = _filtered(load_dataset(features), cfg.family)
    split = _split_for(cfg, dataset)
    params = {alg: cfg.model_params(alg) for alg in ALGORITHMS}
    snapshot = cfg.to_dict()
    log.info("running study %s on %d rows", args.study, len(dataset))
    summary = {"study": args.study, "report": str(out)}
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.study == "pca-scenarios":
        results = analysis.run_pca_scenarios(dataset, cfg.algorithms, cfg.pca_ks, cfg.seed, split, params)
        analysis.emit_report(results, out, cfg.format, args.study, snapshot)
        summary["best"] = max(r.best for r in results)
    elif args.study == "pca-sweep":
        sweep = analysis.pca_component_sweep(
            dataset, cfg.sweep_algorithm, range(cfg.sweep_min, cfg.sweep_max + 1), cfg.seed,
            cfg.sweep_family, split, params,
        )
        analysis.emit_report(sweep.results, out, cfg.format, args.study, snapshot,
                             extra={"best_k": sweep.best_k} if cfg.format == "json" else None)
        summary.update(best_k=sweep.best_k, best=sweep.accuracies[sweep.best_k])
    elif args.study == "isolation":
        results = analysis.run_feature_isolation(
            dataset, cfg.isolation_families, cfg.pca_ks, cfg.seed, cfg.algorithms, split, params,
        )
        best = analysis.best_by_family(results)
        analysis.emit_report(results, out, cfg.format, args.study, snapshot,
                             extra={"best_by_family": best} if cfg.format == "json" else None)
        summary.update({f"best_{k}": v for k, v in best.items()})
    else:
        tree_algs = [a for a in cfg.algorithms if a in ("dt", "rf")] or ["dt", "rf"]
        importance = analysis.run_importance(dataset, tree_algs, cfg.top_k, cfg.seed, split, params)
        if cfg.format == "json":
            analysis.emit_report([], out, "json", args.study, snapshot, importance)
        else:
            _write_importance_csv(out, importance, dataset.schema)
        summary.update({f"{a}_top1": v["top"][0]["name"] for a, v in importance.items()})
    _emit(summary, cfg.format)
    return 0


def _write_importance_csv(path, importance, schema):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "rank", "name", "family", "axis", "importance"])
        for alg, agg in importance.items():
            for rank, item in enumerate(agg["top"], 1):
                desc = schema[schema.index_of(item["name"])]
                writer.writerow([alg, rank, item["name"], desc.family.short, desc.axis, item["importance"]])


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
            "study": cmd_study}


def _fail(exc, code):
    line = json.dumps({"error": type(exc).__name__, "message": " ".join(str(exc).split()),
                       "exit_code": code})
    sys.stderr.write(line + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING if args.quiet else logging.INFO,
            format="rotorvib: %(message)s", stream=sys.stderr, force=True,
        )
        cfg = resolve_config(args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NoConvergence)
            code = COMMANDS[args.command](cfg, args)
        for w in caught:
            log.warning("%s", w.message)
        return code
    except RotorVibError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, 3)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        return _fail(exc, 4)
    except ValueError as exc:
        return _fail(exc, 3)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
