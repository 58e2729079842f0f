"""Command-line interface.

Every subcommand writes its artifacts under an output directory together
with a manifest.json recording the effective configuration, its SHA-256
hash and the seed, and nothing volatile, so a rerun with the same inputs
reproduces every output byte for byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training finished
without reaching the convergence tolerance (artifacts are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import corpus, evaluate, explain, features, learn, stats, vectorize
from .errors import NlikitError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_UNCONVERGED = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical_json(config).encode("utf-8")).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _finish(
    out_dir: Path,
    command: str,
    config: dict,
    artifacts: Sequence[str],
    notes: dict | None = None,
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": config.get("seed"),
        "artifacts": sorted(artifacts),
    }
    if notes:
        manifest["notes"] = notes
    _write_json(out_dir / "manifest.json", manifest)


def _load_dataset(path: str) -> corpus.LabeledDataset:
    return corpus.load_path(path)


def _specs_config(specs: Sequence[features.FeatureSpec]) -> list[str]:
    return [s.prefix for s in specs]


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    out = Path(args.out)
    _write_text(out / "dataset.conllu", corpus.serialize_conllu(dataset.documents))
    _write_json(out / "summary.json", corpus.summarize(dataset))
    config = {"command": "ingest", "in": args.in_path}
    _finish(out, "ingest", config, ["dataset.conllu", "summary.json"])
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    sampled = corpus.sample_balanced(dataset, args.per_label, args.seed)
    out = Path(args.out)
    _write_text(out / "sampled.conllu", corpus.serialize_conllu(sampled.documents))
    _write_json(out / "summary.json", corpus.summarize(sampled))
    config = {
        "command": "sample",
        "in": args.in_path,
        "per_label": args.per_label,
        "seed": args.seed,
    }
    _finish(out, "sample", config, ["sampled.conllu", "summary.json"])
    return EXIT_OK


def cmd_pair(args: argparse.Namespace) -> int:
    non_native = _load_dataset(args.non_native)
    native = _load_dataset(args.native)
    paired = corpus.pair_binary(
        non_native, native, args.l1, args.native_sample, args.seed
    )
    out = Path(args.out)
    _write_text(out / "paired.conllu", corpus.serialize_conllu(paired.documents))
    _write_json(out / "summary.json", corpus.summarize(paired))
    config = {
        "command": "pair",
        "non_native": args.non_native,
        "native": args.native,
        "l1": args.l1,
        "native_sample": args.native_sample,
        "seed": args.seed,
    }
    _finish(out, "pair", config, ["paired.conllu", "summary.json"])
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    specs = features.parse_spec_list(args.features)
    totals: dict[str, int] = {}
    for doc in dataset.documents:
        for feat, cnt in features.extract_features(doc, specs).counts.items():
            totals[feat] = totals.get(feat, 0) + cnt
    out = Path(args.out)
    name = "features_" + "+".join(s.prefix for s in specs) + ".tsv"
    _write_text(out / name, features.dump_counts(totals))
    config = {
        "command": "extract",
        "in": args.in_path,
        "features": _specs_config(specs),
    }
    _finish(out, "extract", config, [name])
    return EXIT_OK


def cmd_vocab(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    specs = features.parse_spec_list(args.features)
    counts = evaluate.extract_all(dataset, specs)
    vocab = vectorize.build_vocabulary(counts, min_total=args.min_total)
    out = Path(args.out)
    _write_text(out / "vocab.tsv", vectorize.write_vocabulary(vocab))
    config = {
        "command": "vocab",
        "in": args.in_path,
        "features": _specs_config(specs),
        "min_total": args.min_total,
    }
    _finish(
        out,
        "vocab",
        config,
        ["vocab.tsv"],
        notes={"vocab_sha256": vectorize.vocabulary_hash(vocab), "size": len(vocab)},
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    specs = features.parse_spec_list(args.features)
    config_obj = evaluate.ExperimentConfig(
        dataset_id=Path(args.in_path).stem,
        specs=specs,
        seed=args.seed,
        c=args.c,
        tol=args.tol,
        max_epochs=args.max_epochs,
    )
    model = evaluate.train_full(dataset, config_obj)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    learn.save_model(model, out / "model.npz")
    training = {
        "labels": list(model.labels),
        "vocab_sha256": vectorize.vocabulary_hash(model.vocabulary),
        "vocab_size": len(model.vocabulary),
        "converged": {
            label: model.diagnostics[label].converged for label in model.labels
        },
        "epochs": {label: model.diagnostics[label].epochs for label in model.labels},
        "warnings": list(model.warnings),
    }
    _write_json(out / "training.json", training)
    config = {
        "command": "train",
        "in": args.in_path,
        "features": _specs_config(specs),
        "seed": args.seed,
        "c": args.c,
        "tol": args.tol,
        "max_epochs": args.max_epochs,
    }
    unconverged = model.n_unconverged
    _finish(
        out,
        "train",
        config,
        ["model.npz", "training.json"],
        notes={"unconverged": unconverged},
    )
    if unconverged:
        logger.warning("%d binary models stopped before tolerance", unconverged)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _read_cv_config(path: str, out_override: str | None) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise NlikitError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise NlikitError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise NlikitError("config file must hold a JSON object")
    for key in ("dataset", "features", "seed"):
        if key not in raw:
            raise NlikitError(f"config file missing required key {key!r}")
    if out_override:
        raw["out"] = out_override
    if "out" not in raw:
        raise NlikitError("no output directory: set 'out' in the config or pass --out")
    return raw


def cmd_cv(args: argparse.Namespace) -> int:
    raw = _read_cv_config(args.config, args.out)
    specs = features.parse_spec_list(raw["features"])
    config_obj = evaluate.ExperimentConfig(
        dataset_id=str(raw.get("dataset_id") or Path(raw["dataset"]).stem),
        specs=specs,
        k=int(raw.get("k", 10)),
        seed=int(raw["seed"]),
        c=float(raw.get("c", 1.0)),
        tol=float(raw.get("tol", 1e-4)),
        max_epochs=int(raw.get("max_epochs", 1000)),
    )
    dataset = _load_dataset(raw["dataset"])
    report = evaluate.cross_validate(dataset, config_obj)
    out = Path(raw["out"])
    _write_json(out / "report.json", report.to_dict(include_timing=False))
    logger.info(
        "pooled accuracy %.4f over %d folds in %.1fs",
        report.accuracy,
        config_obj.k,
        report.wall_time,
    )
    config = {
        "command": "cv",
        "dataset": raw["dataset"],
        "dataset_id": config_obj.dataset_id,
        "features": _specs_config(specs),
        "k": config_obj.k,
        "seed": config_obj.seed,
        "c": config_obj.c,
        "tol": config_obj.tol,
        "max_epochs": config_obj.max_epochs,
    }
    _finish(
        out,
        "cv",
        config,
        ["report.json"],
        notes={"unconverged": report.unconverged},
    )
    return EXIT_UNCONVERGED if report.unconverged else EXIT_OK


def _grid_rows(args: argparse.Namespace) -> list[tuple[features.FeatureSpec, ...]]:
    rows: list[tuple[features.FeatureSpec, ...]] = []
    if args.rows:
        try:
            raw = json.loads(Path(args.rows).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise NlikitError(f"cannot read rows file: {exc}") from None
        if not isinstance(raw, list):
            raise NlikitError("rows file must hold a JSON list")
        for entry in raw:
            rows.append(features.parse_spec_list(entry))
    if args.families:
        if args.families.strip().lower() == "all":
            rows.extend((spec,) for spec in features.all_specs())
        else:
            rows.extend(
                (spec,) for spec in features.parse_spec_list(args.families)
            )
    if not rows:
        raise NlikitError("grid needs --families and/or --rows")
    return rows


def cmd_grid(args: argparse.Namespace) -> int:
    rows = _grid_rows(args)
    datasets = {Path(p).stem: _load_dataset(p) for p in args.dataset}
    configs = [
        evaluate.ExperimentConfig(
            dataset_id=ds_id,
            specs=row,
            k=args.k,
            seed=args.seed,
            c=args.c,
            tol=args.tol,
            max_epochs=args.max_epochs,
        )
        for row in rows
        for ds_id in datasets
    ]
    result = evaluate.run_grid(configs, datasets)
    out = Path(args.out)
    _write_text(out / "grid.tsv", result.to_tsv())
    _write_json(out / "grid.json", result.to_dict())
    config = {
        "command": "grid",
        "datasets": list(args.dataset),
        "rows": [[s.prefix for s in row] for row in rows],
        "k": args.k,
        "seed": args.seed,
        "c": args.c,
        "tol": args.tol,
        "max_epochs": args.max_epochs,
    }
    unconverged = sum(r.unconverged for r in result.reports.values())
    _finish(
        out,
        "grid",
        config,
        ["grid.tsv", "grid.json"],
        notes={"errors": len(result.errors), "unconverged": unconverged},
    )
    return EXIT_UNCONVERGED if unconverged else EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    model = learn.load_model(args.model)
    dataset = _load_dataset(args.in_path)
    exclude = dataset if args.exclude_ne else None
    report = explain.explain_model(model, args.top_k, exclude_entities_from=exclude)
    out = Path(args.out)
    payload = report.to_dict()
    artifacts = ["explain.json", "explain.txt"]
    if args.kwic > 0:
        samples: dict[str, list[dict]] = {}
        for section in report.labels:
            for attribution in section.overuse:
                feat = attribution.feature
                prefix = feat.partition(":")[0]
                if prefix in features.STAT_FAMILIES or feat in samples:
                    continue
                lines = explain.kwic(
                    dataset, feat, window=args.window, max_lines=args.kwic
                )
                samples[feat] = [
                    {
                        "doc_id": l.doc_id,
                        "left": l.left,
                        "match": l.match,
                        "right": l.right,
                    }
                    for l in lines
                ]
        payload["kwic"] = samples
    _write_json(out / "explain.json", payload)
    _write_text(out / "explain.txt", report.to_text())
    config = {
        "command": "explain",
        "model": args.model,
        "in": args.in_path,
        "top_k": args.top_k,
        "exclude_ne": bool(args.exclude_ne),
        "kwic": args.kwic,
        "window": args.window,
    }
    _finish(out, "explain", config, artifacts)
    return EXIT_OK


def cmd_kwic(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    lines = explain.kwic(
        dataset, args.feature, window=args.window, max_lines=args.max_lines
    )
    text = explain.kwic_text(lines)
    if args.out:
        out = Path(args.out)
        _write_text(out / "kwic.txt", text)
        config = {
            "command": "kwic",
            "in": args.in_path,
            "feature": args.feature,
            "window": args.window,
        }
        _finish(out, "kwic", config, ["kwic.txt"], notes={"matches": len(lines)})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_bands(text: str) -> list[corpus.Band]:
    bands: list[corpus.Band] = []
    for part in text.split(","):
        part = part.strip()
        if part.endswith("+"):
            bands.append((int(part[:-1]), None))
        else:
            low_s, sep, high_s = part.partition("-")
            if not sep or not high_s:
                raise NlikitError(f"bad band {part!r}: expect LOW-HIGH or LOW+")
            bands.append((int(low_s), int(high_s)))
    return bands


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.in_path)
    out = Path(args.out)
    artifacts = ["means.csv", "histograms.csv"]
    notes: dict = {}
    _write_text(out / "means.csv", stats.means_csv(dataset))
    _write_text(
        out / "histograms.csv", stats.histograms_csv(dataset, normalize=not args.raw)
    )
    if args.bands:
        bands = _parse_bands(args.bands)
        grouped, dropped = corpus.group_by_proficiency(dataset, bands)
        _write_text(out / "means_by_band.csv", stats.means_csv(grouped))
        _write_text(
            out / "histograms_by_band.csv",
            stats.histograms_csv(grouped, normalize=not args.raw),
        )
        artifacts += ["means_by_band.csv", "histograms_by_band.csv"]
        notes["dropped_documents"] = dropped
    config = {
        "command": "stats",
        "in": args.in_path,
        "bands": args.bands or "",
        "raw": bool(args.raw),
    }
    _finish(out, "stats", config, artifacts, notes=notes or None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring.


def build_parser() -> _Parser:
    parser = _Parser(prog="nlikit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        return p

    p = add("ingest", "parse, validate and summarize a corpus")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = add("sample", "balanced per-label subsample")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--per-label", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = add("pair", "build a native/non-native binary dataset for one L1")
    p.add_argument("--non-native", required=True)
    p.add_argument("--native", required=True)
    p.add_argument("--l1", required=True)
    p.add_argument("--native-sample", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pair)

    p = add("extract", "dump aggregated feature counts")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = add("vocab", "fit and dump a vocabulary")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--min-total", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vocab)

    p = add("train", "train calibrated one-vs-rest models on a full dataset")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = add("cv", "stratified k-fold cross-validation from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cv)

    p = add("grid", "accuracy grid over feature sets and datasets")
    p.add_argument("--dataset", action="append", required=True)
    p.add_argument("--families", default="")
    p.add_argument("--rows", default="")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = add("explain", "overuse/underuse rankings from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--exclude-ne", action="store_true")
    p.add_argument("--kwic", type=int, default=0, help="concordance lines per feature")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = add("kwic", "keyword-in-context lines for one feature")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--max-lines", type=int, default=None)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_kwic)

    p = add("stats", "word-length, sentence-length and depth statistics")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--bands", default="", help='proficiency bands, e.g. "1-5,6-12,13+"')
    p.add_argument("--raw", action="store_true", help="raw counts instead of shares")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NlikitError as exc:
        print(f"nlikit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"nlikit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
