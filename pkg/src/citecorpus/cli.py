"""Command-line entry point orchestrating the corpus and model tooling.

Commands: build, stats, audit-export, audit-score, train, eval,
cross-domain, dump-rules. Every source of randomness flows from the explicit
--seed flag, and build outputs contain no wall-clock or host information, so
reruns with the same config are byte-identical.

Exit codes: 0 success, 1 validation or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, audit, metrics, textproc
from .ingest import Diagnostic, paper_eligible, read_corpus_path
from .model import (
    DEFAULT_C,
    LinearModel,
    PUModel,
    compute_class_weights,
    featurize,
    fit_vocabulary,
    load_model,
    predict,
    save_model,
    train_logreg,
    train_pu,
)
from .pipeline import (
    LABEL_CITE_WORTHY,
    PERMISSIBLE_SECTION_TITLES,
    SPLIT_TEST,
    SPLIT_TRAIN,
    SPLITS,
    ParagraphSample,
    balanced_sample,
    collect_samples,
    read_dataset,
    split_dataset,
    write_dataset,
    write_rejections,
)

logger = logging.getLogger("citecorpus")

DATASET_FILENAME = "dataset.jsonl"
MANIFEST_FILENAME = "manifest.json"
REJECTIONS_FILENAME = "rejections.jsonl"
SHEET_FILENAME = "sheet.tsv"
KEY_FILENAME = "key.jsonl"


class UsageError(ValueError):
    """Bad invocation: missing files, unusable flags. Exit code 2."""


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise UsageError(f"config file not found: {path}")
    with open(config_path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config file {path} must hold an object")
    return config


def _resolve(args: argparse.Namespace, config: dict, name: str, default=None, required=False):
    """Flag value if given, else config value, else default."""
    value = getattr(args, name, None)
    if value is None:
        value = config.get(name, default)
    if required and value is None:
        flag = "--" + name.replace("_", "-")
        raise UsageError(f"{flag} is required (flag or config file)")
    return value


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _parse_ratios(raw) -> tuple[float, float, float]:
    if isinstance(raw, (list, tuple)):
        parts = [float(x) for x in raw]
    else:
        try:
            parts = [float(x) for x in str(raw).split(",")]
        except ValueError as exc:
            raise UsageError(f"--ratios must be three comma-separated numbers, got {raw!r}") from exc
    if len(parts) != 3:
        raise UsageError(f"--ratios must name three values, got {raw!r}")
    return parts[0], parts[1], parts[2]


def _select_sentences(
    samples: list[ParagraphSample], split: str, field: str | None = None
) -> tuple[list[str], list[int]]:
    texts: list[str] = []
    labels: list[int] = []
    for sample in samples:
        if split != "all" and sample.split != split:
            continue
        if field is not None and sample.mag_field != field:
            continue
        for sentence in sample.sentences:
            texts.append(sentence.text)
            labels.append(1 if sentence.label == LABEL_CITE_WORTHY else 0)
    return texts, labels


def cmd_build(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    inputs = _resolve(args, config, "input", required=True)
    if isinstance(inputs, str):
        inputs = [inputs]
    output_dir = Path(_resolve(args, config, "output", required=True))
    seed = int(_resolve(args, config, "seed", required=True))
    quota = int(_resolve(args, config, "quota", default=1000))
    ratios = _parse_ratios(_resolve(args, config, "ratios", default="0.8,0.1,0.1"))
    workers = int(_resolve(args, config, "workers", default=1))
    baseline = bool(_resolve(args, config, "baseline", default=False))

    input_paths = [_require_file(p, "input corpus") for p in inputs]
    output_dir.mkdir(parents=True, exist_ok=True)

    diagnostics: list[Diagnostic] = []
    papers_total = 0
    papers_eligible = 0

    def eligible_papers():
        nonlocal papers_total, papers_eligible
        for path in input_paths:
            for paper in read_corpus_path(path, on_malformed=diagnostics.append):
                papers_total += 1
                if paper_eligible(paper):
                    papers_eligible += 1
                    yield paper

    samples, rejections = collect_samples(eligible_papers(), baseline=baseline, workers=workers)
    for diag in diagnostics:
        logger.warning("malformed input line %d: %s", diag.line, diag.message)

    selected = balanced_sample(samples, quota, seed)
    selected = split_dataset(selected, ratios, seed)

    write_dataset(selected, output_dir / DATASET_FILENAME)
    write_rejections(rejections, output_dir / REJECTIONS_FILENAME)

    manifest = {
        "format_version": 1,
        "tool_version": __version__,
        "baseline": baseline,
        "seed": seed,
        "quota": quota,
        "ratios": list(ratios),
        "inputs": [str(p) for p in inputs],
        "counts": {
            "malformed_lines": len(diagnostics),
            "papers_total": papers_total,
            "papers_eligible": papers_eligible,
            "paragraphs_accepted": len(samples),
            "paragraphs_rejected": len(rejections),
            "paragraphs_selected": len(selected),
            "sentences_selected": sum(s.sentence_count() for s in selected),
        },
        "rule_checksums": {
            "numeric_citation_pattern": _sha256(textproc.NUMERIC_CITATION_PATTERN),
            "author_year_citation_pattern": _sha256(textproc.AUTHOR_YEAR_CITATION_PATTERN),
            "hanging_citation_pattern": _sha256(textproc.HANGING_CITATION_PATTERN),
            "section_titles": _sha256("\n".join(PERMISSIBLE_SECTION_TITLES)),
        },
    }
    with open(output_dir / MANIFEST_FILENAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    print(metrics.dataset_stats(selected).render_text())
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    path = _require_file(args.input, "dataset")
    report = metrics.dataset_stats(read_dataset(path))
    if args.json:
        print(json.dumps(report.to_record(), ensure_ascii=False, sort_keys=True, indent=2))
    else:
        print(report.render_text())
    return 0


def cmd_audit_export(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    main_path = _require_file(_resolve(args, config, "input", required=True), "dataset")
    baseline_path = _require_file(
        _resolve(args, config, "baseline_input", required=True), "baseline dataset")
    n_per_class = int(_resolve(args, config, "n_per_class", default=500))
    seed = int(_resolve(args, config, "seed", required=True))
    output_dir = Path(_resolve(args, config, "output", required=True))
    output_dir.mkdir(parents=True, exist_ok=True)

    items = audit.sample_for_audit(
        read_dataset(main_path),
        read_dataset(baseline_path),
        n_per_class=n_per_class,
        seed=seed,
        sheet_path=output_dir / SHEET_FILENAME,
        key_path=output_dir / KEY_FILENAME,
    )
    print(f"wrote {len(items)} audit rows to {output_dir / SHEET_FILENAME}")
    print(f"method/label key (do not show the annotator): {output_dir / KEY_FILENAME}")
    return 0


def cmd_audit_score(args: argparse.Namespace) -> int:
    sheet = _require_file(args.sheet, "annotated sheet")
    key = _require_file(args.key, "key file")
    result = audit.score_audit(sheet, key)
    print(result.render_text())
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dataset_path = _require_file(_resolve(args, config, "input", required=True), "dataset")
    model_path = Path(_resolve(args, config, "output", required=True))
    seed = int(_resolve(args, config, "seed", required=True))
    c_value = float(_resolve(args, config, "c_value", default=DEFAULT_C))
    use_pu = bool(_resolve(args, config, "pu", default=False))
    split = _resolve(args, config, "split", default=SPLIT_TRAIN)
    min_df = int(_resolve(args, config, "min_df", default=1))
    max_features = _resolve(args, config, "max_features", default=None)
    if max_features is not None:
        max_features = int(max_features)

    samples = read_dataset(dataset_path)
    texts, labels = _select_sentences(samples, split)
    if not texts:
        raise ValueError(f"dataset has no sentences in split {split!r}")

    vocab = fit_vocabulary(texts, min_df=min_df, max_features=max_features)
    features = [featurize(t, vocab) for t in texts]
    if use_pu:
        model: LinearModel | PUModel = train_pu(
            features, labels, seed=seed, C=c_value, n_features=len(vocab))
        print(f"labeling-frequency estimate: {model.c_estimate:.4f}")
    else:
        class_weights = compute_class_weights(labels)
        model = train_logreg(features, labels, class_weights, C=c_value, seed=seed,
                             n_features=len(vocab))
        print(f"class weights: ({class_weights[0]:.4f}, {class_weights[1]:.4f})")
    save_model(model_path, model, vocab)
    print(f"trained on {len(texts)} sentences (split={split}); model saved to {model_path}")
    return 0


def _scoring_model(model: LinearModel | PUModel) -> LinearModel:
    return model.final_model if isinstance(model, PUModel) else model


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    model_path = _require_file(_resolve(args, config, "model", required=True), "model file")
    dataset_path = _require_file(_resolve(args, config, "input", required=True), "dataset")
    split = _resolve(args, config, "split", default=SPLIT_TEST)
    field = _resolve(args, config, "field", default=None)

    model, vocab = load_model(model_path)
    if vocab is None:
        raise ValueError(f"{model_path} carries no vocabulary; cannot featurize text")
    samples = read_dataset(dataset_path)
    texts, golds = _select_sentences(samples, split, field)
    if not texts:
        raise ValueError(f"no sentences selected (split={split!r}, field={field!r})")
    predictions = predict(_scoring_model(model), [featurize(t, vocab) for t in texts])
    result = metrics.precision_recall_f1(list(predictions), golds, positive_class=1)
    print(result.render_text())
    return 0


def cmd_cross_domain(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dataset_path = _require_file(_resolve(args, config, "input", required=True), "dataset")
    distances_path = _require_file(
        _resolve(args, config, "distances", required=True), "distance matrix")
    seed = int(_resolve(args, config, "seed", required=True))
    c_value = float(_resolve(args, config, "c_value", default=DEFAULT_C))
    min_df = int(_resolve(args, config, "min_df", default=1))
    fields_arg = _resolve(args, config, "fields", default=None)
    output = _resolve(args, config, "output", default=None)

    distances = metrics.read_distance_matrix(distances_path)
    if fields_arg:
        fields = [f.strip() for f in str(fields_arg).split(",") if f.strip()]
    else:
        fields = sorted({train for train, _ in distances})
    samples = read_dataset(dataset_path)

    f1_by_pair: dict[tuple[str, str], float] = {}
    for train_field in fields:
        texts, labels = _select_sentences(samples, SPLIT_TRAIN, train_field)
        if not texts:
            raise ValueError(f"field {train_field!r} has no train sentences")
        vocab = fit_vocabulary(texts, min_df=min_df)
        features = [featurize(t, vocab) for t in texts]
        class_weights = compute_class_weights(labels)
        model = train_logreg(features, labels, class_weights, C=c_value, seed=seed,
                             n_features=len(vocab))
        for test_field in fields:
            # In-domain uses the held-out test split; out-of-domain uses the
            # entire other field.
            split = SPLIT_TEST if test_field == train_field else "all"
            eval_texts, eval_golds = _select_sentences(samples, split, test_field)
            if not eval_texts:
                raise ValueError(f"field {test_field!r} has no sentences for split {split!r}")
            predictions = predict(model, [featurize(t, vocab) for t in eval_texts])
            prf = metrics.precision_recall_f1(list(predictions), eval_golds, positive_class=1)
            f1_by_pair[(train_field, test_field)] = 100.0 * prf.f1

    grid = metrics.domain_grid(f1_by_pair, distances, fields=fields)
    print(grid.render_text())
    if output:
        Path(output).write_text(metrics.grid_to_json(grid) + "\n", encoding="utf-8")
        print(f"grid written to {output}")
    return 0


def cmd_dump_rules(_args: argparse.Namespace) -> int:
    print(f"section-titles ({len(PERMISSIBLE_SECTION_TITLES)}):")
    for title in PERMISSIBLE_SECTION_TITLES:
        print(title)
    print()
    print("citation-format pattern [numeric]:")
    print(textproc.NUMERIC_CITATION_PATTERN)
    print()
    print("citation-format pattern [author-year]:")
    print(textproc.AUTHOR_YEAR_CITATION_PATTERN)
    print()
    print("hanging-citation pattern:")
    print(textproc.HANGING_CITATION_PATTERN)
    print()
    print(f"sentence-split abbreviations ({len(textproc.ABBREVIATIONS)}):")
    for abbreviation in textproc.ABBREVIATIONS:
        print(abbreviation)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citecorpus",
        description="Build and evaluate cite-worthiness datasets from structured papers.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="run the full extraction pipeline")
    p.add_argument("--input", action="append", help="corpus file (repeatable)")
    p.add_argument("--output", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--quota", type=int, help="paragraphs per field (default 1000)")
    p.add_argument("--ratios", help="train,dev,test sentence shares (default 0.8,0.1,0.1)")
    p.add_argument("--workers", type=int, help="parallel paper workers (default 1)")
    p.add_argument("--baseline", action="store_true", default=None,
                   help="naive span-removal variant (audit comparison only)")
    p.add_argument("--config", help="JSON file supplying flags; flags override it")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("audit-export", help="export a blinded annotation sheet")
    p.add_argument("--input", help="main-pipeline dataset")
    p.add_argument("--baseline-input", dest="baseline_input", help="baseline dataset")
    p.add_argument("--n-per-class", dest="n_per_class", type=int,
                   help="sentences per (method, class) stratum (default 500)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--config")
    p.set_defaults(func=cmd_audit_export)

    p = sub.add_parser("audit-score", help="score an annotated sheet")
    p.add_argument("--sheet", required=True)
    p.add_argument("--key", required=True)
    p.set_defaults(func=cmd_audit_score)

    p = sub.add_parser("train", help="train a classifier on a dataset")
    p.add_argument("--input", help="dataset file")
    p.add_argument("--output", help="model file to write")
    p.add_argument("--seed", type=int)
    p.add_argument("--c-value", dest="c_value", type=float,
                   help=f"inverse regularization strength (default {DEFAULT_C})")
    p.add_argument("--pu", action="store_true", default=None,
                   help="positive-unlabeled training")
    p.add_argument("--split", choices=(*SPLITS, "all"))
    p.add_argument("--min-df", dest="min_df", type=int)
    p.add_argument("--max-features", dest="max_features", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--split", choices=(*SPLITS, "all"))
    p.add_argument("--field", help="restrict to one subject field")
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cross-domain", help="train/test grid across fields")
    p.add_argument("--input")
    p.add_argument("--distances", help="labeled distance-matrix file")
    p.add_argument("--fields", help="comma-separated field subset")
    p.add_argument("--seed", type=int)
    p.add_argument("--c-value", dest="c_value", type=float)
    p.add_argument("--min-df", dest="min_df", type=int)
    p.add_argument("--output", help="write the grid as JSON here")
    p.add_argument("--config")
    p.set_defaults(func=cmd_cross_domain)

    p = sub.add_parser("dump-rules", help="print the embedded rules verbatim")
    p.set_defaults(func=cmd_dump_rules)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
