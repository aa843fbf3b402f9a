"""Command-line front end: every pipeline stage as a `forge` subcommand.

Exit codes are a contract: 0 success, 1 runtime failure (reported as one JSON
object on stderr), 2 usage errors from the parser. Subcommands that write
files also print a one-line JSON summary to stdout so shell pipelines can
chain on the result without re-reading outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import (
    corpus,
    dataset,
    evalharness,
    genclient,
    inspection,
    lossmath,
    promptgen,
    stats,
    trainplan,
    vocab,
)
from .canonical import canonical_dumps
from .errors import ContractError, ForgeError, NotFoundError, ParseError, SchemaError


def fork_seed(seed: int, label: str) -> int:
    """Derive a per-stage seed from the campaign seed and a stable label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class ForgeConfig:
    seed: int = 0
    catalog: str = ""
    templates: str = ""
    output_dir: str = ""
    rules: str = ""
    port: int = 8765
    backend: dict = field(default_factory=dict)


def load_config(path: str | Path) -> ForgeConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    known = {"seed", "catalog", "templates", "output_dir", "rules", "port", "backend"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaError(f"{path}: unknown config keys: {', '.join(unknown)}")
    config = ForgeConfig(
        seed=int(data.get("seed", 0)),
        catalog=str(data.get("catalog", "")),
        templates=str(data.get("templates", "")),
        output_dir=str(data.get("output_dir", "")),
        rules=str(data.get("rules", "")),
        port=int(data.get("port", 8765)),
        backend=dict(data.get("backend", {})),
    )
    for name in ("catalog", "templates", "rules"):
        value = getattr(config, name)
        if value and not Path(value).exists():
            raise ContractError(f"{path}: {name} path does not exist: {value}")
    return config


def _emit(payload: dict) -> None:
    sys.stdout.write(canonical_dumps(payload) + "\n")


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(canonical_dumps({"error": kind, "message": message}) + "\n")


def _read_lines(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _write_manifest(out_path: Path, manifest: dataset.DatasetManifest, seed: int) -> None:
    doc = manifest.to_dict()
    doc["seed"] = seed
    sidecar = out_path.with_suffix(out_path.suffix + ".manifest.json")
    sidecar.write_text(canonical_dumps(doc) + "\n", encoding="utf-8")


def _parse_languages(text: str) -> tuple[str, ...]:
    languages = tuple(part.strip() for part in text.split(",") if part.strip())
    if not languages:
        raise ContractError(f"no languages in {text!r}")
    return languages


def _parse_kinds(text: str) -> list[promptgen.DataKind]:
    if text.strip().lower() == "all":
        return list(promptgen.DataKind)
    return [promptgen.DataKind.parse(part) for part in text.split(",") if part.strip()]


def _template_dir(args: argparse.Namespace) -> Path | None:
    if getattr(args, "templates", None):
        return Path(args.templates)
    if args.forge_config.templates:
        return Path(args.forge_config.templates)
    return None


def _backend_config(args: argparse.Namespace) -> genclient.BackendConfig:
    cfg = dict(args.forge_config.backend)
    if args.backend == "mock":
        endpoint = "mock://cli"
    else:
        endpoint = args.endpoint or cfg.get("endpoint", "")
        if not endpoint:
            raise ContractError("http backend requires --endpoint")
    return genclient.BackendConfig(
        endpoint=endpoint,
        model_name=args.model or cfg.get("model_name", "mock-vision"),
        timeout=float(cfg.get("timeout", 30.0)),
        max_retries=(
            args.max_retries
            if args.max_retries is not None
            else int(cfg.get("max_retries", 2))
        ),
        cost_per_call=(
            args.cost_per_call
            if args.cost_per_call is not None
            else str(cfg.get("cost_per_call", "0"))
        ),
        parallelism_limit=(
            args.parallelism
            if args.parallelism is not None
            else int(cfg.get("parallelism_limit", 4))
        ),
    )


# ---------------------------------------------------------------- corpus


def _cmd_corpus_select(args: argparse.Namespace) -> int:
    records = corpus.ingest_catalog(
        _read_lines(args.in_path), source=Path(args.in_path).stem
    )
    criteria = corpus.SelectionCriteria(min_objects=args.min, max_objects=args.max)
    selected = corpus.select_images(records, criteria)
    out = Path(args.out)
    with out.open("w", encoding="utf-8") as handle:
        for record in selected:
            handle.write(canonical_dumps(corpus.record_to_dict(record)) + "\n")
    _emit({"total": len(records), "selected": len(selected), "out": str(out)})
    return 0


# ---------------------------------------------------------------- prompt


def _cmd_prompt_render(args: argparse.Namespace) -> int:
    records = corpus.ingest_catalog(
        _read_lines(args.in_path), source=Path(args.in_path).stem
    )
    by_id = {record.image_id: record for record in records}
    if args.image not in by_id:
        raise NotFoundError(f"image {args.image!r} not in {args.in_path}")
    kind = promptgen.DataKind.parse(args.kind)
    templates = promptgen.load_template_set(_template_dir(args))
    if kind not in templates:
        raise NotFoundError(f"no template for kind {kind.value!r}")
    request = promptgen.build_prompt(
        by_id[args.image], kind, templates[kind], _parse_languages(args.languages)
    )
    if args.out:
        Path(args.out).write_text(request.rendered_prompt, encoding="utf-8")
        _emit({"image": args.image, "kind": kind.value, "out": args.out})
    else:
        sys.stdout.write(request.rendered_prompt + "\n")
    return 0


# ---------------------------------------------------------------- generate


def _cmd_generate(args: argparse.Namespace) -> int:
    catalog_path = args.catalog or args.forge_config.catalog
    if not catalog_path:
        raise ContractError("no catalog given (use --catalog or config)")
    records = corpus.ingest_catalog(
        _read_lines(catalog_path), source=Path(catalog_path).stem
    )
    kinds = _parse_kinds(args.kinds)
    templates = promptgen.load_template_set(_template_dir(args))
    config = _backend_config(args)
    backend: genclient.Backend
    if args.backend == "mock":
        backend = genclient.MockBackend()
    else:
        backend = genclient.HttpBackend(config)
    languages = _parse_languages(args.languages)
    samples, ledger, failures = genclient.run_campaign(
        records, kinds, config, templates, languages=languages, backend=backend
    )
    if args.timestamp:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        samples = [
            replace(s, provenance=replace(s.provenance, timestamp=stamp))
            for s in samples
        ]
    out = Path(args.out)
    manifest = dataset.export_jsonl(samples, out)
    _write_manifest(out, manifest, args.forge_config.seed)
    ledger_doc = ledger.to_dict()
    ledger_doc["cost_per_call"] = str(config.cost_per_call)
    ledger_doc["failures"] = [f.to_dict() for f in failures]
    Path(args.ledger).write_text(canonical_dumps(ledger_doc) + "\n", encoding="utf-8")
    _emit(
        {
            "samples": len(samples),
            "failures": len(failures),
            "calls": ledger.calls,
            "total_cost": str(ledger.total_cost),
            "out": str(out),
            "ledger": str(args.ledger),
        }
    )
    return 0


# ---------------------------------------------------------------- dataset


def _cmd_dataset_validate(args: argparse.Namespace) -> int:
    samples = dataset.import_jsonl(args.in_path)
    violations = {}
    for sample in samples:
        report = dataset.validate_sample(sample)
        if report:
            violations[sample.sample_id] = report
    _emit(
        {
            "samples": len(samples),
            "valid": not violations,
            "violations": violations,
        }
    )
    return 0 if not violations else 1


def _cmd_dataset_export(args: argparse.Namespace) -> int:
    samples = dataset.import_jsonl(args.in_path)
    out = Path(args.out)
    manifest = dataset.export_jsonl(samples, out)
    _write_manifest(out, manifest, args.forge_config.seed)
    _emit({"samples": manifest.sample_count, "pairs": manifest.pair_count, "out": str(out)})
    return 0


def _cmd_dataset_subset(args: argparse.Namespace) -> int:
    samples = dataset.import_jsonl(args.in_path)
    removals = {line.strip() for line in _read_lines(args.remove) if line.strip()}
    name = args.name or Path(args.out).stem
    kept, manifest = dataset.derive_subset(
        samples, removals, name=name, parent_manifest=Path(args.in_path).stem
    )
    out = Path(args.out)
    dataset.export_jsonl(kept, out)
    _write_manifest(out, manifest, args.forge_config.seed)
    _emit(
        {
            "kept": manifest.sample_count,
            "removed": manifest.removed_count,
            "out": str(out),
        }
    )
    return 0


# ---------------------------------------------------------------- inspect


def _load_annotators(path: str | Path) -> list[inspection.Annotator]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    try:
        return [
            inspection.Annotator(
                annotator_id=str(entry["annotator_id"]),
                language_pairs=tuple(
                    inspection.LanguagePair.parse(p) for p in entry["language_pairs"]
                ),
            )
            for entry in data
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed annotator entry: {exc}") from exc


def _cmd_inspect_serve(args: argparse.Namespace) -> int:
    from . import service

    samples_list = dataset.import_jsonl(args.samples)
    samples = {sample.sample_id: sample for sample in samples_list}
    annotators = _load_annotators(args.annotators)
    tasks = inspection.assign_tasks(samples_list, annotators)
    board = inspection.ReviewBoard(tasks, log_path=args.log)
    preference = None
    if args.preference:
        preference = service.PreferenceStore(
            evalharness.load_preference_items(args.preference)
        )
    token = args.token or os.environ.get("FORGE_TOKEN", "")
    app = service.build_app(
        board, samples, preference, token=token, static_dir=args.static
    )
    port = args.port if args.port is not None else args.forge_config.port
    _emit({"serving": f"http://{args.host}:{port}", "tasks": len(tasks)})
    sys.stdout.flush()
    service.serve(app, host=args.host, port=port)
    return 0


def _cmd_inspect_apply_removals(args: argparse.Namespace) -> int:
    samples_list = dataset.import_jsonl(args.samples)
    annotators = _load_annotators(args.annotators)
    tasks = inspection.assign_tasks(samples_list, annotators)
    board = inspection.ReviewBoard(tasks, log_path=args.log)
    name = args.name or Path(args.out).stem
    kept, manifest = inspection.apply_removals(
        samples_list, board, name=name, parent_manifest=Path(args.samples).stem
    )
    out = Path(args.out)
    dataset.export_jsonl(kept, out)
    _write_manifest(out, manifest, args.forge_config.seed)
    _emit(
        {
            "kept": manifest.sample_count,
            "removed": manifest.removed_count,
            "out": str(out),
        }
    )
    return 0


# ---------------------------------------------------------------- stats


def _texts_from_samples(samples: list, language: str, field_name: str) -> list[str]:
    if field_name not in ("question", "answer"):
        raise ContractError(f"field must be 'question' or 'answer', got {field_name!r}")
    texts = []
    for sample in samples:
        for turn in sample.turns:
            pair = turn.pair_for(language)
            if pair is not None:
                texts.append(getattr(pair, field_name))
    return texts


def _stats_texts(args: argparse.Namespace, path: str | None = None) -> list[str]:
    samples = dataset.import_jsonl(path or args.in_path)
    return _texts_from_samples(samples, args.lang, args.field)


def _write_stats_output(args: argparse.Namespace, doc: dict, csv_rows: list, header: list) -> None:
    out = Path(args.out)
    if args.format == "csv":
        import csv

        with out.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(csv_rows)
    else:
        out.write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    _emit({"out": str(out), "format": args.format})


def _cmd_stats_positional(args: argparse.Namespace) -> int:
    result = stats.positional_frequency(_stats_texts(args), args.max_position)
    rows = [
        [pos, word, count]
        for pos, words in sorted(result.counts.items())
        for word, count in sorted(words.items())
    ]
    _write_stats_output(args, result.to_dict(), rows, ["position", "word", "count"])
    return 0


def _cmd_stats_lengths(args: argparse.Namespace) -> int:
    result = stats.length_distribution(_stats_texts(args))
    rows = [[length, count] for length, count in sorted(result.histogram.items())]
    _write_stats_output(args, result.to_dict(), rows, ["length", "count"])
    return 0


def _cmd_stats_pos(args: argparse.Namespace) -> int:
    lexicon: dict[str, stats.PosClass] = {}
    if args.lexicon:
        raw = json.loads(Path(args.lexicon).read_text(encoding="utf-8"))
        lexicon = {token: stats.PosClass(name) for token, name in raw.items()}
    analyzer = stats.DictionaryMorphAnalyzer(lexicon)
    report = stats.pos_report(_stats_texts(args), analyzer)
    rows = [[pos.value, dup, uniq] for pos, dup, uniq in report.rows]
    rows.append(["total", report.total_duplicates, report.total_unique])
    _write_stats_output(
        args, report.to_dict(), rows, ["class", "duplicate_count", "unique_count"]
    )
    return 0


def _cmd_stats_tokhist(args: argparse.Namespace) -> int:
    bins = [int(edge) for edge in args.bins.split(",")]
    hist = stats.token_length_histogram(
        _stats_texts(args),
        _stats_texts(args, path=args.b_in),
        stats.whitespace_token_count,
        bins,
    )
    doc = hist.to_dict()
    rows = [
        [label, a, b] for label, a, b in zip(doc["bins"], doc["a"], doc["b"])
    ]
    _write_stats_output(args, doc, rows, ["bin", "a", "b"])
    return 0


# ---------------------------------------------------------------- vocab


def _read_token_lines(path: str | Path) -> list[str]:
    # Unlike load_vocab, additions may repeat; merge dedups them into the report.
    tokens = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if line == "":
            raise ParseError(f"{path}: line {lineno}: empty token line", line=lineno)
        tokens.append(line)
    return tokens


def _cmd_vocab_merge(args: argparse.Namespace) -> int:
    base = vocab.load_vocab(args.base)
    additions = _read_token_lines(args.add)
    merged, report = vocab.merge_vocab(base, additions)
    vocab.save_vocab(merged, args.out)
    if args.report:
        Path(args.report).write_text(
            canonical_dumps(report.to_dict()) + "\n", encoding="utf-8"
        )
    _emit(
        {
            "base_size": report.base_size,
            "final_size": report.final_size,
            "overlap": len(report.overlap),
            "out": str(args.out),
        }
    )
    return 0


def _cmd_vocab_extend_emb(args: argparse.Namespace) -> int:
    table = vocab.load_embeddings(args.in_path)
    extended = vocab.extend_embeddings(table, args.count, args.seed, scale=args.scale)
    vocab.save_embeddings(extended, args.out)
    _emit({"rows": extended.rows, "dim": extended.dim, "out": str(args.out)})
    return 0


# ---------------------------------------------------------------- loss


def _cmd_loss_pretrain(args: argparse.Namespace) -> int:
    model = lossmath.load_model(args.model)
    data = lossmath.load_pretrain_corpus(args.data)
    _emit({"loss": lossmath.pretrain_loss(model, data)})
    return 0


def _cmd_loss_vit(args: argparse.Namespace) -> int:
    model = lossmath.load_model(args.model)
    samples = lossmath.load_conversation_samples(args.data)
    _emit({"loss": lossmath.vit_loss(model, samples)})
    return 0


# ---------------------------------------------------------------- trainplan


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ContractError(f"--set expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _cmd_trainplan_emit(args: argparse.Namespace) -> int:
    overrides = _parse_overrides(args.set or [])
    trainplan.write_config(args.out, overrides, flat=args.flat)
    _emit({"out": str(args.out), "flat": args.flat})
    return 0


# ---------------------------------------------------------------- eval


def _cmd_eval_score(args: argparse.Namespace) -> int:
    rules_path = args.rules or args.forge_config.rules
    rules = (
        evalharness.load_rules(rules_path) if rules_path else evalharness.default_rules()
    )
    items = evalharness.load_vqa_items(args.gold, args.pred)
    report = evalharness.score_accuracy(items, rules)
    if args.out:
        Path(args.out).write_text(
            canonical_dumps(report.to_dict()) + "\n", encoding="utf-8"
        )
    _emit(
        {"accuracy": report.accuracy, "correct": report.correct, "total": report.total}
    )
    return 0


def _cmd_eval_judge(args: argparse.Namespace) -> int:
    items = evalharness.load_preference_items(args.items)
    if args.word_limit is not None:
        items = [replace(item, word_limit=args.word_limit) for item in items]
    judge: evalharness.JudgeBackend
    if args.judge == "mock":
        judge = evalharness.MockJudge()
    else:
        if not args.endpoint:
            raise ContractError("http judge requires --endpoint")
        judge = evalharness.HttpJudge(args.endpoint, model_name=args.model or "")
    seed = args.seed if args.seed is not None else fork_seed(
        args.forge_config.seed, "eval-judge"
    )
    verdicts = evalharness.run_judgements(items, judge, seed=seed)
    with Path(args.out).open("w", encoding="utf-8") as handle:
        for verdict in verdicts:
            handle.write(canonical_dumps(verdict.to_dict()) + "\n")
    counts = {o.value: 0 for o in evalharness.Outcome}
    for verdict in verdicts:
        counts[verdict.outcome.value] += 1
    _emit({"items": len(verdicts), "counts": counts, "seed": seed, "out": str(args.out)})
    return 0


def _read_jsonl_records(path: str | Path) -> list[dict]:
    records = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc.msg}", line=lineno) from exc
    return records


def _cmd_eval_aggregate(args: argparse.Namespace) -> int:
    aggregated = []
    for record in _read_jsonl_records(args.ballots):
        try:
            votes = [evalharness.Outcome.parse(v) for v in record["votes"]]
            item_id = str(record["item_id"])
        except KeyError as exc:
            raise SchemaError(f"{args.ballots}: ballot record missing {exc}") from exc
        if len(votes) != 3:
            raise ContractError(
                f"item {item_id!r}: exactly 3 votes required, got {len(votes)}"
            )
        ballots = evalharness.HumanBallots(
            item_id=item_id, votes=(votes[0], votes[1], votes[2])
        )
        aggregated.append(evalharness.aggregate_human(ballots))
    with Path(args.out).open("w", encoding="utf-8") as handle:
        for verdict in aggregated:
            handle.write(
                canonical_dumps(
                    {"item_id": verdict.item_id, "outcome": verdict.outcome.value}
                )
                + "\n"
            )
    _emit({"items": len(aggregated), "out": str(args.out)})
    return 0


def _load_outcome_records(path: str | Path) -> list[evalharness.AggregatedVerdict]:
    verdicts = []
    for record in _read_jsonl_records(path):
        try:
            verdicts.append(
                evalharness.AggregatedVerdict(
                    item_id=str(record["item_id"]),
                    outcome=evalharness.Outcome.parse(record["outcome"]),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"{path}: verdict record missing {exc}") from exc
    return verdicts


def _cmd_eval_agreement(args: argparse.Namespace) -> int:
    judge_verdicts = [
        evalharness.JudgeVerdict(item_id=v.item_id, outcome=v.outcome)
        for v in _load_outcome_records(args.judge)
    ]
    human_verdicts = _load_outcome_records(args.human)
    matrix = evalharness.agreement(judge_verdicts, human_verdicts)
    doc = matrix.to_dict()
    if args.out:
        Path(args.out).write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    _emit({"total": doc["total"], "rates": doc["rates"]})
    return 0


def _cmd_eval_summary(args: argparse.Namespace) -> int:
    verdicts = _load_outcome_records(args.verdicts)
    summary = evalharness.preference_summary(
        verdicts, model_a=args.model_a, model_b=args.model_b
    )
    doc = summary.to_dict()
    if args.out:
        Path(args.out).write_text(canonical_dumps(doc) + "\n", encoding="utf-8")
    _emit(doc)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Tri-lingual visual instruction dataset factory and eval harness.",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    commands = parser.add_subparsers(dest="command", required=True)

    corpus_cmd = commands.add_parser("corpus", help="catalog ingestion and selection")
    corpus_sub = corpus_cmd.add_subparsers(dest="subcommand", required=True)
    select = corpus_sub.add_parser("select", help="filter images by object count")
    select.add_argument("--in", dest="in_path", required=True)
    select.add_argument("--out", required=True)
    select.add_argument("--min", type=int, default=3)
    select.add_argument("--max", type=int, default=10)
    select.set_defaults(handler=_cmd_corpus_select)

    prompt_cmd = commands.add_parser("prompt", help="prompt rendering")
    prompt_sub = prompt_cmd.add_subparsers(dest="subcommand", required=True)
    render = prompt_sub.add_parser("render", help="render one generation prompt")
    render.add_argument("--kind", required=True)
    render.add_argument("--image", required=True)
    render.add_argument("--in", dest="in_path", required=True)
    render.add_argument("--templates", default=None)
    render.add_argument("--languages", default="en,ko,zh")
    render.add_argument("--out", default=None)
    render.set_defaults(handler=_cmd_prompt_render)

    generate = commands.add_parser("generate", help="run a generation campaign")
    generate.add_argument("--catalog", default=None)
    generate.add_argument("--kinds", default="all")
    generate.add_argument("--backend", choices=("mock", "http"), default="mock")
    generate.add_argument("--endpoint", default=None)
    generate.add_argument("--model", default=None)
    generate.add_argument("--templates", default=None)
    generate.add_argument("--languages", default="en,ko,zh")
    generate.add_argument("--out", required=True)
    generate.add_argument("--ledger", required=True)
    generate.add_argument("--cost-per-call", dest="cost_per_call", default=None)
    generate.add_argument("--parallelism", type=int, default=None)
    generate.add_argument("--max-retries", dest="max_retries", type=int, default=None)
    generate.add_argument(
        "--timestamp",
        action="store_true",
        help="stamp provenance with generation time (breaks byte idempotence)",
    )
    generate.set_defaults(handler=_cmd_generate)

    dataset_cmd = commands.add_parser("dataset", help="dataset files")
    dataset_sub = dataset_cmd.add_subparsers(dest="subcommand", required=True)
    validate = dataset_sub.add_parser("validate", help="report violations")
    validate.add_argument("--in", dest="in_path", required=True)
    validate.set_defaults(handler=_cmd_dataset_validate)
    export = dataset_sub.add_parser("export", help="re-export canonical JSONL")
    export.add_argument("--in", dest="in_path", required=True)
    export.add_argument("--out", required=True)
    export.set_defaults(handler=_cmd_dataset_export)
    subset = dataset_sub.add_parser("subset", help="remove samples by id")
    subset.add_argument("--in", dest="in_path", required=True)
    subset.add_argument("--remove", required=True, help="file with one sample_id per line")
    subset.add_argument("--out", required=True)
    subset.add_argument("--name", default=None)
    subset.set_defaults(handler=_cmd_dataset_subset)

    inspect_cmd = commands.add_parser("inspect", help="annotator review service")
    inspect_sub = inspect_cmd.add_subparsers(dest="subcommand", required=True)
    serve = inspect_sub.add_parser("serve", help="run the review HTTP service")
    serve.add_argument("--samples", required=True)
    serve.add_argument("--annotators", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--token", default=None)
    serve.add_argument("--log", default=None, help="append-only verdict log")
    serve.add_argument("--preference", default=None, help="preference items JSONL")
    serve.add_argument("--static", default=None, help="directory with the browser UI")
    serve.set_defaults(handler=_cmd_inspect_serve)
    apply_removals = inspect_sub.add_parser(
        "apply-removals", help="drop errored samples per the verdict log"
    )
    apply_removals.add_argument("--samples", required=True)
    apply_removals.add_argument("--annotators", required=True)
    apply_removals.add_argument("--log", required=True)
    apply_removals.add_argument("--out", required=True)
    apply_removals.add_argument("--name", default=None)
    apply_removals.set_defaults(handler=_cmd_inspect_apply_removals)

    stats_cmd = commands.add_parser("stats", help="corpus statistics")
    stats_sub = stats_cmd.add_subparsers(dest="subcommand", required=True)

    def add_stats_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--in", dest="in_path", required=True)
        sub.add_argument("--lang", required=True)
        sub.add_argument("--field", default="answer")
        sub.add_argument("--out", required=True)
        sub.add_argument("--format", choices=("json", "csv"), default="json")

    positional = stats_sub.add_parser("positional", help="word frequency by position")
    add_stats_common(positional)
    positional.add_argument("--max-position", dest="max_position", type=int, default=5)
    positional.set_defaults(handler=_cmd_stats_positional)
    lengths = stats_sub.add_parser("lengths", help="word-count distribution")
    add_stats_common(lengths)
    lengths.set_defaults(handler=_cmd_stats_lengths)
    pos = stats_sub.add_parser("pos", help="part-of-speech duplicate/unique counts")
    add_stats_common(pos)
    pos.add_argument("--lexicon", default=None, help="JSON map token -> POS class")
    pos.set_defaults(handler=_cmd_stats_pos)
    tokhist = stats_sub.add_parser("tokhist", help="paired token-length histogram")
    add_stats_common(tokhist)
    tokhist.add_argument("--b-in", dest="b_in", required=True)
    tokhist.add_argument("--bins", required=True, help="comma-separated bin edges")
    tokhist.set_defaults(handler=_cmd_stats_tokhist)

    vocab_cmd = commands.add_parser("vocab", help="vocabulary and embeddings")
    vocab_sub = vocab_cmd.add_subparsers(dest="subcommand", required=True)
    merge = vocab_sub.add_parser("merge", help="append additions to a base vocabulary")
    merge.add_argument("--base", required=True)
    merge.add_argument("--add", required=True)
    merge.add_argument("--out", required=True)
    merge.add_argument("--report", default=None)
    merge.set_defaults(handler=_cmd_vocab_merge)
    extend = vocab_sub.add_parser("extend-emb", help="append seeded embedding rows")
    extend.add_argument("--in", dest="in_path", required=True)
    extend.add_argument("--count", type=int, required=True)
    extend.add_argument("--seed", type=int, required=True)
    extend.add_argument("--out", required=True)
    extend.add_argument("--scale", type=float, default=vocab.DEFAULT_INIT_SCALE)
    extend.set_defaults(handler=_cmd_vocab_extend_emb)

    loss_cmd = commands.add_parser("loss", help="reference loss arithmetic")
    loss_sub = loss_cmd.add_subparsers(dest="subcommand", required=True)
    pretrain = loss_sub.add_parser("pretrain", help="causal LM loss")
    pretrain.add_argument("--model", required=True)
    pretrain.add_argument("--data", required=True)
    pretrain.set_defaults(handler=_cmd_loss_pretrain)
    vit = loss_sub.add_parser("vit", help="answer-masked multi-turn loss")
    vit.add_argument("--model", required=True)
    vit.add_argument("--data", required=True)
    vit.set_defaults(handler=_cmd_loss_vit)

    trainplan_cmd = commands.add_parser("trainplan", help="training configuration")
    trainplan_sub = trainplan_cmd.add_subparsers(dest="subcommand", required=True)
    emit = trainplan_sub.add_parser("emit", help="write the default training config")
    emit.add_argument("--out", required=True)
    emit.add_argument("--set", action="append", default=[], help="key=value override")
    emit.add_argument("--flat", action="store_true", help="key=value format")
    emit.set_defaults(handler=_cmd_trainplan_emit)

    eval_cmd = commands.add_parser("eval", help="scoring and preference evaluation")
    eval_sub = eval_cmd.add_subparsers(dest="subcommand", required=True)
    score = eval_sub.add_parser("score", help="VQA accuracy with normalization")
    score.add_argument("--gold", required=True)
    score.add_argument("--pred", required=True)
    score.add_argument("--rules", default=None)
    score.add_argument("--out", default=None)
    score.set_defaults(handler=_cmd_eval_score)
    judge = eval_sub.add_parser("judge", help="pairwise judging")
    judge.add_argument("--items", required=True)
    judge.add_argument("--judge", choices=("mock", "http"), default="mock")
    judge.add_argument("--endpoint", default=None)
    judge.add_argument("--model", default=None)
    judge.add_argument("--seed", type=int, default=None)
    judge.add_argument("--word-limit", dest="word_limit", type=int, default=None)
    judge.add_argument("--out", required=True)
    judge.set_defaults(handler=_cmd_eval_judge)
    aggregate = eval_sub.add_parser("aggregate", help="aggregate 3-vote ballots")
    aggregate.add_argument("--ballots", required=True)
    aggregate.add_argument("--out", required=True)
    aggregate.set_defaults(handler=_cmd_eval_aggregate)
    agreement_cmd = eval_sub.add_parser("agreement", help="judge vs human matrix")
    agreement_cmd.add_argument("--judge", required=True)
    agreement_cmd.add_argument("--human", required=True)
    agreement_cmd.add_argument("--out", default=None)
    agreement_cmd.set_defaults(handler=_cmd_eval_agreement)
    summary = eval_sub.add_parser("summary", help="preference percentages")
    summary.add_argument("--verdicts", required=True)
    summary.add_argument("--model-a", dest="model_a", default="")
    summary.add_argument("--model-b", dest="model_b", default="")
    summary.add_argument("--out", default=None)
    summary.set_defaults(handler=_cmd_eval_summary)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.forge_config = load_config(args.config) if args.config else ForgeConfig()
        return args.handler(args)
    except ForgeError as exc:
        _fail(type(exc).__name__, str(exc))
        return 1
    except FileNotFoundError as exc:
        _fail("FileNotFound", f"{exc.filename or exc}: no such file")
        return 1
    except IsADirectoryError as exc:
        _fail("IsADirectory", str(exc))
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        _fail(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
