"""Command-line surface for batch use.

Subcommands: ingest | synth | tts | link | retrieve | eval | ablate | report.
Exit codes: 0 success, 1 runtime failure (adapters, IO), 2 usage or
config error. Outputs are written atomically; identical config and seed
produce identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import adapters, fixtures
from .evaluation import EvalReport, ablation_suite, ael_accuracy, render_table, run_eval
from .kb import KBError, KnowledgeSource, load_kb, stable_seed
from .linking import (
    LinkingError,
    build_entity_index,
    export_link_records,
    link,
    transcribe,
)
from .pipeline import PipelineConfig
from .retrieval import (
    DEFAULT_GRID,
    DEFAULT_THRESHOLD,
    calibrate_threshold,
    export_retrieval_record,
    fit_pool_vectorizer,
    retrieve,
)
from .synth import (
    IoFailure,
    RAQASample,
    SynthConfig,
    SynthError,
    TASKS,
    emit_dataset,
    gen_m_aqa,
    gen_r_aqa,
    gen_s_aqa,
    load_dataset,
    load_template_table,
    synth_audio,
)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


class UsageError(ValueError):
    pass


def _parse_knowledge(text: str) -> tuple[bool, KnowledgeSource]:
    if text.strip().lower() == "off":
        return False, KnowledgeSource.full()
    return True, KnowledgeSource.parse(text)


def _load_templates(spec: str):
    if spec == "default":
        return None  # SynthConfig default
    if spec == "fixture":
        return fixtures.fixture_template_table()
    return load_template_table(_require_file(spec, "template table"))


def _synth_config(args) -> SynthConfig:
    table = _load_templates(args.templates)
    if table is None:
        return SynthConfig(seed=args.seed)
    return SynthConfig(seed=args.seed, template_table=table)


def _endpoints(args) -> dict:
    if getattr(args, "endpoints", None):
        return adapters.load_endpoints(_require_file(args.endpoints, "endpoint config"))
    return adapters.load_endpoints(None)


def _pipeline_config(args, endpoints: dict) -> PipelineConfig:
    knowledge_enabled, source = _parse_knowledge(args.knowledge)
    answerer = None
    label = "mock-oracle"
    if "answer" in endpoints:
        answerer = adapters.wire_answerer(endpoints["answer"])
        label = endpoints["answer"].base_url
    asr = adapters.wire_asr(endpoints["asr"]) if "asr" in endpoints else None
    return PipelineConfig(
        knowledge_enabled=knowledge_enabled,
        knowledge_source=source,
        linking_mode=args.linking,
        retrieval_threshold=DEFAULT_THRESHOLD,
        answerer=answerer,
        answerer_label=label,
        asr=asr,
        noise_rate=args.noise_rate,
        noise_seed=args.seed,
    )


def _resolve_threshold(args, samples, config) -> float:
    if args.threshold != "calibrate":
        try:
            return float(args.threshold)
        except ValueError as exc:
            raise UsageError("--threshold must be a number or 'calibrate'") from exc
    dev = []
    for sample in samples:
        if not isinstance(sample, RAQASample):
            continue
        transcripts = [
            transcribe(item.audio_ref, asr=config.asr) for item in sample.pool
        ]
        gold = [i for i, item in enumerate(sample.pool) if item.relevant]
        dev.append((sample.question, transcripts, gold))
    if not dev:
        return DEFAULT_THRESHOLD
    return calibrate_threshold(dev, DEFAULT_GRID)


# ---------------------------------------------------------------------------
# Commands

def cmd_ingest(args) -> int:
    kb = load_kb(_require_file(args.kb, "knowledge base"))
    stats = kb.stats
    print(
        f"entities={stats.entities} triplets={stats.triplets} "
        f"duplicates_dropped={stats.duplicates_dropped} "
        f"comments_skipped={stats.comments_skipped}"
    )
    return 0


def cmd_synth(args) -> int:
    kb = load_kb(_require_file(args.kb, "knowledge base"))
    config = _synth_config(args)
    endpoints = _endpoints(args)
    tts = adapters.wire_tts(endpoints["tts"]) if "tts" in endpoints else None
    text_proxy = args.text_proxy or tts is None

    tasks = TASKS if args.task == "all" else (f"{args.task}_aqa",)
    generators = {"s_aqa": gen_s_aqa, "m_aqa": gen_m_aqa, "r_aqa": gen_r_aqa}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"seed": args.seed, "tasks": {}}
    for task in tasks:
        samples = generators[task](kb, config)
        failures = synth_audio(samples, tts=tts, text_proxy=text_proxy)
        task_manifest = emit_dataset(samples, out / f"{task}.jsonl")
        manifest["tasks"][task] = task_manifest.to_dict()
        if failures:
            manifest["tasks"][task]["audio_failures"] = len(failures)
        print(f"{task}: {len(samples)} samples -> {out / (task + '.jsonl')}")
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"manifest -> {out / 'manifest.json'}")
    return 0


def cmd_tts(args) -> int:
    samples = load_dataset(_require_file(args.dataset, "dataset"))
    endpoints = _endpoints(args)
    tts = adapters.wire_tts(endpoints["tts"]) if "tts" in endpoints else None
    failures = synth_audio(samples, tts=tts, text_proxy=args.text_proxy or tts is None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_dataset(samples, out / Path(args.dataset).name)
    _atomic_write(
        out / "tts_failures.json",
        json.dumps([f.__dict__ for f in failures], indent=2) + "\n",
    )
    print(f"{len(samples)} samples re-emitted, {len(failures)} audio failures")
    return 0


def cmd_link(args) -> int:
    kb = load_kb(_require_file(args.kb, "knowledge base"))
    samples = load_dataset(_require_file(args.dataset, "dataset"))
    _, source = _parse_knowledge(args.knowledge)
    endpoints = _endpoints(args)
    asr = adapters.wire_asr(endpoints["asr"]) if "asr" in endpoints else None
    index = build_entity_index(kb, source)

    lines: list[str] = []
    correct, measured = 0, 0
    for sample in samples:
        if hasattr(sample, "input_sentences"):
            refs = sample.audio_refs
            golds = [sample.gold_entity]
        elif hasattr(sample, "inputs"):
            refs = [i.audio_ref for i in sample.inputs]
            golds = [i.gold_entity for i in sample.inputs]
        else:
            refs = [i.audio_ref for i in sample.pool]
            golds = [i.gold_entity for i in sample.pool]
        transcripts = [
            transcribe(
                r,
                asr=asr,
                noise_rate=args.noise_rate,
                noise_seed=stable_seed(args.seed, sample.id, idx),
            )
            for idx, r in enumerate(refs)
        ]
        if hasattr(sample, "input_sentences"):
            results = [link(" ".join(transcripts), index)]
        else:
            results = [link(t, index) for t in transcripts]
        lines.extend(export_link_records(sample.id, results, kb, top_k=args.top_k))
        measured += 1
        correct += ael_accuracy([r.chosen for r in results], golds)

    accuracy = correct / measured if measured else 0.0
    out = Path(args.out)
    _atomic_write(out / "links.jsonl", "\n".join(lines) + "\n")
    _atomic_write(
        out / "link_summary.json",
        json.dumps(
            {"samples": measured, "ael_accuracy": accuracy, "knowledge_source": source.label},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    print(f"AEL accuracy {accuracy:.3f} over {measured} samples")
    return 0


def cmd_retrieve(args) -> int:
    samples = load_dataset(_require_file(args.dataset, "dataset"))
    endpoints = _endpoints(args)
    asr = adapters.wire_asr(endpoints["asr"]) if "asr" in endpoints else None
    pools = [s for s in samples if isinstance(s, RAQASample)]
    if not pools:
        raise UsageError("dataset has no r_aqa samples to retrieve over")
    config = PipelineConfig(asr=asr)
    threshold = _resolve_threshold(args, pools, config)
    lines = []
    for sample in pools:
        transcripts = [transcribe(i.audio_ref, asr=asr) for i in sample.pool]
        vectorizer = fit_pool_vectorizer(sample.question, transcripts)
        result = retrieve(sample.question, transcripts, vectorizer, threshold)
        gold = [i for i, item in enumerate(sample.pool) if item.relevant]
        lines.append(json.dumps(export_retrieval_record(sample.id, result, gold)))
    out = Path(args.out)
    _atomic_write(out / "retrieval.jsonl", "\n".join(lines) + "\n")
    print(f"retrieval traces for {len(pools)} samples at threshold {threshold}")
    return 0


def _write_report_outputs(report: EvalReport, out: Path, answers: list[dict]) -> None:
    from . import figures  # deferred: matplotlib is slow to import

    _atomic_write(out / "report.json", report.to_json() + "\n")
    _atomic_write(out / "report.txt", render_table([report]))
    _atomic_write(
        out / "answers.jsonl",
        "\n".join(json.dumps(a, ensure_ascii=False, sort_keys=True) for a in answers) + "\n",
    )
    figures.render_report_figure(report, out / "accuracy.png")


def cmd_eval(args) -> int:
    kb = load_kb(_require_file(args.kb, "knowledge base"))
    samples = load_dataset(_require_file(args.dataset, "dataset"))
    endpoints = _endpoints(args)
    config = _pipeline_config(args, endpoints)
    config.retrieval_threshold = _resolve_threshold(args, samples, config)
    index = build_entity_index(kb, config.knowledge_source)
    report = run_eval(samples, index, config)

    answers = [
        {
            "sample_id": row["sample_id"],
            "task": row["task"],
            "generated_text": row.get("generated_text"),
            "chosen_entities": row.get("chosen_entities"),
            "retained_indices": row.get("retained_indices"),
            "prompt_hash": row.get("prompt_hash"),
            "failure": row["failure"],
        }
        for row in report.rows
    ]
    out = Path(args.out)
    _write_report_outputs(report, out, answers)
    sys.stdout.write(render_table([report], title="Evaluation"))
    return 0


def cmd_ablate(args) -> int:
    kb = load_kb(_require_file(args.kb, "knowledge base"))
    samples = load_dataset(_require_file(args.dataset, "dataset"))
    endpoints = _endpoints(args)
    config = _pipeline_config(args, endpoints)
    config.retrieval_threshold = _resolve_threshold(args, samples, config)

    sources = [
        KnowledgeSource.name_only(),
        KnowledgeSource.partial(args.partial_fraction, args.seed),
        KnowledgeSource.full(),
    ]
    reports = ablation_suite(samples, kb, sources, config)
    # Oracle row: ground-truth linking with full knowledge, the ceiling.
    from dataclasses import replace

    oracle_config = replace(
        config, linking_mode="oracle", knowledge_source=KnowledgeSource.full()
    )
    index = build_entity_index(kb, KnowledgeSource.full())
    reports.append(run_eval(samples, index, oracle_config))
    labels = ["name", f"partial={args.partial_fraction:g}", "full", "oracle"]

    from . import figures

    out = Path(args.out)
    payload = [r.to_dict() for r in reports]
    _atomic_write(out / "ablation.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _atomic_write(out / "ablation.txt", render_table(reports, title="Knowledge ablation"))
    figures.render_ablation_figure(reports, out / "ablation.png", labels=labels)
    sys.stdout.write(render_table(reports, title="Knowledge ablation"))
    return 0


def cmd_report(args) -> int:
    path = _require_file(args.report, "report file")
    payload = json.loads(path.read_text(encoding="utf-8"))
    reports = [EvalReport.from_dict(p) for p in (payload if isinstance(payload, list) else [payload])]
    from . import figures

    out = Path(args.out)
    text = render_table(reports)
    _atomic_write(out / "report.txt", text)
    if len(reports) == 1:
        figures.render_report_figure(reports[0], out / "accuracy.png")
    else:
        figures.render_ablation_figure(reports, out / "ablation.png")
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="audiopedia",
        description="Synthesize, link, retrieve and evaluate knowledge-intensive audio QA benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_knowledge(p):
        p.add_argument("--knowledge", default="full", help="name | partial=<f>[:seed] | full | off")
        p.add_argument("--linking", default="predicted", choices=["predicted", "oracle"])
        p.add_argument("--threshold", default=str(DEFAULT_THRESHOLD), help="number or 'calibrate'")
        p.add_argument("--noise-rate", type=float, default=0.0)
        p.add_argument("--endpoints", default=None, help="endpoint config JSON path")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="validate a knowledge base and print stats")
    p.add_argument("--kb", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate benchmark datasets")
    p.add_argument("--kb", required=True)
    p.add_argument("--task", default="all", choices=["s", "m", "r", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--templates", default="default", help="default | fixture | path to JSON")
    p.add_argument("--text-proxy", action="store_true", help="force text-proxy audio refs")
    p.add_argument("--endpoints", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tts", help="fill audio refs for an existing dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--text-proxy", action="store_true")
    p.add_argument("--endpoints", default=None)
    p.set_defaults(func=cmd_tts)

    p = sub.add_parser("link", help="entity-link a dataset and report AEL accuracy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int, default=5)
    common_knowledge(p)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("retrieve", help="threshold-retrieve r_aqa pools")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    common_knowledge(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="run a full evaluation and write reports")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    common_knowledge(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="evaluate across knowledge sources plus the oracle row")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--partial-fraction", type=float, default=0.2)
    common_knowledge(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="re-render tables and figures from a stored report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, KBError, SynthError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (adapters.AdapterError, LinkingError, IoFailure, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
