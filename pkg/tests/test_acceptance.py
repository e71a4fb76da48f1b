"""Acceptance suite: one test per release criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
Every expected value here is recomputed with an independent brute-force
oracle inside the test, never taken from the implementation under test.
"""

import json
import random
import re
import time

from audiopedia.cli import main
from audiopedia.evaluation import (
    ael_accuracy,
    aqa_accuracy,
    retrieval_f1,
    run_eval,
)
from audiopedia.fixtures import fixture_kb_path, fixture_synth_config, load_fixture_kb
from audiopedia.kb import KnowledgeSource
from audiopedia.linking import build_entity_index, link, noise_inject
from audiopedia.pipeline import PipelineConfig
from audiopedia.retrieval import DEFAULT_GRID, calibrate_threshold, retrieve
from audiopedia.synth import gen_m_aqa, gen_r_aqa, gen_s_aqa, synth_audio


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def _fixture_world(seed=0):
    kb = load_fixture_kb()
    config = fixture_synth_config(seed=seed)
    s, m, r = gen_s_aqa(kb, config), gen_m_aqa(kb, config), gen_r_aqa(kb, config)
    for ds in (s, m, r):
        synth_audio(ds, text_proxy=True)
    return kb, s, m, r


# independent equivalence oracle (do not reuse the generator's)
_YEARS = re.compile(r"\b(\d{4})\b")


def _norm(text):
    return " ".join(text.split()).casefold()


def _equivalent(a, b, rule):
    if rule == "decade-bucket":
        ya, yb = _YEARS.search(a), _YEARS.search(b)
        if ya and yb:
            return int(ya.group(1)) // 10 == int(yb.group(1)) // 10
    return _norm(a) == _norm(b)


# ---------------------------------------------------------------------------

def test_generator_soundness():
    """Brute-force re-derivation of every generated label, under 5 seconds."""
    start = time.perf_counter()
    kb, s, m, r = _fixture_world(seed=0)
    assert len(kb) == 12 and kb.stats.triplets == 60

    checked = 0
    for sample in s:
        triplets = kb.triplets_of(sample.gold_entity)
        assert sample.excluded_triplet in triplets
        assert sample.answer == sample.excluded_triplet.object
        excluded_sentence = "{0} {1} {2}.".format(*sample.excluded_triplet.as_tuple())
        framed = {"{0} {1} {2}.".format(*t.as_tuple()) for t in triplets}
        for sentence in sample.input_sentences:
            assert sentence in framed and sentence != excluded_sentence
        checked += 1
    for sample in m:
        a, b = (inp.source_triplet for inp in sample.inputs)
        assert a.relation == b.relation
        expected = "Yes" if _equivalent(a.object, b.object, sample.equivalence) else "No"
        assert sample.answer == expected
        checked += 1
    for sample in r:
        count = 0
        for item in sample.pool:
            satisfies = (
                item.source_triplet.relation == sample.relation
                and _norm(item.source_triplet.object) == _norm(sample.predicate_object)
            )
            assert satisfies == item.relevant
            count += satisfies
        assert sample.answer == str(count)
        checked += 1

    elapsed = time.perf_counter() - start
    _verdict(
        "generator soundness: every label re-derivable by brute force",
        checked == len(s) + len(m) + len(r) and elapsed < 5.0,
        f"{checked} samples in {elapsed:.2f}s",
    )


def test_ael_self_retrieval_and_noise():
    """Clean text-proxy linking is perfect; fully noised linking is near chance."""
    kb, s, _, _ = _fixture_world(seed=0)
    index = build_entity_index(kb, KnowledgeSource.full())

    texts = [e.knowledge_text for e in index.entries]
    multisets = {tuple(sorted(t.casefold().split())) for t in texts}
    assert len(multisets) == len(texts), "knowledge texts must be distinct token multisets"

    trials = [(s[i % len(s)], i) for i in range(200)]

    def accuracy(rate):
        hits = 0
        for sample, seed in trials:
            transcript = " ".join(sample.input_sentences)
            if rate > 0:
                transcript = noise_inject(transcript, rate, seed=seed)
            hits += link(transcript, index).chosen == sample.gold_entity
        return hits / len(trials)

    clean, noised = accuracy(0.0), accuracy(1.0)
    _verdict(
        "AEL self-retrieval: clean accuracy 100%, fully-noised at or below chance+slack",
        clean == 1.0 and noised <= 0.25,
        f"clean={clean:.3f} noised={noised:.3f} over 200 samples",
    )


def test_ablation_ordering():
    """Linking accuracy ranks full >= partial(0.2) >= name, full strictly above name."""
    kb, s, _, _ = _fixture_world(seed=0)
    accuracies = {}
    for label, source in (
        ("name", KnowledgeSource.name_only()),
        ("partial", KnowledgeSource.partial(0.2, seed=0)),
        ("full", KnowledgeSource.full()),
    ):
        index = build_entity_index(kb, source)
        hits = sum(
            link(" ".join(x.input_sentences), index).chosen == x.gold_entity for x in s
        )
        accuracies[label] = hits / len(s)
    ok = (
        accuracies["full"] >= accuracies["partial"] >= accuracies["name"]
        and accuracies["full"] > accuracies["name"]
    )
    _verdict(
        "ablation ordering: full >= partial(0.2) >= name with full > name",
        ok,
        " ".join(f"{k}={v:.3f}" for k, v in accuracies.items()),
    )


def test_oracle_ceiling_and_knowledge_off_floor():
    """Oracle linking with the mock answerer is a perfect ceiling; no knowledge, a zero floor."""
    kb, s, m, r = _fixture_world(seed=0)
    index = build_entity_index(kb, KnowledgeSource.full())

    ceiling = run_eval(s + m + r, index, PipelineConfig(linking_mode="oracle"))
    floor = run_eval(s, index, PipelineConfig(knowledge_enabled=False))

    ok = (
        ceiling.accuracy["s_aqa"] == 1.0
        and ceiling.accuracy["m_aqa"] == 1.0
        and ceiling.accuracy["r_aqa"] == 1.0
        and floor.accuracy["s_aqa"] == 0.0
    )
    _verdict(
        "oracle ceiling 1.000/1.000/1.000 and knowledge-off floor 0.000",
        ok,
        f"ceiling={ceiling.accuracy} floor_s={floor.accuracy['s_aqa']:.3f}",
    )


# ---------------------------------------------------------------------------
# metric exactness against brute-force twins

def _brute_substring_accuracy(generated, gold):
    g, t = _norm(gold), _norm(generated)
    n, m = len(t), len(g)
    for i in range(n - m + 1):
        if all(t[i + j] == g[j] for j in range(m)):
            return 1
    return 0


def _brute_ael(predicted, gold):
    for p, g in zip(predicted, gold):
        if p != g:
            return 0
    return 1


def _brute_f1(retained, gold):
    tp = sum(1 for i in retained if i in gold)
    fp = sum(1 for i in retained if i not in gold)
    fn = sum(1 for i in gold if i not in retained)
    if not retained and not gold:
        return 1.0
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def test_metric_exactness():
    rng = random.Random(2024)
    words = ["alpha", "beta", "1965", "japan", "salad", "AND", "x"]

    for _ in range(1000):
        gold = " ".join(rng.choices(words, k=rng.randint(1, 3)))
        text = "  ".join(rng.choices(words, k=rng.randint(0, 8)))
        if rng.random() < 0.5:
            text = text.upper()
        assert aqa_accuracy(text, gold) == _brute_substring_accuracy(text, gold)

    for _ in range(1000):
        arity = rng.randint(1, 3)
        predicted = [rng.randint(0, 4) for _ in range(arity)]
        gold = [rng.randint(0, 4) for _ in range(arity)]
        assert ael_accuracy(predicted, gold) == _brute_ael(predicted, gold)

    max_err = 0.0
    for _ in range(1000):
        pool = rng.randint(1, 12)
        retained = set(rng.sample(range(pool), rng.randint(0, pool)))
        gold = set(rng.sample(range(pool), rng.randint(0, pool)))
        err = abs(retrieval_f1(retained, gold, pool_size=pool) - _brute_f1(retained, gold))
        max_err = max(max_err, err)
        assert err < 1e-12

    worked = retrieval_f1({0, 1, 2}, {0, 1})
    _verdict(
        "metric exactness: 3x1000 randomized cases match brute force, worked F1 case = 0.8",
        abs(worked - 0.8) < 1e-12 and max_err < 1e-12,
        f"worked={worked:.12f} max_f1_err={max_err:.2e}",
    )


def test_retrieval_properties():
    """Threshold monotonicity over 500 random pools; calibration is grid-optimal."""
    rng = random.Random(77)
    vocab = [f"tok{i}" for i in range(15)]

    violations = 0
    for _ in range(500):
        pool = [
            " ".join(rng.choices(vocab, k=rng.randint(2, 6)))
            for _ in range(rng.randint(2, 9))
        ]
        question = " ".join(rng.choices(vocab, k=4))
        previous = None
        for threshold in (-1.0, -0.25, 0.0, 0.2, 0.5, 0.8, 1.0):
            retained = set(retrieve(question, pool, threshold=threshold).retained)
            if previous is not None and not retained <= previous:
                violations += 1
            previous = retained

    dev = []
    for _ in range(10):
        pool = [
            " ".join(rng.choices(vocab, k=rng.randint(2, 6)))
            for _ in range(rng.randint(2, 8))
        ]
        question = " ".join(rng.choices(vocab, k=4))
        gold = sorted(rng.sample(range(len(pool)), rng.randint(0, len(pool))))
        dev.append((question, pool, gold))
    best = calibrate_threshold(dev, DEFAULT_GRID)

    def mean_f1(threshold):
        total = 0.0
        for question, pool, gold in dev:
            result = retrieve(question, pool, threshold=threshold)
            total += retrieval_f1(result.retained, gold, pool_size=len(pool))
        return total / len(dev)

    exhaustive = {t: mean_f1(t) for t in DEFAULT_GRID}
    top = max(exhaustive.values())
    grid_optimal = abs(exhaustive[best] - top) < 1e-12 and best == min(
        t for t, v in exhaustive.items() if abs(v - top) < 1e-12
    )
    _verdict(
        "retrieval properties: monotone retained sets and grid-optimal calibration",
        violations == 0 and grid_optimal,
        f"violations={violations} best={best}",
    )


def test_cli_determinism(tmp_path):
    """cmd_synth and cmd_eval are byte-identical across two runs."""
    kb = str(fixture_kb_path())
    outputs = []
    for run in ("one", "two"):
        synth_out = tmp_path / run / "data"
        assert main([
            "synth", "--kb", kb, "--task", "all", "--seed", "0",
            "--templates", "fixture", "--text-proxy", "--out", str(synth_out),
        ]) == 0
        eval_out = tmp_path / run / "eval"
        assert main([
            "eval", "--dataset", str(synth_out / "s_aqa.jsonl"), "--kb", kb,
            "--knowledge", "full", "--linking", "oracle", "--out", str(eval_out),
        ]) == 0
        outputs.append((synth_out, eval_out))

    (synth1, eval1), (synth2, eval2) = outputs
    identical = True
    for name in ("s_aqa.jsonl", "m_aqa.jsonl", "r_aqa.jsonl", "manifest.json"):
        identical &= (synth1 / name).read_bytes() == (synth2 / name).read_bytes()
    for name in ("report.json", "report.txt", "answers.jsonl", "accuracy.png"):
        identical &= (eval1 / name).read_bytes() == (eval2 / name).read_bytes()
    _verdict("determinism: synth and eval outputs byte-identical across runs", identical)


def test_manifest_shape_and_pool_statistics(tmp_path):
    """Manifests expose the benchmark statistic fields; pool sizes hit their brackets."""
    kb = str(fixture_kb_path())
    out = tmp_path / "data"
    assert main([
        "synth", "--kb", kb, "--task", "all", "--seed", "0",
        "--templates", "fixture", "--text-proxy", "--out", str(out),
    ]) == 0
    manifest = json.loads((out / "manifest.json").read_text())

    fields_ok = True
    for task in ("s_aqa", "m_aqa", "r_aqa"):
        entry = manifest["tasks"][task]
        fields_ok &= {"samples", "answer_type", "unique_answers"} <= set(entry)
    r_entry = manifest["tasks"]["r_aqa"]
    fields_ok &= {"avg_relevant_per_question", "avg_irrelevant_per_question"} <= set(r_entry)
    fields_ok &= manifest["tasks"]["s_aqa"]["answer_type"] == "open-ended"
    fields_ok &= manifest["tasks"]["m_aqa"]["answer_type"] == "binary"
    fields_ok &= manifest["tasks"]["r_aqa"]["answer_type"] == "counts"

    avg_rel = r_entry["avg_relevant_per_question"]
    avg_irr = r_entry["avg_irrelevant_per_question"]
    in_brackets = 1.5 <= avg_rel <= 3.0 and 6.0 <= avg_irr <= 11.0
    _verdict(
        "manifest shape: statistic fields present, pool averages inside brackets",
        fields_ok and in_brackets,
        f"avg_relevant={avg_rel:.2f} avg_irrelevant={avg_irr:.2f}",
    )
