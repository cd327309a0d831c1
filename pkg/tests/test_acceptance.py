"""Exit criteria for the package, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import itertools
import json
import random
import time

import pytest

from conftest import brute_levenshtein
from vlmscore.blockweaver import weave
from vlmscore.cli import main
from vlmscore.entities import DetectionScores, ExactMatcher, detection_scores, match_entities
from vlmscore.grid import GRID_CELLS, jaccard
from vlmscore.harness import CORPUS_LEVEL, PER_SAMPLE_AVERAGE, EvalConfig, ingest, render_report, run_eval
from vlmscore.judge import normalize_phrase
from vlmscore.kiu import kiu_scores
from vlmscore.ocr_metrics import levenshtein, sample_metrics
from vlmscore.schema import record_to_dict
from vlmscore.synthetic import (
    ALPHABET,
    perturb_record,
    random_record,
    raw_prediction_text,
    segment_at_spaces,
    unique_bigram_text,
    write_corpus,
)
from vlmscore.textmatch import coverage_score

pytestmark = pytest.mark.acceptance


@pytest.mark.criterion(1, "BlockWeaver reconstruction: 500 trials, zero unmatched, char_f1 = 1, CER = 0, < 10 s")
def test_criterion_01_reconstruction():
    weave(["warm up"], ["warm up"])
    rng = random.Random(2024)
    start = time.perf_counter()
    for _ in range(500):
        text = unique_bigram_text(rng, rng.randint(40, 200))
        bigrams = [text[i:i + 2] for i in range(len(text) - 1)]
        assert len(bigrams) == len(set(bigrams))
        pred, gt = segment_at_spaces(rng, text), segment_at_spaces(rng, text)
        assert min(map(len, pred + gt)) >= 4
        rng.shuffle(pred)
        w = weave(pred, gt)
        m = sample_metrics(w)
        assert not w.unmatched_pred and not w.unmatched_gt
        assert m.char_f1 == 1.0 and m.cer == 0.0
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(2, "Partition invariant on 1,000 random block sets")
def test_criterion_02_partition():
    rng = random.Random(7)
    vocab = ["OPEN", "SALE", "50%", "OFF", "Fresh", "Coffee", "Daily", "Menu"]
    violations = 0
    for trial in range(1000):
        def blocks(k):
            out = []
            for _ in range(k):
                kind = rng.random()
                if kind < 0.15 and out:
                    out.append(rng.choice(out))  # duplicate text
                elif kind < 0.3:
                    out.append("".join(rng.choice("qwxzj#") for _ in range(rng.randint(1, 6))))  # noise
                else:
                    out.append(" ".join(rng.sample(vocab, rng.randint(1, 3))))
            return out
        P = blocks(rng.choice([0, rng.randint(1, 8)]))
        G = blocks(rng.choice([0, rng.randint(1, 8)]))
        w = weave(P, G)
        p_seen = [i for sp, _ in w.pairs for i in sp.members] + [b.index for b in w.unmatched_pred]
        g_seen = [i for _, sg in w.pairs for i in sg.members] + [b.index for b in w.unmatched_gt]
        violations += sorted(p_seen) != list(range(len(P))) or sorted(g_seen) != list(range(len(G)))
    assert violations == 0


@pytest.mark.criterion(3, "Coverage-Score oracle values, symmetry and bounds on 10,000 pairs")
def test_criterion_03_coverage():
    assert coverage_score("Hello World", "Hello World Today") == pytest.approx(1.0, abs=1e-9)
    assert coverage_score("SALE 5O% OFF", "SALE 50% OFF") == pytest.approx(11 / 12, abs=1e-9)
    assert coverage_score("abcd", "wxyz") == pytest.approx(0.0, abs=1e-9)
    rng = random.Random(3)
    for _ in range(10_000):
        a = "".join(rng.choice("abc d") for _ in range(rng.randint(0, 20)))
        b = "".join(rng.choice("abc d") for _ in range(rng.randint(0, 20)))
        s = coverage_score(a, b)
        assert s == coverage_score(b, a) and 0.0 <= s <= 1.0


@pytest.mark.criterion(4, "Edit distance equals brute force on 1,000 pairs; kitten/sitting = 3")
def test_criterion_04_levenshtein():
    assert levenshtein("kitten", "sitting") == 3
    rng = random.Random(4)
    for _ in range(1000):
        a = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 12)))
        assert levenshtein(a, b) == brute_levenshtein(a, b)


@pytest.mark.criterion(5, "OCR arithmetic: Fresh Coffee + unmatched Daily")
def test_criterion_05_ocr_arithmetic():
    m = sample_metrics(weave(["Fresh Coffee"], ["Fresh Coffee", "Daily"]))
    assert m.char_precision == 1.0
    assert m.char_recall == pytest.approx(12 / 17, abs=1e-9)
    assert m.char_f1 == pytest.approx(0.8275862068965517, abs=1e-9)
    assert m.cer == pytest.approx(5 / 17, abs=1e-9)


@pytest.mark.criterion(6, "Detection metrics equal brute-force counting on 1,000 lists; F1 = 4/7")
def test_criterion_06_detection():
    assert DetectionScores.from_counts(2, 1, 2).f1 == pytest.approx(4 / 7, abs=1e-9)
    m = match_entities(["cup", "sofa", "lamp"], ["cup", "sofa", "desk", "bike"], ExactMatcher())
    assert detection_scores(m).f1 == pytest.approx(4 / 7, abs=1e-9)
    rng = random.Random(6)
    names = ["cup", "Cup", "sofa", "lamp", "desk", "bike", "cup.", "mug"]
    for _ in range(1000):
        preds = [rng.choice(names) for _ in range(rng.randint(0, 8))]
        gts = [rng.choice(names) for _ in range(rng.randint(0, 8))]
        d = detection_scores(match_entities(preds, gts, ExactMatcher()))
        # brute force: pair each prediction with the first unused equal ground truth
        used, tp = set(), 0
        for p in preds:
            for j, g in enumerate(gts):
                if j not in used and normalize_phrase(p) and normalize_phrase(p) == normalize_phrase(g):
                    used.add(j)
                    tp += 1
                    break
        fp, fn = len(preds) - tp, len(gts) - tp
        assert (d.tp, d.fp, d.fn) == (tp, fp, fn)
        if preds or gts:
            p = tp / (tp + fp) if preds else 0.0
            r = tp / (tp + fn) if gts else 0.0
            f = 2 * p * r / (p + r) if p + r else 0.0
            assert (d.precision, d.recall, d.f1) == (p, r, f)
        else:
            assert d.vacuous and d.f1 == 1.0


@pytest.mark.criterion(7, "KIU completeness 0.75 / faithfulness 0.6 and monotonicity on 1,000 flag sets")
def test_criterion_07_kiu():
    s = kiu_scores([True, True, True, False, False], [True, True, True, False])
    assert s.completeness == 0.75 and s.faithfulness == 0.6
    rng = random.Random(8)
    for _ in range(1000):
        pf = [rng.random() < 0.5 for _ in range(rng.randint(1, 10))]
        gf = [rng.random() < 0.5 for _ in range(rng.randint(1, 10))]
        base = kiu_scores(pf, gf)
        more = kiu_scores(pf + [False], gf)
        assert more.completeness == base.completeness
        if any(pf):
            assert more.faithfulness < base.faithfulness
        else:
            assert more.faithfulness == base.faithfulness == 0.0


@pytest.mark.criterion(8, "Jaccard 1/3 example; symmetry and identity over all 2^9 subsets")
def test_criterion_08_jaccard():
    assert jaccard({"top-left", "center"}, {"center", "bottom-right"}) == 1 / 3
    subsets = [frozenset(c) for r in range(10) for c in itertools.combinations(GRID_CELLS, r)]
    rng = random.Random(9)
    for a in subsets:
        assert jaccard(a, a) == 1.0
        for b in rng.sample(subsets, 32):
            assert jaccard(a, b) == jaccard(b, a)


def _weave_corpus(n, seed):
    rng = random.Random(seed)
    letters = ALPHABET[:62]

    def line():
        words = []
        while sum(len(w) + 1 for w in words) < 50:
            words.append("".join(rng.choice(letters) for _ in range(rng.randint(3, 8))))
        return " ".join(words)

    gt = [line() for _ in range(n)]
    pred = [g if rng.random() < 0.8 else g[: len(g) // 2] for g in gt]
    rng.shuffle(pred)
    return pred, gt


def _best_time(pred, gt, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        weave(pred, gt)
        best = min(best, time.perf_counter() - start)
    return best


@pytest.mark.criterion(9, "Weave n=m=200 under 2 s; growth from 100 to 200 at most 4.5x")
def test_criterion_09_complexity():
    weave(*_weave_corpus(10, 0))
    t100 = _best_time(*_weave_corpus(100, 1))
    t200 = _best_time(*_weave_corpus(200, 1))
    print(f"weave n=m=100: {t100:.3f}s, n=m=200: {t200:.3f}s, ratio {t200 / t100:.2f}")
    assert t200 < 2.0
    assert t200 / t100 <= 4.5


@pytest.mark.criterion(10, "Determinism: stub-judge eval of 50 samples twice and at parallelism 1 vs 8")
def test_criterion_10_determinism(tmp_path, capsys):
    gt, pred = write_corpus(tmp_path, 50, seed=10)
    common = ["eval", "--gt", str(gt), "--pred", str(pred), "--judge", "stub", "--matcher", "judge",
              "--tasks", "objects,humans,logos,ocr,media,nsfw,reliability"]
    outputs = []
    for name, par in (("a", "1"), ("b", "1"), ("c", "8")):
        out = tmp_path / f"{name}.json"
        assert main(common + ["--parallelism", par, "-o", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert json.loads(outputs[0])["provenance"]["samples"] == 50


@pytest.mark.criterion(11, "Markdown report has the six headline columns and both aggregation labels")
def test_criterion_11_report_fidelity(tmp_path):
    gt, pred = write_corpus(tmp_path, 5, seed=11)
    report = run_eval(EvalConfig(tasks=("objects", "humans", "logos", "ocr", "reliability")), ingest(gt, pred).samples)
    md = render_report(report, "markdown").decode()
    header = next(line for line in md.splitlines() if line.startswith("| Aggregation |"))
    columns = [c.strip() for c in header.strip("|").split("|")][1:]
    assert columns == ["Reliability", "Object F1", "Human F1", "Logo F1", "OCR F1", "Media F1"]
    assert PER_SAMPLE_AVERAGE == "Per-Sample Average" and CORPUS_LEVEL == "Corpus-Level"
    assert f"| {PER_SAMPLE_AVERAGE} |" in md and f"| {CORPUS_LEVEL} |" in md


@pytest.mark.criterion(12, "Reliability: 10 outputs, 2 fenced, 1 garbage gives strict 0.7, lenient 0.9")
def test_criterion_12_reliability(tmp_path):
    rng = random.Random(12)
    styles = ["clean"] * 7 + ["fenced"] * 2 + ["garbage"]
    gt_lines, pred_lines = [], []
    for k, style in enumerate(styles):
        rec = random_record(rng)
        gt_lines.append({"sample_id": f"r{k}", **record_to_dict(rec)})
        pred_lines.append({"sample_id": f"r{k}", "raw_output": raw_prediction_text(rng, perturb_record(rng, rec), style)})
    gt = tmp_path / "gt.jsonl"
    pred = tmp_path / "pred.jsonl"
    gt.write_text("".join(json.dumps(x) + "\n" for x in gt_lines))
    pred.write_text("".join(json.dumps(x) + "\n" for x in pred_lines))
    report = run_eval(EvalConfig(tasks=("reliability",)), ingest(gt, pred).samples)
    rel = report.corpus["reliability"]
    assert rel["strict_rate"] == 0.7 and rel["rate"] == 0.9 and rel["total"] == 10
