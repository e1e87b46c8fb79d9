"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even when
output capture is on) or directly with ``python tests/test_acceptance.py``.
"""

import itertools
import json
import math
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from spatialqa import accddoa as A
from spatialqa import benchmark as bm
from spatialqa import features as F
from spatialqa import fusion as fu
from spatialqa import llm
from spatialqa import motion as mo
from spatialqa import reasoning as rs
from spatialqa.cli import main as cli_main
from spatialqa.synth import perturb_scene, synth_corpus
from spatialqa.tracks import EventTrack, scene_to_csv

TOL = mo.Tolerances()


@pytest.fixture
def report(request, capsys):
    def emit(ok: bool, detail: str):
        line = f"[acceptance {request.node.callspec.id if hasattr(request.node, 'callspec') else request.node.name}] " \
               f"{'PASS' if ok else 'FAIL'}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, detail
    return emit


class Checks:
    """Collects failures so one line can summarize a whole criterion."""

    def __init__(self):
        self.failures = []

    def check(self, cond, what):
        if not cond:
            self.failures.append(what)

    @property
    def ok(self):
        return not self.failures

    def detail(self, summary):
        return summary if self.ok else summary + " | failed: " + "; ".join(self.failures[:5])


# 1 --------------------------------------------------------------------------

def test_criterion_01_feature_invariants(report):
    c = Checks()
    worst_unit = worst_sine = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        left, right = rng.uniform(-1, 1, (2, 24000))
        clip = F.StereoClip(left, right, 24000)
        cfg = F.FrontendConfig()
        L = F.stft(left, 24000, cfg.win_len, cfg.hop_len, cfg.nfft)
        R = F.stft(right, 24000, cfg.win_len, cfg.hop_len, cfg.nfft)
        grid = F.ipd(L, R)
        worst_unit = max(worst_unit, float(np.abs(np.cos(grid) ** 2 + np.sin(grid) ** 2 - 1).max()))
        same = F.extract_features(F.StereoClip(left, left, 24000)).data
        worst_sine = max(worst_sine, float(np.abs(same[3]).max()))
        z, zs = F.extract_features(clip).data, F.extract_features(clip.swapped()).data
        c.check(np.array_equal(zs[3], -z[3]) and np.array_equal(zs[2], z[2]), f"swap antisymmetry seed {seed}")
    c.check(worst_unit <= 1e-9, f"cos^2+sin^2 deviation {worst_unit:.2e}")
    c.check(worst_sine <= 1e-9, f"identical-channel sine {worst_sine:.2e}")
    report(c.ok, c.detail(f"100 clips; max |cos^2+sin^2-1| = {worst_unit:.1e}, "
                          f"max identical-channel |sin| = {worst_sine:.1e}, swap exact"))


# 2 --------------------------------------------------------------------------

def test_criterion_02_fusion_contracts(report):
    c = Checks()
    rng = np.random.default_rng(2024)
    worst_row = worst_hom = 0.0
    for i in range(50):
        T, N, d = int(rng.integers(1, 9)), int(rng.integers(1, 7)), int(rng.integers(1, 17))
        Z, E = rng.standard_normal((T, N, d)), rng.standard_normal((N, d))
        H, w = fu.cross_attention(Z, E, return_weights=True)
        worst_row = max(worst_row, float(np.abs(w.sum(-1) - 1).max()))
        c.check(np.all(w >= 0), f"negative weight instance {i}")
        P = rng.uniform(0, 1, (T, N)) * (rng.uniform(size=(T, N)) > 0.3)
        out = fu.fuse_and_gate(Z, H, P)
        c.check(out.shape == (T, N, 2 * d), f"shape {out.shape} instance {i}")
        c.check(np.all(out[P == 0] == 0), f"nonzero gated slice instance {i}")
        alpha = float(rng.uniform())
        worst_hom = max(worst_hom, float(np.abs(fu.fuse_and_gate(Z, H, alpha * P) - alpha * out).max()))
    c.check(worst_row <= 1e-6, f"row sum deviation {worst_row:.2e}")
    c.check(worst_hom <= 1e-9, f"homogeneity deviation {worst_hom:.2e}")
    report(c.ok, c.detail(f"50 instances; row-sum dev {worst_row:.1e}, homogeneity dev {worst_hom:.1e}, "
                          "zero gates exact, shapes T x N x 2d"))


# 3 --------------------------------------------------------------------------

def _pit_brute_force(pred, target):
    T, K, C, _ = pred.shape
    total = 0.0
    for c in range(C):
        best = math.inf
        for perm in itertools.permutations(range(K)):
            err = sum((pred[t, perm[k], c, j] - target[t, k, c, j]) ** 2
                      for t in range(T) for k in range(K) for j in range(3))
            best = min(best, err / (T * K * 3))
        total += best
    return total / C


def test_criterion_03_pit_oracle(report):
    c = Checks()
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(200):
        T, K, C = int(rng.integers(1, 5)), int(rng.choice([2, 3])), int(rng.integers(1, 4))
        pred, target = rng.uniform(-1, 1, (2, T, K, C, 3))
        loss = A.pit_loss(pred, target)
        worst = max(worst, abs(loss - _pit_brute_force(pred, target)))
        permuted = target.copy()
        for cls in range(C):
            permuted[:, :, cls] = target[:, rng.permutation(K), cls]
        c.check(A.pit_loss(pred, permuted) == loss, f"permuted target changed loss, instance {i}")
        c.check(A.pit_loss(pred, pred) == 0.0, f"self loss nonzero, instance {i}")
    c.check(worst <= 1e-9, f"brute-force deviation {worst:.2e}")
    report(c.ok, c.detail(f"200 instances; max |pit - brute force| = {worst:.1e}, permutation-exact, self-loss 0"))


# 4 --------------------------------------------------------------------------

def test_criterion_04_metrics_sanity(report):
    c = Checks()
    FL = A.FrameLabel
    refs = [FL(f, cls, k, az, d) for f, cls, k, az, d in
            [(0, 0, 0, 10.0, 2.0), (0, 0, 1, -60.0, 4.5), (3, 5, 0, 80.0, 0.7)]]
    m = A.seld_metrics(refs, refs)
    c.check((m.f_score, m.doa_error_deg, m.rel_dist_error) == (1.0, 0.0, 0.0), f"perfect {m}")
    m25 = A.seld_metrics([FL(0, 0, 0, 25.0, 2.0)], [FL(0, 0, 0, 0.0, 2.0)], 20.0, 1.0)
    c.check((m25.tp, m25.fp, m25.fn, m25.f_score) == (0, 1, 1, 0.0), f"25 deg case {m25}")
    hand = A.seld_metrics([FL(0, 0, 0, 10.0, 2.4)], [FL(0, 0, 0, 0.0, 2.0)], 20.0, 1.0)
    expected = (2 * 1 / (2 * 1 + 0 + 0), 10.0, abs(2.4 - 2.0) / 2.0)
    got = (hand.f_score, hand.doa_error_deg, hand.rel_dist_error)
    c.check(all(abs(a - b) <= 1e-9 for a, b in zip(got, expected)), f"hand case {got}")
    row = A.SeldMetrics(0.225, 24.39, 0.305).table().splitlines()[1]
    c.check([x.strip() for x in row.split("|")] == ["22.5", "24.39", "0.305"], f"table row {row!r}")
    report(c.ok, c.detail("perfect = (1.0, 0.0, 0.0); 25 deg -> F 0; (10 deg, 0.2) exact; "
                          "table renders 22.5 | 24.39 | 0.305"))


# 5 --------------------------------------------------------------------------

def _reference_bucket(az):
    if az > 45:
        return mo.DoABucket.FRONT_LEFT
    if az > 15:
        return mo.DoABucket.SLIGHTLY_LEFT
    if az >= -15:
        return mo.DoABucket.FRONT
    if az >= -45:
        return mo.DoABucket.SLIGHTLY_RIGHT
    return mo.DoABucket.FRONT_RIGHT


def _answers(scene):
    items, _ = bm.generate_qa(scene, bm.ALL_CATEGORIES, TOL, 0)
    return items, [bm.answer_query(scene, it.query, TOL) for it in items]


def test_criterion_05_buckets_and_tolerance_robustness(report):
    c = Checks()
    for tenth in range(-900, 901):
        az = tenth / 10
        c.check(mo.bucket_of(az) is _reference_bucket(az), f"bucket at {az}")
    # per-frame noise strictly below half of each tolerance, so noise alone
    # never produces a frame-to-frame change that reaches the tolerance
    doa_amp, dist_amp = 0.999 * TOL.doa_deg / 2, 0.999 * TOL.dist_m / 2
    changed = total = 0
    full_changed = 0
    for i, scene in enumerate(synth_corpus(100, seed=5)):
        items, clean = _answers(scene)
        for trial in range(3):
            rng = random.Random(f"{i}-{trial}")
            noisy = perturb_scene(scene, rng, doa_amp, dist_amp)
            got = [bm.answer_query(noisy, it.query, TOL) for it in items]
            changed += sum(a != b for a, b in zip(got, clean))
            total += len(items)
        full = perturb_scene(scene, random.Random(f"full-{i}"), 0.999 * TOL.doa_deg, 0.999 * TOL.dist_m)
        full_changed += sum(bm.answer_query(full, it.query, TOL) != a for it, a in zip(items, clean))
    c.check(changed == 0, f"{changed} of {total} answers changed under sub-tolerance noise")
    report(c.ok, c.detail(
        f"0.1 deg grid matches the five ranges; {changed}/{total} answers changed under noise "
        f"< tol/2 over 100 scenes x 3 draws (info: {full_changed} changed at noise < full tol)"))


# 6 --------------------------------------------------------------------------

def test_criterion_06_rate_comparison(report):
    c = Checks()
    track = EventTrack("src", [0, 1], [0.0, 10.0], [2.0, 3.0])
    s = mo.summarize_motion(track, TOL)
    c.check(abs(s.dist_range_fraction - 1 / 6) <= 1e-12, f"dist fraction {s.dist_range_fraction}")
    c.check(abs(s.doa_range_fraction - 10 / 180) <= 1e-12, f"doa fraction {s.doa_range_fraction}")
    c.check(Fraction(1, 6) - Fraction(10, 180) == Fraction(1, 9), "exact fraction gap")
    verdict = mo.dominant_change(track, TOL)
    c.check(verdict is mo.DominantChange.DISTANCE, f"verdict {verdict}")
    report(c.ok, c.detail(f"1 m vs 10 deg -> {verdict.value}; fractions 1/6 and 1/18 to 1e-12"))


# 7 --------------------------------------------------------------------------

def test_criterion_07_oracle_closure(report):
    c = Checks()
    scenes = {s.clip_id: s for s in synth_corpus(100, seed=7)}
    items = []
    for s in scenes.values():
        items.extend(bm.generate_qa(s, bm.ALL_CATEGORIES, TOL, seed=7)[0])
    text = bm.serialize_benchmark(items)
    parsed = bm.parse_benchmark(text)
    problems = [p for it in parsed for p in bm.item_problems(it)]
    c.check(parsed == items and not problems, f"round trip ({len(problems)} diagnostics)")
    c.check(all(it.query is not None for it in parsed), "unrecognized prompts after parsing")
    answers = [rs.AnswerRecord(k[0], k[1], "", rs.rule_answer(scenes[k[0]], it, TOL))
               for k, it in zip(bm.item_keys(parsed), parsed)]
    result = rs.score(parsed, answers)
    c.check(result.overall_accuracy == 1.0, f"overall {result.overall_accuracy}")
    counts = {k: v.total for k, v in result.per_category.items()}
    c.check(all(counts[cat.value] > 0 for cat in bm.Category), f"empty category {counts}")
    report(c.ok, c.detail(f"{len(items)} items over 100 scenes, overall 1.0, per category {counts}, "
                          "parse round trip with 0 diagnostics"))


# 8 --------------------------------------------------------------------------

def test_criterion_08_scoring_arithmetic(report):
    c = Checks()
    plan = {  # category -> (kind, slots, qtype, total, correct)
        "DoA": (bm.Query("trajectory", 0, (("a", "x"), ("dst", "front"), ("src", "left side"))), 53, 19),
        "DistDyn": (bm.Query("distance_trend", 0, (("a", "x"),)), 40, 31),
        "CrossSrc": (bm.Query("cross_bool_closest_approach", 0, (("a", "x"), ("b", "y"))), 25, 4),
        "Dist vs DoA": (bm.Query("dominant", 2, (("a", "x"),)), 12, 12),
    }
    items, answers = [], []
    expect_type = {bm.MCQ: [0, 0], bm.BOOLEAN: [0, 0]}
    for cat, (q, total, correct) in plan.items():
        kind_choices = {"distance_trend": bm.DISTANCE_CHOICES, "dominant": bm.DOMINANT_CHOICES}.get(q.kind)
        for i in range(total):
            clip = f"{cat}-{i}"
            if kind_choices:
                item = bm.QAItem(clip, bm.MCQ, q.render(), kind_choices[0], bm.CHOICE_MATCH, kind_choices)
                wrong = kind_choices[1]
            else:
                item = bm.QAItem(clip, bm.BOOLEAN, q.render(), bm.YES, bm.EXACT)
                wrong = bm.NO
            items.append(item)
            answers.append(rs.AnswerRecord(clip, 0, "", item.answer if i < correct else wrong))
            expect_type[item.qtype][0] += i < correct
            expect_type[item.qtype][1] += 1
    parsed = bm.parse_benchmark(bm.serialize_benchmark(items))
    result = rs.score(parsed, answers)
    for cat, (_, total, correct) in plan.items():
        c.check(result.per_category[cat].fraction == Fraction(correct, total), f"{cat} fraction")
    for qtype, (correct, total) in expect_type.items():
        c.check(result.per_type[qtype].fraction == Fraction(correct, total), f"{qtype} fraction")
    n_correct = sum(p[2] for p in plan.values())
    n_total = sum(p[1] for p in plan.values())
    c.check(result.overall.fraction == Fraction(n_correct, n_total), "overall fraction")
    c.check(result.overall_accuracy == n_correct / n_total, "overall float")
    table = result.table("toy")
    c.check("35.8%" in table.splitlines()[1].split("|")[1], f"DoA cell in {table!r}")
    report(c.ok, c.detail(f"per-category, per-type and overall fractions exact "
                          f"({n_correct}/{n_total}); DoA 19/53 renders as 35.8%"))


# 9 --------------------------------------------------------------------------

def test_criterion_09_llm_client_contract(report, chat_stub, api_key, tmp_path):
    c = Checks()
    t0 = time.perf_counter()

    def cfg(url, **kw):
        return llm.LlmEndpointConfig(url, "toy", api_key_env=api_key, backoff_base_s=0.01, timeout_s=5, **kw)

    stub = chat_stub(script=[(500, "e"), (500, "e"), (200, "Yes")])
    c.check(llm.query_llm(cfg(stub.url, max_retries=3), "s", "u") == "Yes", "retry result")
    c.check(len(stub.requests) == 3, f"retry requests {len(stub.requests)}")

    stub = chat_stub(default=(401, "no"))
    try:
        llm.query_llm(cfg(stub.url), "s", "u")
        c.check(False, "401 did not raise")
    except llm.LlmAuthError:
        pass
    c.check(len(stub.requests) == 1, f"401 requests {len(stub.requests)}")

    scenes = {s.clip_id: s for s in synth_corpus(10, seed=9)}
    items = [it for s in scenes.values() for it in bm.generate_qa(s, bm.ALL_CATEGORIES, TOL, 9)[0]]
    stub = chat_stub(delay_s=0.03, reply=lambda body: "Answer: No")
    journal = llm.Journal(tmp_path / "journal.jsonl")
    first = llm.answer_with_llm(items, scenes, cfg(stub.url, max_parallel=4), journal)
    c.check(first.answered == len(items), "not all items answered")
    c.check(stub.max_in_flight <= 4, f"peak in flight {stub.max_in_flight}")
    n = len(stub.requests)
    again = llm.answer_with_llm(items, scenes, cfg(stub.url, max_parallel=4), journal)
    c.check(len(stub.requests) == n and again.skipped == len(items), "resume re-sent requests")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 30, f"runtime {elapsed:.1f}s")
    report(c.ok, c.detail(f"500,500,200 -> 3 requests; 401 -> 1 request; peak in flight "
                          f"{stub.max_in_flight} <= 4 over {n} requests; resume sent 0; {elapsed:.1f}s"))


# 10 -------------------------------------------------------------------------

def _pipeline(root: Path) -> dict[str, bytes]:
    meta = root / "meta"
    meta.mkdir(parents=True)
    for scene in synth_corpus(100, seed=10):
        (meta / f"{scene.clip_id}.csv").write_text(scene_to_csv(scene), encoding="utf-8")
    out = root / "out"
    steps = [
        ["gen-benchmark", str(meta), "--out-dir", str(out), "--seed", "10"],
        ["answer", str(out / "benchmark.json"), str(out / "manifest.json"), "--out-dir", str(out)],
        ["score", str(out / "benchmark.json"), str(out / "answers.jsonl"), "--out-dir", str(out)],
    ]
    for argv in steps:
        status = cli_main(argv)
        if status != 0:
            raise AssertionError(f"{argv[0]} exited {status}")
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_criterion_10_end_to_end_cli(report, tmp_path, capsys):
    c = Checks()
    t0 = time.perf_counter()
    first = _pipeline(tmp_path / "run1")
    elapsed = time.perf_counter() - t0
    second = _pipeline(tmp_path / "run2")
    capsys.readouterr()
    c.check(elapsed < 10, f"runtime {elapsed:.1f}s")
    c.check(first == second, "reruns differ")
    rep = json.loads(first["report.json"])
    c.check(rep["overall_accuracy"] == 1.0, f"overall {rep['overall_accuracy']}")
    n_items = len(json.loads(first["benchmark.json"]))
    report(c.ok, c.detail(f"100 clips -> {n_items} items -> oracle -> report in {elapsed:.2f}s; "
                          f"{len(first)} output files byte-identical on rerun"))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
