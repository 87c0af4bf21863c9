# SPDX-License-Identifier: Apache-2.0
import json
import math

import pytest

import rlready as rr


def test_pass_at_k():
    assert rr.pass_at_k(4, 2, 1) == 0.5
    assert rr.pass_at_k(4, 2, 2) == pytest.approx(5 / 6, abs=1e-12)
    assert rr.pass_at_k(4, 3, 2) == 1.0
    with pytest.raises(rr.ValidationError):
        rr.pass_at_k(4, 5, 1)


def test_aggregate_all():
    outcomes = [
        rr.TaskOutcome("m", "aime", "t1", 4, 2),
        rr.TaskOutcome("m", "aime", "t2", 4, 0),
        rr.TaskOutcome("m", "math500", "t1", 4, 4),
    ]
    (metrics,) = rr.aggregate_all(outcomes, [1, 2])
    assert metrics.checkpoint_id == "m"
    assert metrics.pass1 == pytest.approx((0.25 + 1.0) / 2)
    assert metrics.passk.ks == [1, 2]
    micro = rr.aggregate_all(outcomes, [1], rr.Aggregation.MICRO)[0]
    assert micro.pass1 == pytest.approx(0.5)


def test_verifier():
    assert rr.extract_boxed("so the answer is \\boxed{27}") == "27"
    assert rr.extract_boxed("nothing") is None
    assert rr.normalize("\\dfrac{1}{20}") == "1/20"
    assert rr.answers_equal("0.5", "\\frac{1}{2}")
    assert not rr.answers_equal("27", "28")


def test_stats():
    fit = rr.fit_linear([0, 1, 2], [1, 3, 5])
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit(3.0) == pytest.approx(7.0)
    assert rr.r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert rr.spearman([1, 2, 3, 4], [1, 2, 4, 3]) == pytest.approx(0.8, abs=1e-12)
    xs = [0.05 * i for i in range(16)]
    res = rr.repeated_split_eval(xs, [0.3 * x + 0.1 for x in xs], 8, 50, 7)
    assert res.repeats == 50
    assert all(abs(v - 1.0) < 1e-12 for v in res.per_repeat_r2)
    threaded = rr.repeated_split_eval(xs, [math.sin(x) for x in xs], 8, 50, 7, threads=4)
    serial = rr.repeated_split_eval(xs, [math.sin(x) for x in xs], 8, 50, 7)
    assert threaded.per_repeat_r2 == serial.per_repeat_r2


def _candidate(cid, pass1, pass64, loss=None, label=None):
    return rr.Candidate(rr.CheckpointMetrics(cid, pass1, {1: pass1, 64: pass64}, loss), label)


def test_predict():
    cands = [
        _candidate("A", 0.5, 0.8, 1.0),
        _candidate("B", 0.6, 0.7, 0.9),
        _candidate("C", 0.4, 0.9, 0.8),
    ]
    ruled = rr.pareto_rule_out(cands)
    assert [(r.checkpoint_id, r.dominated_by) for r in ruled] == [("A", "B")]
    report = rr.rank_candidates(cands, 64)
    assert [e.checkpoint_id for e in report.ranked] == ["C", "B"]
    assert report.warning is None

    labeled = [_candidate(f"c{i}", 0.1 * i, 0.2 + 0.05 * i, label=0.1 + 0.02 * i) for i in range(6)]
    preds = rr.calibrate_and_predict(labeled, "passk:64")
    assert preds["c3"] == pytest.approx(0.16, abs=1e-12)
    res = rr.evaluate_metric(labeled, "pass1", 3, 20, 1)
    assert res.mean_r2 == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(rr.ValidationError):
        rr.calibrate_and_predict(labeled, "passk:")


def test_genloss_and_curate():
    records = [rr.GenLossRecord("m", "e1", 2.0, 4), rr.GenLossRecord("m", "e2", 4.0, 2)]
    assert rr.aggregate_genloss(records) == pytest.approx(1.0)
    assert rr.aggregate_genloss(records, rr.GenLossMode.PER_EXAMPLE) == pytest.approx(1.25)

    data = [rr.SftExample(f"e{i}", "p", "x" * (i + 1), i + 1) for i in range(10)]
    short = rr.select(data, rr.Strategy.SHORTEST, 3)
    assert [e.example_id for e in short] == ["e0", "e1", "e2"]
    a = rr.select(data, rr.Strategy.RANDOM, 4, seed=5)
    b = rr.select(list(reversed(data)), rr.Strategy.RANDOM, 4, seed=5)
    assert [e.example_id for e in a] == [e.example_id for e in b]
    train, val = rr.split_validation(data, 0.2, 3)
    assert len(val) == 2 and len(train) == 8
    assert rr.measure_length("a b  c", rr.LengthFn.WHITESPACE_TOKENS) == 3


def test_cli(tmp_path):
    outcomes = tmp_path / "outcomes.jsonl"
    outcomes.write_text(json.dumps({"checkpoint_id": "m", "benchmark": "b", "task_id": "t", "n": 4, "c": 4}) + "\n")
    code, out, err = rr.run_cli(["passk", "--outcomes", str(outcomes), "--ks", "1,2", "--out", "-"])
    assert code == 0, err
    assert out.splitlines()[0].startswith("checkpoint_id")
    code, _, err = rr.run_cli(["passk", "--outcomes", str(tmp_path / "missing.jsonl"), "--out", "-"])
    assert code == 2
    assert err.startswith("rlready: error[io]")
    assert len(rr.load_outcomes(outcomes)) == 1
