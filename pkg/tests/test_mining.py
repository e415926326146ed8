"""Margin threshold, candidate filtering, and seeded negative sampling."""

import random

import pytest

from embkit.errors import ValidationError
from embkit.fusion import Candidate, ChannelEvidence, TeacherScoreSet
from embkit.mining import (
    MiningConfig,
    filter_candidates,
    load_mined,
    margin_threshold,
    mine,
    sample_negatives,
    save_mined,
    subseed,
)


def teacher_set(query_id="q1", **scores):
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return TeacherScoreSet(
        query_id=query_id,
        candidates=tuple(Candidate(doc_id=d, fused_score=s) for d, s in ordered),
    )


class TestMarginThreshold:
    def test_hand_case(self):
        assert margin_threshold(0.8, 0.95) == 0.76

    def test_identity_margin(self):
        assert margin_threshold(0.37, 1.0) == 0.37

    def test_larger_scale(self):
        assert margin_threshold(10.0, 0.95) == 9.5

    def test_margin_range_enforced(self):
        with pytest.raises(ValidationError):
            margin_threshold(1.0, 0.0)
        with pytest.raises(ValidationError):
            margin_threshold(1.0, 1.5)


class TestFilterCandidates:
    def test_hand_case_excludes_above_threshold(self):
        ts = teacher_set(d1=0.9, d2=0.7, d3=0.5, p=0.8)
        pool = filter_candidates(ts, "p", margin=0.95)
        # threshold = 0.76; d1 at 0.9 is too close to the positive.
        assert [d for d, _ in pool.survivors] == ["d2", "d3"]
        assert pool.threshold == 0.76
        assert pool.positive_score == 0.8

    def test_boundary_score_retained(self):
        ts = teacher_set(p=0.8, d1=0.76, d2=0.5)
        pool = filter_candidates(ts, "p", margin=0.95)
        assert [d for d, _ in pool.survivors] == ["d1", "d2"]

    def test_positive_always_removed(self):
        ts = teacher_set(p=0.2, d1=0.1)
        pool = filter_candidates(ts, "p", margin=1.0)
        assert all(d != "p" for d, _ in pool.survivors)

    def test_positive_absent_without_score_is_error(self):
        ts = teacher_set(d1=0.9)
        with pytest.raises(ValidationError, match="positive 'p'"):
            filter_candidates(ts, "p", margin=0.95)

    def test_positive_absent_with_explicit_score(self):
        ts = teacher_set(d1=0.9, d2=0.5)
        pool = filter_candidates(ts, "p", margin=0.95, positive_score=1.0)
        assert [d for d, _ in pool.survivors] == ["d1", "d2"]
        assert pool.threshold == 0.95

    def test_widening_margin_never_shrinks_survivors(self):
        rng = random.Random(5)
        for _ in range(50):
            scores = {f"d{i}": rng.uniform(0, 1) for i in range(15)}
            scores["p"] = rng.uniform(0.3, 1.0)
            ts = teacher_set(**scores)
            survivors = [
                {d for d, _ in filter_candidates(ts, "p", margin=m).survivors}
                for m in (0.5, 0.7, 0.9, 1.0)
            ]
            for smaller, larger in zip(survivors, survivors[1:]):
                assert smaller <= larger

    def test_reranker_score_source(self):
        candidates = (
            Candidate("p", 0.04, {"reranker": ChannelEvidence(9.0, 1)}),
            Candidate("d1", 0.03, {"reranker": ChannelEvidence(8.9, 2)}),
            Candidate("d2", 0.02, {"reranker": ChannelEvidence(2.0, 3)}),
            Candidate("d3", 0.01, None),  # never seen by the reranker
        )
        ts = TeacherScoreSet(query_id="q1", candidates=candidates)
        pool = filter_candidates(ts, "p", margin=0.95, score_source="reranker")
        # threshold = 8.55; d1 at 8.9 excluded, d3 has no reranker score at all.
        assert [d for d, _ in pool.survivors] == [("d2")]
        assert pool.threshold == pytest.approx(9.0 * 0.95)


class TestSampleNegatives:
    def config(self, **kwargs):
        defaults = dict(margin=0.95, top_k=10, num_negatives=7, seed=1234)
        defaults.update(kwargs)
        return MiningConfig(**defaults)

    def big_pool(self, n=20):
        ts = teacher_set(p=1.0, **{f"d{i:02d}": 0.9 - i * 0.01 for i in range(n)})
        return filter_candidates(ts, "p", margin=0.95)

    def test_sample_from_top_k_reproducible(self):
        pool = self.big_pool(20)
        config = self.config()
        first = sample_negatives(pool, config)
        second = sample_negatives(pool, config)
        assert first == second
        assert len(first.negatives) == 7
        assert not first.shortfall
        top_ten = {d for d, _ in pool.survivors[:10]}
        assert {d for d, _ in first.negatives} <= top_ten

    def test_shortfall_returns_all(self):
        ts = teacher_set(p=1.0, **{f"d{i}": 0.5 - i * 0.01 for i in range(5)})
        pool = filter_candidates(ts, "p", margin=0.95)
        mined = sample_negatives(pool, self.config())
        assert len(mined.negatives) == 5
        assert mined.shortfall

    def test_empty_pool_flags_shortfall(self):
        ts = teacher_set(p=0.5, d1=0.9)  # d1 above threshold, nothing survives
        pool = filter_candidates(ts, "p", margin=0.95)
        mined = sample_negatives(pool, self.config())
        assert mined.negatives == ()
        assert mined.shortfall

    def test_invariants_hold_across_100_seeds(self):
        pool = self.big_pool(20)
        samples = set()
        for seed in range(100):
            mined = sample_negatives(pool, self.config(seed=seed))
            ids = [d for d, _ in mined.negatives]
            assert len(ids) == len(set(ids)) == 7
            assert pool.positive_id not in ids
            for _, score in mined.negatives:
                assert score <= mined.threshold
            assert mined.threshold == pool.positive_score * 0.95
            samples.add(tuple(ids))
        assert len(samples) > 1  # different seeds really do vary the draw

    def test_subseed_depends_on_query_and_seed(self):
        assert subseed(1, "q1") != subseed(1, "q2")
        assert subseed(1, "q1") != subseed(2, "q1")
        assert subseed(1, "q1") == subseed(1, "q1")

    def test_determinism_independent_of_processing_order(self):
        pools = {f"q{i}": self.big_pool(15) for i in range(5)}
        config = self.config()

        def run(order):
            out = {}
            for qid in order:
                pool = pools[qid]
                pool = type(pool)(
                    query_id=qid,
                    positive_id=pool.positive_id,
                    positive_score=pool.positive_score,
                    threshold=pool.threshold,
                    survivors=pool.survivors,
                )
                out[qid] = sample_negatives(pool, config)
            return out

        forward = run(sorted(pools))
        backward = run(sorted(pools, reverse=True))
        assert forward == backward


class TestMiningConfig:
    def test_num_negatives_bounded_by_top_k(self):
        with pytest.raises(ValidationError, match="top_k"):
            MiningConfig(margin=0.95, top_k=5, num_negatives=7, seed=0)

    def test_margin_range(self):
        with pytest.raises(ValidationError, match="margin"):
            MiningConfig(margin=1.5, top_k=10, num_negatives=7, seed=0)


def test_mine_composes_filter_and_sample():
    ts = teacher_set(p=1.0, **{f"d{i:02d}": 0.9 - i * 0.02 for i in range(12)})
    config = MiningConfig(margin=0.95, top_k=8, num_negatives=4, seed=7)
    mined = mine(ts, "p", config)
    assert len(mined.negatives) == 4
    assert all(score <= mined.threshold for _, score in mined.negatives)
    assert mined.seed == subseed(7, "q1")


def test_mined_file_roundtrip(tmp_path):
    ts = teacher_set(p=1.0, d1=0.5, d2=0.4, d3=0.3)
    config = MiningConfig(margin=0.95, top_k=3, num_negatives=2, seed=7)
    mined = [mine(ts, "p", config)]
    path = tmp_path / "mined.jsonl"
    save_mined(path, mined)
    assert load_mined(path) == mined
