#!/usr/bin/env python3
"""Adaptive margin-based mining: filter near-positives, sample the rest.

The teacher scored ten candidates for one query.  Anything scoring above
95% of the positive's score is suspiciously close -- likely an unlabeled
true positive -- and is excluded.  From the survivors, the top-K are kept
and a seeded random subset becomes the training negatives.
"""

from embkit.fusion import Candidate, TeacherScoreSet
from embkit.mining import MiningConfig, filter_candidates, margin_threshold, sample_negatives

SCORES = {
    "positive": 0.80,
    "paraphrase": 0.79,   # nearly identical to the positive: a false negative
    "close-dup": 0.77,
    "on-topic-1": 0.74,
    "on-topic-2": 0.70,
    "related-1": 0.55,
    "related-2": 0.48,
    "tangent": 0.33,
    "off-topic-1": 0.12,
    "off-topic-2": 0.05,
}


def main():
    ordered = sorted(SCORES.items(), key=lambda kv: (-kv[1], kv[0]))
    teacher = TeacherScoreSet(
        query_id="q42",
        candidates=tuple(Candidate(doc_id=d, fused_score=s) for d, s in ordered),
    )

    threshold = margin_threshold(SCORES["positive"], 0.95)
    print(f"positive score 0.80, margin 95% -> threshold {threshold}")

    pool = filter_candidates(teacher, "positive", margin=0.95)
    print("\nsurvivors (score <= threshold, positive removed):")
    for doc_id, score in pool.survivors:
        print(f"  {score:.2f}  {doc_id}")
    excluded = set(SCORES) - {d for d, _ in pool.survivors} - {"positive"}
    print(f"excluded as too close: {sorted(excluded)}")

    config = MiningConfig(margin=0.95, top_k=5, num_negatives=3, seed=7)
    mined = sample_negatives(pool, config)
    print(f"\nseeded draw of {config.num_negatives} from the top {config.top_k}:")
    for doc_id, score in mined.negatives:
        print(f"  {score:.2f}  {doc_id}")
    print(f"shortfall: {mined.shortfall}, per-query sub-seed: {mined.seed}")

    again = sample_negatives(pool, config)
    assert again == mined
    print("\nsame config and query -> the draw is reproducible")

    other = sample_negatives(pool, MiningConfig(margin=0.95, top_k=5, num_negatives=3, seed=8))
    print("seed 8 draws:", [d for d, _ in other.negatives])


if __name__ == "__main__":
    main()
