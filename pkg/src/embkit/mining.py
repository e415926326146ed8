"""Adaptive margin-based hard-negative mining.

A negative candidate is admissible only while its teacher score stays at or
below a fixed fraction of the positive's score:

    threshold = positive_score * margin

Candidates scoring above the threshold are too close to the positive and
are excluded as likely false negatives; the boundary itself is inclusive
("maximum allowable" means allowed).  From the survivors, the top_k best
are kept and a seeded random subset of num_negatives is drawn to promote
diversity without sacrificing reproducibility.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Iterable

from . import jsonl
from .errors import RecordError, ValidationError
from .fusion import TeacherScoreSet
from .ranking import CHANNEL_RERANKER

SCORE_SOURCE_FUSED = "fused"
SCORE_SOURCE_RERANKER = "reranker"


@dataclass(frozen=True)
class MiningConfig:
    margin: float = 0.95
    top_k: int = 100
    num_negatives: int = 7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.margin <= 1.0:
            raise ValidationError(f"margin must be in (0, 1], got {self.margin}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")
        if self.num_negatives < 1:
            raise ValidationError(f"num_negatives must be >= 1, got {self.num_negatives}")
        if self.num_negatives > self.top_k:
            raise ValidationError(
                f"num_negatives ({self.num_negatives}) must not exceed top_k ({self.top_k})"
            )


@dataclass(frozen=True)
class CandidatePool:
    """Margin-filtered negative candidates for one (query, positive) pair.

    Survivors are ordered by teacher score descending (ties by ascending
    doc id) and every survivor satisfies score <= threshold.
    """

    query_id: str
    positive_id: str
    positive_score: float
    threshold: float
    survivors: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class MinedNegatives:
    query_id: str
    positive_id: str
    positive_score: float
    threshold: float
    negatives: tuple[tuple[str, float], ...]
    shortfall: bool
    seed: int


def margin_threshold(positive_score: float, margin: float) -> float:
    """Maximum allowable teacher score for a negative: positive_score * margin."""
    if not 0.0 < margin <= 1.0:
        raise ValidationError(f"margin must be in (0, 1], got {margin}")
    return positive_score * margin


def filter_candidates(
    candidates: TeacherScoreSet,
    positive_id: str,
    margin: float,
    positive_score: float | None = None,
    score_source: str = SCORE_SOURCE_FUSED,
) -> CandidatePool:
    """Drop the positive and everything scoring above the margin threshold.

    The teacher score is the fused value by default, or the raw reranker
    score when score_source is "reranker" (candidates the reranker never
    saw are then out of consideration).  When positive_score is not given
    it is read from the candidate set; a positive absent from the
    candidates must come with an explicit score.
    """
    if score_source == SCORE_SOURCE_FUSED:
        scored = candidates.fused()
    elif score_source == SCORE_SOURCE_RERANKER:
        scored = candidates.channel_scores(CHANNEL_RERANKER)
    else:
        raise ValidationError(f"unknown score source '{score_source}'")

    if positive_score is None:
        if positive_id not in scored:
            raise ValidationError(
                f"positive '{positive_id}' absent from candidates for query "
                f"'{candidates.query_id}' and no positive_score supplied"
            )
        positive_score = scored[positive_id]

    threshold = margin_threshold(positive_score, margin)
    survivors = [
        (doc_id, score)
        for doc_id, score in scored.items()
        if doc_id != positive_id and score <= threshold
    ]
    survivors.sort(key=lambda item: (-item[1], item[0]))
    return CandidatePool(
        query_id=candidates.query_id,
        positive_id=positive_id,
        positive_score=positive_score,
        threshold=threshold,
        survivors=tuple(survivors),
    )


def subseed(seed: int, query_id: str) -> int:
    """Stable per-query seed derived from the global seed.

    Hash-based so results do not depend on thread count or the order
    queries are processed in.
    """
    digest = hashlib.sha256(f"{seed}:{query_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def sample_negatives(pool: CandidatePool, config: MiningConfig) -> MinedNegatives:
    """Draw num_negatives survivors uniformly without replacement from the top_k.

    The draw is seeded by (config.seed, query_id); identical inputs always
    reproduce the identical sample.  When fewer than num_negatives survive,
    all of them are returned and the shortfall flag is set.
    """
    top = list(pool.survivors[: config.top_k])
    draw_seed = subseed(config.seed, pool.query_id)
    take = min(config.num_negatives, len(top))
    rng = random.Random(draw_seed)
    negatives = tuple(rng.sample(top, take))
    return MinedNegatives(
        query_id=pool.query_id,
        positive_id=pool.positive_id,
        positive_score=pool.positive_score,
        threshold=pool.threshold,
        negatives=negatives,
        shortfall=take < config.num_negatives,
        seed=draw_seed,
    )


def mine(
    candidates: TeacherScoreSet,
    positive_id: str,
    config: MiningConfig,
    positive_score: float | None = None,
    score_source: str = SCORE_SOURCE_FUSED,
) -> MinedNegatives:
    """Filter by margin, truncate to top_k, then sample: the full mining step."""
    pool = filter_candidates(
        candidates, positive_id, config.margin,
        positive_score=positive_score, score_source=score_source,
    )
    return sample_negatives(pool, config)


def save_mined(path, mined: Iterable[MinedNegatives]) -> int:
    return jsonl.write_records(
        path,
        (
            {
                "query_id": m.query_id,
                "positive_id": m.positive_id,
                "positive_score": m.positive_score,
                "threshold": m.threshold,
                "negatives": [{"doc_id": d, "score": s} for d, s in m.negatives],
                "shortfall": m.shortfall,
                "seed": m.seed,
            }
            for m in mined
        ),
    )


def load_mined(path) -> list[MinedNegatives]:
    records: list[MinedNegatives] = []
    for lineno, record in jsonl.iter_records(path):
        try:
            records.append(
                MinedNegatives(
                    query_id=str(record["query_id"]),
                    positive_id=str(record["positive_id"]),
                    positive_score=float(record["positive_score"]),
                    threshold=float(record["threshold"]),
                    negatives=tuple(
                        (str(n["doc_id"]), float(n["score"])) for n in record["negatives"]
                    ),
                    shortfall=bool(record["shortfall"]),
                    seed=int(record["seed"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise RecordError(path, lineno, f"invalid mined record: {exc}") from exc
    return records
