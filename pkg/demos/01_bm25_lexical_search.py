#!/usr/bin/env python3
"""Walkthrough of the lexical channel: tokenize, index, score, search.

Builds a ten-document toy corpus in memory, inspects the index statistics,
scores one query by hand, and compares the ranked search output.
"""

from embkit.corpus import Document, Query
from embkit.lexical import Bm25Params, bm25_score, build_index, idf, search_lexical, tokenize

TEXTS = {
    "apollo": "the apollo program landed astronauts on the moon",
    "artemis": "the artemis program aims to return astronauts to the moon",
    "voyager": "voyager probes left the solar system carrying golden records",
    "hubble": "the hubble telescope photographs distant galaxies",
    "webb": "the webb telescope observes the early universe in infrared",
    "iss": "astronauts live and work aboard the international space station",
    "rover": "a rover drills into martian rock searching for ancient life",
    "kepler": "kepler discovered thousands of planets around other stars",
    "cassini": "cassini orbited saturn and dove through its rings",
    "sputnik": "sputnik was the first artificial satellite in orbit",
}


def main():
    print("tokenize('The Moon, the MOON!') ->", tokenize("The Moon, the MOON!"))

    corpus = [Document(id=doc_id, text=text) for doc_id, text in TEXTS.items()]
    index = build_index(corpus)
    params = Bm25Params()  # k1=1.2, b=0.75
    print(f"\nindexed {index.doc_count} docs, {len(index.postings)} distinct terms, "
          f"avg length {index.avg_length:.2f} tokens")

    # Rare terms earn higher idf than common ones.
    for term in ("astronauts", "telescope", "sputnik", "warpdrive"):
        print(f"  idf({term!r:14}) = {idf(index, term):.4f}  (df={index.doc_frequency(term)})")

    query = Query(id="q", text="astronauts on the moon", task="MSMARCO")
    print(f"\nquery: {query.text!r}")
    print("per-document scores:")
    for doc_id in TEXTS:
        print(f"  {doc_id:8} {bm25_score(index, params, query, doc_id):7.4f}")

    print("\ntop 3 by search_lexical:")
    for doc_id, score in search_lexical(index, params, query, 3).entries:
        print(f"  {score:7.4f}  {doc_id:8} {TEXTS[doc_id]}")


if __name__ == "__main__":
    main()
