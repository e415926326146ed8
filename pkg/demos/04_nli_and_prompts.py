#!/usr/bin/env python3
"""From NLI labels to similarity pairs, and from queries to instruction prompts.

Entailment pairs become high-similarity examples, contradictions become
low-similarity ones, and neutral pairs are dropped as ambiguous.  Queries
are then wrapped with a task instruction (and optional few-shot
demonstrations) into the exact string an embedding model would consume.
"""

from embkit.corpus import RawPair, dedup, expand_pairs
from embkit.forge import InstructionRegistry, NliRecord, convert_nli, format_prompt

NLI = [
    NliRecord("A man is playing a guitar.", "A person plays an instrument.", "entailment"),
    NliRecord("A man is playing a guitar.", "The man is on a stage.", "neutral"),
    NliRecord("A man is playing a guitar.", "Nobody is making music.", "contradiction"),
    NliRecord("Two dogs run on the beach.", "Animals are outdoors.", "entailment"),
]


def main():
    print("NLI input labels:", [r.label for r in NLI])
    converted = convert_nli(NLI, high=1.0, low=0.0)
    print(f"converted to {len(converted)} similarity pairs (neutral dropped):")
    for record in converted:
        print(f"  {record.similarity:.1f}  {record.sentence_a!r} / {record.sentence_b!r}")

    # Multi-positive expansion + dedup, the other data-prep half.
    pairs = [
        RawPair(query="capital of france", positives=("Paris.", "Paris is the capital."), source_task="MSMARCO"),
        RawPair(query="capital of france", positives=("Paris.",), source_task="MSMARCO"),
    ]
    expanded = list(expand_pairs(pairs))
    unique = dedup(expanded)
    print(f"\nexpanded {len(pairs)} raw pairs -> {len(expanded)} records -> {len(unique)} after dedup")

    registry = InstructionRegistry()
    print("\nsome registered instructions:")
    for task in ("ArguAna", "STS12", "SciDocsRR"):
        print(f"  {task:10} {registry.instruction_for(task)}")

    instruction = registry.instruction_for("MSMARCO")
    print("\nzero-shot prompt:")
    print(format_prompt(instruction, (), "capital of france"))

    print("\none-shot prompt:")
    shots = [("largest ocean on earth", "The Pacific Ocean is the largest ocean.")]
    print(format_prompt(instruction, shots, "capital of france"))


if __name__ == "__main__":
    main()
