#!/usr/bin/env python3
"""Why leaderboards rank by Borda count instead of the raw mean.

One blowout score can win the mean while losing most head-to-head
comparisons.  Borda treats each task as a voter: a model earns a point per
model it beats on that task (half for ties), so consistent performers rise
even when a rival posts a single spectacular number.
"""

from embkit.evalagg import EvalMatrix, borda_rank, format_leaderboard, task_mean, weighted_mean


def main():
    tasks = [
        ("nq", "Retrieval"), ("fever", "Retrieval"), ("scidocs", "Reranking"),
        ("banking77", "Classification"), ("stsb", "STS"),
    ]
    scores = {
        ("steady", "nq"): 64.0, ("steady", "fever"): 71.0, ("steady", "scidocs"): 58.0,
        ("steady", "banking77"): 82.0, ("steady", "stsb"): 80.0,
        ("spiky", "nq"): 99.0, ("spiky", "fever"): 60.0, ("spiky", "scidocs"): 55.0,
        ("spiky", "banking77"): 81.0, ("spiky", "stsb"): 79.0,
        ("third", "nq"): 60.0, ("third", "fever"): 60.0, ("third", "scidocs"): 55.0,
        ("third", "banking77"): 70.0, ("third", "stsb"): 70.0,
    }
    matrix = EvalMatrix(models=["steady", "spiky", "third"], tasks=tasks, scores=scores)

    print("task means:")
    for model in matrix.models:
        print(f"  {model:7} {task_mean(matrix, model):.2f}")

    result = borda_rank(matrix)
    print("\nBorda points (each task votes, ties worth half):")
    for model in result.ranking:
        print(f"  {model:7} {result.points[model]:.1f}")
    print("\n'spiky' wins the mean on one blowout task but 'steady' wins the Borda ranking.")

    print("\ncategory-weighted mean (Retrieval triple-weighted):")
    weights = {"Retrieval": 3.0, "Reranking": 1.0, "Classification": 1.0, "STS": 1.0}
    for model in matrix.models:
        print(f"  {model:7} {weighted_mean(matrix, model, weights):.2f}")

    print("\nfull leaderboard:")
    print(format_leaderboard(matrix))


if __name__ == "__main__":
    main()
