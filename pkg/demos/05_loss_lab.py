#!/usr/bin/env python3
"""Numerical tour of the contrastive objectives.

Evaluates InfoNCE on hand-checkable points, shows how temperature sharpens
the softmax, distills a teacher distribution into the same batch, and
verifies every analytic gradient against central finite differences.
"""

import math

import numpy as np

from embkit.loss import (
    SimBatch,
    TeacherDistribution,
    blended_loss,
    cosine_sim,
    distill_grad_check,
    infonce_grad,
    infonce_grad_check,
    infonce_loss,
    soft_distill_loss,
)


def main():
    print(f"cosine_sim([1,0],[1,1]) = {cosine_sim([1, 0], [1, 1]):.5f}  (1/sqrt(2))")

    sym = SimBatch(sims_pos=np.array([0.0]), sims_neg=[np.array([0.0])], tau=1.0)
    print(f"\nInfoNCE, positive tied with one negative: {infonce_loss(sym):.6f} = ln 2 = {math.log(2):.6f}")
    print(f"gradient at that point: {infonce_grad(sym)}  (d/ds_pos = -1/2)")

    sep = SimBatch(sims_pos=np.array([1.0]), sims_neg=[np.array([0.0])], tau=1.0)
    print(f"positive one unit ahead: {infonce_loss(sep):.6f} = log(1 + e^-1)")

    print("\ntemperature sweep on the separated point:")
    for tau in (2.0, 1.0, 0.5, 0.1):
        batch = SimBatch(sims_pos=np.array([1.0]), sims_neg=[np.array([0.0])], tau=tau)
        print(f"  tau={tau:4}  loss={infonce_loss(batch):.6f}")

    # In-batch negatives: the other query's positive joins each denominator.
    two = SimBatch(sims_pos=np.array([0.6, 0.4]), sims_neg=[np.array([0.1]), np.array([0.2])], tau=1.0)
    two_ib = SimBatch(sims_pos=two.sims_pos, sims_neg=two.sims_neg, tau=1.0, in_batch=True)
    print(f"\nwithout in-batch negatives: {infonce_loss(two):.6f}")
    print(f"with in-batch negatives:    {infonce_loss(two_ib):.6f}  (harder task, larger loss)")

    teacher = TeacherDistribution(scores=[np.array([2.0, 0.5]), np.array([1.5, 1.0])], tau=1.0)
    kd = soft_distill_loss(two, teacher)
    print(f"\ndistillation loss against a sharper teacher: {kd:.6f}")
    print(f"blend 0.5*InfoNCE + 0.5*distill: {blended_loss(two, teacher, 0.5):.6f}")
    matched = TeacherDistribution(
        scores=[np.concatenate([two.sims_pos[i:i + 1], two.sims_neg[i]]) for i in range(2)],
        tau=1.0,
    )
    print(f"distillation when teacher == student: {soft_distill_loss(two, matched):.6f}")

    rng = np.random.default_rng(99)
    batch = SimBatch(
        sims_pos=rng.uniform(-2, 2, size=6),
        sims_neg=[rng.uniform(-2, 2, size=5) for _ in range(6)],
        tau=0.7,
        in_batch=True,
    )
    teacher = TeacherDistribution(scores=[rng.uniform(-2, 2, size=6) for _ in range(6)], tau=0.9)
    print(f"\nfinite-difference gradient checks on a random batch:")
    print(f"  infonce max relative error: {infonce_grad_check(batch):.2e}")
    print(f"  distill max relative error: {distill_grad_check(batch, teacher):.2e}")


if __name__ == "__main__":
    main()
