"""Blow-up toward the ceiling and the exterior limit profile.

As the growth rate approaches the refuge ceiling, the steady state
diverges on compacts inside the refuges while settling outside.  A ramp
of large Dirichlet values on the refuge boundaries stands in for the
divergent data; its solutions stagnate away from the refuges and give the
minimal exterior profile that the steady branch approaches.
"""

import numpy as np

from membrane_logistic import (
    Geometry,
    ProblemSpec,
    RefugeRegion,
    blowup_sweep,
    discrete_ceiling,
    discretize,
    exterior_convergence,
    minimal_large_solution,
)

spec = ProblemSpec(
    Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=3.0,
    a1=100.0, a2=100.0,
    refuges=(RefugeRegion(1, (0.2, 0.25)), RefugeRegion(2, (0.7, 0.75))),
)
disc = discretize(spec, 640)
ceiling = discrete_ceiling(disc)
print(f"discrete ceiling: {ceiling:.6f}\n")

lams = [ceiling * (1.0 - 0.1 * 2.0 ** (-j)) for j in range(7)]
records = blowup_sweep(disc, lams)
print("  lambda          max on refuge 1   max on refuge 2")
for rec in records:
    print(f"  {rec.lam:12.5f}   {rec.max_on_K1:14.2f}   "
          f"{rec.max_on_K2:14.2f}")

print("\nramping the refuge boundary data:")
large = minimal_large_solution(disc, ceiling,
                               [10.0, 100.0, 1000.0, 10000.0])
for M, diff in zip(large.ramp_values[1:], large.diffs_on_compact):
    print(f"  data {M:8.0f}: moved the exterior compact by {diff:.2e}")

pairs = exterior_convergence(disc, records, large)
print("\ndistance from the sweep states to the exterior limit:")
for lam, diff in pairs:
    print(f"  lambda = {lam:10.4f}:  sup distance = {diff:.4e}")
