"""Spectral thresholds of the membrane-coupled system against closed forms.

The symmetric split of the unit interval has an eigenfunction with no jump
across the membrane, so the growth threshold is pi**2 for every value of
the permeability.  Turning the permeability off decouples the two sides
into mixed Dirichlet/zero-flux problems whose eigenvalues are classical,
and the principal eigenfunction lives on one side only.
"""

import math

import numpy as np

from membrane_logistic import (
    Geometry,
    ProblemSpec,
    RefugeRegion,
    discretize,
    find_lambda_infinity,
    find_lambda_star,
    sigma_of_lambda,
)

print("=== growth threshold, symmetric membrane ===")
for mu in (0.1, 1.0, 10.0):
    spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5), mu=mu)
    lam = find_lambda_star(discretize(spec, 512))
    print(f"  mu = {mu:5.1f}:  lambda* = {lam:.10f}   "
          f"(pi^2 = {math.pi**2:.10f})")

print("\n=== zero permeability: the sides decouple ===")
spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 1.0 / 3.0), mu=0.0)
disc = discretize(spec, 512)
lam = find_lambda_star(disc)
_, eig = sigma_of_lambda(disc, lam, return_eig=True)
print(f"  lambda* = {lam:.8f}  vs (3 pi / 4)^2 = {(0.75*math.pi)**2:.8f}")
print(f"  vanishing component: {eig.positivity_report['zero_components']}"
      f"  (side-1 norm = {np.linalg.norm(eig.eigenfunction.u1):.1e})")

print("\n=== refuge ceiling ===")
spec = ProblemSpec(
    Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=3.0,
    a1=100.0, a2=100.0,
    refuges=(RefugeRegion(1, (0.2, 0.3)), RefugeRegion(2, (0.6, 0.8))),
)
info = find_lambda_infinity(discretize(spec, 640), n_refuge=512)
print(f"  per-refuge eigenvalues: {info.per_refuge[0]:.4f}, "
      f"{info.per_refuge[1]:.4f}")
print(f"  oracle values:          {100*math.pi**2:.4f}, "
      f"{25*math.pi**2:.4f}")
print(f"  ceiling = {info.lambda_inf:.4f}  ({info.case})")

print("\n=== two dimensions ===")
spec2 = ProblemSpec(Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.5),
                    mu=1.0)
lam2 = find_lambda_star(discretize(spec2, 96, ny=96))
print(f"  unit square: lambda* = {lam2:.6f}  vs 2 pi^2 = "
      f"{2*math.pi**2:.6f}")
