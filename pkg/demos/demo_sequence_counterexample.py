"""Why a full-rank derivative is not enough in infinite dimensions.

A smooth map on a weighted sequence space can have the identity as its
derivative and still vanish at points arbitrarily close to the base point,
because the domain norm is stronger than the image norm.  This script walks
the explicit construction and then shows the curvature-restricted set on
which identification is rescued.
"""

import numpy as np

from momentid.identcore import (
    counterexample,
    counterexample_map,
    verify_local_id,
)
from momentid.fnspace import GridFunction

# The model maps a sequence (a_1, a_2, ...) to (f(a_1), f(a_2), ...) with a
# smooth f vanishing exactly at 0 and 1 and unit slope at 0.  Weights 2^-j
# make the tail cheap: setting all coordinates past k to 1 produces a zero
# of the map whose distance to the origin is the tail mass to the 1/4 power.
print("k   ||m(alpha_k)||   ||alpha_k - alpha_0||   inside identified set?")
for k in range(2, 13):
    case = counterexample(k)
    print(f"{k:2d}  {case.m_norm:14.3e}  {case.dev_norm:20.6f}   {case.in_n}")

case = counterexample(4)
print(f"\nmeasured curvature constant L = sup|f''|/2 = {case.L:.4f} >= 1")
print("so the deviation sequence can never satisfy the curvature inequality")
print("||m'(alpha - alpha_0)|| > L ||alpha - alpha_0||^2,")
print("which is exactly what excludes it from the identified set.\n")

# Inside the curvature-restricted set the story reverses: every sampled
# deviation keeps the map bounded away from zero.  Coordinates below 1/L
# are a handy sufficient condition, so we sample uniformly under that cap.
mmap, bound = counterexample_map()
mu = mmap.base_point.measure
cap = 0.9 / bound.L


def sampler(rng):
    return GridFunction(rng.uniform(-cap, cap, mu.size), mu)


report = verify_local_id(mmap, bound, samples=300, rng_seed=7,
                         sampler=sampler)
print(f"sampling the restricted set: {report.passes}/{report.samples} "
      f"deviations keep ||m|| > 0 (min {report.min_m_norm:.3e})")

# On a plain open ball the guarantee is gone: the tail sequences above are
# inside any ball and are zeros of the map.
holes = iter(range(12, 40))


def ball_sampler(rng):
    alpha = np.zeros(mu.size)
    alpha[next(holes):] = 1.0
    return GridFunction(alpha, mu)


ball = verify_local_id(mmap, bound, samples=5, rng_seed=7,
                       sampler=ball_sampler, enforce_membership=False)
print(f"sampling an open ball instead: {ball.failures}/{ball.samples} "
      "draws are zeros of the map arbitrarily close to the truth")
