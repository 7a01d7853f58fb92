"""Partialling out a nonparametric direction to identify a parameter.

In a single-index design the link function of the index is unknown.
Whether the index coefficients survive depends on how much of their
derivative columns the closure of {E[h(V) | W]} can absorb: a scalar
instrument absorbs everything (the Gram matrix of the residuals vanishes),
while a second instrument coordinate that enters the columns but not the
index law leaves a nonsingular Gram matrix and hence a computable lower
bound on the derivative norm.
"""

from momentid.models.single_index import (
    diagnose_single_index,
    gaussian_index_design,
    single_index_map,
)
from momentid.semiparam import (
    partial_out,
    split_lower_bound_check,
    verify_semiparam_linear,
)

print("--- scalar instrument ---")
scalar = gaussian_index_design(rho=0.5, w_dim=1)
d1 = diagnose_single_index(scalar)
print(f"instrument-given-index completeness proxy: {d1.w_given_v_complete} "
      f"(sigma_min ratio {d1.sigma_min_ratio:.2e})")
print(f"Gram matrix: lambda_min/trace = "
      f"{d1.lambda_min / max(d1.trace, 1e-300):.2e}  -> singular, the index "
      "coefficients are not separated from the link")
print(f"diagnosis consistent: {d1.consistent}")

print("\n--- two-dimensional instrument ---")
rich = gaussian_index_design(rho=0.5, w_dim=2, n_v=49, n_w=15)
d2 = diagnose_single_index(rich)
print(f"completeness proxy: {d2.w_given_v_complete} (a function of two "
      "instrument coordinates cannot be pinned by one index)")
print(f"Gram matrix: lambda_min/trace = {d2.lambda_min / d2.trace:.3f} "
      "-> nonsingular")

smap, split = single_index_map(rich)
report = partial_out(split, range_tol=1e-12)
print(f"\npartialled-out constants: eps1 = {report.eps1:.4f}, "
      f"C* = {report.c_star:.4f}, eps = {report.eps:.4f}")
ratio = split_lower_bound_check(split, report, trials=5000, seed=3)
print(f"sampled lower bound: min ||b^T a + zeta|| / (|a| + ||zeta||) = "
      f"{ratio:.4f} >= eps")

harness = verify_semiparam_linear(smap, beta_radius=0.04, g_radius=0.3,
                                  samples=50, seed=5)
print(f"\nsampling the product neighborhood: {harness.passes}/"
      f"{harness.samples} draws keep ||m(beta, g)|| > 0 "
      f"(min {harness.min_m_norm:.2e})")
print("so the index coefficients are locally identified even though the "
      "link is not")
