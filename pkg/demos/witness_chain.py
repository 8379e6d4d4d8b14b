"""Eigenvalues escaping the spectrum as gamma -> 0, for the indicator.

For a density with unbounded Cauchy transform one can pick lambda_n close to
the endpoint with |B rho(lambda_n)| -> infinity.  Then gamma_n = -1/B rho(lambda_n)
tends to zero while A + gamma_n B has the eigenvalue lambda_n off [-1, 1],
and the difference quotients of a suitable entire phi_n blow up like 1/|gamma_n|.
"""
from gentle_perturb import (build_space, cli_failure_witness, density_library,
                            divergence_witness)

ind = density_library("indicator")
sp = build_space(ind, 4.0, 1024)
chain = cli_failure_witness(ind, 4, sp)
print("indicator:", chain.status)
for r in chain.records:
    divergence_witness(ind, r, sp)
    print(f"  n={r.n} lambda={r.lam:.4f} gamma={r.gamma:.4f} grid gamma={r.gamma_grid:.4f}"
          f"  |Sigma| = {r.measured_norm:7.2f} >= {r.bound:6.2f}")

sc = cli_failure_witness(density_library("semicircle"), 4)
print("semicircle:", sc.status, "|B rho(lambda_n)| =", [f"{m:.3f}" for m in sc.borel_moduli])
