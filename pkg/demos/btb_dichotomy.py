"""Bounded versus logarithmically divergent Cauchy transforms.

The semicircle has a Cauchy transform that stays bounded up to the real axis;
the indicator of [-1, 1] does not, its transform blows up like log(1/eps) at
the endpoints.  Everything else in the package hinges on this distinction.
"""
import numpy as np

from gentle_perturb import btb_analyze, density_library

for name in ("semicircle", "indicator", "cosine_bump"):
    rep = btb_analyze(density_library(name))
    print(f"{name:12s} {rep.verdict.value:15s} growth over last decade {rep.growth:.3f}")
    for e, s in zip(rep.eps[::2], rep.sups[::2]):
        print(f"    eps = {e:.0e}   sup |P+_eps rho| = {s:.4f}")
    if rep.verdict.value == "LOG_DIVERGENT":
        # slope should be close to 1/(2 pi)
        print(f"    log fit slope {rep.c1:.4f} (1/2pi = {1 / (2 * np.pi):.4f}), R2 = {rep.r2:.4f}")
    print(f"    half-plane sup of |B rho| ~ {rep.halfplane_sup:.4f}")
