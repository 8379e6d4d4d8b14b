"""Friedrichs wave operators and spectral diagnostics for rank-one perturbations
of multiplication operators on L2(R, rho)."""
from .discretization import (
    FLAT, WEIGHTED, Grid, OperatorRep, ScalarFunction, SpaceTag, VectorRep, WeightedSpace,
    adjoint_J, build_space, embed_J, inner_product, multiplication_operator, named_function,
)
from .friedrichs import (
    PsiMultiplier, RankOneOperator, SingularCouplingError, WaveOperatorPair, derivative_at_zero,
    functional_calculus, gamma_eps_rank_one, gamma_rank_one, product_identity_residual,
    psi_gamma, solve_R_pm, wave_operators,
)
from .measures import BTBReport, SpectralDensity, btb_analyze, density_library
from .spectra import (
    SpectrumMap, WitnessRecord, cli_failure_witness, count_eigenvalues_contour,
    divergence_witness, holomorphy_probe, oracle_calculus, secular_roots, spectrum_map,
)
from .transforms import (
    BorelEvaluation, borel_transform, hilbert_transform, riesz_projection, smoothed_projection,
    stieltjes_inversion,
)

__version__ = "0.1.0"
