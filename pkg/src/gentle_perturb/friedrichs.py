"""Friedrichs' construction for the rank-one perturbation A_gamma = A + gamma B.

All operators here are WEIGHTED matrices on the support subgrid.  The Riesz
projection enters through its point-value discretization (``transforms``
module), restricted to the support: since every operator below carries a factor of the
density on its right, grid points outside the support never contribute.

With ``P`` that projection and ``p = P rho`` (the Plemelj boundary value):

    psi   = 1 / (1 + 2 pi i gamma p)
    chi   = 1 / (1 - 2 pi i gamma conj(p))      # = conj(psi) for real gamma
    U+    = I - 2 pi i gamma M_psi P M_rho
    U-    = I + 2 pi i gamma P M_{chi rho}

``chi`` is the holomorphic continuation of ``conj(psi)`` off the real axis; it
solves the discrete fixed-point equation for R- exactly (the transpose of the
discrete kernel is its complex conjugate).  Gamma_eps uses the cell-integrated
kernel of the smoothed projection.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import (
    WEIGHTED, OperatorRep, ScalarFunction, VectorRep, WeightedSpace, identity,
    random_smooth_panel, zero_continuation,
)
from .transforms import plemelj_values, projection_matrix

SINGULAR_TOL = 1e-8


class SingularCouplingError(ArithmeticError):
    """``1 + 2 pi i gamma P+rho`` vanishes (numerically) somewhere on the grid."""


def _support_projection(space: WeightedSpace, eps: float = 0.0) -> np.ndarray:
    key = ("_P_support", eps)
    cache = space.__dict__.setdefault("_cache", {})
    if key not in cache:
        cache[key] = projection_matrix(space.grid, space.support_index, eps)
    return cache[key]


def assembled_A(space: WeightedSpace) -> OperatorRep:
    return OperatorRep(np.diag(space.t_s).astype(complex), WEIGHTED, space)


def assembled_B(space: WeightedSpace) -> OperatorRep:
    """``B = (., g) g`` with ``g = 1``: matrix ``g_j w_k``."""
    n = space.support_size
    return OperatorRep(np.ones((n, 1)) * space.w_s[None, :] + 0j, WEIGHTED, space)


def assembled_A_gamma(gamma: complex, space: WeightedSpace) -> OperatorRep:
    return assembled_A(space) + assembled_B(space).scaled(gamma)


# ------------------------------------------------------------------ rank one

@dataclass(frozen=True, eq=False)
class RankOneOperator:
    """``R f = (f, r1)_rho r2``."""

    r2: VectorRep
    r1: VectorRep
    space: WeightedSpace

    def __post_init__(self):
        for v in (self.r1, self.r2):
            if v.tag is not WEIGHTED:
                raise ValueError("rank-one factors must be WEIGHTED vectors")

    @property
    def r2_s(self) -> np.ndarray:
        return self.space.restrict(self.r2.samples)

    @property
    def r1_s(self) -> np.ndarray:
        return self.space.restrict(self.r1.samples)

    def materialize(self) -> OperatorRep:
        m = np.outer(self.r2_s, np.conj(self.r1_s) * self.space.w_s)
        return OperatorRep(m, WEIGHTED, self.space)

    def apply(self, f: VectorRep) -> VectorRep:
        c = np.sum(f.samples * np.conj(self.r1.samples) * self.space.weights)
        return VectorRep(c * self.r2.samples, WEIGHTED, f.grid)

    @classmethod
    def zero(cls, space: WeightedSpace) -> "RankOneOperator":
        z = space.vector(np.zeros(space.grid.N))
        return cls(z, z, space)

    @classmethod
    def from_support(cls, r2_s, r1_s, space: WeightedSpace) -> "RankOneOperator":
        return cls(space.vector(space.extend(np.asarray(r2_s, dtype=complex))),
                   space.vector(space.extend(np.asarray(r1_s, dtype=complex))), space)


def coupling(space: WeightedSpace) -> RankOneOperator:
    """The perturbation ``B = (., g) g``, ``g = 1``."""
    g = space.constant_one()
    return RankOneOperator(g, g, space)


def _sandwich(R: RankOneOperator, P: np.ndarray) -> OperatorRep:
    space = R.space
    right = np.conj(R.r1_s) * space.rho_s
    m = -2j * np.pi * R.r2_s[:, None] * P * right[None, :]
    return OperatorRep(m, WEIGHTED, space)


def gamma_eps_rank_one(R: RankOneOperator, eps: float, space: WeightedSpace | None = None) -> OperatorRep:
    """Regularized solution of ``(A + i eps) Z - Z A = R``.

    Integral operator with kernel ``r2(x) conj(r1(t)) rho(t) / (x + i eps - t)``;
    the kernel is integrated exactly over each grid cell.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    space = R.space if space is None else space
    return _sandwich(R, _support_projection(space, float(eps)))


def gamma_rank_one(R: RankOneOperator, space: WeightedSpace | None = None) -> OperatorRep:
    """``Gamma R = -2 pi i J M_{r2} P+ M_{conj(r1) rho}``."""
    space = R.space if space is None else space
    return _sandwich(R, _support_projection(space, 0.0))


def regularized_residual(R: RankOneOperator, eps: float) -> float:
    """Operator norm of ``(A + i eps) Z - Z A - R`` for ``Z = Gamma_eps R``."""
    space = R.space
    Z = gamma_eps_rank_one(R, eps).matrix
    t = space.t_s
    res = (t[:, None] - t[None, :] + 1j * eps) * Z - R.materialize().matrix
    return OperatorRep(res, WEIGHTED, space).norm()


# ------------------------------------------------------------------ psi, R+-

@dataclass(frozen=True, eq=False)
class PsiMultiplier:
    gamma: complex
    samples: np.ndarray       # psi on the whole grid
    chi: np.ndarray           # holomorphic partner used by U-
    p_rho: np.ndarray         # P+ rho on the whole grid
    delta_hat: float

    @property
    def certified(self) -> bool:
        return abs(self.gamma) < self.delta_hat


def delta_hat(space: WeightedSpace) -> float:
    """Smallness radius ``1 / (4 pi sup |P+ rho|)`` (infinite for the zero density)."""
    s = float(np.abs(plemelj_values(space)).max())
    return np.inf if s == 0 else 1.0 / (4.0 * np.pi * s)


def psi_gamma(gamma: complex, space: WeightedSpace) -> PsiMultiplier:
    cache = space.__dict__.setdefault("_cache", {})
    if "p_rho" not in cache:
        cache["p_rho"] = plemelj_values(space)
    p = cache["p_rho"]
    den = 1.0 + 2j * np.pi * gamma * p
    den_chi = 1.0 - 2j * np.pi * gamma * np.conj(p)
    worst = min(np.abs(den).min(), np.abs(den_chi).min())
    if worst < SINGULAR_TOL:
        raise SingularCouplingError(f"1 + 2 pi i gamma P+rho nearly vanishes (|.|={worst:.2e}) at gamma={gamma}")
    s = float(np.abs(p).max())
    dh = np.inf if s == 0 else 1.0 / (4.0 * np.pi * s)
    return PsiMultiplier(complex(gamma), 1.0 / den, 1.0 / den_chi, p, dh)


def solve_R_pm(gamma: complex, space: WeightedSpace) -> tuple[RankOneOperator, RankOneOperator]:
    """``R+ = gamma (., g) psi g`` and ``R- = gamma (., conj(chi) g) g``."""
    psi = psi_gamma(gamma, space)
    g = space.constant_one().samples
    r_plus = RankOneOperator(space.vector(gamma * psi.samples * g), space.vector(g), space)
    r_minus = RankOneOperator(space.vector(gamma * g), space.vector(np.conj(psi.chi) * g), space)
    return r_plus, r_minus


def fixed_point_residuals(gamma: complex, space: WeightedSpace) -> tuple[float, float]:
    """Relative residuals of ``R+ = gamma (I + Gamma R+) B`` and ``R- = gamma B (I - Gamma R-)``."""
    rp, rm = solve_R_pm(gamma, space)
    I, B = identity(space), assembled_B(space)
    Rp, Rm = rp.materialize(), rm.materialize()
    lhs_p = (I + gamma_rank_one(rp)) @ B
    lhs_m = B @ (I - gamma_rank_one(rm))
    out = []
    for R, rhs in ((Rp, lhs_p.scaled(gamma)), (Rm, lhs_m.scaled(gamma))):
        scale = R.norm()
        out.append((R - rhs).norm() / scale if scale > 0 else (R - rhs).norm())
    return out[0], out[1]


# ------------------------------------------------------------ wave operators

@dataclass
class WaveOperatorPair:
    gamma: complex
    U_plus: OperatorRep
    U_minus: OperatorRep
    psi: PsiMultiplier
    residuals: dict = field(default_factory=dict)
    flags: tuple = ()


def _wave_matrices(gamma: complex, space: WeightedSpace, psi: PsiMultiplier):
    P = _support_projection(space)
    rho = space.rho_s
    n = space.support_size
    c = 2j * np.pi * gamma
    up = np.eye(n) - c * space.restrict(psi.samples)[:, None] * P * rho[None, :]
    um = np.eye(n) + c * P * (space.restrict(psi.chi) * rho)[None, :]
    return up, um


def wave_residuals(pair: WaveOperatorPair, seed: int = 0, panel: int = 10) -> dict:
    space = pair.U_plus.space
    I = identity(space)
    Up, Um = pair.U_plus, pair.U_minus
    A, Ag = assembled_A(space), assembled_A_gamma(pair.gamma, space)
    res = {
        "inverse_plus_minus": (Up @ Um - I).norm(),
        "inverse_minus_plus": (Um @ Up - I).norm(),
        "intertwining": (A @ Up - Up @ Ag).norm(),
        "intertwining_minus": (Ag @ Um - Um @ A).norm(),
    }
    real = np.isreal(pair.gamma)
    res["unitarity"] = (Up.adjoint() @ Up - I).norm() if real else None
    res["adjoint_pair"] = (Up.adjoint() - Um).norm() if real else None
    # smooth-vector panel: the same defects measured on seeded smooth inputs
    F = random_smooth_panel(space, panel, seed).T
    w = space.w_s[:, None]

    def vec_norm(X):
        return float(np.sqrt((np.abs(X) ** 2 * w).sum(axis=0)).max())

    res["panel_inverse"] = vec_norm(Up.matrix @ (Um.matrix @ F) - F)
    res["panel_intertwining"] = vec_norm(A.matrix @ (Up.matrix @ F) - Up.matrix @ (Ag.matrix @ F))
    if real:
        UF = Up.matrix @ F
        res["panel_unitarity"] = float(np.abs(np.sqrt((np.abs(UF) ** 2 * w).sum(axis=0)) - 1.0).max())
    else:
        res["panel_unitarity"] = None
    return res


def wave_operators(gamma: complex, space: WeightedSpace, residuals: bool = True,
                   seed: int = 0) -> WaveOperatorPair:
    """``U+ = I + Gamma R+`` and ``U- = I - Gamma R-`` with the defect record.

    Raises :class:`SingularCouplingError` if ``psi`` cannot be formed.  A pair
    built outside the certified disk ``|gamma| < delta_hat`` is flagged.
    """
    psi = psi_gamma(gamma, space)
    up, um = _wave_matrices(gamma, space, psi)
    flags = () if psi.certified else ("outside_certified_disk",)
    pair = WaveOperatorPair(complex(gamma), OperatorRep(up, WEIGHTED, space),
                            OperatorRep(um, WEIGHTED, space), psi, flags=flags)
    if residuals:
        pair.residuals = wave_residuals(pair, seed)
    return pair


# ------------------------------------------------------- product identities

@dataclass(frozen=True)
class ProductIdentityResidual:
    eps: float
    regularized: float   # || G_e R1 G_e R2 - G_2e(G_e R1 R2 + R1 G_e R2) ||
    limit: float         # the same with Gamma in place of Gamma_eps


def _rank_one_products(R1: RankOneOperator, R2: RankOneOperator, G1: OperatorRep, G2: OperatorRep):
    """``G1 R2`` and ``R1 G2`` as rank-one operators."""
    space = R1.space
    left = RankOneOperator.from_support(G1.matrix @ R2.r2_s, R2.r1_s, space)
    right = RankOneOperator.from_support(R1.r2_s, G2.adjoint().matrix @ R1.r1_s, space)
    return left, right


def product_identity_residual(R_plus: RankOneOperator, R_minus: RankOneOperator, eps: float,
                              space: WeightedSpace | None = None) -> ProductIdentityResidual:
    """Residuals of the product rule for Gamma_eps and of its eps -> 0 version.

    From ``(A + i eps) X - X A = R1`` and the same for ``Y, R2`` one gets
    ``(A + 2 i eps) XY - XY A = R1 Y + X R2``, i.e.
    ``G_e R1 . G_e R2 = G_2e(G_e R1 . R2 + R1 . G_e R2)``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    space = R_plus.space if space is None else space

    def residual(gamma_a, gamma_b):
        G1, G2 = gamma_a(R_plus), gamma_a(R_minus)
        lhs = G1 @ G2
        left, right = _rank_one_products(R_plus, R_minus, G1, G2)
        rhs = gamma_b(left) + gamma_b(right)
        return (lhs - rhs).norm()

    reg = residual(lambda R: gamma_eps_rank_one(R, eps, space),
                   lambda R: gamma_eps_rank_one(R, 2 * eps, space))
    lim = residual(lambda R: gamma_rank_one(R, space), lambda R: gamma_rank_one(R, space))
    return ProductIdentityResidual(float(eps), reg, lim)


# ------------------------------------------------------ functional calculus

def functional_calculus(phi: ScalarFunction, gamma: complex, space: WeightedSpace,
                        pair: WaveOperatorPair | None = None) -> OperatorRep:
    """``phi(A_gamma) = U- M_phi0 U+``."""
    if pair is None:
        pair = wave_operators(gamma, space, residuals=False)
    d = zero_continuation(phi, space.t_s, space.M)
    m = pair.U_minus.matrix @ (d[:, None] * pair.U_plus.matrix)
    return OperatorRep(m, WEIGHTED, space, flags=pair.flags)


def derivative_at_zero(phi: ScalarFunction, space: WeightedSpace) -> OperatorRep:
    """``d/dgamma phi(A_gamma)`` at 0: ``pi i M_g [H, M_phi0] M_{conj(g) rho}``.

    The commutator kernel ``(phi(s) - phi(u)) / (s - u)`` is integrated with
    the midpoint rule; on the diagonal it is continued by ``phi'(u)``.
    """
    t = space.t_s
    f = zero_continuation(phi, t, space.M)
    dt_ = t[None, :] - t[:, None]
    np.fill_diagonal(dt_, 1.0)
    dd = (f[None, :] - f[:, None]) / dt_
    np.fill_diagonal(dd, phi.derivative(t))
    return OperatorRep(dd * space.w_s[None, :], WEIGHTED, space)
