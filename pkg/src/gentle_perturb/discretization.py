"""Grids, quadrature weights and operators on the weighted space L2(R, rho).

Vectors always carry one sample per grid point.  Operators on the weighted
space are stored on the support subgrid only: grid points where the density
vanishes are null in L2(rho), so a WEIGHTED matrix is ``n_s x n_s`` with
``n_s = space.support_size``.  FLAT operators act on the whole grid.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Callable

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .measures import SpectralDensity


class SpaceTag(enum.Enum):
    FLAT = "flat"          # L2(R), Lebesgue weight dt
    WEIGHTED = "weighted"  # L2(R, rho), weight rho(t) dt


FLAT = SpaceTag.FLAT
WEIGHTED = SpaceTag.WEIGHTED


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic-ready grid ``t_j = -L + j*dt`` with ``dt = 2L/N``."""

    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"half width must be positive, got {self.L}")
        if not _is_power_of_two(int(self.N)):
            raise ValueError(f"point count must be a power of two, got {self.N}")

    @property
    def dt(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def points(self) -> np.ndarray:
        return -self.L + self.dt * np.arange(self.N)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Angular frequencies matching ``numpy.fft`` ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dt)


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """Grid discretization of L2(R, rho) with rectangle-rule weights."""

    grid: Grid
    density: "SpectralDensity"
    weights: np.ndarray
    support_mask: np.ndarray
    M: float

    @cached_property
    def rho(self) -> np.ndarray:
        """Density samples on the whole grid."""
        return self.density(self.grid.points)

    @cached_property
    def support_index(self) -> np.ndarray:
        return np.flatnonzero(self.support_mask)

    @property
    def support_size(self) -> int:
        return int(self.support_index.size)

    @property
    def t_s(self) -> np.ndarray:
        return self.grid.points[self.support_index]

    @property
    def w_s(self) -> np.ndarray:
        return self.weights[self.support_index]

    @property
    def rho_s(self) -> np.ndarray:
        return self.rho[self.support_index]

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def restrict(self, samples: np.ndarray) -> np.ndarray:
        """Full-grid samples -> support subgrid samples."""
        return np.asarray(samples)[..., self.support_index]

    def extend(self, samples_s: np.ndarray) -> np.ndarray:
        """Support subgrid samples -> full grid, zero elsewhere."""
        out = np.zeros(self.grid.N, dtype=np.result_type(samples_s, float))
        out[self.support_index] = samples_s
        return out

    def vector(self, samples, tag: SpaceTag = WEIGHTED) -> "VectorRep":
        return VectorRep(np.asarray(samples, dtype=complex), tag, self.grid)

    def constant_one(self) -> "VectorRep":
        """The vector g = 1 used for the rank-one perturbation."""
        return self.vector(np.ones(self.grid.N))


def build_space(density: "SpectralDensity", L: float, N: int) -> WeightedSpace:
    """Sample ``density`` on a uniform grid of half width ``L`` with ``N`` points.

    Raises ``ValueError`` if ``L < 2*M`` (not enough padding for the Cauchy
    tails) or if ``N`` is not a power of two of at least 64.
    """
    N = int(N)
    if not _is_power_of_two(N) or N < 64:
        raise ValueError(f"N must be a power of two >= 64, got {N}")
    M = float(density.M)
    if L < 2.0 * M:
        raise ValueError(f"padding violation: L={L} < 2M={2 * M}")
    grid = Grid(float(L), N)
    rho = density(grid.points)
    if np.any(~np.isfinite(rho)) or np.any(rho < 0):
        raise ValueError("density samples must be finite and nonnegative")
    weights = rho * grid.dt
    mask = rho > 0
    if np.any(np.abs(grid.points[mask]) >= M):
        raise ValueError("density support is not contained in (-M, M)")
    weights.setflags(write=False)
    mask.setflags(write=False)
    return WeightedSpace(grid, density, weights, mask, M)


@dataclass(frozen=True, eq=False)
class VectorRep:
    samples: np.ndarray
    tag: SpaceTag
    grid: Grid

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("vector samples must be finite")

    def norm(self, space: WeightedSpace | None = None) -> float:
        return float(np.sqrt(inner_product(self, self, space).real))


def inner_product(f: VectorRep, h: VectorRep, space: WeightedSpace | None = None) -> complex:
    """``sum f_j conj(h_j) w_j`` (WEIGHTED) or ``sum f_j conj(h_j) dt`` (FLAT)."""
    if f.tag is not h.tag:
        raise ValueError(f"tag mismatch: {f.tag.value} vs {h.tag.value}")
    if f.tag is WEIGHTED:
        if space is None:
            raise ValueError("weighted inner product needs the space")
        w = space.weights
    else:
        w = f.grid.dt
    return complex(np.sum(f.samples * np.conj(h.samples) * w))


@dataclass(frozen=True, eq=False)
class OperatorRep:
    """Dense matrix tagged with the inner product used for adjoints and norms.

    ``flags`` carries numerical warnings (e.g. ill-conditioned eigenbasis).
    """

    matrix: np.ndarray
    tag: SpaceTag
    space: WeightedSpace
    flags: tuple = field(default=())

    def __post_init__(self):
        n = self.space.support_size if self.tag is WEIGHTED else self.space.grid.N
        if self.matrix.shape != (n, n):
            raise ValueError(f"{self.tag.value} operator must be {n}x{n}, got {self.matrix.shape}")

    def _check(self, other: "OperatorRep"):
        if other.tag is not self.tag or other.space is not self.space:
            raise ValueError("operators live in different spaces")

    def __matmul__(self, other):
        if isinstance(other, OperatorRep):
            self._check(other)
            return OperatorRep(self.matrix @ other.matrix, self.tag, self.space)
        if isinstance(other, VectorRep):
            return self.apply(other)
        return NotImplemented

    def __add__(self, other: "OperatorRep") -> "OperatorRep":
        self._check(other)
        return OperatorRep(self.matrix + other.matrix, self.tag, self.space)

    def __sub__(self, other: "OperatorRep") -> "OperatorRep":
        self._check(other)
        return OperatorRep(self.matrix - other.matrix, self.tag, self.space)

    def scaled(self, c: complex) -> "OperatorRep":
        return OperatorRep(c * self.matrix, self.tag, self.space)

    def apply(self, f: VectorRep) -> VectorRep:
        if f.tag is not self.tag:
            raise ValueError("vector and operator tags differ")
        if self.tag is FLAT:
            return VectorRep(self.matrix @ f.samples, FLAT, f.grid)
        out = self.space.extend(self.matrix @ self.space.restrict(f.samples))
        return VectorRep(out.astype(complex), WEIGHTED, f.grid)

    def adjoint(self) -> "OperatorRep":
        if self.tag is FLAT:
            return OperatorRep(self.matrix.conj().T, FLAT, self.space)
        w = self.space.w_s
        return OperatorRep(self.matrix.conj().T * w[None, :] / w[:, None], WEIGHTED, self.space)

    def symmetrized(self) -> np.ndarray:
        """Unitarily equivalent flat matrix ``D^{1/2} X D^{-1/2}``."""
        if self.tag is FLAT:
            return self.matrix
        s = np.sqrt(self.space.w_s)
        return self.matrix * s[:, None] / s[None, :]

    def norm(self) -> float:
        """Operator norm (largest singular value) in the tagged inner product."""
        if self.matrix.size == 0:
            return 0.0
        return float(np.linalg.norm(self.symmetrized(), 2))

    def fro(self) -> float:
        return float(np.linalg.norm(self.symmetrized()))


def identity(space: WeightedSpace, tag: SpaceTag = WEIGHTED) -> OperatorRep:
    n = space.support_size if tag is WEIGHTED else space.grid.N
    return OperatorRep(np.eye(n, dtype=complex), tag, space)


def embed_J(f: VectorRep) -> VectorRep:
    """Embedding L2(R) -> L2(R, rho); samples are kept as they are."""
    if f.tag is not FLAT:
        raise ValueError("embed_J expects a FLAT vector")
    return VectorRep(f.samples, WEIGHTED, f.grid)


def adjoint_J(space: WeightedSpace) -> OperatorRep:
    """Adjoint of the embedding: multiplication by the density, into L2(R)."""
    return OperatorRep(np.diag(space.rho).astype(complex), FLAT, space)


def zero_continuation(phi: Callable, t: np.ndarray, M: float) -> np.ndarray:
    t = np.asarray(t)
    inside = np.abs(t) <= M
    out = np.zeros(t.shape, dtype=complex)
    out[inside] = phi(t[inside])
    if not np.all(np.isfinite(out)):
        raise ValueError("function values must be finite on [-M, M]")
    return out


def multiplication_operator(phi: "ScalarFunction | Callable", space: WeightedSpace,
                            tag: SpaceTag = WEIGHTED) -> OperatorRep:
    """``diag(phi_0(t_j))`` with ``phi_0`` the zero continuation outside [-M, M]."""
    t = space.t_s if tag is WEIGHTED else space.grid.points
    return OperatorRep(np.diag(zero_continuation(phi, t, space.M)), tag, space)


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """A function of one variable used in the functional calculus.

    ``entire`` marks functions that extend to the complex plane, so they can
    be applied to complex eigenvalues; ``matfunc`` optionally evaluates the
    function on a square matrix directly (used when an eigenbasis is badly
    conditioned).
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    entire: bool = False
    matfunc: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, t):
        return self.func(np.asarray(t))

    def derivative(self, t, h: float = 1e-5) -> np.ndarray:
        """Central difference; used only on the real line."""
        t = np.asarray(t, dtype=float)
        return (self.func(t + h) - self.func(t - h)) / (2.0 * h)


def named_function(name: str, table: dict | None = None) -> ScalarFunction:
    """``identity``, ``abs``, ``square``, ``exp`` or a piecewise-linear ``custom`` table."""
    if name == "identity":
        return ScalarFunction(name, lambda t: t * 1.0, entire=True)
    if name == "square":
        return ScalarFunction(name, lambda t: t * t, entire=True, matfunc=lambda X: X @ X)
    if name == "abs":
        return ScalarFunction(name, np.abs)
    if name == "exp":
        from scipy.linalg import expm
        return ScalarFunction(name, np.exp, entire=True, matfunc=expm)
    if name == "custom":
        if not table or "x" not in table or "y" not in table:
            raise ValueError("custom function needs a table with 'x' and 'y'")
        x = np.asarray(table["x"], dtype=float)
        y = np.asarray(table["y"], dtype=float)
        if x.size < 2 or x.shape != y.shape or np.any(np.diff(x) <= 0):
            raise ValueError("custom table abscissae must be increasing with one value each")
        return ScalarFunction(name, lambda t: np.interp(np.real(t), x, y))
    raise ValueError(f"unknown function {name!r}")


def random_smooth_panel(space: WeightedSpace, count: int = 10, seed: int = 0,
                        modes: int = 6) -> np.ndarray:
    """Seeded smooth test vectors on the support subgrid, unit weighted norm.

    Each vector is a random trigonometric polynomial of low degree, so that
    discretization errors of smooth inputs can be separated from grid-scale
    effects.  Returns an array of shape ``(count, n_s)``.
    """
    rng = np.random.default_rng(seed)
    t = space.t_s
    k = np.arange(modes)[:, None] * np.pi / space.M
    out = np.empty((count, t.size), dtype=complex)
    for i in range(count):
        c = rng.standard_normal((2, modes)) + 1j * rng.standard_normal((2, modes))
        v = c[0] @ np.cos(k * t) + c[1] @ np.sin(k * t)
        out[i] = v / np.sqrt(np.sum(np.abs(v) ** 2 * space.w_s))
    return out
