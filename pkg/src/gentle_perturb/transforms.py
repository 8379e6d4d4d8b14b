"""Riesz projection, its smoothed version, the Hilbert transform and Borel transforms.

Fourier convention: ``f_hat(w) = int f(t) exp(-i w t) dt``.  The Riesz
projection keeps ``w > 0``; the zero frequency and, on the grid, the Nyquist
frequency get weight 1/2 so that ``P+ + P- = I`` and ``H = P+ - P-`` is
skew-symmetric.

Two discretizations of P+ are provided:

``fft``
    the multiplier above, applied with the FFT (periodic grid).
``pv``
    the real-line Plemelj formula ``f/2 + (1/2 pi i) pv int f(s) ds / (s - u)``
    with the principal value taken as the point-value sum over ``s != u``.
    Its commutator with multiplication by ``t`` is ``(dt/2 pi i)(I - 1 1^T)``,
    rank one plus a multiple of the identity, which the periodic multiplier
    is not (its kernel vanishes at every even offset).  This is the
    discretization used for operators on L2(rho).

For ``eps > 0`` the smoothed projection integrates the kernel
``1/(s - u - i eps)`` exactly over each grid cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import FLAT, Grid, VectorRep, WeightedSpace

_TWO_PI_I = 2j * np.pi


def riesz_multiplier(grid: Grid) -> np.ndarray:
    w = grid.frequencies
    m = (w > 0).astype(float)
    m[0] = 0.5
    m[grid.N // 2] = 0.5
    return m


def _check_flat(f: VectorRep):
    if f.tag is not FLAT:
        raise ValueError("transform expects a FLAT vector")


# ---------------------------------------------------------------- cell kernel

def cell_log_ratio(z_a: np.ndarray, dt: float, eps: float) -> np.ndarray:
    """``log(z_b / z_a)`` with ``z_b = z_a + dt`` and both shifted by ``-i eps``."""
    za = np.asarray(z_a, dtype=float) - 1j * eps
    return np.log1p(dt / za)


def cell_weights(offsets: np.ndarray, dt: float, eps: float) -> np.ndarray:
    """Grid-to-grid weights of P+,eps for output index minus input index ``n``."""
    z_a = (-np.asarray(offsets, dtype=float) - 0.5) * dt
    return cell_log_ratio(z_a, dt, eps) / _TWO_PI_I


def periodic_cell_weights(grid: Grid, eps: float) -> np.ndarray:
    """Weights of the periodized kernel for offsets ``0..N-1`` (mod N)."""
    n = np.arange(grid.N)
    n = np.where(n >= grid.N // 2, n - grid.N, n)
    c = np.pi / (2.0 * grid.L)
    za = (-n - 0.5) * grid.dt - 1j * eps
    return np.log(np.sin(c * (za + grid.dt)) / np.sin(c * za)) / _TWO_PI_I


def pv_weights(offsets: np.ndarray) -> np.ndarray:
    """Point-value Plemelj weights: ``1/2`` at offset 0, ``-1 / (2 pi i n)`` otherwise."""
    n = np.asarray(offsets, dtype=float)
    safe = np.where(n == 0, 1.0, n)
    return np.where(n == 0, 0.5 + 0j, -1.0 / (_TWO_PI_I * safe))


def projection_matrix(grid: Grid, index: np.ndarray | None = None, eps: float = 0.0) -> np.ndarray:
    """Dense P+ (``eps = 0``, point-value kernel) or P+,eps (cell kernel) on grid ``index``."""
    idx = np.arange(grid.N) if index is None else np.asarray(index)
    offsets = idx[:, None] - idx[None, :]
    if eps == 0:
        return pv_weights(offsets)
    return cell_weights(offsets, grid.dt, eps)


def _apply_toeplitz(samples: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    n = np.arange(-(grid.N - 1), grid.N)
    kern = pv_weights(n) if eps == 0 else cell_weights(n, grid.dt, eps)
    # direct O(N^2) convolution: out_j = sum_k kern[j - k] f_k
    full = np.convolve(samples, kern)
    return full[grid.N - 1: 2 * grid.N - 1]


def _apply_circulant(samples: np.ndarray, grid: Grid, eps: float) -> np.ndarray:
    kern = periodic_cell_weights(grid, eps)
    ext = np.concatenate([kern, kern])
    full = np.convolve(samples, ext)
    return full[grid.N: 2 * grid.N]


# ---------------------------------------------------------------- projections

def riesz_projection(f: VectorRep, method: str = "fft") -> VectorRep:
    """Riesz projection onto the Hardy space (see module docstring)."""
    _check_flat(f)
    if method == "fft":
        out = np.fft.ifft(riesz_multiplier(f.grid) * np.fft.fft(f.samples))
    elif method == "pv":
        out = _apply_toeplitz(np.asarray(f.samples, dtype=complex), f.grid, 0.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return VectorRep(out, FLAT, f.grid)


def smoothed_projection(f: VectorRep, eps: float, periodic: bool = False,
                        x: np.ndarray | None = None) -> VectorRep | np.ndarray:
    """``(1/2 pi i) int f(s) ds / (s - u - i eps)`` by direct quadrature.

    The sum is carried out without the FFT so it can serve as an independent
    check of :func:`riesz_projection`.  With ``x`` given, values at those
    (arbitrary) real points are returned as an array instead of a vector.
    """
    _check_flat(f)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    samples = np.asarray(f.samples, dtype=complex)
    grid = f.grid
    if x is None:
        out = (_apply_circulant if periodic else _apply_toeplitz)(samples, grid, eps)
        return VectorRep(out, FLAT, grid)
    if periodic:
        raise ValueError("off-grid evaluation is only available on the real line")
    x = np.asarray(x, dtype=float)
    nz = np.flatnonzero(samples)
    t = grid.points[nz]
    out = np.empty(x.shape, dtype=complex)
    step = max(1, 4_000_000 // max(nz.size, 1))
    for s in range(0, x.size, step):
        xb = x.ravel()[s:s + step]
        z_a = t[None, :] - 0.5 * grid.dt - xb[:, None]
        out.ravel()[s:s + step] = cell_log_ratio(z_a, grid.dt, eps) @ samples[nz]
    return out / _TWO_PI_I


def hilbert_transform(f: VectorRep, method: str = "fft") -> VectorRep:
    """``H = P+ - P-`` (multiplier ``sgn(w)``, zero at ``w = 0``)."""
    _check_flat(f)
    if method == "fft":
        mult = 2.0 * riesz_multiplier(f.grid) - 1.0
        out = np.fft.ifft(mult * np.fft.fft(f.samples))
        return VectorRep(out, FLAT, f.grid)
    p = riesz_projection(f, method)
    return VectorRep(2.0 * p.samples - f.samples, FLAT, f.grid)


def plemelj_values(space: WeightedSpace) -> np.ndarray:
    """Point-value Plemelj boundary value ``P+ rho`` on the whole grid."""
    return _apply_toeplitz(space.rho.astype(complex), space.grid, 0.0)


# -------------------------------------------------------------------- Borel

@dataclass(frozen=True)
class BorelEvaluation:
    lam: complex
    value: complex
    error: float
    shift: complex = 0j

    @property
    def evaluated_at(self) -> complex:
        return self.lam + self.shift


def _midpoint_nodes(density, n: int):
    a, b = density.support
    h = (b - a) / n
    s = a + (np.arange(n) + 0.5) * h
    return s, density(s) * h, h


def borel_sum(density, lam, n: int = 2 ** 16, power: int = 1) -> np.ndarray:
    """Midpoint sums of ``int rho(t) / (t - lam)^power dt`` for an array of ``lam``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    s, w, _ = _midpoint_nodes(density, n)
    keep = w != 0
    s, w = s[keep], w[keep]
    out = np.empty(lam.shape, dtype=complex)
    flat = lam.ravel()
    step = max(1, 2_000_000 // max(s.size, 1))
    for i in range(0, flat.size, step):
        inv = 1.0 / (s[None, :] - flat[i:i + step, None])
        if power == 2:
            inv *= inv
        elif power != 1:
            inv **= power
        out.ravel()[i:i + step] = inv @ w
    return out


def borel_transform(density, lam: complex, n: int = 2 ** 16, eps_min: float = 0.0) -> BorelEvaluation:
    """Borel (Cauchy-Stieltjes) transform ``int rho(t) dt / (t - lam)``.

    Midpoint rule with ``n`` cells on the support; the error estimate is the
    change against ``n/2`` cells.  Points closer to the support than two cells
    are moved off the axis by ``i*max(eps_min, 2h)`` and the shift is recorded.
    """
    lam = complex(lam)
    a, b = density.support
    h = (b - a) / n
    on_support = a <= lam.real <= b
    if lam.imag == 0 and on_support:
        raise ValueError(f"lambda={lam} lies on the support; the transform is undefined there")
    shift = 0j
    if on_support or (a - 2 * h <= lam.real <= b + 2 * h):
        if abs(lam.imag) < 2 * h:
            direction = np.sign(lam.imag) or 1.0
            shift = 1j * direction * max(eps_min, 2 * h)
    z = lam + shift
    fine, coarse = borel_sum(density, [z, z], n)[0], borel_sum(density, z, n // 2)[0]
    return BorelEvaluation(lam, complex(fine), float(abs(fine - coarse)), shift)


def discrete_borel_transform(space: WeightedSpace, lam) -> np.ndarray:
    """Borel transform of the grid measure ``sum_k w_k delta(t - t_k)``."""
    lam = np.asarray(lam, dtype=complex)
    t, w = space.t_s, space.w_s
    return (w / (t - lam[..., None])).sum(axis=-1)


def stieltjes_inversion(density, a: float, b: float, taus, n: int = 2 ** 16) -> float:
    """Mass of ``[a, b]`` recovered from ``Im B(t + i tau)`` as ``tau -> 0``.

    The ``t`` integral of the Poisson kernel is done in closed form
    (arctangents), the ``s`` integral by the midpoint rule; the results for
    each ``tau`` are extrapolated linearly to ``tau = 0``.
    """
    taus = np.asarray(list(taus), dtype=float)
    if taus.size == 0:
        raise ValueError("empty tau schedule")
    if np.any(taus <= 0):
        raise ValueError("tau values must be positive")
    if a > b:
        raise ValueError("need a <= b")
    if a == b:
        return 0.0
    s, w, _ = _midpoint_nodes(density, n)
    vals = np.array([
        np.sum(w * (np.arctan((b - s) / tau) - np.arctan((a - s) / tau))) / np.pi
        for tau in taus
    ])
    if taus.size == 1:
        return float(vals[0])
    slope, intercept = np.polyfit(taus, vals, 1)
    return float(intercept)
