"""Hypothesis properties across the modules, on small grids."""
from functools import lru_cache

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from gentle_perturb import (FLAT, Grid, VectorRep, build_space, count_eigenvalues_contour,
                            density_library, derivative_at_zero, hilbert_transform, inner_product,
                            named_function, psi_gamma, riesz_projection, secular_roots,
                            wave_operators)
from gentle_perturb.discretization import OperatorRep, WEIGHTED
from gentle_perturb.friedrichs import assembled_B, delta_hat, fixed_point_residuals
from gentle_perturb.transforms import borel_sum

seeds = st.integers(0, 2 ** 32 - 1)
unit_disk = st.tuples(st.floats(0, 0.9), st.floats(0, 2 * np.pi))


@lru_cache(maxsize=None)
def space(name="semicircle", N=256, **params):
    return build_space(density_library(name, params), 4.0, N)


def random_flat(seed, N=256):
    rng = np.random.default_rng(seed)
    return VectorRep(rng.standard_normal(N) + 1j * rng.standard_normal(N), FLAT, Grid(4.0, N))


@given(seeds)
def test_riesz_projection_idempotent_and_complementary(seed):
    f = random_flat(seed)
    p = riesz_projection(f)
    pp = riesz_projection(p)
    assert np.abs(pp.samples - p.samples).max() <= 0.5 * np.abs(f.samples).max() + 1e-12
    # the half weights at 0 and Nyquist make P+ + P- the identity but P+ only idempotent off them
    m = VectorRep(f.samples - p.samples, FLAT, f.grid)
    h = hilbert_transform(f)
    assert np.allclose(p.samples - m.samples, h.samples, atol=1e-12)


@given(seeds, st.integers(1, 60))
def test_hilbert_involution_band_limited(seed, K):
    rng = np.random.default_rng(seed)
    grid = Grid(4.0, 256)
    c = np.zeros(256, complex)
    k = rng.choice(np.r_[1:K + 1, -K:0], size=min(8, 2 * K), replace=False)
    c[k] = rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)
    f = VectorRep(np.fft.ifft(c), FLAT, grid)
    hh = hilbert_transform(hilbert_transform(f))
    assert np.linalg.norm(hh.samples - f.samples) <= 1e-12 * np.linalg.norm(f.samples)


@given(seeds)
def test_weighted_adjoint_identity(seed):
    sp = space()
    rng = np.random.default_rng(seed)
    n = sp.support_size
    X = OperatorRep(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), WEIGHTED, sp)
    f = sp.vector(sp.extend(rng.standard_normal(n) + 0j))
    g = sp.vector(sp.extend(rng.standard_normal(n) + 1j * rng.standard_normal(n)))
    lhs = inner_product(X @ f, g, sp)
    rhs = inner_product(f, X.adjoint() @ g, sp)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    assert np.allclose(X.adjoint().adjoint().matrix, X.matrix)


@given(unit_disk, st.sampled_from(["semicircle", "cosine_bump"]))
def test_psi_reciprocal_and_fixed_points(pt, name):
    sp = space(name)
    r, th = pt
    g = r * delta_hat(sp) * np.exp(1j * th)
    p = psi_gamma(g, sp)
    assert np.abs(p.samples * (1 + 2j * np.pi * g * p.p_rho) - 1).max() <= 1e-12
    assert max(fixed_point_residuals(g, sp)) <= 1e-6


@given(st.floats(-0.2, 0.2))
def test_wave_operator_adjoint_pair_real_gamma(g):
    pair = wave_operators(g, space(), residuals=False)
    assert np.abs(pair.U_plus.adjoint().matrix - pair.U_minus.matrix).max() <= 1e-10


@given(st.floats(0.5, 1.3))
def test_derivative_of_identity_is_B(radius):
    sp = space("semicircle", 256, radius=radius)
    D = derivative_at_zero(named_function("identity"), sp)
    B = assembled_B(sp)
    assert np.abs(D.matrix - B.matrix).max() <= 1e-6 * np.abs(B.matrix).max()


@given(st.floats(0.2, 3.0), st.booleans())
def test_indicator_secular_root_is_coth(g, negative):
    g = -g if negative else g
    roots = secular_roots(g, density_library("indicator"), {"re": (-8, 8), "im": (-1, 1)})
    expected = np.sign(g) / np.tanh(1 / (2 * abs(g)))
    if abs(expected) > 8:
        return
    assert len(roots) == 1
    assert abs(roots[0] - expected) <= 1e-8 * max(1, abs(expected))


@given(st.complex_numbers(min_magnitude=0.3, max_magnitude=2.0),
       st.sampled_from(["semicircle", "indicator"]))
def test_secular_roots_solve_equation_and_conjugate_symmetry(g, name):
    d = density_library(name)
    roots = secular_roots(g, d)
    for r in roots:
        assert abs(1 + g * borel_sum(d, r)[0]) <= 1e-10
    conj = secular_roots(np.conj(g), d)
    assert len(conj) == len(roots)
    for r in roots:
        assert min(abs(np.conj(r) - c) for c in conj) <= 1e-8


@given(st.floats(-1.5, 1.5), st.floats(1.2, 2.5))
def test_contour_count_matches_eigenvalues(g, radius):
    sp = space("indicator", 128)
    from gentle_perturb.friedrichs import assembled_A_gamma
    ev = np.linalg.eigvals(assembled_A_gamma(g, sp).matrix)
    if np.min(np.abs(np.abs(ev) - radius)) < 0.1 * radius:
        return
    assert count_eigenvalues_contour(g, 0.0, radius, sp, nodes=128) == np.sum(np.abs(ev) < radius)


@given(st.floats(-0.3, 0.3))
def test_real_coupling_spectrum_is_real(g):
    from gentle_perturb.friedrichs import assembled_A_gamma
    sp = space()
    S = assembled_A_gamma(g, sp).symmetrized()
    assert np.allclose(S, S.conj().T)
