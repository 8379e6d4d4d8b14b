"""The ten acceptance criteria, each at its stated tolerance.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers.
"""
import time

import numpy as np
import pytest

from gentle_perturb import (FLAT, Grid, OperatorRep, VectorRep, build_space, btb_analyze,
                            borel_transform, cli_failure_witness, count_eigenvalues_contour,
                            density_library, derivative_at_zero, divergence_witness,
                            functional_calculus, hilbert_transform, holomorphy_probe,
                            named_function, oracle_calculus, riesz_projection, secular_roots,
                            wave_operators, WEIGHTED)
from gentle_perturb.friedrichs import assembled_A_gamma, assembled_B, coupling, regularized_residual
from gentle_perturb.measures import Verdict
from gentle_perturb.spectra import contour_trace
from gentle_perturb.transforms import riesz_multiplier


@pytest.fixture
def verdict(capsys, request):
    def emit(ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {request.node.name}: {detail}")
        assert ok, detail
    return emit


def test_criterion_01_transform_algebra(verdict):
    grid = Grid(4.0, 4096)
    rng = np.random.default_rng(1)
    c = np.zeros(4096, complex)
    k = np.r_[1:200, -199:0]
    c[k] = rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)
    f = VectorRep(np.fft.ifft(c), FLAT, grid)
    inv = np.linalg.norm(hilbert_transform(hilbert_transform(f)).samples - f.samples) / np.linalg.norm(f.samples)
    m = riesz_multiplier(grid)
    full = np.ones(4096, bool)
    full[[0, 2048]] = False
    mult_def = np.abs(m * m - m)[full].max()
    p = riesz_projection(f)
    vec_def = np.linalg.norm(riesz_projection(p).samples - p.samples) / np.linalg.norm(f.samples)
    ok = inv <= 1e-8 and mult_def <= 1e-12 and vec_def <= 1e-12
    verdict(ok, f"|H(Hf)-f|/|f| = {inv:.2e}, multiplier defect = {mult_def:.1e}, "
                f"projection defect = {vec_def:.2e}")


def test_criterion_02_borel_closed_forms(verdict):
    b1 = borel_transform(density_library("indicator"), 1j, n=4096).value
    b2 = borel_transform(density_library("semicircle"), 1.25, n=2 ** 16).value
    e1, e2 = abs(b1 - 1j * np.pi / 2), abs(b2 + 1)
    verdict(e1 <= 1e-6 and e2 <= 1e-4, f"indicator at i err {e1:.2e}, semicircle at 5/4 err {e2:.2e}")


def test_criterion_03_regularized_commutator(verdict):
    sc = density_library("semicircle")
    r = [regularized_residual(coupling(build_space(sc, 4.0, N)), 0.05) for N in (1024, 2048)]
    order = np.log2(r[0] / r[1])
    verdict(r[0] <= 5e-2 and order >= 1, f"residual {r[0]:.2e} -> {r[1]:.2e}, order {order:.2f}")


def test_criterion_04_wave_operator_identities(verdict):
    sc = density_library("semicircle")
    res = {N: wave_operators(0.05, build_space(sc, 4.0, N)).residuals for N in (1024, 2048)}
    keys = {"inverse": "inverse_plus_minus", "unitarity": "unitarity", "intertwining": "intertwining"}
    parts, ok = [], True
    for label, k in keys.items():
        a, b = res[1024][k], res[2048][k]
        good = a <= 1e-3 and b <= 0.55 * a
        ok &= good
        parts.append(f"{label} {a:.2e}->{b:.2e}{'' if good else ' (x)'}")
    verdict(ok, ", ".join(parts))


def test_criterion_05_functional_calculus(verdict):
    sp = build_space(density_library("semicircle"), 4.0, 1024)
    pair = wave_operators(0.05, sp, residuals=False)
    parts, ok = [], True
    for name in ("identity", "square", "abs", "exp"):
        phi = named_function(name)
        F = functional_calculus(phi, 0.05, sp, pair).symmetrized()
        O = oracle_calculus(phi, 0.05, sp).symmetrized()
        rel = np.linalg.norm(F - O) / np.linalg.norm(O)
        ok &= rel <= 1e-3
        parts.append(f"{name} {rel:.2e}")
    verdict(ok, "relative Frobenius " + ", ".join(parts))


def test_criterion_06_derivative_formula(verdict):
    sp = build_space(density_library("semicircle"), 4.0, 1024)
    D1 = derivative_at_zero(named_function("identity"), sp)
    B = assembled_B(sp)
    e1 = (D1 - B).norm()
    phi = named_function("square")
    base = oracle_calculus(phi, 0.0, sp).matrix

    def fd(h):
        return (oracle_calculus(phi, h, sp).matrix - base) / h

    rich = 2 * fd(5e-3) - fd(1e-2)
    e2 = OperatorRep(derivative_at_zero(phi, sp).matrix - rich, WEIGHTED, sp).norm()
    verdict(e1 <= 1e-6 and e2 <= 1e-3, f"identity vs B {e1:.2e}, square vs Richardson {e2:.2e}")


def test_criterion_07_secular_roots(verdict):
    ind, sc = density_library("indicator"), density_library("semicircle")
    sp = build_space(ind, 4.0, 1024)
    r = secular_roots(1.0, ind)
    e1 = abs(r[0] - 1 / np.tanh(0.5)) if len(r) == 1 else np.inf
    ev = np.linalg.eigvals(assembled_A_gamma(1.0, sp).matrix)
    gap = np.min(np.abs(ev - r[0])) if r else np.inf
    s = secular_roots(1.0, sc)
    e2 = abs(s[0] - 1.25) if len(s) == 1 else np.inf
    small = sum(len(secular_roots(0.3 * np.exp(1j * th), sc)) for th in np.linspace(0, 2 * np.pi, 8, endpoint=False))
    ok = e1 <= 1e-6 and gap <= 3 * sp.dt and e2 <= 1e-6 and small == 0
    verdict(ok, f"coth(1/2) err {e1:.1e}, matrix gap {gap:.1e} (3dt = {3 * sp.dt:.1e}), "
                f"5/4 err {e2:.1e}, roots at |g| = 0.3: {small}")


def test_criterion_08_contour_counting(verdict):
    configs = [("semicircle", 0.0, 3.0, 0.5, 0), ("indicator", 1.0, 2.1640, 0.1, 1),
               ("semicircle", 1.0, 1.25, 0.05, 1)]
    parts, ok = [], True
    for name, g, c, r, want in configs:
        sp = build_space(density_library(name), 4.0, 1024)
        T = contour_trace(g, c, r, sp)
        n = count_eigenvalues_contour(g, c, r, sp)
        gap = abs(T - round(T.real))
        ok &= gap <= 0.05 and n == want
        parts.append(f"{name} g={g}: {n} (gap {gap:.1e})")
    verdict(ok, "; ".join(parts))


def test_criterion_09_btb_analyzer(verdict):
    s = btb_analyze(density_library("semicircle"))
    i = btb_analyze(density_library("indicator"))
    ok = (s.verdict is Verdict.BOUNDED and 1.9 <= s.halfplane_sup <= 2.1
          and i.verdict is Verdict.LOG_DIVERGENT and i.r2 >= 0.99)
    verdict(ok, f"semicircle {s.verdict.value} sup {s.halfplane_sup:.4f}; "
                f"indicator {i.verdict.value} R2 {i.r2:.4f}")


def test_criterion_10_witness_battery(verdict):
    t0 = time.time()
    ind, sc = density_library("indicator"), density_library("semicircle")
    sp = build_space(ind, 4.0, 1024)
    ch = cli_failure_witness(ind, 4, sp)
    for r in ch.records:
        divergence_witness(ind, r, sp)
    gam = [abs(r.gamma_grid) for r in ch.records]
    ok_chain = (len(ch.records) >= 3 and all(b < a for a, b in zip(gam, gam[1:]))
                and all(r.eig_residual <= 1e-6 for r in ch.records) and all(r.passes for r in ch.records))
    no = cli_failure_witness(sc, 4)
    sps = build_space(sc, 4.0, 1024)
    holo = max(holomorphy_probe(named_function(n), sps).max_residual for n in ("exp", "square"))
    wall = time.time() - t0
    ok = ok_chain and no.status == "NO_WITNESS" and holo <= 1e-6 and wall <= 300
    ratios = ", ".join(f"{r.measured_norm / r.bound:.2f}" for r in ch.records)
    verdict(ok, f"{len(ch.records)} records, norm/bound {ratios}; semicircle {no.status}; "
                f"holomorphy {holo:.1e}; {wall:.0f} s")
