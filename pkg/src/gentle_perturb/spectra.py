"""Dense-matrix oracles and spectral diagnostics for A_gamma = A + gamma B.

The oracle works directly with the assembled matrix
``A_gamma = diag(t_j) + gamma * 1 w^T`` on the support subgrid and shares no
code with the wave-operator construction.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretization import WEIGHTED, OperatorRep, ScalarFunction, WeightedSpace, zero_continuation
from .transforms import borel_sum, borel_transform, discrete_borel_transform

COND_GUARD = 1e8


def _symmetrized_A_gamma(gamma: complex, space: WeightedSpace) -> np.ndarray:
    # D^{1/2} A_gamma D^{-1/2} = diag(t) + gamma s s^T with s = sqrt(w)
    s = np.sqrt(space.w_s)
    return np.diag(space.t_s).astype(complex) + gamma * np.outer(s, s)


def _unsymmetrize(F: np.ndarray, space: WeightedSpace) -> np.ndarray:
    s = np.sqrt(space.w_s)
    return F / s[:, None] * s[None, :]


def oracle_calculus(phi: ScalarFunction, gamma: complex, space: WeightedSpace) -> OperatorRep:
    """``phi(A_gamma)`` by eigendecomposition of the assembled matrix.

    Real ``gamma``: Hermitian eigendecomposition of the symmetrized matrix and
    ``phi_0`` on the eigenvalues.  Complex ``gamma``: general eigendecomposition;
    if the eigenvector matrix has condition number above 1e8 the result is
    flagged and, when ``phi.matfunc`` is available, computed with it instead.
    """
    S = _symmetrized_A_gamma(gamma, space)
    flags = []
    if complex(gamma).imag == 0:
        lam, V = np.linalg.eigh(S.real)
        F = (V * zero_continuation(phi, lam, space.M)[None, :]) @ V.T
    else:
        if not phi.entire:
            flags.append("non_entire_function_at_complex_eigenvalues")
        try:
            lam, V = np.linalg.eig(S)
            cond = np.linalg.cond(V)
        except np.linalg.LinAlgError:
            lam, V, cond = None, None, np.inf
        if cond > COND_GUARD or not np.isfinite(cond):
            flags.append("ill_conditioned_eigenbasis")
        if "ill_conditioned_eigenbasis" in flags and phi.matfunc is not None:
            F = phi.matfunc(S)
            flags.append("matfunc_fallback")
        elif V is None:
            raise np.linalg.LinAlgError("eigendecomposition failed and no matrix-function fallback")
        else:
            F = (V * phi(lam)[None, :]) @ np.linalg.inv(V)
    return OperatorRep(_unsymmetrize(F, space).astype(complex), WEIGHTED, space, tuple(flags))


@dataclass
class DifferenceQuotient:
    phi: ScalarFunction
    gamma: complex
    sigma: OperatorRep


def difference_quotient(phi: ScalarFunction, gamma: complex, space: WeightedSpace) -> DifferenceQuotient:
    """``Sigma(phi, gamma) = (phi(A_gamma) - phi(A)) / gamma`` from the oracle."""
    if gamma == 0:
        raise ValueError("difference quotient needs gamma != 0")
    hi = oracle_calculus(phi, gamma, space)
    lo = oracle_calculus(phi, 0.0, space)
    sigma = OperatorRep((hi.matrix - lo.matrix) / gamma, WEIGHTED, space, hi.flags + lo.flags)
    return DifferenceQuotient(phi, complex(gamma), sigma)


# ------------------------------------------------------------------ secular

def _dist_to_interval(lam, a: float, b: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    return np.abs(lam - np.clip(lam.real, a, b))


def secular_roots(gamma: complex, density, region: dict | None = None, n_quad: int = 2 ** 16,
                  tol: float = 1e-10, max_iter: int = 40) -> list[complex]:
    """Roots of ``1 + gamma B rho(lambda) = 0`` off the support.

    Newton's method from a mesh of seeds over ``region``
    (``{"re": (lo, hi), "im": (lo, hi), "n_re": int, "n_im": int}``, optional
    extra ``"seeds"``), first with
    a coarse quadrature and then polished with ``n_quad`` midpoint cells.
    Seeds that fail to converge are dropped.  Roots are returned sorted by
    real part, each with ``|1 + gamma B rho| <= tol``.
    """
    gamma = complex(gamma)
    if gamma == 0:
        return []
    a, b = density.support
    region = dict(region or {})
    re = region.get("re", (a - 2.0, b + 2.0))
    im = region.get("im", (-2.0, 2.0))
    n_re, n_im = int(region.get("n_re", 16)), int(region.get("n_im", 11))
    X, Y = np.meshgrid(np.linspace(*re, n_re), np.linspace(*im, n_im))
    z = (X + 1j * Y).ravel()
    z = z[_dist_to_interval(z, a, b) > 1e-3]
    z = np.concatenate([z, np.asarray(region.get("seeds", []), dtype=complex)])
    # iterates that wander far outside the region are abandoned
    mid_re, span_re = 0.5 * (re[0] + re[1]), re[1] - re[0]
    mid_im, span_im = 0.5 * (im[0] + im[1]), im[1] - im[0] + 1.0

    def newton(z, n, iters):
        done = np.zeros(z.shape, dtype=bool)
        for _ in range(iters):
            act = ~done
            if not act.any():
                break
            za = z[act]
            f = 1.0 + gamma * borel_sum(density, za, n, 1)
            df = gamma * borel_sum(density, za, n, 2)
            step = f / df
            big = np.abs(step) > 0.5
            step[big] *= 0.5 / np.abs(step[big])
            z[act] = za - step
            done[act] = np.abs(step) < 1e-13 * np.maximum(1.0, np.abs(za))
            keep = (np.isfinite(z) & (_dist_to_interval(z, a, b) > 1e-9)
                    & (np.abs(z.real - mid_re) < span_re) & (np.abs(z.imag - mid_im) < span_im))
            z, done = z[keep], done[keep]
        return z, done

    z, done = newton(z, 2 ** 10, max_iter)
    z = z[done]
    # merge coarse candidates before the expensive polish
    cands: list[complex] = []
    for c in z:
        if all(abs(c - d) > 1e-6 * max(1.0, abs(c)) for d in cands):
            cands.append(complex(c))
    z, _ = newton(np.array(cands, dtype=complex), n_quad, 8)
    roots: list[complex] = []
    for c in z:
        res = abs(1.0 + gamma * borel_sum(density, c, n_quad)[0])
        if res > tol:
            continue
        if not (re[0] <= c.real <= re[1] and im[0] <= c.imag <= im[1]):
            continue
        if all(abs(c - d) > 1e-8 * max(1.0, abs(c)) for d in roots):
            roots.append(complex(c))
    return sorted(roots, key=lambda c: (c.real, c.imag))


# ------------------------------------------------------------ spectrum map

class SpectrumClass(enum.Enum):
    ISOSPECTRAL = "ISOSPECTRAL"
    EMERGENT = "EMERGENT"


@dataclass
class SpectrumMap:
    gammas: list
    eigenvalues: list
    distances: list
    classification: list
    support: tuple
    threshold: float
    flags: list = field(default_factory=list)

    def rows(self):
        """CSV rows ``re_gamma, im_gamma, re_lambda, im_lambda, dist_to_spectrum``."""
        for g, lams, ds in zip(self.gammas, self.eigenvalues, self.distances):
            for lam, d in zip(lams, ds):
                yield (g.real, g.imag, lam.real, lam.imag, d)

    def emergent(self, k: int) -> np.ndarray:
        lams = np.asarray(self.eigenvalues[k])
        return lams[np.asarray(self.distances[k]) > self.threshold]

    def to_dict(self) -> dict:
        return {
            "support": list(self.support),
            "threshold": self.threshold,
            "entries": [
                {
                    "re_gamma": g.real, "im_gamma": g.imag,
                    "classification": c.value,
                    "max_dist": float(np.max(d)) if len(d) else 0.0,
                    "emergent": [[float(z.real), float(z.imag)] for z in self.emergent(i)],
                    "flags": f,
                }
                for i, (g, c, d, f) in enumerate(zip(self.gammas, self.classification,
                                                     self.distances, self.flags))
            ],
        }


def _spectrum(gamma: complex, space: WeightedSpace):
    S = _symmetrized_A_gamma(gamma, space)
    try:
        if complex(gamma).imag == 0:
            return np.linalg.eigvalsh(S.real).astype(complex), []
        return np.linalg.eigvals(S), []
    except np.linalg.LinAlgError as exc:
        return np.array([], dtype=complex), [f"eigensolver_failure: {exc}"]


def spectrum_map(gammas, space: WeightedSpace, tol: float = 1e-6, workers: int = 1) -> SpectrumMap:
    """Eigenvalues of ``A_gamma`` for each ``gamma`` and their distance to the support.

    A ``gamma`` is EMERGENT if some eigenvalue lies farther than ``tol + 3 dt``
    from the support interval.
    """
    gammas = [complex(g) for g in np.atleast_1d(gammas)]
    a, b = space.density.support
    thr = tol + 3.0 * space.dt
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda g: _spectrum(g, space), gammas))
    eigs, dists, cls, flags = [], [], [], []
    for lam, fl in results:
        d = _dist_to_interval(lam, a, b)
        eigs.append(lam)
        dists.append(d)
        cls.append(SpectrumClass.EMERGENT if np.any(d > thr) else SpectrumClass.ISOSPECTRAL)
        flags.append(fl)
    return SpectrumMap(gammas, eigs, dists, cls, (a, b), thr, flags)


# ---------------------------------------------------------------- contours

def contour_trace(gamma: complex, center: complex, radius: float, space: WeightedSpace,
                  nodes: int = 256, margin: float | None = None) -> complex:
    """``-(1/2 pi i) tr oint (A_gamma - lambda)^-1 d lambda`` by the trapezoid rule."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    S = _symmetrized_A_gamma(gamma, space)
    margin = 0.1 * radius if margin is None else margin
    lam = np.linalg.eigvals(S)
    gap = np.min(np.abs(np.abs(lam - center) - radius)) if lam.size else np.inf
    if gap < margin:
        raise ValueError(f"contour passes within {gap:.3g} of an eigenvalue (margin {margin:.3g})")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * theta)
    n = S.shape[0]
    I = np.eye(n)
    total = 0j
    for zk in z:
        total += np.trace(np.linalg.solve(S - zk * I, I)) * (zk - center)
    # d lambda = i (lambda - c) d theta, d theta = 2 pi / nodes
    integral = total * 1j * 2.0 * np.pi / nodes
    return complex(-integral / (2j * np.pi))


def count_eigenvalues_contour(gamma: complex, center: complex, radius: float, space: WeightedSpace,
                              nodes: int = 256, margin: float | None = None,
                              max_gap: float = 0.2) -> int:
    """Number of eigenvalues of ``A_gamma`` inside the circle, from the resolvent trace."""
    T = contour_trace(gamma, center, radius, space, nodes, margin)
    k = int(round(T.real))
    gap = abs(T - k)
    if gap > max_gap:
        raise ValueError(f"contour trace {T:.4f} is not close to an integer (gap {gap:.3f})")
    return k


# ---------------------------------------------------------------- witnesses

@dataclass
class WitnessRecord:
    n: int
    lam: complex
    gamma: complex            # continuum value -1 / B rho(lambda_n)
    gamma_grid: complex       # value that makes lambda_n an eigenvalue of the grid matrix
    tau: float
    case: str
    borel: complex
    eig_residual: float
    nearest_eigenvalue_gap: float
    bound: float | None = None
    measured_norm: float | None = None
    phi_at_lambda: complex | None = None
    sup_phi_on_spectrum: float | None = None
    flags: list = field(default_factory=list)

    @property
    def passes(self) -> bool | None:
        if self.measured_norm is None:
            return None
        return self.measured_norm >= 0.95 * self.bound

    def to_dict(self) -> dict:
        def c(z):
            return None if z is None else [float(np.real(z)), float(np.imag(z))]
        return {
            "n": self.n, "case": self.case, "lambda": c(self.lam), "gamma": c(self.gamma),
            "gamma_grid": c(self.gamma_grid), "tau": self.tau, "borel": c(self.borel),
            "eig_residual": self.eig_residual, "nearest_eigenvalue_gap": self.nearest_eigenvalue_gap,
            "bound": self.bound, "measured_norm": self.measured_norm,
            "phi_at_lambda": c(self.phi_at_lambda), "sup_phi_on_spectrum": self.sup_phi_on_spectrum,
            "flags": list(self.flags),
        }


@dataclass
class WitnessChain:
    status: str               # WITNESS | NO_WITNESS
    records: list
    borel_moduli: list

    def to_dict(self) -> dict:
        return {"status": self.status, "borel_moduli": self.borel_moduli,
                "records": [r.to_dict() for r in self.records]}


def _weighted_norm(v: np.ndarray, w: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(v) ** 2 * w)))


def cli_failure_witness(density, n_max: int = 4, space: WeightedSpace | None = None,
                        case: str = "a", locus: float | None = None,
                        growth_min: float = 1.5, n_quad: int = 2 ** 16) -> WitnessChain:
    """Coupling constants ``gamma_n -> 0`` with eigenvalues ``lambda_n`` off the spectrum.

    Case ``a``: ``lambda_n = x* + i 10^-n``; case ``b``: ``lambda_n = x* + 10^-n``
    (real, to the right of the support).  ``x*`` defaults to the right endpoint.
    If ``|B rho(lambda_n)|`` grows by less than ``growth_min`` along the path
    the chain is NO_WITNESS: then ``gamma_n`` stays bounded away from zero.

    With ``space`` given, each record is checked on the grid using the value
    ``gamma_n^h = -1 / sum_k w_k / (t_k - lambda_n)``, for which ``lambda_n``
    is an exact eigenvalue with eigenvector ``1 / (t - lambda_n)``.
    """
    if case not in ("a", "b"):
        raise ValueError("case must be 'a' or 'b'")
    a, b = density.support
    x = b if locus is None else float(locus)
    ns = np.arange(1, n_max + 1)
    lams = x + (1j if case == "a" else 1.0) * 10.0 ** (-ns.astype(float))
    borels = [borel_transform(density, lam, n_quad) for lam in lams]
    moduli = [abs(e.value) for e in borels]
    if moduli[0] == 0 or moduli[-1] / moduli[0] < growth_min:
        return WitnessChain("NO_WITNESS", [], moduli)
    records = []
    for n, lam, ev in zip(ns, lams, borels):
        d = float(_dist_to_interval(lam, a, b))
        tau = 1.0 / d ** 2 if case == "b" else 1.0 / abs(lam.imag)
        rec = WitnessRecord(int(n), complex(lam), complex(-1.0 / ev.value), np.nan, tau, case,
                            complex(ev.value), np.nan, np.nan)
        if ev.shift:
            rec.flags.append("borel_shifted")
        if space is not None:
            gh = complex(-1.0 / discrete_borel_transform(space, lam))
            rec.gamma_grid = gh
            t, w = space.t_s, space.w_s
            v = 1.0 / (t - lam)
            Av = t * v + gh * np.sum(w * v)
            rec.eig_residual = _weighted_norm(Av - lam * v, w) / _weighted_norm(v, w)
            eig = np.linalg.eigvals(_symmetrized_A_gamma(gh, space))
            rec.nearest_eigenvalue_gap = float(np.min(np.abs(eig - lam)))
        records.append(rec)
    return WitnessChain("WITNESS", records, moduli)


def witness_function(record: WitnessRecord) -> ScalarFunction:
    """The entire function ``phi_n`` with ``phi_n(lambda_n) = 1`` and ``|phi_n| <= 1/e`` on the spectrum."""
    lam, tau = record.lam, record.tau
    if record.case == "a":
        s = -1j * np.sign(lam.imag) * tau

        def f(z):
            return np.exp(s * (z - lam))

        def mf(X):
            return sla.expm(s * (X - lam * np.eye(X.shape[0])))
    else:
        def f(z):
            return np.exp(-tau * (z - lam) ** 2)

        def mf(X):
            Y = X - lam * np.eye(X.shape[0])
            return sla.expm(-tau * (Y @ Y))
    return ScalarFunction(f"witness_{record.case}{record.n}", f, entire=True, matfunc=mf)


def divergence_witness(density, record: WitnessRecord, space: WeightedSpace,
                       scale_limit: float = 1e8) -> WitnessRecord:
    """Measure ``||Sigma(phi_n, gamma_n)||`` against the lower bound ``(1 - 1/e) / |gamma_n|``."""
    if not np.isfinite(record.gamma_grid):
        raise ValueError("record has no grid coupling; build it with a space")
    phi = witness_function(record)
    g = record.gamma_grid
    record.phi_at_lambda = complex(phi(record.lam))
    a, b = density.support
    tt = np.linspace(a, b, 4097)
    record.sup_phi_on_spectrum = float(np.abs(phi(tt)).max())
    record.bound = (1.0 - np.exp(-1.0)) / abs(g)
    if record.tau * (np.abs(space.t_s).max() + abs(g) * space.mass) > scale_limit:
        record.flags.append("SCALE_LIMIT")
        return record
    dq = difference_quotient(phi, g, space)
    if not np.all(np.isfinite(dq.sigma.matrix)):
        record.flags.append("SCALE_LIMIT")
        return record
    record.flags.extend(f for f in dq.sigma.flags if f not in record.flags)
    record.measured_norm = dq.sigma.norm()
    return record


# --------------------------------------------------------------- holomorphy

@dataclass
class HolomorphyReport:
    radius: float
    points: int
    probes: list
    residuals: list            # max |reconstructed - direct| / max |direct| per probe
    derivative_offdiag_error: float
    derivative_diag_error: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    def to_dict(self) -> dict:
        return {"radius": self.radius, "points": self.points,
                "probes": [[p.real, p.imag] for p in self.probes],
                "residuals": self.residuals, "max_residual": self.max_residual,
                "derivative_offdiag_error": self.derivative_offdiag_error,
                "derivative_diag_error": self.derivative_diag_error}


def holomorphy_probe(phi: ScalarFunction, space: WeightedSpace, radius: float | None = None,
                     probes=None, points: int = 64) -> HolomorphyReport:
    """Cauchy-integral test of holomorphy of ``gamma -> phi(A_gamma)`` (wave-operator form).

    Evaluates on ``points`` nodes of the circle ``|gamma| = radius`` (default
    half the certified radius), reconstructs the interior ``probes`` and the
    derivative at 0, and compares with direct evaluation and with
    :func:`friedrichs.derivative_at_zero` (off-diagonal entries).
    """
    from .friedrichs import delta_hat, derivative_at_zero, functional_calculus

    if radius is None:
        dh = delta_hat(space)
        radius = 0.5 * dh if np.isfinite(dh) else 0.25
    if probes is None:
        probes = [0.0, 0.3 * radius * np.exp(0.7j), 0.5j * radius, -0.45 * radius]
    probes = [complex(p) for p in probes]
    g = radius * np.exp(2j * np.pi * np.arange(points) / points)
    vals = np.stack([functional_calculus(phi, gk, space).matrix for gk in g])
    residuals = []
    for z in probes:
        if abs(z) >= radius:
            raise ValueError("probe points must lie inside the circle")
        rec = np.tensordot(g / (g - z), vals, axes=1) / points
        direct = functional_calculus(phi, z, space).matrix
        residuals.append(float(np.abs(rec - direct).max() / max(np.abs(direct).max(), 1e-300)))
    d_cauchy = np.tensordot(1.0 / g, vals, axes=1) / points
    d_formula = derivative_at_zero(phi, space).matrix
    off = ~np.eye(d_cauchy.shape[0], dtype=bool)
    scale = max(np.abs(d_formula).max(), 1e-300)
    off_err = float(np.abs(d_cauchy - d_formula)[off].max() / scale) if off.any() else 0.0
    diag_err = float(np.abs(np.diag(d_cauchy - d_formula)).max() / scale)
    return HolomorphyReport(float(radius), points, probes, residuals, off_err, diag_err)
