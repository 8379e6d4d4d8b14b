"""Spectral densities with known Borel transforms, and the BTB analyzer.

BTB (Borel transform boundedness) asks whether ``B rho`` is bounded in the
upper half-plane.  Since ``B rho(x + i eps) = 2 pi i (P+,eps rho)(x)``, the
analyzer watches ``sup_x |P+,eps rho(x)|`` as ``eps`` decreases.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .discretization import FLAT, Grid, VectorRep
from .transforms import smoothed_projection


class BTB(enum.Enum):
    YES = "YES"
    NO = "NO"
    UNKNOWN = "UNKNOWN"


class Verdict(enum.Enum):
    BOUNDED = "BOUNDED"
    LOG_DIVERGENT = "LOG_DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


# endpoint_power densities with a smaller exponent are flagged UNKNOWN
HOLDER_THRESHOLD = 0.1


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    name: str
    params: dict
    support: tuple[float, float]
    M: float
    func: Callable[[np.ndarray], np.ndarray]
    borel_closed: Callable[[np.ndarray], np.ndarray] | None = None
    btb_expected: BTB = BTB.UNKNOWN
    samples: dict | None = field(default=None)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.support
        out = np.zeros(t.shape)
        inside = (t >= a) & (t <= b)
        out[inside] = self.func(t[inside])
        return out

    def borel(self, lam):
        """Closed-form Borel transform, or ``None`` when there is none."""
        if self.borel_closed is None:
            return None
        return self.borel_closed(np.asarray(lam, dtype=complex))

    def to_record(self) -> dict:
        rec = {"name": self.name, "params": dict(self.params), "support": list(self.support)}
        if self.samples is not None:
            rec["samples"] = {k: list(map(float, v)) for k, v in self.samples.items()}
        return rec


def _semicircle(params):
    c = float(params.get("center", 0.0))
    r = float(params.get("radius", 1.0))
    if r <= 0:
        raise ValueError("semicircle radius must be positive")

    def func(t):
        return 2.0 / (np.pi * r * r) * np.sqrt(np.clip(r * r - (t - c) ** 2, 0.0, None))

    def closed(lam):
        z = lam - c
        # product of principal roots: the branch with B(lam) -> 0 at infinity
        return 2.0 / (r * r) * (-z + np.sqrt(z - r) * np.sqrt(z + r))

    return (c - r, c + r), func, closed, BTB.YES


def _indicator(params):
    a = float(params.get("a", -1.0))
    b = float(params.get("b", 1.0))
    if not a < b:
        raise ValueError("indicator needs a < b")

    def closed(lam):
        return np.log((b - lam) / (a - lam))

    return (a, b), lambda t: np.ones_like(t), closed, BTB.NO


def _cosine_bump(params):
    c = float(params.get("center", 0.0))
    w = float(params.get("width", 1.0))
    if w <= 0:
        raise ValueError("cosine_bump width must be positive")

    def func(t):
        return (1.0 + np.cos(np.pi * (t - c) / w)) / (2.0 * w)

    return (c - w, c + w), func, None, BTB.YES


def _endpoint_power(params):
    alpha = float(params.get("alpha", 1.0))
    if alpha < 0:
        raise ValueError("endpoint_power exponent must be nonnegative")
    # int_{-1}^{1} (1 - x^2)^alpha dx = sqrt(pi) Gamma(alpha+1) / Gamma(alpha+3/2)
    log_mass = 0.5 * np.log(np.pi) + gammaln(alpha + 1.0) - gammaln(alpha + 1.5)
    C = np.exp(-log_mass)

    def func(t):
        return C * np.clip(1.0 - t * t, 0.0, None) ** alpha

    if alpha == 0:
        btb = BTB.NO
    elif alpha >= HOLDER_THRESHOLD:
        btb = BTB.YES
    else:
        btb = BTB.UNKNOWN
    return (-1.0, 1.0), func, None, btb


def _table(params, samples, support):
    if samples is None:
        samples = params.get("samples")
    if samples is None:
        raise ValueError("table density needs samples")
    if isinstance(samples, dict):
        x = np.asarray(samples["x"], dtype=float)
        y = np.asarray(samples["y"], dtype=float)
    else:
        y = np.asarray(samples, dtype=float)
        if support is None:
            raise ValueError("table samples without abscissae need a support")
        x = np.linspace(support[0], support[1], y.size)
    if x.size < 2 or x.shape != y.shape or np.any(np.diff(x) <= 0):
        raise ValueError("table abscissae must be increasing with one value each")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("table values must be finite and nonnegative")

    def func(t):
        return np.interp(t, x, y)

    if not np.any(y):
        btb = BTB.YES
    elif y[0] != 0 or y[-1] != 0:
        btb = BTB.NO      # a jump at the edge gives a log singularity
    else:
        btb = BTB.YES     # continuous piecewise linear: Lipschitz
    return (float(x[0]), float(x[-1])), func, None, btb, {"x": x, "y": y}


def density_library(name: str, params: dict | None = None, samples=None,
                    support=None) -> SpectralDensity:
    """Build one of the named densities.

    ``params["bound"]`` sets M (default 1.5 times the largest endpoint modulus);
    the support must lie inside (-M, M).
    """
    params = dict(params or {})
    for k, v in params.items():
        if isinstance(v, (int, float)) and k not in ("center", "a", "b") and v < 0:
            raise ValueError(f"parameter {k} must be nonnegative, got {v}")
    stored = None
    if name == "semicircle":
        supp, func, closed, btb = _semicircle(params)
    elif name == "indicator":
        supp, func, closed, btb = _indicator(params)
    elif name == "cosine_bump":
        supp, func, closed, btb = _cosine_bump(params)
    elif name == "endpoint_power":
        supp, func, closed, btb = _endpoint_power(params)
    elif name == "table":
        supp, func, closed, btb, stored = _table(params, samples, support)
        params.pop("samples", None)
    else:
        raise ValueError(f"unknown density {name!r}")
    edge = max(abs(supp[0]), abs(supp[1]))
    M = float(params.get("bound", 1.5 * edge if edge > 0 else 1.0))
    if not edge < M:
        raise ValueError(f"support {supp} is not inside (-{M}, {M})")
    return SpectralDensity(name, params, supp, M, func, closed, btb, stored)


def density_from_record(rec: dict) -> SpectralDensity:
    """Inverse of :meth:`SpectralDensity.to_record`."""
    if "name" not in rec:
        raise ValueError("density record needs a name")
    return density_library(rec["name"], rec.get("params"), rec.get("samples"), rec.get("support"))


# -------------------------------------------------------------------- BTB

DEFAULT_EPS = tuple(np.logspace(-1, -3, 9))


@dataclass
class BTBReport:
    eps: np.ndarray
    sups: np.ndarray
    argmax: np.ndarray
    c0: float
    c1: float
    r2: float
    growth: float
    verdict: Verdict
    halfplane_sup: float
    growth_factor: float = 1.1

    def to_dict(self) -> dict:
        return {
            "eps": [float(e) for e in self.eps],
            "sup_abs_P_eps_rho": [float(s) for s in self.sups],
            "argmax_x": [float(x) for x in self.argmax],
            "fit_c0": self.c0,
            "fit_c1": self.c1,
            "fit_r2": self.r2,
            "last_decade_growth": self.growth,
            "verdict": self.verdict.value,
            "halfplane_sup_abs_B": self.halfplane_sup,
        }


def default_x_grid(density: SpectralDensity, grid: Grid, refine: int = 4, halo: int = 8) -> np.ndarray:
    """Grid points over the support plus a ``refine``-times finer mesh near the endpoints."""
    a, b = density.support
    t = grid.points
    base = t[(t >= a - halo * grid.dt) & (t <= b + halo * grid.dt)]
    h = grid.dt / refine
    fine = [e + h * np.arange(-refine * halo, refine * halo + 1) for e in (a, b)]
    return np.unique(np.concatenate([base, *fine]))


def btb_analyze(density: SpectralDensity, eps_schedule=None, x_grid=None, N: int = 4096,
                L: float | None = None, growth_factor: float = 1.1, r2_min: float = 0.99,
                n_heights: int = 13) -> BTBReport:
    """Heuristic BTB verdict from ``sup_x |P+,eps rho(x)|`` over a decreasing ``eps`` schedule.

    BOUNDED if the sup grows by at most ``growth_factor`` over the last decade;
    LOG_DIVERGENT if it keeps growing and fits ``c0 + c1 log(1/eps)`` with
    ``R^2 >= r2_min`` and ``c1 > 0``; INCONCLUSIVE otherwise.
    """
    eps = np.asarray(DEFAULT_EPS if eps_schedule is None else eps_schedule, dtype=float)
    if eps.size < 3 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps schedule must be positive, strictly decreasing, with >= 3 entries")
    if eps[0] / eps[-1] < 100 * (1 - 1e-9):
        raise ValueError("eps schedule must span at least two decades")
    if L is None:
        L = max(4.0, 2.0 * density.M)
    grid = Grid(float(L), int(N))
    f = VectorRep(density(grid.points).astype(complex), FLAT, grid)
    x = default_x_grid(density, grid) if x_grid is None else np.asarray(x_grid, dtype=float)

    sups, argmax = np.empty(eps.size), np.empty(eps.size)
    for i, e in enumerate(eps):
        vals = np.abs(smoothed_projection(f, e, x=x))
        j = int(np.argmax(vals))
        sups[i], argmax[i] = vals[j], x[j]

    logs = np.log(1.0 / eps)
    c1, c0 = np.polyfit(logs, sups, 1)
    resid = sups - (c0 + c1 * logs)
    ss_tot = np.sum((sups - sups.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0

    # growth over the last decade of the schedule
    k = int(np.searchsorted(-eps, -eps[-1] * 10.0 * (1 + 1e-9), side="right")) - 1
    k = max(k, 0)
    growth = sups[-1] / sups[k] if sups[k] > 0 else (1.0 if sups[-1] == 0 else np.inf)

    if growth <= growth_factor:
        verdict = Verdict.BOUNDED
    elif r2 >= r2_min and c1 > 0:
        verdict = Verdict.LOG_DIVERGENT
    else:
        verdict = Verdict.INCONCLUSIVE

    # |B rho(x + i y)| = 2 pi |P+,y rho(x)| on a Carleson-style mesh
    heights = np.logspace(np.log10(eps[-1]), 0.0, n_heights)
    xs = x[:: max(1, x.size // 512)]
    hp = max(float(np.abs(smoothed_projection(f, y, x=xs)).max()) for y in heights)
    return BTBReport(eps, sups, argmax, float(c0), float(c1), float(r2), float(growth),
                     verdict, 2.0 * np.pi * hp, growth_factor)
