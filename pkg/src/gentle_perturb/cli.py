"""Command line runner: ``gentle-perturb <subcommand> --config path.json [--a.b=value ...]``.

Each subcommand runs a set of checks and writes ``report.json`` plus CSV tables
to the output directory.  The exit code is 0 iff every check passes, 1 if a
check fails or a numerical guard trips, 2 for an invalid configuration.
Wall-clock data goes to ``report.meta.json`` so that ``report.json`` is
byte-identical between runs with the same configuration.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import friedrichs as fr
from . import spectra as sp
from .discretization import WEIGHTED, OperatorRep, build_space, named_function
from .measures import BTB, Verdict, btb_analyze, density_from_record
from .transforms import borel_sum

log = logging.getLogger("gentle_perturb")

SUBCOMMANDS = ("btb", "waveop", "calculus", "derivative", "spectrum-map", "secular",
               "witness", "holomorphy", "all")

DEFAULTS = {
    "density": {"name": "semicircle", "params": {}},
    "grid": {"L": 4.0, "N": 1024},
    "gamma": {"kind": "single", "value": 0.05},
    "phi": None,
    "tolerances": {
        "waveop": 1e-3,
        "adjoint_pair": 1e-10,
        "calculus_fro": 1e-3,
        "derivative_identity": 1e-6,
        "derivative_fd": 1e-3,
        "secular_residual": 1e-10,
        "eig_residual": 1e-6,
        "witness_bound_slack": 0.05,
        "holomorphy": 1e-6,
        "holomorphy_derivative": 1e-4,
        "spectrum": 1e-6,
        "contour_gap": 0.05,
    },
    "btb": {"eps": None, "N": 4096},
    "spectrum": {"expect": None},
    "secular": {"region": None},
    "witness": {"n_max": 4, "case": "a"},
    "holomorphy": {"radius": None, "points": 64},
    "refine": False,
    "output": "gp_out",
    "seed": 0,
}


class ConfigError(ValueError):
    def __init__(self, fieldname: str, msg: str):
        super().__init__(f"{fieldname}: {msg}")
        self.field = fieldname


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_complex(v, fieldname: str) -> complex:
    try:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, dict):
            return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
        if isinstance(v, str):
            return complex(v.replace(" ", "").replace("i", "j"))
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(fieldname, f"not a complex number: {v!r}") from exc


def apply_override(cfg: dict, dotted: str, raw: str) -> None:
    """``--grid.N=2048`` style override; values are parsed as JSON when possible."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


@dataclass
class ExperimentConfig:
    raw: dict
    density: object
    L: float
    N: int
    gammas: list
    phis: list
    tol: dict
    output: Path
    seed: int

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        raw = _merge(DEFAULTS, d)
        try:
            density = density_from_record(raw["density"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("density", str(exc)) from exc
        try:
            L, N = float(raw["grid"]["L"]), int(raw["grid"]["N"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("grid", "needs numeric L and N") from exc
        if N < 64 or N & (N - 1):
            raise ConfigError("grid.N", f"must be a power of two >= 64, got {N}")
        if L < 2 * density.M:
            raise ConfigError("grid.L", f"padding rule needs L >= 2M = {2 * density.M}")
        gammas = cls._gammas(raw["gamma"])
        phis = cls._phis(raw["phi"])
        tol = raw["tolerances"]
        for k, v in tol.items():
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"tolerances.{k}", f"must be a nonnegative number, got {v!r}")
        try:
            seed = int(raw["seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed", "must be an integer") from exc
        return cls(raw, density, L, N, gammas, phis, tol, Path(raw["output"]), seed)

    @staticmethod
    def _gammas(g) -> list:
        if not isinstance(g, dict):
            return [parse_complex(g, "gamma")]
        kind = g.get("kind", "single")
        if kind == "single":
            return [parse_complex(g.get("value", 0.05), "gamma.value")]
        if kind == "list":
            vals = g.get("values")
            if not isinstance(vals, list) or not vals:
                raise ConfigError("gamma.values", "needs a nonempty list")
            return [parse_complex(v, f"gamma.values[{i}]") for i, v in enumerate(vals)]
        if kind == "circle":
            try:
                r, n = float(g["radius"]), int(g["count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError("gamma", "circle needs radius and count") from exc
            if r <= 0 or n < 1:
                raise ConfigError("gamma", "circle needs radius > 0 and count >= 1")
            c = parse_complex(g.get("center", 0.0), "gamma.center")
            return [c + r * np.exp(2j * np.pi * k / n) for k in range(n)]
        raise ConfigError("gamma.kind", f"unknown kind {kind!r}")

    @staticmethod
    def _phis(p) -> list:
        if p is None:
            return [named_function(n) for n in ("identity", "square", "abs", "exp")]
        specs = p if isinstance(p, list) else [p]
        out = []
        for i, s in enumerate(specs):
            if isinstance(s, str):
                s = {"name": s}
            try:
                out.append(named_function(s["name"], s.get("table")))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"phi[{i}]", str(exc)) from exc
        return out


@dataclass
class RunReport:
    config: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def check(self, name: str, value, tolerance, passed: bool, note: str | None = None):
        entry = {"name": name, "value": _jsonable(value), "tolerance": _jsonable(tolerance),
                 "pass": bool(passed)}
        if note:
            entry["note"] = note
        self.checks.append(entry)
        log.info("%s %s: %s (tol %s)", "PASS" if passed else "FAIL", name, value, tolerance)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"config": _jsonable(self.config), "checks": self.checks,
                "results": _jsonable(self.results), "all_pass": self.passed}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Path):
        return str(x)
    return x


# ---------------------------------------------------------------- suites

def _space(cfg: ExperimentConfig, N: int | None = None):
    return build_space(cfg.density, cfg.L, N or cfg.N)


def suite_btb(cfg: ExperimentConfig, rep: RunReport):
    opts = cfg.raw["btb"]
    r = btb_analyze(cfg.density, opts.get("eps"), N=int(opts.get("N", 4096)),
                    L=max(cfg.L, 2 * cfg.density.M))
    rep.results["btb"] = r.to_dict()
    rep.tables["btb.csv"] = (["eps", "sup_abs_P_eps_rho", "argmax_x"],
                             list(zip(r.eps, r.sups, r.argmax)))
    expected = {BTB.YES: Verdict.BOUNDED, BTB.NO: Verdict.LOG_DIVERGENT}.get(cfg.density.btb_expected)
    ok = expected is None or r.verdict is expected
    rep.check("btb_verdict", r.verdict.value, expected.value if expected else "any", ok)


def _halving(rep: RunReport, name: str, coarse: float, fine: float):
    ratio = fine / coarse if coarse > 0 else 0.0
    rep.check(f"{name}_refinement_ratio", ratio, 0.6, ratio <= 0.6)


def suite_waveop(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    tol = cfg.tol["waveop"]
    out = []
    for g in cfg.gammas:
        try:
            pair = fr.wave_operators(g, space, seed=cfg.seed)
        except fr.SingularCouplingError as exc:
            rep.check(f"waveop[{g}]_singular_coupling", str(exc), None, False)
            continue
        res = pair.residuals
        out.append({"gamma": g, "delta_hat": pair.psi.delta_hat, "flags": list(pair.flags),
                    "residuals": res})
        for k in ("inverse_plus_minus", "inverse_minus_plus", "intertwining", "unitarity",
                  "panel_inverse", "panel_intertwining", "panel_unitarity"):
            if res[k] is not None:
                rep.check(f"waveop[{g}]_{k}", res[k], tol, res[k] <= tol)
        if res["adjoint_pair"] is not None:
            rep.check(f"waveop[{g}]_adjoint_pair", res["adjoint_pair"], cfg.tol["adjoint_pair"],
                      res["adjoint_pair"] <= cfg.tol["adjoint_pair"])
        if cfg.raw["refine"]:
            fine = fr.wave_operators(g, _space(cfg, 2 * cfg.N), seed=cfg.seed).residuals
            out[-1]["refined_residuals"] = fine
            for k in ("inverse_plus_minus", "intertwining", "unitarity"):
                if res[k] is not None:
                    _halving(rep, f"waveop[{g}]_{k}", res[k], fine[k])
    rep.results["waveop"] = out


def _rel_fro(X: OperatorRep, Y: OperatorRep) -> float:
    d = np.linalg.norm(X.symmetrized() - Y.symmetrized())
    n = np.linalg.norm(Y.symmetrized())
    return float(d / n) if n > 0 else float(d)


def suite_calculus(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    rows = []
    for g in cfg.gammas:
        try:
            pair = fr.wave_operators(g, space, residuals=False)
        except fr.SingularCouplingError as exc:
            rep.check(f"calculus[{g}]_singular_coupling", str(exc), None, False)
            continue
        for phi in cfg.phis:
            F = fr.functional_calculus(phi, g, space, pair)
            O = sp.oracle_calculus(phi, g, space)
            rel = _rel_fro(F, O)
            opn = (F - OperatorRep(O.matrix, WEIGHTED, space)).norm()
            rows.append((g.real, g.imag, phi.name, rel, opn))
            rep.check(f"calculus[{g}]_{phi.name}_rel_fro", rel, cfg.tol["calculus_fro"],
                      rel <= cfg.tol["calculus_fro"])
            if O.flags:
                rep.check(f"calculus[{g}]_{phi.name}_oracle_flags", list(O.flags), [], False)
    rep.tables["calculus.csv"] = (["re_gamma", "im_gamma", "phi", "rel_fro", "op_norm"], rows)


def suite_derivative(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    ident = named_function("identity")
    D = fr.derivative_at_zero(ident, space)
    B = fr.assembled_B(space)
    err = float(np.abs(D.matrix - B.matrix).max() / np.abs(B.matrix).max())
    rep.check("derivative_identity_vs_B", err, cfg.tol["derivative_identity"],
              err <= cfg.tol["derivative_identity"])
    rows = []
    for phi in cfg.phis:
        if phi.name == "identity":
            continue
        Dp = fr.derivative_at_zero(phi, space)
        base = sp.oracle_calculus(phi, 0.0, space).matrix

        def fd(h):
            return (sp.oracle_calculus(phi, h, space).matrix - base) / h

        rich = 2.0 * fd(5e-3) - fd(1e-2)
        e = OperatorRep(Dp.matrix - rich, WEIGHTED, space).norm()
        rows.append((phi.name, e))
        # the Daleckii-Krein formula needs phi differentiable on the spectrum
        if phi.name in ("abs", "custom"):
            rep.results.setdefault("derivative_nonsmooth", {})[phi.name] = e
            continue
        rep.check(f"derivative_{phi.name}_vs_richardson", e, cfg.tol["derivative_fd"],
                  e <= cfg.tol["derivative_fd"])
    rep.tables["derivative.csv"] = (["phi", "op_norm_vs_richardson"], rows)


def suite_spectrum_map(cfg: ExperimentConfig, rep: RunReport, workers: int = 1):
    space = _space(cfg)
    smap = sp.spectrum_map(cfg.gammas, space, cfg.tol["spectrum"], workers=workers)
    rep.results["spectrum_map"] = smap.to_dict()
    rep.tables["spectrum.csv"] = (["re_gamma", "im_gamma", "re_lambda", "im_lambda", "dist_to_spectrum"],
                                  list(smap.rows()))
    expect = cfg.raw["spectrum"].get("expect")
    for g, c, fl in zip(smap.gammas, smap.classification, smap.flags):
        if fl:
            rep.check(f"spectrum[{g}]_eigensolver", fl, [], False)
        if expect:
            rep.check(f"spectrum[{g}]_classification", c.value, expect, c.value == expect)
    # secular roots well away from the support must show up as matrix eigenvalues
    for k, g in enumerate(smap.gammas):
        roots = sp.secular_roots(g, cfg.density, cfg.raw["secular"].get("region"))
        far = [r for r in roots if sp._dist_to_interval(r, *smap.support) >= 3 * space.dt]
        for r in far:
            gap = float(np.min(np.abs(smap.eigenvalues[k] - r)))
            rep.check(f"spectrum[{g}]_secular_root_{r:.6f}", gap, 3 * space.dt, gap <= 3 * space.dt)


def suite_secular(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    rows, out = [], []
    for g in cfg.gammas:
        roots = sp.secular_roots(g, cfg.density, cfg.raw["secular"].get("region"))
        eig = np.linalg.eigvals(sp._symmetrized_A_gamma(g, space)) if roots else np.array([])
        for r in roots:
            res = float(abs(1.0 + g * borel_sum(cfg.density, r)[0]))
            gap = float(np.min(np.abs(eig - r)))
            d = float(sp._dist_to_interval(r, *cfg.density.support))
            rows.append((g.real, g.imag, r.real, r.imag, d, res, gap))
            rep.check(f"secular[{g}]_root_{r:.6f}_residual", res, cfg.tol["secular_residual"],
                      res <= cfg.tol["secular_residual"])
            if d >= 3 * space.dt:
                rep.check(f"secular[{g}]_root_{r:.6f}_matrix_gap", gap, 3 * space.dt, gap <= 3 * space.dt)
                radius = min(0.1, d / 2, 0.5 * _separation(r, roots))
                T = sp.contour_trace(g, r, radius, space)
                rep.check(f"secular[{g}]_root_{r:.6f}_contour_count", [T.real, T.imag],
                          cfg.tol["contour_gap"], abs(T - 1) <= cfg.tol["contour_gap"])
        out.append({"gamma": g, "roots": roots})
    rep.results["secular"] = out
    rep.tables["secular.csv"] = (["re_gamma", "im_gamma", "re_lambda", "im_lambda", "dist_to_spectrum",
                                  "residual", "nearest_matrix_eigenvalue"], rows)


def _separation(r, roots) -> float:
    others = [abs(r - q) for q in roots if q != r]
    return min(others) if others else np.inf


def suite_witness(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    opts = cfg.raw["witness"]
    chain = sp.cli_failure_witness(cfg.density, int(opts.get("n_max", 4)), space,
                                   case=opts.get("case", "a"))
    for r in chain.records:
        sp.divergence_witness(cfg.density, r, space)
    rep.results["witness"] = chain.to_dict()
    rows = [(r.n, r.case, r.lam.real, r.lam.imag, r.gamma.real, r.gamma.imag, r.gamma_grid.real,
             r.gamma_grid.imag, r.tau, r.eig_residual, r.bound, r.measured_norm) for r in chain.records]
    rep.tables["witness.csv"] = (["n", "case", "re_lambda", "im_lambda", "re_gamma", "im_gamma",
                                  "re_gamma_grid", "im_gamma_grid", "tau", "eig_residual", "bound",
                                  "measured_norm"], rows)
    expected = cfg.density.btb_expected
    if expected is BTB.YES:
        rep.check("witness_status", chain.status, "NO_WITNESS", chain.status == "NO_WITNESS")
        return
    if expected is BTB.NO:
        rep.check("witness_status", chain.status, "WITNESS", chain.status == "WITNESS")
    if chain.status != "WITNESS":
        return
    rep.check("witness_record_count", len(chain.records), 3, len(chain.records) >= 3)
    mods = [abs(r.gamma) for r in chain.records]
    rep.check("witness_gamma_decreasing", mods, None, bool(np.all(np.diff(mods) < 0)))
    slack = cfg.tol["witness_bound_slack"]
    for r in chain.records:
        rep.check(f"witness[{r.n}]_eig_residual", r.eig_residual, cfg.tol["eig_residual"],
                  r.eig_residual <= cfg.tol["eig_residual"])
        if r.measured_norm is None:
            rep.check(f"witness[{r.n}]_norm", None, r.bound, False, note=",".join(r.flags))
            continue
        rep.check(f"witness[{r.n}]_norm_vs_bound", r.measured_norm, (1 - slack) * r.bound,
                  r.measured_norm >= (1 - slack) * r.bound)


def suite_holomorphy(cfg: ExperimentConfig, rep: RunReport):
    space = _space(cfg)
    opts = cfg.raw["holomorphy"]
    out = []
    for phi in cfg.phis:
        try:
            h = sp.holomorphy_probe(phi, space, opts.get("radius"), points=int(opts.get("points", 64)))
        except fr.SingularCouplingError as exc:
            rep.check(f"holomorphy_{phi.name}_singular_coupling", str(exc), None, False)
            continue
        out.append({"phi": phi.name, **h.to_dict()})
        rep.check(f"holomorphy_{phi.name}_reconstruction", h.max_residual, cfg.tol["holomorphy"],
                  h.max_residual <= cfg.tol["holomorphy"])
        rep.check(f"holomorphy_{phi.name}_derivative_offdiag", h.derivative_offdiag_error,
                  cfg.tol["holomorphy_derivative"],
                  h.derivative_offdiag_error <= cfg.tol["holomorphy_derivative"])
    rep.results["holomorphy"] = out


SUITES = {
    "btb": suite_btb,
    "waveop": suite_waveop,
    "calculus": suite_calculus,
    "derivative": suite_derivative,
    "spectrum-map": suite_spectrum_map,
    "secular": suite_secular,
    "witness": suite_witness,
    "holomorphy": suite_holomorphy,
}


def run(subcommand: str, cfg: ExperimentConfig, workers: int = 1) -> RunReport:
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    rep = RunReport(cfg.raw)
    names = list(SUITES) if subcommand == "all" else [subcommand]
    for name in names:
        try:
            if name == "spectrum-map":
                suite_spectrum_map(cfg, rep, workers)
            else:
                SUITES[name](cfg, rep)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rep.check(f"{name}_guard", f"{type(exc).__name__}: {exc}", None, False)
    return rep


def write_outputs(rep: RunReport, outdir: Path, meta: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "report.json", "w", newline="\n") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (header, rows) in rep.tables.items():
        with open(outdir / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(outdir / "report.meta.json", "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def _threads() -> int | None:
    raw = os.environ.get("GP_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("GP_THREADS", f"not an integer: {raw!r}") from None
    if n < 1:
        raise ConfigError("GP_THREADS", "must be >= 1")
    return n


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gentle-perturb", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="JSON experiment configuration")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg_dict = {}
        if args.config is not None:
            try:
                cfg_dict = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("config", str(exc)) from exc
            if not isinstance(cfg_dict, dict):
                raise ConfigError("config", "top level must be an object")
        for item in extra:
            if not item.startswith("--") or "=" not in item:
                raise ConfigError(item, "overrides look like --section.key=value")
            key, value = item[2:].split("=", 1)
            apply_override(cfg_dict, key, value)
        cfg = ExperimentConfig.from_dict(cfg_dict)
        threads = _threads()
    except ConfigError as exc:
        print(f"gentle-perturb: invalid config: {exc}", file=sys.stderr)
        return 2

    start = time.time()
    with threadpool_limits(limits=threads):
        rep = run(args.subcommand, cfg, workers=threads or 1)
    meta = {"started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
            "wall_seconds": time.time() - start, "threads": threads}
    write_outputs(rep, cfg.output, meta)
    failed = [c["name"] for c in rep.checks if not c["pass"]]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    print(f"{args.subcommand}: {len(rep.checks) - len(failed)}/{len(rep.checks)} checks passed "
          f"-> {cfg.output / 'report.json'}")
    return 0 if not failed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
