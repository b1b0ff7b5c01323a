"""Batch front end: TOML configuration, subcommands, CSV/JSON artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance failure.  All outputs are deterministic for a fixed
configuration and seed, and carry a version/config-hash header.
"""

import argparse
import os
import sys
import numpy as np
from dataclasses import dataclass, field, asdict

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .domain import DomainSpec, build_basis, DomainError, QuadratureError
from .pekar import solve_pekar, verify_assumptions, SCFError, GapError
from .model import model_from_solution
from .quadratic import hessian_matrix, ground_energy, ladder_spectrum, HessianError
from .fock import build_fock, bogoliubov_hamiltonian, FockError
from .series import (make_series_context, expansion_coefficients,
                     expansion_coefficients_degenerate, SeriesError,
                     explicit_second_order, explicit_fourth_order)
from .gross import (build_gross, verify_bogoliubov_identity, cutoff_norm,
                    approximate_eigenstate, residual_norm,
                    expansion_coefficients_gross, GrossError)
from .oracle import (exact_levels, coefficient_order_fit, growth_check,
                     OracleError)
from .reports import write_csv, write_json
from .acceptance import AcceptanceContext, run_acceptance, CriterionResult


class ConfigError(ValueError):
    pass


MAX_B = 10


@dataclass
class RunConfig:
    kind: str = "interval"
    extent: float = float(np.pi)
    K: int = 10
    M: int = 4
    N_max: int = 10
    interaction_scale: float = 1.0
    quadrature_points: int = 0
    scf_tol: float = 1e-13
    scf_max_iter: int = 600
    scf_damping: float = 0.5
    level: int = 1
    branch: int = 1
    b_max: int = 6
    alpha_min: float = 20.0
    alpha_max: float = 200.0
    alpha_count: int = 16
    cutoff: float = float("inf")
    cluster_tol: float = 1e-7
    outdir: str = "out"
    seed: int = 1234
    dim_budget: int = 60000

    def validate(self):
        if self.b_max > MAX_B or self.b_max < 0:
            raise ConfigError("b_max must lie in 0..%d" % MAX_B)
        if self.alpha_count < 1 or self.alpha_min <= 0 or self.alpha_max < self.alpha_min:
            raise ConfigError("invalid alpha grid")
        for name in ("scf_tol", "scf_damping", "cluster_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError("%s must be positive" % name)
        if self.level < 1 or self.branch < 1:
            raise ConfigError("level and branch are 1-based")
        try:
            DomainSpec(self.kind, self.extent, self.K, self.M,
                       quadrature_points=self.quadrature_points)
        except DomainError as exc:
            raise ConfigError(str(exc))
        from math import comb
        dim = comb(self.M + self.N_max, self.M) * self.K
        if dim > self.dim_budget:
            raise ConfigError(
                "combined dimension %d exceeds budget %d "
                "(K * C(M+N_max, M); see README)" % (dim, self.dim_budget))
        return self

    def alphas(self):
        return np.geomspace(self.alpha_min, self.alpha_max, self.alpha_count)


_SECTIONS = {
    "domain": {"kind": "kind", "extent": "extent"},
    "model": {"K": "K", "M": "M", "N_max": "N_max",
              "interaction_scale": "interaction_scale",
              "quadrature_points": "quadrature_points"},
    "pekar": {"tol": "scf_tol", "max_iter": "scf_max_iter", "damping": "scf_damping"},
    "series": {"level": "level", "branch": "branch", "b_max": "b_max"},
    "alpha": {"min": "alpha_min", "max": "alpha_max", "count": "alpha_count"},
    "gross": {"cutoff": "cutoff"},
    "tolerances": {"cluster_tol": "cluster_tol"},
    "run": {"outdir": "outdir", "seed": "seed", "dim_budget": "dim_budget"},
}


def load_config(path=None, overrides=None):
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError("cannot read config %s: %s" % (path, exc))
        for section, mapping in _SECTIONS.items():
            for key, val in doc.get(section, {}).items():
                if key not in mapping:
                    raise ConfigError("unknown key [%s] %s" % (section, key))
                val = _coerce(mapping[key], val)
                setattr(cfg, mapping[key], val)
        known = set(_SECTIONS)
        extra = set(doc) - known
        if extra:
            raise ConfigError("unknown config sections: %s" % sorted(extra))
    for key, val in (overrides or {}).items():
        if val is not None:
            setattr(cfg, key, _coerce(key, val))
    return cfg.validate()


def _coerce(field_name, val):
    if field_name == "cutoff":
        if isinstance(val, str):
            if val.lower() in ("inf", "infinite"):
                return float("inf")
            try:
                return float(val)
            except ValueError:
                raise ConfigError("cutoff must be a number or 'inf'")
        return float(val)
    proto = getattr(RunConfig(), field_name)
    if isinstance(proto, bool):
        return bool(val)
    if isinstance(proto, int) and not isinstance(val, bool):
        return int(val)
    if isinstance(proto, float):
        return float(val)
    return val


def _outpath(cfg, name):
    root = os.environ.get("POLARON_SERIES_OUT", ".")
    return os.path.join(root, cfg.outdir, name)


def _build_stack(cfg, need_fock=True):
    spec = DomainSpec(cfg.kind, cfg.extent, cfg.K, cfg.M,
                      quadrature_points=cfg.quadrature_points)
    basis = build_basis(spec)
    sol = solve_pekar(basis, tol=cfg.scf_tol, max_iter=cfg.scf_max_iter,
                      damping=cfg.scf_damping,
                      interaction_scale=cfg.interaction_scale)
    model = model_from_solution(basis, sol, cfg.interaction_scale)
    fock = build_fock(cfg.M, cfg.N_max) if need_fock else None
    return basis, sol, model, fock


def cmd_solve_pekar(cfg):
    basis, sol, model, _ = _build_stack(cfg, need_fock=False)
    report = verify_assumptions(basis, sol, seed=cfg.seed,
                                interaction_scale=cfg.interaction_scale)
    payload = {
        "lambdas": basis.lambdas, "c": sol.c, "phi_p": sol.phi_p,
        "e_pek": sol.e_pek, "mu_pek": sol.mu_pek, "gap": sol.gap,
        "h0_spectrum": sol.evals, "residual": sol.residual,
        "iterations": sol.iterations, "assumptions": report,
    }
    write_json(_outpath(cfg, "pekar.json"), payload, asdict(cfg))
    print("pekar: e_pek=%.12g gap=%.6g residual=%.2e unique=%s tau_hat=%.4g"
          % (sol.e_pek, sol.gap, sol.residual, report["unique"],
             report["coercivity_tau_hat"]))
    return 0


def cmd_hessian(cfg):
    basis, sol, model, _ = _build_stack(cfg, need_fock=False)
    hm = hessian_matrix(model)
    write_csv(_outpath(cfg, "hessian_tau.csv"), ("k", "tau"),
              [(k + 1, float(t)) for k, t in enumerate(hm.tau)], asdict(cfg))
    write_json(_outpath(cfg, "hessian.json"), {
        "tau": hm.tau, "ground_energy": ground_energy(hm),
        "hs_norm_B": hm.hs_norm_B(),
        "squeeze_bound_constant": hm.squeeze_bound_constant(),
        "trace_one_minus_h": float(np.trace(np.eye(hm.M) - hm.h)),
    }, asdict(cfg))
    print("hessian: tau in [%.6f, %.6f], ground %.8f"
          % (hm.tau[0], hm.tau[-1], ground_energy(hm)))
    return 0


def cmd_bogoliubov_spectrum(cfg):
    basis, sol, model, fock = _build_stack(cfg)
    hm = hessian_matrix(model)
    levels = ladder_spectrum(hm, count=None)
    rows = [(L.index, L.energy, "+".join(map(str, L.occupations[0])), L.degeneracy)
            for L in levels]
    write_csv(_outpath(cfg, "bogoliubov_levels.csv"),
              ("n", "energy", "occupations", "degeneracy"), rows, asdict(cfg))
    ev = np.linalg.eigh(bogoliubov_hamiltonian(fock, hm.G))[0]
    count = min(8, len(ev), sum(L.degeneracy for L in levels))
    from .quadratic import ladder_states
    lad = np.array([e for e, _ in ladder_states(hm, count=count)])
    rel = float(np.max(np.abs(ev[:count] - lad) / np.abs(lad)))
    write_json(_outpath(cfg, "bogoliubov_dualpath.json"), {
        "matrix_eigenvalues": ev[:count], "ladder": lad, "max_rel_err": rel,
    }, asdict(cfg))
    print("bogoliubov-spectrum: %d ladder levels, dual-path rel err %.2e"
          % (len(levels), rel))
    return 0


def cmd_series(cfg):
    basis, sol, model, fock = _build_stack(cfg)
    ctx = make_series_context(model, fock, n=cfg.level, cluster_tol=cfg.cluster_tol)
    if ctx.level.degeneracy == 1:
        E = expansion_coefficients(ctx, cfg.b_max)
        matrices = []
    else:
        E = expansion_coefficients_degenerate(ctx, cfg.branch, cfg.b_max)
        matrices = [m.tolist() for m in ctx.level_matrices]
    write_csv(_outpath(cfg, "coefficients.csv"), ("ell", "E"),
              list(enumerate(E)), asdict(cfg))
    payload = {
        "level": cfg.level, "branch": cfg.branch,
        "degeneracy": ctx.level.degeneracy, "coefficients": E,
        "level_matrices": matrices, "diagnostics": ctx.diagnostics,
        "growth": growth_check(E),
    }
    if ctx.level.degeneracy == 1 and cfg.b_max >= 4:
        payload["explicit_second"] = explicit_second_order(ctx)
        payload["explicit_fourth"] = explicit_fourth_order(ctx)
    write_json(_outpath(cfg, "series.json"), payload, asdict(cfg))
    print("series: level %d (d=%d) coefficients %s"
          % (cfg.level, ctx.level.degeneracy,
             " ".join("%.6g" % e for e in E)))
    return 0


def cmd_gross_check(cfg):
    basis, sol, model, fock = _build_stack(cfg)
    ctx = make_series_context(model, fock, n=cfg.level, cluster_tol=cfg.cluster_tol)
    b = min(cfg.b_max, 4)
    E = expansion_coefficients(ctx, max(b, 2))
    lam_w = model.lambdas[: model.M]
    mid = float(np.sqrt(0.5 * (lam_w[0] + lam_w[-1])))
    idents = []
    for cut in (0.0, mid, float("inf")):
        g = build_gross(ctx, cut)
        rep = verify_bogoliubov_identity(g)
        rep["kernel_norm"] = cutoff_norm(g)
        idents.append(rep)
    g = build_gross(ctx, cfg.cutoff)
    rows = []
    for a in cfg.alphas():
        for bb in (0, min(2, b)):
            psi, nrm = approximate_eigenstate(g, cfg.branch, a, b=bb)
            rows.append((float(a), bb, cfg.cutoff,
                         residual_norm(g, psi, a, b=bb), nrm))
    csv_path = _outpath(cfg, "gross_residuals.csv")
    write_csv(csv_path, ("alpha", "b", "cutoff", "residual", "norm"),
              rows, asdict(cfg))
    # round-trip: fit the decay orders from the CSV just written
    from .oracle import residual_order_fit
    with open(csv_path) as fh:
        lines = [l.strip() for l in fh if l.strip() and not l.startswith("#")]
    cols = lines[0].split(",")
    table = {c: np.array([float(l.split(",")[i]) for l in lines[1:]])
             for i, c in enumerate(cols)}
    fits = {}
    for bb in sorted(set(int(v) for v in table["b"])):
        sel = table["b"] == bb
        fits[str(bb)] = residual_order_fit(table["alpha"][sel],
                                           table["residual"][sel])
    diff = None
    if model.q_mats is not None and np.isfinite(cfg.cutoff):
        Ek = expansion_coefficients_gross(model, fock, cfg.level, cfg.cutoff, b)
        diff = [float(a - bb) for a, bb in zip(E[: b + 1], Ek)]
    write_json(_outpath(cfg, "gross_check.json"), {
        "identities": idents, "residual_fits": fits,
        "coefficient_shift_at_cutoff": diff,
    }, asdict(cfg))
    print("gross-check: max identity dev %.2e, max |PK1P| %.2e"
          % (max(r["identity_deviation"] for r in idents),
             max(r["pk1p_max"] for r in idents)))
    return 0


def cmd_sweep(cfg):
    basis, sol, model, fock = _build_stack(cfg)
    sweep = exact_levels(model, fock, cfg.alphas(), n_levels=8)
    rows = []
    for i, a in enumerate(sweep.alphas):
        for n in range(1, sweep.n_levels + 1):
            rows.append((float(a), n, float(sweep.levels[i, n - 1])))
    write_csv(_outpath(cfg, "sweep.csv"), ("alpha", "n", "value"), rows, asdict(cfg))
    print("sweep: %d couplings x %d levels" % (len(sweep.alphas), sweep.n_levels))
    return 0


def cmd_validate(cfg, fault=None):
    actx = AcceptanceContext(K=cfg.K, M=cfg.M, N_max=cfg.N_max,
                             extent=cfg.extent,
                             alpha_grid=cfg.alphas())
    results = run_acceptance(actx, verbose=True)
    if fault is not None:
        # corrupt one coefficient and rerun the remainder fit; the corrupted
        # entry must FAIL (nonzero exit proves sabotage is caught)
        ell, delta = fault
        bad = list(actx.coeffs)
        bad[ell] += delta
        rep = coefficient_order_fit(actx.sweep, bad, n=1,
                                    alpha_range=actx.fit_range)
        bound = -(len(bad) - 1 + 1) + 0.3
        fit_ok = rep["success_direct"] or (
            rep["slope"] is not None and rep["slope"] <= bound)
        res = CriterionResult(
            99, "remainder fit on corrupted E_%d" % ell, fit_ok,
            {"slope": rep["slope"], "bound": bound,
             "summary": "slope %s vs bound %.2f" % (rep["slope"], bound)}, 0.0)
        print(res.line())
        results = results + [res]
    payload = [{"number": r.number, "name": r.name, "passed": r.passed,
                "details": r.details, "elapsed": r.elapsed} for r in results]
    write_json(_outpath(cfg, "acceptance.json"), payload, asdict(cfg))
    return 0 if all(r.passed for r in results) else 4


def _add_common(p):
    p.add_argument("-c", "--config", help="TOML configuration file")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--N-max", dest="N_max", type=int)
    p.add_argument("--kind", choices=("interval", "ball_radial"))
    p.add_argument("--extent", type=float)
    p.add_argument("--level", type=int)
    p.add_argument("--branch", type=int)
    p.add_argument("--b-max", dest="b_max", type=int)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--alpha-count", dest="alpha_count", type=int)
    p.add_argument("--cutoff")
    p.add_argument("--interaction-scale", dest="interaction_scale", type=float)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="polaron-series",
        description="Strong-coupling eigenvalue expansion on a truncated "
                    "confined-polaron model, with exact-diagonalization checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve-pekar": cmd_solve_pekar,
        "hessian": cmd_hessian,
        "bogoliubov-spectrum": cmd_bogoliubov_spectrum,
        "series": cmd_series,
        "gross-check": cmd_gross_check,
        "sweep": cmd_sweep,
        "validate": cmd_validate,
    }
    for name in commands:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "validate":
            p.add_argument("--inject-fault", metavar="ELL:DELTA",
                           help="perturb one coefficient before the order fits")
    args = parser.parse_args(argv)

    overrides = {k: getattr(args, k) for k in (
        "outdir", "seed", "K", "M", "N_max", "kind", "extent", "level",
        "branch", "b_max", "alpha_min", "alpha_max", "alpha_count",
        "cutoff", "interaction_scale") if getattr(args, k, None) is not None}
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, DomainError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    try:
        if args.command == "validate":
            fault = None
            if getattr(args, "inject_fault", None):
                try:
                    ell_s, delta_s = args.inject_fault.split(":")
                    fault = (int(ell_s), float(delta_s))
                except ValueError:
                    print("config error: --inject-fault expects ELL:DELTA",
                          file=sys.stderr)
                    return 2
            return cmd_validate(cfg, fault=fault)
        return commands[args.command](cfg)
    except (DomainError, QuadratureError, SCFError, GapError, HessianError,
            FockError, SeriesError, GrossError, OracleError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
