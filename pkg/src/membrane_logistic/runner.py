"""Experiment dispatch and machine-readable output.

Each command produces named tables (written as CSV) plus scalar results,
all collected into a JSON envelope together with the configuration echo,
its content hash, wall-clock timings and a mesh-convergence block (the
command's headline quantity at two nested resolutions with a Richardson
estimate).  Table content is deterministic: fixed iteration orders and no
timing-dependent values.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import RunConfig
from .discretize import Discretization, discretize
from .errors import MembraneError
from .limits import (
    alpha_sweep,
    blowup_sweep,
    minimal_large_solution,
)
from .problem import FieldPair
from .spectral import (
    discrete_ceiling,
    find_lambda_infinity,
    find_lambda_star,
    lambda_alpha,
    sigma_of_lambda,
)
from .steady import (
    build_bracket,
    constant_bracket,
    continuation,
    monotone_solve,
    newton_solve,
)
from .validate import run_invariant_suite


@dataclass
class ResultEnvelope:
    config: Dict
    hash: str
    results: Dict
    timings: Dict[str, float]
    mesh_convergence: Optional[Dict] = None
    ok: bool = True
    failures: List[str] = field(default_factory=list)


def _profile_table(disc: Discretization, state: FieldPair) -> Dict:
    mesh = disc.mesh
    two_d = mesh.dim == 2
    header = ["subdomain", "x", "y", "value"] if two_d else \
        ["subdomain", "x", "value"]
    rows = []
    for side, values in ((1, state.u1), (2, state.u2)):
        nodes = mesh.nodes(side)
        for i in range(len(values)):
            if two_d:
                rows.append([side, nodes[i, 0], nodes[i, 1],
                             float(values[i])])
            else:
                rows.append([side, nodes[i, 0], float(values[i])])
    return {"header": header, "rows": rows}


def _solve_steady(disc: Discretization, lam: float, tol: float):
    """One steady solve; returns the trivial state below the threshold."""
    lam_star = find_lambda_star(disc, tol)
    if lam <= lam_star * (1.0 + 1e-9):
        bracket = constant_bracket(disc, lam)
        return monotone_solve(disc, lam, bracket, tol, from_above=True)
    bracket = build_bracket(disc, lam, tol)
    seed = monotone_solve(disc, lam, bracket, max(tol, 1e-8),
                          from_above=True)
    return newton_solve(disc, lam, seed, tol)


# -- per-command implementations ----------------------------------------------


def _run_lambda_star(disc, cfg):
    lam = find_lambda_star(disc, cfg.tol)
    sig = sigma_of_lambda(disc, lam)
    tables = {"lambda_star": {
        "header": ["lambda_star", "sigma_at_lambda_star", "mu"],
        "rows": [[lam, sig, disc.spec.mu]]}}
    return tables, {"lambda_star": lam}, lam, []


def _run_lambda_infinity(disc, cfg):
    info = find_lambda_infinity(disc, cfg.tol)
    tables = {"lambda_infinity": {
        "header": ["lambda_m1", "lambda_m2", "lambda_inf", "case"],
        "rows": [[info.per_refuge[0], info.per_refuge[1],
                  info.lambda_inf, info.case]]}}
    headline = info.lambda_inf if math.isfinite(info.lambda_inf) else None
    return tables, {"lambda_inf": info.lambda_inf, "case": info.case}, \
        headline, []


def _run_eigen(disc, cfg):
    alpha = cfg.sweep.get("alpha") or 0.0
    eig = lambda_alpha(disc, alpha, cfg.tol)
    tables = {"eigenfunction": _profile_table(disc, eig.eigenfunction)}
    scalars = {"eigenvalue": eig.eigenvalue, "alpha": alpha,
               "iterations": eig.iterations, "residual": eig.residual,
               "zero_components":
                   list(eig.positivity_report["zero_components"])}
    return tables, scalars, eig.eigenvalue, []


def _run_solve(disc, cfg):
    lam = cfg.sweep.get("lambda")
    if lam is None:
        raise MembraneError("Solve requires command.lambda")
    state = _solve_steady(disc, lam, cfg.tol)
    res = disc.residual(lam, state)
    tables = {"solution": _profile_table(disc, state)}
    scalars = {"lambda": lam, "sup_norm": state.sup_norm, "residual": res}
    return tables, scalars, state.sup_norm, []


def _run_branch(disc, cfg):
    lam_star = find_lambda_star(disc, cfg.tol)
    grid = cfg.sweep.get("lambda_grid")
    if grid is None:
        grid = list(np.linspace(1.01, 3.0, 20) * lam_star)
    low = [lam for lam in grid if lam <= lam_star * (1.0 + 1e-9)]
    high = [lam for lam in grid if lam > lam_star * (1.0 + 1e-9)]
    rows = []
    failures = []
    for lam in low:
        state = monotone_solve(disc, lam, constant_bracket(disc, lam),
                               cfg.tol, from_above=True)
        mass = math.sqrt(float(state.global_vector() @
                               (disc.Mm * state.global_vector())))
        rows.append([lam, state.sup_norm, mass, 0,
                     disc.residual(lam, state)])
    headline = rows[-1][1] if rows else None
    if high:
        diagram = continuation(disc, high, cfg.tol)
        for point in diagram.points:
            rows.append([point.lam, point.sup_norm, point.mass_norm,
                         point.newton_iters, point.residual])
        failures = [f"lambda={lam}: {msg}" for lam, msg in diagram.failures]
        if diagram.points:
            headline = diagram.points[-1].sup_norm
    tables = {"branch": {
        "header": ["lambda", "sup_norm", "mass_norm", "newton_iters",
                   "residual"],
        "rows": rows}}
    return tables, {"lambda_star": lam_star}, headline, failures


def _run_alpha_sweep(disc, cfg):
    alphas = cfg.sweep.get("alpha_list")
    if alphas is None:
        alphas = [10.0 ** j for j in range(7)]
    recs = alpha_sweep(disc, alphas, cfg.tol)
    rows = [[r.alpha, r.lam_alpha, r.lemma_slack[0], r.lemma_slack[1],
             r.lemma_slack[2], r.refuge_mass_fraction] for r in recs]
    tables = {"alpha_sweep": {
        "header": ["alpha", "lambda_alpha", "slack_hnorm",
                   "slack_interface", "slack_potential",
                   "refuge_mass_fraction"],
        "rows": rows}}
    info = find_lambda_infinity(disc, cfg.tol)
    scalars = {"lambda_inf": info.lambda_inf, "case": info.case}
    return tables, scalars, recs[-1].lam_alpha, []


def _run_blowup(disc, cfg):
    ceiling = discrete_ceiling(disc)
    grid = cfg.sweep.get("lambda_grid")
    if grid is None:
        grid = [ceiling * (1.0 - 0.1 * 2.0 ** (-j)) for j in range(7)]
    recs = blowup_sweep(disc, grid, tol=cfg.tol)
    rows = [[r.lam, r.max_on_K1, r.max_on_K2,
             math.nan if r.exterior_diff is None else r.exterior_diff]
            for r in recs]
    failures = [f"lambda={r.lam}: {r.error}" for r in recs if r.error]
    tables = {"blowup": {
        "header": ["lambda", "max_on_K1", "max_on_K2", "exterior_diff"],
        "rows": rows}}
    good = [r for r in recs if r.error is None]
    headline = max(good[-1].max_on_K1, good[-1].max_on_K2) if good else None
    return tables, {"ceiling": ceiling}, headline, failures


def _run_large_solution(disc, cfg):
    lam = cfg.sweep.get("lambda")
    if lam is None:
        lam = discrete_ceiling(disc)
    ramp = cfg.sweep.get("ramp")
    if ramp is None:
        ramp = [10.0, 100.0, 1000.0, 10000.0]
    approx = minimal_large_solution(disc, lam, ramp, tol=cfg.tol)
    rows = []
    for j, M in enumerate(approx.ramp_values):
        sup_c = float(np.max(np.abs(
            approx.solutions[j].global_vector()[approx.compact_mask])))
        diff = approx.diffs_on_compact[j - 1] if j > 0 else math.nan
        rows.append([M, sup_c, diff])
    tables = {
        "large_solution": {
            "header": ["ramp_value", "sup_on_compact",
                       "diff_from_previous"],
            "rows": rows},
        "large_profile": _profile_table(disc, approx.extrapolated),
    }
    scalars = {"lambda": lam, "mode": approx.mode}
    return tables, scalars, rows[-1][1], []


def _run_validate(disc, cfg):
    rows = []
    failures = []
    for n in (cfg.n_per_side, 2 * cfg.n_per_side):
        ny = None if cfg.ny is None else \
            cfg.ny * (2 if n != cfg.n_per_side else 1)
        for row in run_invariant_suite(disc.spec, n, ny, cfg.tol):
            rows.append([row.name, row.resolution, int(row.passed),
                         row.measured])
            if not row.passed:
                failures.append(f"{row.name} at n={row.resolution}: "
                                f"measured {row.measured}")
    tables = {"validate": {
        "header": ["invariant", "resolution", "passed", "measured"],
        "rows": rows}}
    return tables, {"checks": len(rows)}, None, failures


_DISPATCH = {
    "LambdaStar": _run_lambda_star,
    "LambdaInfinity": _run_lambda_infinity,
    "Eigen": _run_eigen,
    "Solve": _run_solve,
    "Branch": _run_branch,
    "AlphaSweep": _run_alpha_sweep,
    "Blowup": _run_blowup,
    "LargeSolution": _run_large_solution,
    "Validate": _run_validate,
}

# Commands cheap enough to re-run at half resolution for the convergence
# block; the heavy sweeps report their headline without extrapolation.
_CONVERGENCE_HEADLINE = {
    "LambdaStar": lambda disc, cfg: find_lambda_star(disc, cfg.tol),
    "LambdaInfinity":
        lambda disc, cfg: find_lambda_infinity(disc, cfg.tol).lambda_inf,
    "Eigen": lambda disc, cfg: lambda_alpha(
        disc, cfg.sweep.get("alpha") or 0.0, cfg.tol).eigenvalue,
    "Solve": lambda disc, cfg: _solve_steady(
        disc, cfg.sweep["lambda"], cfg.tol).sup_norm,
}


def run(config: RunConfig) -> ResultEnvelope:
    """Dispatch one configured experiment and assemble its envelope."""
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    disc = discretize(config.spec, config.n_per_side, config.ny)
    timings["discretize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tables, scalars, headline, failures = _DISPATCH[config.command](
        disc, config)
    timings["command"] = time.perf_counter() - t0

    convergence = None
    maker = _CONVERGENCE_HEADLINE.get(config.command)
    if maker is not None and headline is not None and \
            config.n_per_side % 2 == 0 and config.n_per_side >= 8:
        t0 = time.perf_counter()
        n_half = config.n_per_side // 2
        ny_half = None if config.ny is None else max(2, config.ny // 2)
        disc_half = discretize(config.spec, n_half, ny_half)
        coarse = maker(disc_half, config)
        fine = float(headline)
        richardson = fine + (fine - coarse) / 3.0
        convergence = {
            "quantity": "headline",
            "value_h": coarse,
            "value_h_over_2": fine,
            "richardson": richardson,
            "richardson_error": abs(richardson - fine),
        }
        timings["mesh_convergence"] = time.perf_counter() - t0

    return ResultEnvelope(
        config=config.echo,
        hash=config.content_hash,
        results={"tables": tables, "scalars": _sanitize(scalars)},
        timings=timings,
        mesh_convergence=convergence,
        ok=not failures,
        failures=failures,
    )


def _sanitize(obj):
    """Make scalars JSON-safe (non-finite floats become repr strings)."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit(envelope: ResultEnvelope, output_dir: str,
         formats=("csv", "json")) -> List[str]:
    """Write one CSV per table plus the JSON envelope; overwrite in place."""
    os.makedirs(output_dir, exist_ok=True)
    written = []
    if "csv" in formats:
        for name, table in envelope.results["tables"].items():
            path = os.path.join(output_dir, f"{name}.csv")
            with open(path, "w", newline="\n") as fh:
                fh.write(",".join(table["header"]) + "\n")
                for row in table["rows"]:
                    fh.write(",".join(_format_cell(v) for v in row) + "\n")
            written.append(path)
    if "json" in formats:
        payload = {
            "config": envelope.config,
            "hash": envelope.hash,
            "results": _sanitize(envelope.results),
            "timings": envelope.timings,
            "mesh_convergence": _sanitize(envelope.mesh_convergence),
        }
        path = os.path.join(output_dir, "envelope.json")
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2, allow_nan=True)
            fh.write("\n")
        written.append(path)
    return written
