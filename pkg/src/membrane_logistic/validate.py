"""Cross-module invariant suite behind the ``Validate`` command.

Each check renders one theoretical property of the model at the discrete
level and reports a measured number next to a pass/fail verdict.  All
randomness is seeded, so repeated runs produce identical rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .discretize import Discretization, discretize
from .mesh import refine
from .problem import FieldPair, ProblemSpec
from .spectral import (
    discrete_ceiling,
    find_lambda_infinity,
    find_lambda_star,
    lambda_alpha,
    second_eigenvalue,
    sigma_in_mu,
    sigma_of_lambda,
)
from .steady import (
    build_bracket,
    monotone_solve,
    subsolution_violation,
    supersolution_violation,
    two_sided_solve,
)
from .limits import alpha_sweep

_SEED = 20240311


@dataclass
class InvariantRow:
    name: str
    resolution: int
    passed: bool
    measured: float
    detail: str = ""


def _row(name, n, ok, measured, detail=""):
    return InvariantRow(name=name, resolution=n, passed=bool(ok),
                        measured=float(measured), detail=detail)


def run_invariant_suite(spec: ProblemSpec, n_per_side: int,
                        ny: Optional[int] = None,
                        tol: float = 1e-10) -> List[InvariantRow]:
    """All module invariants on one problem instance at one resolution."""
    rng = np.random.default_rng(_SEED)
    disc = discretize(spec, n_per_side, ny)
    mesh = disc.mesh
    rows: List[InvariantRow] = []
    out = rows.append
    n = n_per_side

    # -- mesh ---------------------------------------------------------------
    pair_gap = 0.0
    if len(mesh.interface_pairs):
        c1 = mesh.nodes_1[mesh.interface_pairs[:, 0]]
        c2 = mesh.nodes_2[mesh.interface_pairs[:, 1]]
        pair_gap = float(np.max(np.abs(c1 - c2)))
    out(_row("mesh/interface-pairs-coincide", n, pair_gap == 0.0, pair_gap))

    fine = refine(mesh)
    coarse_all = {tuple(np.round(c, 12)) for c in mesh.coords_global()}
    fine_all = {tuple(np.round(c, 12)) for c in fine.coords_global()}
    nested = coarse_all <= fine_all
    out(_row("mesh/refinement-nests-nodes", n, nested,
             len(coarse_all - fine_all)))

    adjacency_ok = True
    for side in (1, 2):
        mask = mesh.refuge_mask(side)
        if not mask.any():
            continue
        shape = mesh.shape_1 if side == 1 else mesh.shape_2
        from .mesh import INTERIOR, _cell_neighbour_hits
        bad = mesh.tags(side) != INTERIOR
        if _cell_neighbour_hits(mask, bad, shape):
            adjacency_ok = False
    out(_row("mesh/refuge-clear-of-boundaries", n, adjacency_ok,
             0.0 if adjacency_ok else 1.0))

    # -- operators ----------------------------------------------------------
    A_full = (disc.K + disc.B).tocsr()
    asym = abs(A_full - A_full.T)
    asym_max = float(asym.max()) if asym.nnz else 0.0
    out(_row("operators/assembled-symmetry", n, asym_max == 0.0, asym_max))

    ones = np.ones(mesh.num_dofs)
    interior = disc.free.copy()
    row_sums = np.abs(A_full @ ones)
    # Constants are in the kernel of stiffness plus jump away from the
    # Dirichlet ring (their rows see the boundary nodes, value one here).
    worst = float(np.max(row_sums[interior]))
    out(_row("operators/constants-in-kernel", n, worst <= 1e-11, worst))

    total_mass = float(np.sum(disc.M1))
    g = mesh.geometry
    if g.dim == 1:
        vol = g.bounds[1] - g.bounds[0]
    else:
        vol = (g.bounds[1] - g.bounds[0]) * (g.bounds[3] - g.bounds[2])
    out(_row("operators/mass-partition-of-unity", n,
             abs(total_mass - vol) <= 1e-12 * max(1.0, vol),
             abs(total_mass - vol)))

    if len(mesh.interface_pairs):
        u = np.zeros(mesh.num_dofs)
        i1 = mesh.global_index(1, mesh.interface_pairs[:, 0])
        i2 = mesh.global_index(2, mesh.interface_pairs[:, 1])
        u[i1], u[i2] = 1.0, 3.0
        form = float(u @ (disc.B @ u))
        if mesh.dim == 1:
            expect = spec.mu * 4.0
        else:
            length = g.bounds[3] - g.bounds[2]
            expect = spec.mu * 4.0 * length
        out(_row("operators/jump-form-exact", n,
                 abs(form - expect) <= 1e-12 * max(1.0, expect),
                 abs(form - expect)))

    lam_probe = 3.7
    u_rand = rng.standard_normal(mesh.num_dofs)
    r_matrix = disc.residual_rows(lam_probe, u_rand)
    r_quad = ops.weak_form_rows(mesh, spec.mu, disc.m_vec, disc.a_vec,
                                spec.p, lam_probe, u_rand)
    scale = float(np.max(np.abs(r_matrix)) + 1.0)
    mismatch = float(np.max(np.abs(r_matrix - r_quad))) / scale
    out(_row("operators/weak-form-two-paths", n, mismatch <= 1e-12,
             mismatch))

    stiff = ops.assemble_stiffness(mesh)
    full_op = ops.compose_LF(stiff, disc.B,
                             disc.M1 * disc.potential_vector((0.5, 0.25)))
    rhs_vec = rng.random(mesh.num_dofs)
    rhs_vec[~disc.free] = 0.0
    sol = ops.solve_linear(full_op, 0.0, disc.M1,
                           FieldPair.from_global(mesh, disc.M1 * rhs_vec))
    min_sol = float(np.min(sol.global_vector()[disc.free]))
    out(_row("operators/resolvent-positivity", n, min_sol >= 0.0, min_sol))

    sig0 = sigma_of_lambda(disc, 0.0)
    out(_row("operators/coercivity-smallest-eig", n, sig0 > 0.0, sig0))

    # -- spectral -----------------------------------------------------------
    lam_star = find_lambda_star(disc, tol)
    sig_star, eig_star = sigma_of_lambda(disc, lam_star, return_eig=True)
    out(_row("spectral/threshold-root", n, abs(sig_star) <= 1e-8,
             abs(sig_star)))
    out(_row("spectral/eigen-residual", n, eig_star.residual <= 1e-7,
             eig_star.residual))

    mins = [v for v in (eig_star.positivity_report["min_interior_1"],
                        eig_star.positivity_report["min_interior_2"])
            if v is not None]
    pos_min = min(mins) if mins else math.nan
    out(_row("spectral/eigenfunction-positivity", n, pos_min > 0.0, pos_min))

    lam_probe_list = lam_star * (1.0 + rng.random(10))
    decreasing = True
    worst_gap = math.inf
    for lp in np.sort(lam_probe_list):
        s_lo = sigma_of_lambda(disc, lp)
        s_hi = sigma_of_lambda(disc, lp + 1.0)
        worst_gap = min(worst_gap, s_lo - s_hi)
        if s_hi >= s_lo:
            decreasing = False
    out(_row("spectral/sigma-decreasing-in-lambda", n, decreasing,
             worst_gap))

    mus = sigma_in_mu(disc, [0.0, 0.5, 1.0, 5.0, 50.0])
    diffs = np.diff([s for _, s in mus])
    out(_row("spectral/sigma-nondecreasing-in-mu", n,
             bool(np.all(diffs >= -1e-9)), float(np.min(diffs))))

    s_plain = sigma_of_lambda(disc, lam_star)
    s_bumped = sigma_of_lambda(disc, lam_star, extra_potential=(0.4, 0.1))
    out(_row("spectral/sigma-monotone-in-potential", n,
             s_bumped >= s_plain - 1e-9, s_bumped - s_plain))

    A_pencil, pot = disc.operator()
    first_vec = np.concatenate([eig_star.eigenfunction.u1,
                                eig_star.eigenfunction.u2])
    lam2 = second_eigenvalue(disc, A_pencil, disc.Mm, first_vec, pot)
    gap = lam2 - lam_star
    out(_row("spectral/principal-simplicity-gap", n,
             gap > 1e-6 * max(1.0, lam_star), gap))

    # -- degenerate-only chains ----------------------------------------------
    info = find_lambda_infinity(disc)
    if spec.degenerate:
        out(_row("spectral/domain-restriction-raises-sigma", n,
                 sigma_of_lambda(disc, lam_star, domain="refuges") >
                 sig_star, sigma_of_lambda(disc, lam_star,
                                           domain="refuges") - sig_star))
        ceiling = discrete_ceiling(disc)
        recs = alpha_sweep(disc, [1.0, 100.0, 10000.0], tol)
        lams = [r.lam_alpha for r in recs]
        out(_row("limits/penalized-eigenvalue-increasing", n,
                 all(b > a for a, b in zip(lams, lams[1:])),
                 min(np.diff(lams))))
        slack_min = min(min(r.lemma_slack) for r in recs)
        out(_row("limits/energy-slacks-nonnegative", n,
                 slack_min >= -1e-8 * (1.0 + max(lams)), slack_min))
        bound = sigma_of_lambda(disc, 0.0, domain="refuges") / \
            float(np.min(disc.m_vec))
        out(_row("limits/penalized-eigenvalue-bounded", n,
                 max(lams) < bound, bound - max(lams)))
        out(_row("limits/ceiling-between-penalized-and-box", n,
                 lams[-1] <= ceiling <= info.lambda_inf + 1e-6 * ceiling,
                 info.lambda_inf - ceiling))
        lam_mid = lam_star + 0.35 * (info.lambda_inf - lam_star)
    else:
        lam_mid = 1.5 * lam_star

    # -- steady ----------------------------------------------------------------
    bracket = build_bracket(disc, lam_mid, tol)
    sub_v = subsolution_violation(disc, lam_mid, bracket.sub)
    sup_v = supersolution_violation(disc, lam_mid, bracket.sup)
    out(_row("steady/subsolution-inequality", n, sub_v <= 0.0, sub_v))
    out(_row("steady/supersolution-inequality", n, sup_v <= 0.0, sup_v))
    ordered = float(np.max(bracket.sub.global_vector() -
                           bracket.sup.global_vector()))
    out(_row("steady/bracket-ordered", n, ordered <= 0.0, ordered))

    trace = {"prev": None, "monotone": True, "contained": True}
    sub_vec = bracket.sub.global_vector()
    sup_vec = bracket.sup.global_vector()
    slack = 1e-9 * (1.0 + float(np.max(sup_vec)))

    def monitor(_, u):
        if trace["prev"] is not None and \
                np.any(u < trace["prev"] - slack):
            trace["monotone"] = False
        if np.any(u < sub_vec - slack) or np.any(u > sup_vec + slack):
            trace["contained"] = False
        trace["prev"] = u.copy()

    monotone_solve(disc, lam_mid, bracket, max(tol, 1e-8),
                   from_above=False, monitor=monitor)
    out(_row("steady/iterates-nondecreasing-from-below", n,
             trace["monotone"], 0.0 if trace["monotone"] else 1.0))
    out(_row("steady/iterates-stay-in-bracket", n, trace["contained"],
             0.0 if trace["contained"] else 1.0))

    below, above = two_sided_solve(disc, lam_mid, bracket, max(tol, 1e-9))
    two_gap = float(np.max(np.abs(below.global_vector() -
                                  above.global_vector())))
    out(_row("steady/two-sided-limits-agree", n, two_gap <= 10 * 1e-7,
             two_gap))
    u_vec = above.global_vector()
    out(_row("steady/solution-positive", n,
             float(np.min(u_vec[disc.free])) > 0.0,
             float(np.min(u_vec[disc.free]))))

    pot_a = disc.a_vec * np.abs(u_vec) ** (spec.p - 1.0)
    cert0 = sigma_of_lambda(disc, lam_mid, extra_potential=pot_a)
    certp = sigma_of_lambda(disc, lam_mid, extra_potential=spec.p * pot_a)
    out(_row("steady/certificate-at-solution-zero", n, abs(cert0) <= 1e-6,
             abs(cert0)))
    out(_row("steady/certificate-linearization-positive", n, certp > 0.0,
             certp))

    direction = rng.standard_normal(mesh.num_dofs)
    direction[~disc.free] = 0.0
    jac_diag = -lam_mid * disc.Mm + spec.p * disc.Ma * \
        np.abs(u_vec) ** (spec.p - 1.0)
    J = ((disc.K + disc.B).tocsr() + sp.diags(jac_diag))
    tau = 1e-6
    fd = (disc.residual_rows(lam_mid, u_vec + tau * direction) -
          disc.residual_rows(lam_mid, u_vec)) / tau
    jd = J @ direction
    denom = float(np.max(np.abs(jd)) + 1.0)
    fd_err = float(np.max(np.abs(fd - jd))) / denom
    out(_row("steady/jacobian-matches-differences", n, fd_err <= 50 * tau,
             fd_err))

    return rows
