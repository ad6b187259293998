"""Limit regimes: crowding penalization, blow-up sweeps, exterior solutions.

Three numerical programs live here.  The penalization sweep drives the
crowding strength to infinity and watches the principal eigenvalue climb to
the refuge ceiling while the eigenfunction concentrates on the refuges.
The blow-up sweep pushes the growth rate toward the ceiling from below and
records the growth of the steady state on compacts inside the refuges.
The exterior program replaces the divergent refuge data by a ramp of large
Dirichlet values and extracts the minimal exterior solution by stagnation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .discretize import Discretization
from .errors import (
    InvariantError,
    MaxIters,
    NoConvergence,
    NotStagnating,
    SingularJacobian,
    SingularOperator,
)
from .operators import factorize
from .problem import FieldPair
from .spectral import (
    EigenResult,
    discrete_ceiling,
    find_lambda_infinity,
    find_lambda_star,
    lambda_alpha,
)
from .steady import _newton, build_bracket, monotone_solve


@dataclass
class AlphaSweepRecord:
    alpha: float
    lam_alpha: float
    eig: EigenResult
    lemma_slack: Tuple[float, float, float]
    refuge_mass_fraction: float


@dataclass
class BlowupRecord:
    lam: float
    max_on_K1: float
    max_on_K2: float
    exterior_diff: Optional[float] = None
    solution: Optional[FieldPair] = None
    error: Optional[str] = None


@dataclass
class LargeSolutionApprox:
    ramp_values: List[float]
    solutions: List[FieldPair]
    extrapolated: FieldPair
    diffs_on_compact: List[float]
    compact_mask: np.ndarray
    mode: str


# -- crowding penalization -----------------------------------------------------


def alpha_sweep(disc: Discretization, alpha_list: Sequence[float],
                tol: float = 1e-10) -> List[AlphaSweepRecord]:
    """Eigenvalue sweep in the crowding-penalization strength.

    Each record carries the slack of the three energy inequalities (the
    gradient, interface and penalization terms are separately bounded by
    the eigenvalue) and the share of the weighted eigenfunction mass
    sitting on the refuge nodes.
    """
    alphas = list(alpha_list)
    if any(b < a for a, b in zip(alphas, alphas[1:])):
        raise InvariantError("alpha list must be ascending")
    refuge = disc.mesh.refuge_mask_global()
    out = []
    for alpha in alphas:
        eig = lambda_alpha(disc, alpha, tol)
        phi = eig.eigenfunction.global_vector()
        lam = eig.eigenvalue
        grad = float(phi @ (disc.K @ phi))
        jump = float(phi @ (disc.B @ phi))
        penal = alpha * float(phi @ (disc.Ma * phi))
        mass = disc.Mm * phi * phi
        frac = float(np.sum(mass[refuge]) / np.sum(mass))
        out.append(AlphaSweepRecord(
            alpha=float(alpha), lam_alpha=lam, eig=eig,
            lemma_slack=(lam - grad, lam - jump, lam - penal),
            refuge_mass_fraction=frac))
    return out


# -- blow-up sweep ---------------------------------------------------------------


def _shrunk_box_mask(disc: Discretization, shrink: float = 0.25):
    """Global node masks of the refuge compacts, one per subdomain."""
    mesh = disc.mesh
    masks = {1: np.zeros(mesh.n1, dtype=bool),
             2: np.zeros(mesh.n2, dtype=bool)}
    for side in (1, 2):
        nodes = mesh.nodes(side)
        for region in mesh.regions_of(side):
            b = region.box
            dx = shrink * 0.5 * (b[1] - b[0])
            inside = (nodes[:, 0] >= b[0] + dx) & (nodes[:, 0] <= b[1] - dx)
            if len(b) == 4:
                dy = shrink * 0.5 * (b[3] - b[2])
                inside &= (nodes[:, 1] >= b[2] + dy) & \
                          (nodes[:, 1] <= b[3] - dy)
            masks[side] |= inside
    k1 = np.concatenate([masks[1], np.zeros(mesh.n2, dtype=bool)])
    k2 = np.concatenate([np.zeros(mesh.n1, dtype=bool), masks[2]])
    return k1, k2


def advance_branch(disc: Discretization, state: FieldPair, lam_from: float,
                   lam_to: float, tol: float = 1e-10,
                   max_bisections: int = 200,
                   ceiling: Optional[float] = None) -> FieldPair:
    """Continue the positive branch from one growth rate to another.

    Warm-started Newton with adaptive parameter substeps: a step whose
    result collapses (the branch is increasing, so a shrinking norm flags a
    fall into the trivial basin) or fails to converge is bisected.  Near
    the discrete ceiling the state grows like a negative power of the gap,
    so substeps are scheduled geometrically in the gap to the ceiling.
    """
    if ceiling is None:
        ceiling = discrete_ceiling(disc)
    targets = [lam_to]
    cur, cur_lam = state, lam_from
    work = 0
    while targets:
        t = targets[-1]
        if math.isfinite(ceiling) and cur_lam < t < ceiling:
            # Keep each substep from closing more than half the remaining
            # gap to the ceiling (the state scale is gap-power-law).
            gap_cur = ceiling - cur_lam
            gap_t = ceiling - t
            if gap_t < 0.5 * gap_cur - 1e-14 * ceiling:
                targets.append(ceiling - 0.5 * gap_cur)
                continue
        ok = True
        try:
            nxt, _, _ = _newton(disc, t, cur, tol, 60)
            if t > cur_lam and nxt.sup_norm < 0.5 * cur.sup_norm:
                ok = False
        except (SingularJacobian, SingularOperator, NoConvergence, MaxIters):
            ok = False
        if ok:
            cur, cur_lam = nxt, t
            targets.pop()
        else:
            work += 1
            if work > max_bisections:
                raise NoConvergence(
                    f"branch continuation stalled between {cur_lam} and {t}")
            targets.append(0.5 * (cur_lam + t))
    return cur


def blowup_sweep(disc: Discretization, lam_list: Sequence[float],
                 compacts: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                 tol: float = 1e-10,
                 seed: Optional[Tuple[float, FieldPair]] = None
                 ) -> List[BlowupRecord]:
    """Steady solutions along growth rates approaching the refuge ceiling.

    Records the maxima over fixed compacts inside each refuge.  Entries at
    or above the ceiling are recorded as window violations; the sweep
    continues from the last good state.
    """
    lam_inf = find_lambda_infinity(disc).lambda_inf
    lam_star = find_lambda_star(disc, tol)
    if compacts is None:
        compacts = _shrunk_box_mask(disc)
    k1, k2 = compacts

    if seed is None:
        lam_seed = lam_star + 0.4 * (min(lam_list[0], lam_inf) - lam_star)
        bracket = build_bracket(disc, lam_seed, tol)
        state = monotone_solve(disc, lam_seed, bracket, tol=max(tol, 1e-8),
                               from_above=True)
    else:
        lam_seed, state = seed

    ceiling = discrete_ceiling(disc)
    out: List[BlowupRecord] = []
    cur, cur_lam = state, lam_seed
    for lam in lam_list:
        if lam >= min(lam_inf, ceiling):
            out.append(BlowupRecord(
                lam=float(lam), max_on_K1=math.nan, max_on_K2=math.nan,
                error=f"WindowViolation: lam >= ceiling "
                      f"{min(lam_inf, ceiling)}"))
            continue
        try:
            cur = advance_branch(disc, cur, cur_lam, lam, tol,
                                 ceiling=ceiling)
            cur_lam = lam
            u = cur.global_vector()
            out.append(BlowupRecord(
                lam=float(lam),
                max_on_K1=float(np.max(u[k1], initial=0.0)),
                max_on_K2=float(np.max(u[k2], initial=0.0)),
                solution=cur))
        except Exception as exc:
            out.append(BlowupRecord(
                lam=float(lam), max_on_K1=math.nan, max_on_K2=math.nan,
                error=f"{type(exc).__name__}: {exc}"))
    return out


# -- exterior problem with ramped refuge data ------------------------------------


def _newton_constrained(disc: Discretization, lam: float, init: np.ndarray,
                        fixed_mask: np.ndarray, fixed_values: np.ndarray,
                        tol: float, max_iters: int = 80) -> np.ndarray:
    """Damped Newton with inhomogeneous Dirichlet data on ``fixed_mask``."""
    free = disc.free & ~fixed_mask
    idx = np.flatnonzero(free)
    p = disc.spec.p
    u = init.copy()
    u[fixed_mask] = fixed_values[fixed_mask]
    u[~disc.free] = 0.0
    A = (disc.K + disc.B).tocsr()

    def res_of(vec):
        rows = disc.residual_rows(lam, vec)
        r = rows[idx]
        z = disc._dual_solver_sub(idx)(r)
        return rows, float(np.sqrt(max(r @ z, 0.0)))

    rows, res = res_of(u)
    floor_ref = disc.residual_floor(lam, u)
    for it in range(1, max_iters + 1):
        if res <= max(tol, 8.0 * floor_ref):
            return u
        jac_diag = -lam * disc.Mm + p * disc.Ma * np.abs(u) ** (p - 1.0)
        J = (A + sp.diags(jac_diag)).tocsr()
        try:
            lu = factorize(J[idx][:, idx].tocsc(), "exterior Jacobian")
        except SingularOperator as exc:
            raise SingularJacobian(str(exc)) from exc
        delta = np.zeros_like(u)
        delta[idx] = lu.solve(-rows[idx])
        t = 1.0
        for _ in range(40):
            cand = np.maximum(u + t * delta, 0.0)
            cand[fixed_mask] = fixed_values[fixed_mask]
            cand[~disc.free] = 0.0
            cand_rows, cand_res = res_of(cand)
            if cand_res <= (1.0 - 1e-4 * t) * res or cand_res <= tol:
                u, rows, res = cand, cand_rows, cand_res
                floor_ref = disc.residual_floor(lam, u)
                break
            t *= 0.5
        else:
            if res <= 64.0 * floor_ref:
                return u
            raise SingularJacobian(
                f"exterior line search failed, residual {res:.3e}")
    raise NoConvergence(f"exterior Newton stalled at residual {res:.3e}")


def exterior_compact(disc: Discretization, margin: float = 0.1) -> np.ndarray:
    """Nodes at least ``margin`` away from every refuge box (global mask)."""
    mesh = disc.mesh
    out = np.ones(mesh.num_dofs, dtype=bool)
    for side in (1, 2):
        nodes = mesh.nodes(side)
        sl = slice(0, mesh.n1) if side == 1 else slice(mesh.n1, None)
        for region in disc.mesh.refuge_regions:
            b = region.box
            if region.subdomain == side:
                dx = np.maximum(np.maximum(b[0] - nodes[:, 0],
                                           nodes[:, 0] - b[1]), 0.0)
                if len(b) == 4:
                    dy = np.maximum(np.maximum(b[2] - nodes[:, 1],
                                               nodes[:, 1] - b[3]), 0.0)
                    dist = np.hypot(dx, dy)
                else:
                    dist = dx
                out[sl] &= dist >= margin
    return out


def minimal_large_solution(disc: Discretization, lam: float,
                           ramp: Sequence[float],
                           compact: Optional[np.ndarray] = None,
                           mode: Optional[str] = None,
                           tol: float = 1e-10,
                           stagnation_tol: float = 1e-3
                           ) -> LargeSolutionApprox:
    """Exterior solutions with ramped Dirichlet data standing in for infinity.

    All refuge nodes are constrained: in ``both`` mode every refuge carries
    the ramp value; in ``winner`` mode only the refuge with the smaller
    Dirichlet eigenvalue ramps while the other is pinned at zero.  The ramp
    solutions increase node-wise and stagnate on compacts away from the
    refuges; the last solution is the extrapolated minimal exterior state.
    """
    ramp = [float(M) for M in ramp]
    if any(b <= a for a, b in zip(ramp, ramp[1:])):
        raise InvariantError("ramp values must be strictly increasing")
    info = find_lambda_infinity(disc)
    if mode is None:
        mode = "both" if info.case == "EqualCase" else "winner"
    if compact is None:
        compact = exterior_compact(disc)
    compact = compact & disc.free & ~disc.mesh.refuge_mask_global()

    mesh = disc.mesh
    refuge_global = mesh.refuge_mask_global()
    side_of = np.concatenate([np.ones(mesh.n1, dtype=int),
                              np.full(mesh.n2, 2, dtype=int)])
    if mode == "both":
        ramp_mask = refuge_global
    else:
        winner = 1 if info.per_refuge[0] <= info.per_refuge[1] else 2
        ramp_mask = refuge_global & (side_of == winner)
    fixed_mask = refuge_global

    p = disc.spec.p
    a_floor = float(np.min(disc.a_vec[disc.free & ~refuge_global]))
    m_top = float(np.max(disc.m_vec))
    k_log = (max(lam, 1.0) * m_top / a_floor) ** (1.0 / (p - 1.0))

    solutions: List[FieldPair] = []
    diffs: List[float] = []
    prev = None
    for M in ramp:
        values = np.zeros(mesh.num_dofs)
        values[ramp_mask] = M
        if prev is None:
            init = np.full(mesh.num_dofs, max(M, 1.05 * k_log))
        else:
            init = np.maximum(prev, values)
        u = _newton_constrained(disc, lam, init, fixed_mask, values, tol)
        if prev is not None:
            drop = float(np.max(prev - u))
            if drop > 1e-7 * (1.0 + M):
                raise InvariantError(
                    f"ramp solution lost monotonicity by {drop:.3e}")
            diffs.append(float(np.max(np.abs((u - prev)[compact]))))
        solutions.append(FieldPair.from_global(mesh, u))
        prev = u

    if len(diffs) >= 1 and diffs[-1] > stagnation_tol:
        raise NotStagnating(
            f"last ramp step still moves the compact by {diffs[-1]:.3e} "
            f"(> {stagnation_tol}); move the compact away from the refuges")
    return LargeSolutionApprox(
        ramp_values=ramp, solutions=solutions,
        extrapolated=solutions[-1], diffs_on_compact=diffs,
        compact_mask=compact, mode=mode)


def exterior_convergence(disc: Discretization,
                         records: Sequence[BlowupRecord],
                         large: LargeSolutionApprox,
                         compact: Optional[np.ndarray] = None
                         ) -> List[Tuple[float, float]]:
    """Sup-distance on the exterior compact between sweep states and the limit."""
    mask = large.compact_mask if compact is None else compact
    ref = large.extrapolated.global_vector()
    out = []
    for rec in records:
        if rec.solution is None:
            continue
        u = rec.solution.global_vector()
        out.append((rec.lam, float(np.max(np.abs((u - ref)[mask])))))
    return out
