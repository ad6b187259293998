"""Nonlinear steady states: monotone bracket iteration, Newton, continuation.

Existence inside the admissible growth window is witnessed constructively:
a small multiple of the principal eigenfunction is a discrete subsolution,
and a patched profile (cosine core over each refuge glued C1 to a positive
floor) scaled by a large factor is a discrete supersolution.  The monotone
iteration between them converges to the unique positive steady state; a
damped Newton iteration polishes solutions and drives the continuation in
the growth parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .discretize import Discretization
from .errors import (
    BracketFailure,
    MaxIters,
    NotContracting,
    PatchFailure,
    SingularJacobian,
    SingularOperator,
    WindowViolation,
)
from .operators import dual_norm, factorize, odd_power
from .problem import FieldPair
from .spectral import find_lambda_infinity, find_lambda_star, sigma_of_lambda

_EPS_HALVINGS = 40


@dataclass
class MonotoneBracket:
    """Ordered discrete sub/supersolution pair for one growth rate."""

    sub: FieldPair
    sup: FieldPair
    epsilon: float
    k: float


@dataclass
class BranchPoint:
    lam: float
    state: FieldPair
    sup_norm: float
    mass_norm: float
    newton_iters: int
    residual: float


@dataclass
class BifurcationDiagram:
    points: List[BranchPoint]
    lambda_star: float
    lambda_infinity: float
    failures: List[Tuple[float, str]] = field(default_factory=list)

    def sup_norms(self) -> np.ndarray:
        return np.array([p.sup_norm for p in self.points])

    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])


# -- discrete sub/supersolution checks ----------------------------------------


def _row_slack(disc: Discretization, u: np.ndarray, lam: float) -> np.ndarray:
    """Roundoff allowance for node-wise residual sign checks."""
    eps = np.finfo(float).eps
    absK = abs(disc.K) @ np.abs(u)
    absB = abs(disc.B) @ np.abs(u) if disc.B.nnz else 0.0
    scale = absK + absB + abs(lam) * disc.Mm * np.abs(u) + \
        disc.Ma * np.abs(u) ** disc.spec.p
    return 256.0 * eps * (scale + np.max(scale) * 1e-3 + 1e-300)


def subsolution_violation(disc: Discretization, lam: float,
                          state: FieldPair) -> float:
    """Largest signed violation of the subsolution inequalities (<= 0 ok)."""
    u = state.global_vector()
    rows = disc.residual_rows(lam, u)
    slack = _row_slack(disc, u, lam)
    worst = float(np.max((rows - slack)[disc.free], initial=-math.inf))
    dirichlet = ~disc.free
    if dirichlet.any():
        worst = max(worst, float(np.max(u[dirichlet])))
    return worst


def supersolution_violation(disc: Discretization, lam: float,
                            state: FieldPair) -> float:
    """Largest signed violation of the supersolution inequalities (<= 0 ok)."""
    u = state.global_vector()
    rows = disc.residual_rows(lam, u)
    slack = _row_slack(disc, u, lam)
    worst = float(np.max((-rows - slack)[disc.free], initial=-math.inf))
    dirichlet = ~disc.free
    if dirichlet.any():
        worst = max(worst, float(np.max(-u[dirichlet])))
    return worst


# -- supersolution profile ------------------------------------------------------


def _axis_profile(xi: np.ndarray, rho: float, glue: float,
                  floor_val: float) -> np.ndarray:
    """C1 profile in one coordinate: cosine core, quadratic shoulder, floor.

    ``xi`` holds distances to the box center along the axis.  The shoulder
    leaves the core with matching value and slope and lands on the constant
    floor with zero slope, so the glued function is C1 with curvature
    bounded by s**2 / (2 (t - floor)).
    """
    t = math.cos(rho * glue)
    s = rho * math.sin(rho * glue)
    width = 2.0 * (t - floor_val) / s if s > 0 else 0.0
    out = np.full(xi.shape, floor_val)
    core = xi <= glue
    out[core] = np.cos(rho * xi[core])
    if width > 0:
        shoulder = (~core) & (xi < glue + width)
        d = xi[shoulder] - glue
        out[shoulder] = t - s * d + (s * s / (4.0 * (t - floor_val))) * d * d
    return out


def _patched_profile(disc: Discretization, lam: float) -> Tuple[np.ndarray,
                                                                dict]:
    """Positive C1 profile whose cosine cores certify the refuge rows.

    Over each refuge box the profile is a tensor product of axis cosines
    around the box center with sum of squared frequencies at least lam * m
    there, so the linear rows are non-negative where crowding vanishes.
    The frequencies are split so every axis reaches the same phase at its
    glue point, which makes the construction feasible exactly up to the
    Dirichlet eigenvalue of the slightly padded box.  Outside, each axis
    profile decays C1 onto a common positive floor, where the crowding
    term can be scaled to dominate.
    """
    mesh = disc.mesh
    dim = mesh.dim
    cores = []
    for side in (1, 2):
        nodes = mesh.nodes(side)
        mask = mesh.refuge_mask(side)
        spacing = mesh.spacing(side)
        for region in mesh.regions_of(side):
            b = region.box
            inside = _nodes_in_box_mask(nodes, b) & mask
            if not inside.any():
                continue
            m_side = disc.m_vec[:mesh.n1] if side == 1 else \
                disc.m_vec[mesh.n1:]
            m_max = float(np.max(m_side[inside]))
            center = np.array([0.5 * (b[0] + b[1])] if dim == 1 else
                              [0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3])])
            glues = []
            for ax in range(dim):
                reach = float(np.max(np.abs(nodes[inside, ax] -
                                            center[ax])))
                glues.append(reach + 2.5 * spacing[ax])
            cores.append({"side": side, "center": center, "glues": glues,
                          "m_max": m_max})

    feasible = None
    for safety in (1.05, 1.02, 1.005):
        ok = True
        params = []
        for core in cores:
            # One phase for all axes: theta**2 * sum(1/glue**2) = s*lam*m.
            inv2 = sum(1.0 / g ** 2 for g in core["glues"])
            theta = math.sqrt(safety * lam * core["m_max"] / inv2)
            if theta >= 0.5 * math.pi - 1e-9 or math.cos(theta) < 0.05:
                ok = False
                break
            rhos = [theta / g for g in core["glues"]]
            params.append((core, rhos, math.cos(theta)))
        if ok:
            feasible = (safety, params)
            break
    if feasible is None:
        raise PatchFailure(
            f"no cosine core stays positive over its refuge at lam={lam}; "
            "the growth rate is too close to the refuge ceiling for a "
            "patched supersolution at this resolution")

    safety, params = feasible
    if params:
        floor_val = min(0.5 * t for _, _, t in params) ** dim
    else:
        floor_val = 0.5
    floor_ax = floor_val ** (1.0 / dim)

    psi = np.full(disc.mesh.num_dofs, floor_val)
    for core, rhos, _ in params:
        side = core["side"]
        nodes = mesh.nodes(side)
        prof = np.ones(len(nodes))
        for ax in range(dim):
            xi = np.abs(nodes[:, ax] - core["center"][ax])
            prof *= _axis_profile(xi, rhos[ax], core["glues"][ax], floor_ax)
        sl = slice(0, mesh.n1) if side == 1 else slice(mesh.n1, None)
        psi[sl] += prof - floor_val

    info = {"safety": safety, "floor": floor_val,
            "glue_values": [t for _, _, t in params]}
    return psi, info


def _nodes_in_box_mask(nodes: np.ndarray, box) -> np.ndarray:
    inside = (nodes[:, 0] >= box[0] - 1e-12) & (nodes[:, 0] <= box[1] + 1e-12)
    if len(box) == 4:
        inside &= (nodes[:, 1] >= box[2] - 1e-12) & \
                  (nodes[:, 1] <= box[3] + 1e-12)
    return inside


def _scale_supersolution(disc: Discretization, lam: float,
                         psi: np.ndarray) -> float:
    """Smallest scaling k (times a safety factor) making k*psi a supersolution."""
    rows = disc.residual_rows_linear(lam, psi)
    need = -rows
    slack = _row_slack(disc, psi, lam)
    comp = disc.Ma * np.abs(psi) ** disc.spec.p
    k_pow = 0.0
    bad = disc.free & (need > slack)
    if np.any(bad & (comp <= 0)):
        raise PatchFailure(
            "linear rows are negative on refuge nodes; cosine core failed "
            "to certify the vanishing-crowding region")
    if bad.any():
        k_pow = float(np.max(need[bad] / comp[bad]))
    p = disc.spec.p
    k = (max(k_pow, 0.0)) ** (1.0 / (p - 1.0)) if k_pow > 0 else 1.0
    return 1.05 * max(k, 1.0)


def build_bracket(disc: Discretization, lam: float,
                  tol: float = 1e-10) -> MonotoneBracket:
    """Sub/supersolution pair bracketing the positive steady state.

    Requires ``lam`` inside the admissible window: above the growth
    threshold, and below the refuge ceiling when refuges are present.  The
    subsolution is a small multiple of the principal eigenfunction; the
    supersolution is a constant (no refuges) or the patched profile.
    """
    lam_star = find_lambda_star(disc, tol)
    if lam <= lam_star:
        raise WindowViolation(
            f"lam={lam} is not above the growth threshold {lam_star}")
    lam_inf = math.inf
    if disc.spec.degenerate:
        lam_inf = find_lambda_infinity(disc).lambda_inf
        if lam >= lam_inf:
            raise WindowViolation(
                f"lam={lam} is not below the refuge ceiling {lam_inf}")

    # Supersolution.
    if disc.spec.degenerate:
        psi, _ = _patched_profile(disc, lam)
    else:
        psi = np.ones(disc.mesh.num_dofs)
    k = _scale_supersolution(disc, lam, psi)
    sup = FieldPair.from_global(disc.mesh, k * psi)
    vio = supersolution_violation(disc, lam, sup)
    doublings = 0
    while vio > 0 and doublings < 40:
        k *= 2.0
        sup = FieldPair.from_global(disc.mesh, k * psi)
        vio = supersolution_violation(disc, lam, sup)
        doublings += 1
    if vio > 0:
        raise PatchFailure(
            f"supersolution inequality still violated by {vio:.3e} "
            f"after scaling to k={k:.3e}")

    # Subsolution: a small multiple of the principal eigenfunction of the
    # shifted linear operator, which has a negative principal eigenvalue
    # inside the window.
    sigma, eig = sigma_of_lambda(disc, lam, return_eig=True)
    if sigma >= 0:
        raise WindowViolation(
            f"sigma(lam)={sigma} >= 0; lam={lam} below threshold")
    phi = eig.eigenfunction.global_vector()
    phi = phi / np.max(np.abs(phi))
    p = disc.spec.p
    epsilon = 1e-3 * (lam - lam_star) ** (1.0 / (p - 1.0))
    sub = FieldPair.from_global(disc.mesh, epsilon * phi)
    halvings = 0
    while halvings < _EPS_HALVINGS:
        if subsolution_violation(disc, lam, sub) <= 0 and \
                np.all(sub.global_vector() <= k * psi):
            break
        epsilon *= 0.5
        sub = FieldPair.from_global(disc.mesh, epsilon * phi)
        halvings += 1
    else:
        raise BracketFailure(
            f"subsolution scaling failed after {_EPS_HALVINGS} halvings "
            f"at lam={lam}")
    return MonotoneBracket(sub=sub, sup=sup, epsilon=epsilon, k=k)


def constant_bracket(disc: Discretization, lam: float,
                     k: Optional[float] = None) -> MonotoneBracket:
    """Bracket [0, k] with a constant supersolution (crowding positive).

    Valid for any growth rate in the non-degenerate configuration; used to
    demonstrate decay to the trivial state below the threshold.
    """
    if k is None:
        a_floor = float(np.min(disc.a_vec[disc.free]))
        if a_floor <= 0:
            raise PatchFailure(
                "constant supersolutions need positive crowding everywhere")
        m_top = float(np.max(disc.m_vec))
        k = 1.05 * max(1.0, (max(lam, 0.0) * m_top / a_floor) **
                       (1.0 / (disc.spec.p - 1.0)))
    sup = FieldPair.constant(disc.mesh, k)
    vio = supersolution_violation(disc, lam, sup)
    if vio > 0:
        raise PatchFailure(f"constant {k} is not a supersolution "
                           f"(violation {vio:.3e})")
    return MonotoneBracket(sub=FieldPair.zeros(disc.mesh), sup=sup,
                           epsilon=0.0, k=k)


# -- monotone iteration ---------------------------------------------------------


def _monotone_shift(disc: Discretization, lam: float,
                    top: np.ndarray) -> float:
    """Smallest shift making the update map order-preserving on [0, top]."""
    p = disc.spec.p
    vals = p * disc.a_vec * np.abs(top) ** (p - 1.0) - lam * disc.m_vec
    return float(max(np.max(vals, initial=0.0), 0.0)) + 1.0


def monotone_solve(disc: Discretization, lam: float,
                   bracket: MonotoneBracket, tol: float = 1e-10,
                   max_iters: int = 200000,
                   from_above: bool = False,
                   monitor=None) -> FieldPair:
    """Monotone fixed-point iteration between the bracket endpoints.

    Iterates u -> (L + shift)^(-1) (lam*m*u - a*u^p + shift*u) with a shift
    large enough that the update preserves order on the bracket.  From
    below the iterates increase, from above they decrease; both stay inside
    the bracket and converge to the unique steady state it encloses.  From
    above, each iterate is itself a supersolution, so the shift (and the
    factorization) is refreshed as the iterates shrink.
    """
    mesh = disc.mesh
    free = disc.free
    idx = np.flatnonzero(free)
    sub = bracket.sub.global_vector()
    sup = bracket.sup.global_vector()
    if np.any(sub > sup + 1e-12 * (1.0 + np.max(np.abs(sup)))):
        raise NotContracting("bracket endpoints are not ordered")

    u = (sup if from_above else sub).copy()
    u[~free] = 0.0

    shift = _monotone_shift(disc, lam, sup)
    A = (disc.K + disc.B).tocsr()

    def make_solver(shift_val):
        M = (A + sp.diags(shift_val * disc.M1)).tocsr()
        return factorize(M[idx][:, idx].tocsc(), "monotone iteration map")

    lu = make_solver(shift)
    span = max(float(np.max(sup)), 1.0)
    contain_slack = 1e-9 * span

    for it in range(1, max_iters + 1):
        # Defect-correction form of u -> (L+shift)^(-1)(f(u)+shift*u): the
        # same map, but exact at the fixed point where the defect vanishes.
        rows = disc.residual_rows(lam, u)
        nxt = u.copy()
        nxt[idx] = u[idx] - lu.solve(rows[idx])

        if np.any(nxt < sub - contain_slack) or \
                np.any(nxt > sup + contain_slack):
            worst = max(float(np.max(sub - nxt)), float(np.max(nxt - sup)))
            raise NotContracting(
                f"iterate escaped the bracket by {worst:.3e} at "
                f"iteration {it}")

        step = float(np.max(np.abs(nxt - u)))
        stuck = step <= 4.0 * np.finfo(float).eps * span
        u = nxt
        if monitor is not None:
            monitor(it, u)
        if it % 8 == 0 or stuck:
            res = disc.dual_norm_rows(disc.residual_rows(lam, u))
            floor = disc.residual_floor(lam, u)
            if res <= max(tol, 8.0 * floor):
                return FieldPair.from_global(mesh, u)
            if stuck:
                # The map cannot move in floating point; accept the fixed
                # point if the residual sits at its rounding scale.
                if res <= 64.0 * floor:
                    return FieldPair.from_global(mesh, u)
                raise MaxIters(
                    f"monotone iteration stagnated at residual {res:.3e} "
                    f"above tol={tol:.1e} (lam={lam})")
        if from_above and it % 40 == 0:
            fresh = _monotone_shift(disc, lam, u)
            if fresh < 0.5 * shift:
                shift = fresh
                lu = make_solver(shift)
    raise MaxIters(f"monotone iteration: {max_iters} iterations at "
                   f"lam={lam} (last step {step:.3e})")


def two_sided_solve(disc: Discretization, lam: float,
                    bracket: MonotoneBracket, tol: float = 1e-10
                    ) -> Tuple[FieldPair, FieldPair]:
    """Limits from the sub- and supersolution sides of the same bracket.

    The from-below run reuses the from-above limit as a tightened bracket
    top, which keeps its order-preserving shift (and hence its contraction
    rate) at the scale of the solution instead of the patched bound.
    """
    above = monotone_solve(disc, lam, bracket, tol, from_above=True)
    top = above.global_vector() * (1.0 + 1e-9) + 1e-12
    tight = MonotoneBracket(sub=bracket.sub,
                            sup=FieldPair.from_global(disc.mesh, top),
                            epsilon=bracket.epsilon, k=bracket.k)
    below = monotone_solve(disc, lam, tight, tol, from_above=False)
    return below, above


# -- Newton ----------------------------------------------------------------------


def _newton(disc: Discretization, lam: float, init: FieldPair,
            tol: float, max_iters: int) -> Tuple[FieldPair, int, float]:
    mesh = disc.mesh
    free = disc.free
    idx = np.flatnonzero(free)
    p = disc.spec.p
    u = np.maximum(init.global_vector(), 0.0)
    u[~free] = 0.0
    A = (disc.K + disc.B).tocsr()

    rows = disc.residual_rows(lam, u)
    res = disc.dual_norm_rows(rows)
    for it in range(1, max_iters + 1):
        if res <= max(tol, 8.0 * disc.residual_floor(lam, u)):
            return FieldPair.from_global(mesh, u), it - 1, res
        jac_diag = -lam * disc.Mm + p * disc.Ma * np.abs(u) ** (p - 1.0)
        J = (A + sp.diags(jac_diag)).tocsr()
        try:
            lu = factorize(J[idx][:, idx].tocsc(), "steady Jacobian")
        except SingularOperator as exc:
            raise SingularJacobian(
                f"Jacobian singular at lam={lam} (iteration {it}): {exc}"
            ) from exc
        delta = np.zeros_like(u)
        delta[idx] = lu.solve(-rows[idx])

        t = 1.0
        for _ in range(40):
            cand = np.maximum(u + t * delta, 0.0)
            cand[~free] = 0.0
            if np.max(cand) == 0.0 and np.max(u) > 0.0:
                # Clipping collapsed a positive state onto the trivial fixed
                # point; shorten the step instead of abandoning the branch.
                t *= 0.5
                continue
            cand_rows = disc.residual_rows(lam, cand)
            cand_res = disc.dual_norm_rows(cand_rows)
            if cand_res <= (1.0 - 1e-4 * t) * res or cand_res <= tol:
                u, rows, res = cand, cand_rows, cand_res
                break
            t *= 0.5
        else:
            if res <= 64.0 * disc.residual_floor(lam, u):
                return FieldPair.from_global(mesh, u), it, res
            raise SingularJacobian(
                f"line search failed at lam={lam}, residual {res:.3e}")
    raise MaxIters(f"Newton: {max_iters} iterations at lam={lam}, "
                   f"residual {res:.3e}")


def newton_solve(disc: Discretization, lam: float, init: FieldPair,
                 tol: float = 1e-10, max_iters: int = 60) -> FieldPair:
    """Damped Newton iteration on the steady residual from ``init``.

    Negative undershoots are clipped between steps to stay in the positive
    cone; the final residual check runs on the unclipped state.  The zero
    state is a fixed point, so a positive initial guess is required to find
    the positive branch.
    """
    state, _, _ = _newton(disc, lam, init, tol, max_iters)
    return state


# -- continuation -----------------------------------------------------------------


def continuation(disc: Discretization, lambda_grid: Sequence[float],
                 tol: float = 1e-10) -> BifurcationDiagram:
    """Warm-started Newton branch over an ascending grid of growth rates.

    The first point is seeded by the monotone bracket iteration; failures
    are recorded and the branch continues from the last good state.  Grid
    points closer to the bifurcation than 1e-6 relative are skipped since
    the linearization degenerates there.
    """
    grid = list(lambda_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise WindowViolation("lambda grid must be ascending")
    lam_star = find_lambda_star(disc, tol)
    lam_inf = math.inf
    if disc.spec.degenerate:
        lam_inf = find_lambda_infinity(disc).lambda_inf

    points: List[BranchPoint] = []
    failures: List[Tuple[float, str]] = []
    u_prev: Optional[FieldPair] = None
    for lam in grid:
        if lam - lam_star < 1e-6 * max(lam_star, 1.0):
            failures.append((lam, "skipped: within 1e-6 of the bifurcation"))
            continue
        if lam >= lam_inf:
            failures.append((lam, f"WindowViolation: lam >= {lam_inf}"))
            continue
        try:
            if u_prev is None:
                bracket = build_bracket(disc, lam, tol)
                seed = monotone_solve(disc, lam, bracket,
                                      tol=max(tol, 1e-8), from_above=True)
                state, iters, res = _newton(disc, lam, seed, tol, 60)
            else:
                state, iters, res = _newton(disc, lam, u_prev, tol, 60)
                if state.sup_norm < 0.9 * u_prev.sup_norm:
                    # The branch grows with lam; a shrinking Newton result
                    # means the warm start fell into the trivial basin.
                    # Reseed from a fresh bracket at this grid point.
                    bracket = build_bracket(disc, lam, tol)
                    seed = monotone_solve(disc, lam, bracket,
                                          tol=max(tol, 1e-8),
                                          from_above=True)
                    state, iters, res = _newton(disc, lam, seed, tol, 60)
            mass = math.sqrt(float(state.global_vector() @
                                   (disc.Mm * state.global_vector())))
            points.append(BranchPoint(
                lam=float(lam), state=state, sup_norm=state.sup_norm,
                mass_norm=mass, newton_iters=iters, residual=res))
            u_prev = state
        except Exception as exc:  # record and continue from last good state
            failures.append((lam, f"{type(exc).__name__}: {exc}"))
    return BifurcationDiagram(points=points, lambda_star=lam_star,
                              lambda_infinity=lam_inf, failures=failures)
