"""Principal eigenvalues of the coupled operator and the derived thresholds.

All pencils solved here are symmetric with a diagonal positive weight, and
the operators are Z-matrices (non-positive off-diagonals), so the smallest
generalized eigenvalue carries a non-negative eigenfunction.  The solver is
a shifted inverse power iteration whose shift trails the Rayleigh quotient;
the converged eigenvector is required to be sign-definite, which doubles as
the positivity certificate for the principal pair.  A fixed-shift fallback
from a positive start vector recovers the principal pair if an aggressive
shift ever locks onto a higher mode.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .discretize import Discretization
from .errors import (
    BracketFailure,
    EmptyRefuge,
    InvariantError,
    NegativeWeight,
    NoConvergence,
    ShiftTooSmall,
)
from .operators import factorize
from .problem import FieldPair

_ZERO_COMPONENT_RTOL = 1e-10


@dataclass
class EigenResult:
    """Converged principal eigenpair with diagnostics."""

    eigenvalue: float
    eigenfunction: FieldPair
    iterations: int
    residual: float
    positivity_report: Dict[str, object]


@dataclass
class SigmaMap:
    """Recorded evaluations of a principal-eigenvalue curve in lambda.

    The curve is strictly decreasing; recording a value that violates the
    monotonicity beyond a small tolerance aborts with diagnostics, which
    turns the theoretical property into a runtime guard.
    """

    lambdas: List[float] = field(default_factory=list)
    sigmas: List[float] = field(default_factory=list)
    rtol: float = 1e-7

    def record(self, lam: float, sigma: float) -> None:
        pos = bisect.bisect_left(self.lambdas, lam)
        slack = self.rtol * (1.0 + abs(sigma))
        if pos > 0 and self.lambdas[pos - 1] < lam - 1e-14:
            if sigma > self.sigmas[pos - 1] + slack:
                raise InvariantError(
                    f"sigma({lam}) = {sigma} exceeds sigma("
                    f"{self.lambdas[pos - 1]}) = {self.sigmas[pos - 1]}; "
                    "the eigenvalue curve must decrease")
        if pos < len(self.lambdas) and self.lambdas[pos] > lam + 1e-14:
            if sigma < self.sigmas[pos] - slack:
                raise InvariantError(
                    f"sigma({lam}) = {sigma} undershoots sigma("
                    f"{self.lambdas[pos]}) = {self.sigmas[pos]}; "
                    "the eigenvalue curve must decrease")
        self.lambdas.insert(pos, lam)
        self.sigmas.insert(pos, sigma)

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.lambdas, self.sigmas))


@dataclass(frozen=True)
class KLambdaSpec:
    """Parameters of the positive resolvent-times-weight operator."""

    lam: float
    cap_lambda: float
    omega: float


@dataclass(frozen=True)
class LambdaInfinityResult:
    lambda_inf: float
    per_refuge: Tuple[float, float]
    case: str


# -- core pencil solver -------------------------------------------------------


def _pencil_lu(A: sp.csr_matrix, W, shift: float):
    """Factor A - shift*W, nudging the shift down if it lands singular."""
    import scipy.sparse.linalg as spla

    for attempt in range(4):
        try:
            return spla.splu((A - shift * W).tocsc()), shift
        except RuntimeError:
            shift -= max(1e-10, 1e-10 * abs(shift)) * 10 ** attempt
    raise SingularOperator("pencil shift could not be factorized",
                           smallest_pivot=0.0)


def _smallest_pencil_eig(A: sp.csr_matrix, w: np.ndarray, lower_bound: float,
                         tol: float, max_iters: int,
                         x0: Optional[np.ndarray] = None,
                         adaptive: bool = True):
    """Smallest eigenpair of A x = sigma diag(w) x on the reduced system.

    ``lower_bound`` must not exceed the smallest eigenvalue; the first
    factorization shift sits strictly below it so the shifted matrix is
    positive definite.  Convergence is declared when the dual-norm residual
    reaches ``tol`` or its rounding floor, estimated from |A| |y|.
    Returns (sigma, x, iterations, residual).
    """
    n = A.shape[0]
    if n == 0:
        raise InvariantError("empty system")
    if n == 1:
        sigma = float(A[0, 0]) / float(w[0])
        return sigma, np.ones(1) / math.sqrt(float(w[0])), 1, 0.0

    eps = np.finfo(float).eps
    absA = A.copy()
    absA.data = np.abs(absA.data)
    scale = max(1.0, abs(lower_bound))
    shift = lower_bound - max(1.0, 1e-3 * scale)
    W = sp.diags(w)
    lu, shift = _pencil_lu(A, W, shift)

    if x0 is not None and x0.shape == (n,) and np.linalg.norm(x0) > 0:
        x = x0.astype(float).copy()
    else:
        x = np.ones(n)
    x /= math.sqrt(float(x @ (w * x)))

    rho_prev = math.inf
    res = math.inf
    refactors = 0
    for it in range(1, max_iters + 1):
        y = lu.solve(w * x)
        if y @ (w * x) < 0:
            y = -y
        y /= math.sqrt(float(y @ (w * y)))
        rho = float(y @ (A @ y))
        r = A @ y - rho * (w * y)
        res = math.sqrt(float(np.sum(r * r / w)))
        row_scale = absA @ np.abs(y) + abs(rho) * (w * np.abs(y))
        floor = eps * math.sqrt(float(np.sum(row_scale ** 2 / w)))
        ref = max(1.0, abs(rho))
        if res <= max(tol * ref, 64.0 * floor) and \
                abs(rho - rho_prev) <= max(tol * ref, 64.0 * eps * ref):
            # One polishing step scrubs non-principal contamination (it
            # matters in decoupled configurations where one component must
            # vanish identically).
            z = lu.solve(w * y)
            if z @ (w * y) < 0:
                z = -z
            z /= math.sqrt(float(z @ (w * z)))
            rho_z = float(z @ (A @ z))
            r = A @ z - rho_z * (w * z)
            res_z = math.sqrt(float(np.sum(r * r / w)))
            if res_z <= res:
                return rho_z, z, it + 1, res_z
            return rho, y, it, res
        if adaptive and it >= 3 and it % 4 == 0 and refactors < 25:
            margin = max(4.0 * res, 1e-2 * abs(rho - rho_prev), 256.0 * floor)
            new_shift = rho - margin
            if new_shift > shift + 1e-12 * ref:
                lu, shift = _pencil_lu(A, W, new_shift)
                refactors += 1
        rho_prev = rho
        x = y
    raise NoConvergence(
        f"pencil eigensolve: {max_iters} iterations, residual {res:.3e}",
        iterations=max_iters, residual=res)


def _solve_principal(A: sp.csr_matrix, w_full: np.ndarray,
                     free: np.ndarray, pot_diag: np.ndarray,
                     tol: float, max_iters: int,
                     x0_full: Optional[np.ndarray] = None):
    """Principal pair of the full pencil; enforces eigenvector positivity."""
    idx = np.flatnonzero(free)
    A_ff = A[idx][:, idx].tocsr()
    w = w_full[idx]
    if np.any(w <= 0):
        raise NegativeWeight("weight mass has non-positive diagonal entries")
    lower = float(np.min(pot_diag[idx] / w))
    x0 = x0_full[idx] if x0_full is not None else None

    sigma, x, iters, res = _smallest_pencil_eig(
        A_ff, w, lower, tol, max_iters, x0=x0)
    peak = float(np.max(np.abs(x)))
    if float(np.min(x * np.sign(x[np.argmax(np.abs(x))]))) < -1e-8 * peak:
        # Aggressive shifting locked onto a non-principal mode; redo with a
        # safe fixed shift from a positive start (Perron route).
        sigma, x, iters2, res = _smallest_pencil_eig(
            A_ff, w, lower, tol, 8 * max_iters, x0=None, adaptive=False)
        iters += iters2

    full = np.zeros(len(w_full))
    full[idx] = x
    return sigma, full, iters, res


def _finalize(n1: int, free: np.ndarray, sigma, vec, iters, res,
              weight_full) -> EigenResult:
    """Sign-fix, zero-component detection and positivity report."""
    v1, v2 = vec[:n1], vec[n1:]
    w1, w2 = weight_full[:n1], weight_full[n1:]
    nrm1 = math.sqrt(float(v1 @ (w1 * v1))) if v1.size else 0.0
    nrm2 = math.sqrt(float(v2 @ (w2 * v2))) if v2.size else 0.0
    total = math.hypot(nrm1, nrm2)

    dominant = v1 if nrm1 >= nrm2 else v2
    wdom = w1 if nrm1 >= nrm2 else w2
    if float(dominant @ wdom) < 0:
        vec = -vec
        v1, v2 = vec[:n1], vec[n1:]

    zeros = []
    if nrm1 <= _ZERO_COMPONENT_RTOL * total:
        v1[:] = 0.0
        zeros.append(1)
    if v2.size and nrm2 <= _ZERO_COMPONENT_RTOL * total:
        v2[:] = 0.0
        zeros.append(2)

    report = {"zero_components": tuple(zeros)}
    for side, v in ((1, v1), (2, v2)):
        mask = free[:n1] if side == 1 else free[n1:]
        if v.size == 0 or side in zeros:
            report[f"min_interior_{side}"] = None
        else:
            report[f"min_interior_{side}"] = float(np.min(v[mask]))
    return EigenResult(
        eigenvalue=float(sigma),
        eigenfunction=FieldPair(v1.copy(), v2.copy()),
        iterations=iters,
        residual=float(res),
        positivity_report=report,
    )


def principal_eigenpair(op, weight_mass: np.ndarray, tol: float = 1e-10,
                        max_iters: int = 800,
                        x0: Optional[np.ndarray] = None) -> EigenResult:
    """Principal eigenpair of a :class:`BlockOperator` against a lumped weight.

    The eigenfunction is normalized so that the weighted quadrature of its
    square is one, and oriented so the dominant component has positive mean.
    A component whose relative norm is negligible is reported identically
    zero (the decoupled configurations legitimately produce one).
    """
    A = op.matrix()
    free = ~op.dirichlet_mask
    sigma, vec, iters, res = _solve_principal(
        A, weight_mass, free, op.pot_diag, tol, max_iters, x0)
    return _finalize(op.A11.shape[0], free, sigma, vec, iters, res,
                     weight_mass)


def _disc_eig(disc: Discretization, A, pot_diag, weight, tol, cache_key,
              max_iters: int = 800) -> EigenResult:
    """Principal pair on a discretization with warm-started iterations."""
    x0 = disc._cache.get(("eigvec", cache_key))
    sigma, vec, iters, res = _solve_principal(
        A, weight, disc.free, pot_diag, tol, max_iters, x0)
    disc._cache[("eigvec", cache_key)] = vec.copy()
    return _finalize(disc.mesh.n1, disc.free, sigma, vec, iters, res, weight)


# -- the Sigma(lambda) curve --------------------------------------------------


def _sigma_map(disc: Discretization, name: str) -> SigmaMap:
    key = ("sigma_map", name)
    if key not in disc._cache:
        disc._cache[key] = SigmaMap()
    return disc._cache[key]


def sigma_of_lambda(disc: Discretization, lam: float, domain: str = "full",
                    extra_potential=None, tol: float = 1e-11,
                    return_eig: bool = False):
    """Principal eigenvalue of the operator with potential ``q - lam * m``.

    ``domain='full'`` uses the coupled operator on the whole split domain;
    ``domain='refuges'`` solves the uncoupled Dirichlet problems on the
    refuge boxes and returns the smaller value.
    """
    if domain == "full":
        A, pot = disc.operator(lam=lam, extra_potential=extra_potential)
        key = ("sigma_full", None if extra_potential is None else "q")
        eig = _disc_eig(disc, A, pot, disc.M1, tol, key)
        if extra_potential is None:
            _sigma_map(disc, "full").record(lam, eig.eigenvalue)
        return (eig.eigenvalue, eig) if return_eig else eig.eigenvalue

    if domain != "refuges":
        raise InvariantError(f"unknown domain {domain!r}")
    if extra_potential is not None:
        raise InvariantError("extra potential unsupported on refuge domain")
    problems = disc.refuge_problems()
    best = math.inf
    best_eig = None
    for side in (1, 2):
        for submesh, K, Mm, lump in problems[side]:
            pot = -lam * Mm
            A = (K + sp.diags(pot)).tocsr()
            free = ~submesh.dirichlet_mask()
            sigma, vec, iters, res = _solve_principal(
                A, lump, free, pot, tol, 800)
            if sigma < best:
                best = sigma
                best_eig = (submesh, sigma, vec, iters, res, lump)
    if best_eig is None:
        raise EmptyRefuge("no refuge regions tagged")
    _sigma_map(disc, "refuges").record(lam, best)
    if return_eig:
        submesh, sigma, vec, iters, res, lump = best_eig
        result = _finalize(submesh.n1, ~submesh.dirichlet_mask(),
                           sigma, vec, iters, res, lump)
        return best, result
    return best


# -- thresholds ---------------------------------------------------------------


def find_lambda_star(disc: Discretization, tol: float = 1e-10) -> float:
    """Growth threshold: the root of the decreasing curve sigma(lambda).

    Computed directly as the principal eigenvalue of the weighted pencil
    (stiffness + coupling, growth mass), then certified by evaluating
    sigma at the candidate; if the certificate misses the tolerance the
    bracketed bisection/secant root finder takes over.
    """
    key = ("lambda_star", tol)
    if key in disc._cache:
        return disc._cache[key]

    A, pot = disc.operator()
    eig = _disc_eig(disc, A, pot, disc.Mm, min(tol, 1e-11), "lambda_star")
    candidate = eig.eigenvalue
    sigma_at = sigma_of_lambda(disc, candidate)
    if abs(sigma_at) <= tol:
        disc._cache[key] = candidate
        disc._cache[("lambda_star_eig",)] = eig
        return candidate

    lam = _root_of_sigma(disc, candidate, tol)
    disc._cache[key] = lam
    return lam


def _root_of_sigma(disc: Discretization, seed: float, tol: float) -> float:
    lo, s_lo = 0.0, sigma_of_lambda(disc, 0.0)
    if s_lo <= 0:
        raise BracketFailure("sigma(0) <= 0; operator not coercive")
    hi = max(2.0 * abs(seed), 1.0)
    s_hi = sigma_of_lambda(disc, hi)
    grow = 0
    while s_hi > 0:
        hi *= 2.0
        s_hi = sigma_of_lambda(disc, hi)
        grow += 1
        if grow > 60:
            raise BracketFailure(f"no sign change of sigma up to {hi}")
    while hi - lo > 1e-3 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        s_mid = sigma_of_lambda(disc, mid)
        if s_mid > 0:
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    a, fa, b, fb = lo, s_lo, hi, s_hi
    for _ in range(80):
        if abs(fb) <= tol:
            return b
        new = b - fb * (b - a) / (fb - fa)
        if not (lo <= new <= hi):
            new = 0.5 * (a + b)
        fnew = sigma_of_lambda(disc, new)
        a, fa, b, fb = b, fb, new, fnew
    raise NoConvergence(f"secant stalled at sigma={fb:.3e}", residual=fb)


def find_lambda_infinity(disc: Discretization, tol: float = 1e-10,
                         n_refuge: Optional[int] = None
                         ) -> LambdaInfinityResult:
    """Weighted Dirichlet eigenvalues of the refuges and their infimum.

    Returns an infinite sentinel when no refuges are tagged (non-degenerate
    configuration).  The case flag discriminates which refuge carries the
    limit eigenfunction, with ties detected at a relative tolerance.
    """
    problems = disc.refuge_problems(n_refuge)
    per: List[float] = []
    for side in (1, 2):
        best = math.inf
        for submesh, K, Mm, lump in problems[side]:
            free = ~submesh.dirichlet_mask()
            sigma, _, _, _ = _solve_principal(
                K, Mm, free, np.zeros(K.shape[0]), tol, 800)
            best = min(best, sigma)
        per.append(best)

    finite = [v for v in per if math.isfinite(v)]
    if not finite:
        return LambdaInfinityResult(math.inf, (math.inf, math.inf),
                                    "NonDegenerate")
    lam_inf = min(per)
    if any(not math.isfinite(v) for v in per):
        case = "FirstSmaller" if per[0] < per[1] else "SecondSmaller"
    elif abs(per[0] - per[1]) <= 1e-8 * lam_inf:
        case = "EqualCase"
    elif per[0] < per[1]:
        case = "FirstSmaller"
    else:
        case = "SecondSmaller"
    return LambdaInfinityResult(float(lam_inf), (per[0], per[1]), case)


def discrete_ceiling(disc: Discretization, tol: float = 1e-11) -> float:
    """Growth ceiling of this discretization: the confined-well eigenvalue.

    Principal eigenvalue of the stiffness pencil with every node outside
    the refuge masks constrained.  This is the limit of the penalized
    eigenvalues at this resolution, and the value at which the discrete
    steady branch diverges; it sits an O(h) amount below the eigenvalue of
    the exact refuge boxes.
    """
    key = ("ceiling", tol)
    if key in disc._cache:
        return disc._cache[key]
    refuge = disc.mesh.refuge_mask_global() & disc.free
    if not refuge.any():
        return math.inf
    sigma, _, _, _ = _solve_principal(
        disc.K, disc.Mm, refuge, np.zeros(disc.mesh.num_dofs), tol, 800)
    disc._cache[key] = float(sigma)
    return disc._cache[key]


def lambda_alpha(disc: Discretization, alpha: float,
                 tol: float = 1e-10) -> EigenResult:
    """Principal pair of the crowding-penalized pencil at strength ``alpha``.

    At alpha = 0 this reduces to the growth threshold; as alpha grows the
    eigenvalue increases toward the refuge limit while the eigenfunction
    concentrates on the refuges.
    """
    if alpha < 0:
        raise InvariantError(f"alpha must be non-negative, got {alpha}")
    A, pot = disc.operator(alpha=alpha)
    return _disc_eig(disc, A, pot, disc.Mm, tol, "lambda_alpha")


def spectral_radius_K(disc: Discretization, kspec: KLambdaSpec,
                      potential=None, tol: float = 1e-10,
                      max_iters: int = 5000) -> float:
    """Spectral radius of (L_F + Lambda)^(-1) (lam*M + (Lambda+omega)).

    Power iteration on the positive operator; the node-wise positivity of
    the numerator weight and the positive definiteness of the shifted
    denominator are checked up front.
    """
    lam, cap, omega = kspec.lam, kspec.cap_lambda, kspec.omega
    if np.any(lam * disc.m_vec + cap + omega <= 0):
        raise InvariantError(
            "lam*m + Lambda + omega must be positive at every node")
    sigma_F = sigma_of_lambda(disc, 0.0, extra_potential=potential)
    if cap + sigma_F <= 0:
        raise ShiftTooSmall(
            f"Lambda={cap} does not dominate -Sigma[L_F]={-sigma_F}")

    q = disc.potential_vector(potential)
    pot = disc.lump * q + cap * disc.M1
    A = (disc.K + disc.B + sp.diags(pot)).tocsr()
    idx = np.flatnonzero(disc.free)
    lu = factorize(A[idx][:, idx].tocsc(), "shifted resolvent")
    num = (lam * disc.Mm + (cap + omega) * disc.M1)[idx]
    den_mat = A[idx][:, idx].tocsr()

    x = np.ones(len(idx))
    x /= np.linalg.norm(x)
    rho_prev = math.inf
    for it in range(1, max_iters + 1):
        y = lu.solve(num * x)
        ny = np.linalg.norm(y)
        y /= ny
        rho = float((y @ (num * y)) / (y @ (den_mat @ y)))
        r = num * y - rho * (den_mat @ y)
        res = float(np.linalg.norm(r))
        if abs(rho - rho_prev) <= tol * max(1.0, abs(rho)) and \
                res <= 100 * tol * max(1.0, abs(rho)):
            if float(np.min(y * np.sign(y[np.argmax(np.abs(y))]))) < \
                    -1e-8 * float(np.max(np.abs(y))):
                raise NoConvergence("radius eigenvector not sign-definite",
                                    iterations=it, residual=res)
            return rho
        rho_prev = rho
        x = y
    raise NoConvergence("spectral radius power iteration stalled",
                        iterations=max_iters)


def sigma_in_mu(disc: Discretization, mu_list) -> List[Tuple[float, float]]:
    """Principal eigenvalue as a function of the membrane permeability.

    The jump form grows with mu, so the sequence is non-decreasing; a
    violation beyond solver noise aborts.
    """
    out = []
    prev = -math.inf
    for mu in mu_list:
        if mu < 0:
            raise InvariantError(f"mu={mu} < 0")
        B = disc.interface_matrix(mu)
        A = (disc.K + B).tocsr()
        eig = _disc_eig(disc, A, np.zeros(disc.mesh.num_dofs), disc.M1,
                        1e-11, ("sigma_mu",))
        sigma = eig.eigenvalue
        if sigma < prev - 1e-8 * max(1.0, abs(sigma)):
            raise InvariantError(
                f"sigma decreased from {prev} to {sigma} as mu grew to {mu}")
        out.append((float(mu), sigma))
        prev = sigma
    return out


def second_eigenvalue(disc: Discretization, A: sp.csr_matrix,
                      weight: np.ndarray, first_vec: np.ndarray,
                      pot_diag: np.ndarray, tol: float = 1e-8) -> float:
    """Second-smallest pencil eigenvalue via deflated inverse iteration."""
    idx = np.flatnonzero(disc.free)
    A_ff = A[idx][:, idx].tocsr()
    w = weight[idx]
    phi = first_vec[idx]
    phi = phi / math.sqrt(float(phi @ (w * phi)))
    lower = float(np.min(pot_diag[idx] / w))
    shift = lower - 1.0
    lu = factorize((A_ff - shift * sp.diags(w)).tocsc(), "deflated pencil")

    rng = np.random.default_rng(12345)
    x = rng.standard_normal(len(idx))
    x -= phi * float(phi @ (w * x))
    x /= math.sqrt(float(x @ (w * x)))
    rho_prev = math.inf
    for _ in range(4000):
        y = lu.solve(w * x)
        y -= phi * float(phi @ (w * y))
        y /= math.sqrt(float(y @ (w * y)))
        rho = float(y @ (A_ff @ y))
        if abs(rho - rho_prev) <= tol * max(1.0, abs(rho)):
            return rho
        rho_prev = rho
        x = y
    raise NoConvergence("deflated iteration stalled")
