"""Assembly of the discrete coupled operator and the basic linear solve.

Discretization: piecewise-linear elements on the structured grids with
lumped mass (equivalently, second-order finite differences).  The membrane
coupling is a symmetric jump form acting on the duplicated interface pairs;
its sign convention (normal pointing out of subdomain 1) is encoded here
once.  Dirichlet constraints are kept as a mask and eliminated only inside
the solver, so residuals of non-admissible functions (sub/supersolutions)
can be evaluated on the full operator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    NegativePermeability,
    SingularOperator,
)
from .mesh import MembraneMesh
from .problem import FieldPair


def odd_power(u: np.ndarray, q: float) -> np.ndarray:
    """Sign-preserving power |u|**q * sign(u); the natural odd extension."""
    return np.sign(u) * np.abs(u) ** q


# -- one-dimensional building blocks ----------------------------------------


def _stiffness_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n + 1, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _lumped_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2.0
    return w


def _consistent_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n + 1, 4.0 * h / 6.0)
    main[0] = main[-1] = 2.0 * h / 6.0
    off = np.full(n, h / 6.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _side_stiffness(mesh: MembraneMesh, side: int) -> sp.csr_matrix:
    shape = mesh.shape_1 if side == 1 else mesh.shape_2
    spacing = mesh.spacing(side)
    if shape[0] == 0:
        return sp.csr_matrix((0, 0))
    if mesh.dim == 1:
        return _stiffness_1d(shape[0] - 1, spacing[0])
    nx, ny = shape[0] - 1, shape[1] - 1
    kx = _stiffness_1d(nx, spacing[0])
    ky = _stiffness_1d(ny, spacing[1])
    wx = sp.diags(_lumped_1d(nx, spacing[0]))
    wy = sp.diags(_lumped_1d(ny, spacing[1]))
    return (sp.kron(kx, wy) + sp.kron(wx, ky)).tocsr()


def lumped_weights(mesh: MembraneMesh, side: int) -> np.ndarray:
    """Per-node quadrature weights (trapezoid tensor product)."""
    shape = mesh.shape_1 if side == 1 else mesh.shape_2
    spacing = mesh.spacing(side)
    if shape[0] == 0:
        return np.zeros(0)
    if mesh.dim == 1:
        return _lumped_1d(shape[0] - 1, spacing[0])
    wx = _lumped_1d(shape[0] - 1, spacing[0])
    wy = _lumped_1d(shape[1] - 1, spacing[1])
    return np.outer(wx, wy).ravel()


def trace_weights(mesh: MembraneMesh) -> np.ndarray:
    """Quadrature weights along the interface, one per duplicated pair."""
    npairs = len(mesh.interface_pairs)
    if npairs == 0:
        return np.zeros(0)
    if mesh.dim == 1:
        return np.ones(1)
    hy = mesh.spacing_1[1]
    w = np.full(npairs, hy)
    w[0] = w[-1] = hy / 2.0
    return w


# -- block operator ----------------------------------------------------------


@dataclass
class BlockOperator:
    """Sparse two-by-two block operator with explicit interface coupling.

    ``A11``/``A22`` hold per-subdomain stiffness plus lumped potential mass;
    ``B`` couples only the duplicated interface pairs.  ``pot_diag`` keeps
    the lumped potential diagonal separately; together with the positive
    semidefiniteness of stiffness and coupling it yields a cheap lower bound
    on the principal eigenvalue used to seed shifted factorizations.
    """

    A11: sp.csr_matrix
    A22: sp.csr_matrix
    B: Optional[sp.csr_matrix]
    pot_diag: np.ndarray
    dirichlet_mask: np.ndarray

    @property
    def num_dofs(self) -> int:
        return self.A11.shape[0] + self.A22.shape[0]

    def matrix(self) -> sp.csr_matrix:
        full = sp.block_diag([self.A11, self.A22], format="csr")
        if self.B is not None:
            full = (full + self.B).tocsr()
        return full

    def with_potential(self, extra_pot_diag: np.ndarray) -> "BlockOperator":
        """Add a lumped potential (already multiplied by quadrature weights)."""
        n1 = self.A11.shape[0]
        if extra_pot_diag.shape != (self.num_dofs,):
            raise DimensionMismatch("potential diagonal has wrong length")
        a11 = (self.A11 + sp.diags(extra_pot_diag[:n1])).tocsr()
        a22 = (self.A22 + sp.diags(extra_pot_diag[n1:])).tocsr() \
            if self.A22.shape[0] else self.A22
        return replace(self, A11=a11, A22=a22,
                       pot_diag=self.pot_diag + extra_pot_diag)


def assemble_stiffness(mesh: MembraneMesh) -> BlockOperator:
    """Per-subdomain stiffness blocks; no coupling, no potential."""
    return BlockOperator(
        A11=_side_stiffness(mesh, 1),
        A22=_side_stiffness(mesh, 2),
        B=None,
        pot_diag=np.zeros(mesh.num_dofs),
        dirichlet_mask=mesh.dirichlet_mask(),
    )


def assemble_interface(mesh: MembraneMesh, mu: float) -> sp.csr_matrix:
    """Jump form mu * quad_on_interface((u2 - u1) * (v2 - v1)) as a matrix.

    Positive semidefinite for mu >= 0; couples only interface pairs.  The
    normal of the interface points out of subdomain 1, which fixes the sign
    of both flux conditions and is assumed nowhere else.
    """
    if mu < 0:
        raise NegativePermeability(f"mu={mu} < 0")
    n = mesh.num_dofs
    pairs = mesh.interface_pairs
    if len(pairs) == 0 or mu == 0.0:
        return sp.csr_matrix((n, n))
    w = trace_weights(mesh) * mu
    i1 = mesh.global_index(1, pairs[:, 0])
    i2 = mesh.global_index(2, pairs[:, 1])
    rows = np.concatenate([i1, i2, i1, i2])
    cols = np.concatenate([i1, i2, i2, i1])
    vals = np.concatenate([w, w, -w, -w])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_weighted_mass(mesh: MembraneMesh, w1, w2, lumped: bool = True):
    """Weighted mass matrix; diagonal (returned as a vector) when lumped."""
    from .problem import as_field

    f1, f2 = as_field(w1), as_field(w2)
    v1 = f1.sample(mesh.nodes_1, mesh.refuge_mask_1) if mesh.n1 else \
        np.zeros(0)
    v2 = f2.sample(mesh.nodes_2, mesh.refuge_mask_2) if mesh.n2 else \
        np.zeros(0)
    if lumped:
        return np.concatenate([v1 * lumped_weights(mesh, 1),
                               v2 * lumped_weights(mesh, 2)])
    if mesh.dim != 1:
        raise DimensionMismatch("consistent mass implemented in 1D only")
    blocks = []
    for side, vals in ((1, v1), (2, v2)):
        shape = mesh.shape_1 if side == 1 else mesh.shape_2
        if shape[0] == 0:
            blocks.append(sp.csr_matrix((0, 0)))
            continue
        m = _consistent_1d(shape[0] - 1, mesh.spacing(side)[0]).tolil()
        d = sp.diags(vals)
        blocks.append((d @ m + m @ d).tocsr() * 0.5)
    return sp.block_diag(blocks, format="csr")


def compose_LF(stiffness: BlockOperator, coupling: Optional[sp.csr_matrix],
               potential_diag: Optional[np.ndarray]) -> BlockOperator:
    """Full operator: stiffness + interface coupling + lumped potential."""
    op = stiffness
    if potential_diag is not None:
        if potential_diag.shape != (stiffness.num_dofs,):
            raise DimensionMismatch(
                f"potential length {potential_diag.shape} != "
                f"{stiffness.num_dofs}")
        op = op.with_potential(potential_diag)
    if coupling is not None:
        if coupling.shape != (op.num_dofs, op.num_dofs):
            raise DimensionMismatch("coupling matrix has wrong shape")
        op = replace(op, B=coupling if op.B is None else
                     (op.B + coupling).tocsr())
    return op


# -- factorization and linear solve ------------------------------------------


def factorize(matrix: sp.spmatrix, context: str = "operator"):
    """LU-factorize, raising ``SingularOperator`` with a pivot diagnostic."""
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as exc:
        raise SingularOperator(
            f"{context}: factorization failed ({exc})",
            smallest_pivot=0.0) from exc
    pivots = np.abs(lu.U.diagonal())
    smallest = float(pivots.min()) if pivots.size else 0.0
    largest = float(pivots.max()) if pivots.size else 0.0
    if largest > 0 and smallest < 1e-14 * largest:
        raise SingularOperator(
            f"{context}: negligible pivot {smallest:.3e} "
            f"(largest {largest:.3e})",
            smallest_pivot=smallest)
    return lu


def solve_linear(op: BlockOperator, shift: float, mass_diag: np.ndarray,
                 rhs: FieldPair, tol: float = 1e-12) -> FieldPair:
    """Solve (A + shift * M) u = rhs with Dirichlet rows constrained to zero.

    One step of iterative refinement keeps the relative residual at the
    direct-solver level even for stiff shifts.
    """
    free = ~op.dirichlet_mask
    A = op.matrix() + sp.diags(shift * mass_diag)
    A_ff = A[free][:, free].tocsc()
    b = rhs.global_vector()[free]
    lu = factorize(A_ff, "shifted operator")
    x = lu.solve(b)
    r = b - A_ff @ x
    x = x + lu.solve(r)

    scale = np.linalg.norm(b)
    res = np.linalg.norm(b - A_ff @ x)
    if scale > 0 and res > tol * scale * 100:
        raise SingularOperator(
            f"linear solve residual {res:.3e} exceeds {tol:.1e} * |rhs|",
            smallest_pivot=float(np.abs(lu.U.diagonal()).min()))
    out = np.zeros(op.num_dofs)
    out[free] = x
    mesh_n1 = op.A11.shape[0]
    return FieldPair(out[:mesh_n1], out[mesh_n1:])


# -- residual of the nonlinear steady problem --------------------------------


def residual_rows(K: sp.csr_matrix, B: sp.csr_matrix, Mm: np.ndarray,
                  Ma: np.ndarray, p: float, lam: float,
                  u: np.ndarray) -> np.ndarray:
    """Row vector of the assembled steady-state residual at state ``u``."""
    r = K @ u - lam * (Mm * u) + Ma * odd_power(u, p)
    if B is not None:
        r = r + B @ u
    return r


def dual_norm(rows: np.ndarray, lumped: np.ndarray,
              free: np.ndarray) -> float:
    """Quadrature-consistent dual norm of a residual row vector."""
    r = rows[free]
    w = lumped[free]
    return float(np.sqrt(np.sum(r * r / w)))


def weak_form_rows(mesh: MembraneMesh, mu: float, m_vec: np.ndarray,
                   a_vec: np.ndarray, p: float, lam: float,
                   u: np.ndarray) -> np.ndarray:
    """Direct quadrature of the weak form against lumped hat functions.

    Independent of the sparse assembly: gradients are accumulated edge by
    edge with trapezoid weights.  Used to cross-check ``residual_rows``.
    """
    rows = np.zeros(mesh.num_dofs)
    offset = 0
    for side in (1, 2):
        shape = mesh.shape_1 if side == 1 else mesh.shape_2
        if shape[0] == 0:
            continue
        spacing = mesh.spacing(side)
        nloc = int(np.prod(shape))
        uu = u[offset:offset + nloc]
        acc = np.zeros(nloc)
        if mesh.dim == 1:
            d = np.diff(uu) / spacing[0]
            acc[:-1] -= d
            acc[1:] += d
        else:
            nx, ny = shape
            grid = uu.reshape(nx, ny)
            wy = _lumped_1d(ny - 1, spacing[1])
            wx = _lumped_1d(nx - 1, spacing[0])
            out = np.zeros((nx, ny))
            dx = np.diff(grid, axis=0) / spacing[0]
            out[:-1, :] -= dx * wy[None, :]
            out[1:, :] += dx * wy[None, :]
            dy = np.diff(grid, axis=1) / spacing[1]
            out[:, :-1] -= dy * wx[:, None]
            out[:, 1:] += dy * wx[:, None]
            acc = out.ravel()
        rows[offset:offset + nloc] = acc
        offset += nloc

    lump = np.concatenate([lumped_weights(mesh, 1), lumped_weights(mesh, 2)])
    rows += lump * (-lam * m_vec * u + a_vec * odd_power(u, p))

    pairs = mesh.interface_pairs
    if len(pairs) and mu != 0.0:
        w = trace_weights(mesh) * mu
        i1 = mesh.global_index(1, pairs[:, 0])
        i2 = mesh.global_index(2, pairs[:, 1])
        jump = u[i2] - u[i1]
        np.add.at(rows, i1, -w * jump)
        np.add.at(rows, i2, w * jump)
    return rows
