"""Assembled discrete problem: mesh, matrices and coefficient samples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .errors import DimensionMismatch
from .mesh import (
    MembraneMesh,
    build_interval_mesh,
    build_rect_mesh,
    restrict_to_refuge,
    tag_refuges,
)
from .problem import FieldPair, ProblemSpec, validate_coefficients


@dataclass
class Discretization:
    """One problem instance discretized at a fixed resolution.

    Holds the global stiffness ``K``, the interface coupling ``B`` for the
    instance permeability, lumped quadrature weights and node-sampled
    coefficients.  All solvers operate on the stacked global vector
    (subdomain 1 first).
    """

    spec: ProblemSpec
    mesh: MembraneMesh
    K: sp.csr_matrix
    B: sp.csr_matrix
    lump: np.ndarray
    m_vec: np.ndarray
    a_vec: np.ndarray
    n_per_side: int
    ny: Optional[int] = None
    _cache: Dict = field(default_factory=dict, repr=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, spec: ProblemSpec, n_per_side: int,
              ny: Optional[int] = None) -> "Discretization":
        geom = spec.geometry
        if geom.kind == "interval":
            mesh = build_interval_mesh(geom.bounds[0], geom.bounds[1],
                                       geom.interface_pos, n_per_side)
        else:
            if ny is None:
                ny = n_per_side
            mesh = build_rect_mesh(geom.bounds, geom.interface_pos,
                                   n_per_side, ny)
        if spec.refuges:
            mesh = tag_refuges(mesh, spec.refuges)
        return cls.from_mesh(spec, mesh, n_per_side, ny)

    @classmethod
    def from_mesh(cls, spec: ProblemSpec, mesh: MembraneMesh,
                  n_per_side: int, ny: Optional[int] = None):
        stiff = ops.assemble_stiffness(mesh)
        K = stiff.matrix()
        B = ops.assemble_interface(mesh, spec.mu)
        lump = ops.assemble_weighted_mass(mesh, 1.0, 1.0)
        m_vec = np.concatenate([
            spec.growth_field(1).sample(mesh.nodes_1, mesh.refuge_mask_1),
            spec.growth_field(2).sample(mesh.nodes_2, mesh.refuge_mask_2),
        ])
        a_vec = np.concatenate([
            spec.crowding_field(1).sample(mesh.nodes_1, mesh.refuge_mask_1),
            spec.crowding_field(2).sample(mesh.nodes_2, mesh.refuge_mask_2),
        ])
        validate_coefficients(spec, mesh, m_vec, a_vec)
        return cls(spec=spec, mesh=mesh, K=K, B=B, lump=lump,
                   m_vec=m_vec, a_vec=a_vec, n_per_side=n_per_side, ny=ny)

    def refined(self) -> "Discretization":
        """Same problem at half the mesh spacing (nested nodes)."""
        ny = None if self.ny is None else 2 * self.ny
        return Discretization.build(self.spec, 2 * self.n_per_side, ny)

    # -- basic quantities ----------------------------------------------------

    @property
    def M1(self) -> np.ndarray:
        return self.lump

    @property
    def Mm(self) -> np.ndarray:
        return self.lump * self.m_vec

    @property
    def Ma(self) -> np.ndarray:
        return self.lump * self.a_vec

    @property
    def free(self) -> np.ndarray:
        key = "free"
        if key not in self._cache:
            self._cache[key] = ~self.mesh.dirichlet_mask()
        return self._cache[key]

    def interface_matrix(self, mu: float) -> sp.csr_matrix:
        if mu == self.spec.mu:
            return self.B
        key = ("B", float(mu))
        if key not in self._cache:
            self._cache[key] = ops.assemble_interface(self.mesh, mu)
        return self._cache[key]

    def potential_vector(self, extra) -> np.ndarray:
        """Node values of an additional potential given as vector or pair."""
        if extra is None:
            return np.zeros(self.mesh.num_dofs)
        if isinstance(extra, np.ndarray):
            if extra.shape != (self.mesh.num_dofs,):
                raise DimensionMismatch("potential vector has wrong length")
            return extra
        f1, f2 = extra
        return np.concatenate([np.full(self.mesh.n1, float(f1)),
                               np.full(self.mesh.n2, float(f2))])

    def operator(self, lam: float = 0.0, alpha: float = 0.0,
                 extra_potential=None, mu: Optional[float] = None
                 ) -> Tuple[sp.csr_matrix, np.ndarray]:
        """Global matrix and lumped potential diagonal of the linearization

            K + B(mu) + diag(lump * (q - lam*m + alpha*a)).
        """
        q = self.potential_vector(extra_potential)
        pot = self.lump * (q - lam * self.m_vec + alpha * self.a_vec)
        B = self.B if mu is None else self.interface_matrix(mu)
        A = (self.K + B + sp.diags(pot)).tocsr()
        return A, pot

    # -- residuals ------------------------------------------------------------

    def residual_rows(self, lam: float, u_global: np.ndarray) -> np.ndarray:
        return ops.residual_rows(self.K, self.B, self.Mm, self.Ma,
                                 self.spec.p, lam, u_global)

    def residual_rows_linear(self, lam: float,
                             u_global: np.ndarray) -> np.ndarray:
        """Rows of the linear part only (no crowding term)."""
        return self.K @ u_global + self.B @ u_global - \
            lam * (self.Mm * u_global)

    def _dual_solver(self):
        """Factorization of stiffness + coupling + mass on the free DOFs.

        Defines the discrete dual norm of the energy space:
        |r|_* = sqrt(r^T (K + B + M)^{-1} r).
        """
        key = "dual_solver"
        if key not in self._cache:
            A0 = (self.K + self.B + sp.diags(self.M1)).tocsr()
            idx = np.flatnonzero(self.free)
            self._cache[key] = ops.factorize(A0[idx][:, idx].tocsc(),
                                             "dual-norm operator")
        return self._cache[key]

    def dual_norm_rows(self, rows: np.ndarray) -> float:
        r = rows[self.free]
        z = self._dual_solver().solve(r)
        return float(np.sqrt(max(r @ z, 0.0)))

    def _dual_solver_sub(self, idx: np.ndarray):
        """Dual-norm solve restricted to an index subset (extra constraints)."""
        key = ("dual_sub", idx.tobytes())
        if key not in self._cache:
            A0 = (self.K + self.B + sp.diags(self.M1)).tocsr()
            lu = ops.factorize(A0[idx][:, idx].tocsc(), "dual-norm operator")
            self._cache[key] = lu.solve
        return self._cache[key]

    def residual(self, lam: float, state: FieldPair) -> float:
        rows = self.residual_rows(lam, state.global_vector())
        return self.dual_norm_rows(rows)

    def residual_floor(self, lam: float, u_global: np.ndarray) -> float:
        """Rounding floor of the residual dual norm at state ``u``.

        Models the evaluation error as a rough (node-wise uncorrelated)
        vector bounded by eps times the term magnitudes; rough vectors see
        the inverse of the operator diagonal, not of its smallest mode.
        """
        eps = np.finfo(float).eps
        scale = abs(self.K) @ np.abs(u_global) + \
            abs(self.B) @ np.abs(u_global) + \
            abs(lam) * self.Mm * np.abs(u_global) + \
            self.Ma * np.abs(u_global) ** self.spec.p
        A0_diag = self.K.diagonal() + self.B.diagonal() + self.M1
        r = scale[self.free]
        d = A0_diag[self.free]
        return 4.0 * eps * float(np.sqrt(np.sum(r * r / d)))

    # -- refuge subproblems ----------------------------------------------------

    def refuge_problems(self, n_refuge: Optional[int] = None):
        """Per-subdomain standalone Dirichlet problems over the refuge boxes.

        Returns a dict side -> list of (submesh, K, Mm, M1) tuples.
        """
        key = ("refuges", n_refuge)
        if key in self._cache:
            return self._cache[key]
        out = {1: [], 2: []}
        for side in (1, 2):
            for idx, _ in enumerate(self.mesh.regions_of(side)):
                submesh = restrict_to_refuge(self.mesh, side, idx, n_refuge)
                K = ops.assemble_stiffness(submesh).matrix()
                lump = ops.assemble_weighted_mass(submesh, 1.0, 1.0)
                m_sub = self.spec.growth_field(side).sample(submesh.nodes_1)
                out[side].append((submesh, K, lump * m_sub, lump))
        self._cache[key] = out
        return out


def discretize(spec: ProblemSpec, n_per_side: int,
               ny: Optional[int] = None) -> Discretization:
    """Build a :class:`Discretization` for ``spec`` at the given resolution."""
    return Discretization.build(spec, n_per_side, ny)
