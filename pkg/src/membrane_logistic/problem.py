"""Problem data: coefficient fields, model parameters and discrete states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvariantError
from .mesh import Geometry, MembraneMesh, RefugeRegion


@dataclass(frozen=True)
class CoefficientField:
    """Deterministic, bounded coefficient over one subdomain.

    ``constant`` fields take one value everywhere; ``piecewise_on_refuge``
    fields take ``value`` outside the refuge mask and zero on it;
    ``tabulated`` fields evaluate a callable on node coordinates.
    """

    kind: str = "constant"
    value: float = 1.0
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def sample(self, coords: np.ndarray,
               refuge_mask: Optional[np.ndarray] = None) -> np.ndarray:
        if self.kind == "constant":
            out = np.full(len(coords), float(self.value))
        elif self.kind == "piecewise_on_refuge":
            out = np.full(len(coords), float(self.value))
            if refuge_mask is not None:
                out[refuge_mask] = 0.0
        elif self.kind == "tabulated":
            out = np.asarray(self.evaluator(coords), dtype=float)
            if out.shape != (len(coords),):
                raise InvariantError("tabulated coefficient has wrong shape")
        else:
            raise InvariantError(f"unknown coefficient kind {self.kind!r}")
        if not np.all(np.isfinite(out)):
            raise InvariantError("coefficient evaluates to non-finite values")
        return out


def as_field(value: Union[float, CoefficientField],
             on_refuge_zero: bool = False) -> CoefficientField:
    if isinstance(value, CoefficientField):
        return value
    kind = "piecewise_on_refuge" if on_refuge_zero else "constant"
    return CoefficientField(kind=kind, value=float(value))


@dataclass(frozen=True)
class ProblemSpec:
    """All model coefficients of one problem instance.

    The stationary system is, for i = 1, 2 on the two subdomains,

        -lap(u_i) = lambda * m_i(x) * u_i - a_i(x) * u_i**p

    with flux continuity and jump-proportional flux across the membrane
    (permeability ``mu``) and zero Dirichlet data on the outer boundary.
    Crowding coefficients ``a_i`` vanish exactly on the refuge regions and
    stay bounded away from zero elsewhere.
    """

    geometry: Geometry
    mu: float = 1.0
    p: float = 2.0
    m1: Union[float, CoefficientField] = 1.0
    m2: Union[float, CoefficientField] = 1.0
    a1: Union[float, CoefficientField] = 1.0
    a2: Union[float, CoefficientField] = 1.0
    refuges: Tuple[RefugeRegion, ...] = ()

    def __post_init__(self):
        if self.mu < 0:
            raise InvariantError(f"mu must be non-negative, got {self.mu}")
        if not self.p > 1:
            raise InvariantError(f"p must exceed 1, got {self.p}")
        object.__setattr__(self, "refuges", tuple(self.refuges))

    @property
    def degenerate(self) -> bool:
        return len(self.refuges) > 0

    def growth_field(self, side: int) -> CoefficientField:
        return as_field(self.m1 if side == 1 else self.m2)

    def crowding_field(self, side: int) -> CoefficientField:
        raw = self.a1 if side == 1 else self.a2
        return as_field(raw, on_refuge_zero=self.degenerate)


@dataclass
class FieldPair:
    """Discrete state (u1, u2) over the two subdomain node sets."""

    u1: np.ndarray
    u2: np.ndarray

    @classmethod
    def zeros(cls, mesh: MembraneMesh) -> "FieldPair":
        return cls(np.zeros(mesh.n1), np.zeros(mesh.n2))

    @classmethod
    def constant(cls, mesh: MembraneMesh, c1: float,
                 c2: Optional[float] = None) -> "FieldPair":
        if c2 is None:
            c2 = c1
        return cls(np.full(mesh.n1, float(c1)), np.full(mesh.n2, float(c2)))

    @classmethod
    def from_global(cls, mesh: MembraneMesh, vec: np.ndarray) -> "FieldPair":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (mesh.num_dofs,):
            raise InvariantError(
                f"global vector length {vec.shape} != {mesh.num_dofs}")
        return cls(vec[:mesh.n1].copy(), vec[mesh.n1:].copy())

    def global_vector(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    def copy(self) -> "FieldPair":
        return FieldPair(self.u1.copy(), self.u2.copy())

    @property
    def sup_norm(self) -> float:
        parts = [np.max(np.abs(self.u1)) if self.u1.size else 0.0,
                 np.max(np.abs(self.u2)) if self.u2.size else 0.0]
        return float(max(parts))


def validate_coefficients(spec: ProblemSpec, mesh: MembraneMesh,
                          m_vec: np.ndarray, a_vec: np.ndarray) -> None:
    """Check the node-wise sign conditions on the sampled coefficients."""
    if np.any(m_vec <= 0):
        raise InvariantError("growth weight m must be strictly positive")
    if np.any(a_vec < 0):
        raise InvariantError("crowding coefficient a must be non-negative")
    refuge = mesh.refuge_mask_global()
    if np.any(a_vec[refuge] != 0.0):
        raise InvariantError("a must vanish exactly on refuge nodes")
    off = ~refuge
    if spec.degenerate and np.any(a_vec[off] <= 0):
        raise InvariantError("a must be positive away from the refuges")
