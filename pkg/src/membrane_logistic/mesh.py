"""Structured meshes of a split domain with a duplicated membrane interface.

The computational domain is an interval or an axis-aligned rectangle split
into two subdomains by a point (1D) or a vertical line (2D).  Interface
nodes are duplicated so that each side carries its own degree of freedom;
the jump across the membrane is therefore an ordinary difference of two
unknowns.  Outer boundaries carry homogeneous Dirichlet tags, and refuge
regions (where the crowding coefficient vanishes) are tracked by node masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyRefuge,
    InvalidGeometry,
    RefugeTouchesBoundary,
    TooCoarse,
)

# Node tags.
INTERIOR = 0
GAMMA_OUTER_1 = 1
GAMMA_OUTER_2 = 2
GAMMA_INTERFACE = 3

_OUTER_TAGS = (GAMMA_OUTER_1, GAMMA_OUTER_2)


@dataclass(frozen=True)
class Geometry:
    """Domain description: interval or rectangle split at ``interface_pos``.

    ``bounds`` is ``(x_lo, x_hi)`` for intervals and
    ``(x_lo, x_hi, y_lo, y_hi)`` for rectangles.  ``interface_pos`` is the
    x-coordinate of the membrane; ``None`` marks a standalone single-domain
    mesh (used for refuge subproblems).
    """

    kind: str
    bounds: Tuple[float, ...]
    interface_pos: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise InvalidGeometry(f"unknown geometry kind {self.kind!r}")
        if self.kind == "interval" and len(self.bounds) != 2:
            raise InvalidGeometry("interval bounds must be (x_lo, x_hi)")
        if self.kind == "rectangle" and len(self.bounds) != 4:
            raise InvalidGeometry(
                "rectangle bounds must be (x_lo, x_hi, y_lo, y_hi)")
        x_lo, x_hi = self.bounds[0], self.bounds[1]
        if not x_lo < x_hi:
            raise InvalidGeometry("x_lo must be below x_hi")
        if self.kind == "rectangle":
            y_lo, y_hi = self.bounds[2], self.bounds[3]
            if not y_lo < y_hi:
                raise InvalidGeometry("y_lo must be below y_hi")
        if self.interface_pos is not None:
            if not x_lo < self.interface_pos < x_hi:
                raise InvalidGeometry(
                    f"interface position {self.interface_pos} outside "
                    f"({x_lo}, {x_hi})")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2


@dataclass(frozen=True)
class RefugeRegion:
    """Axis-aligned box inside one subdomain where crowding vanishes.

    ``box`` is ``(lo, hi)`` in 1D and ``(x_lo, x_hi, y_lo, y_hi)`` in 2D.
    """

    subdomain: int
    box: Tuple[float, ...]

    def __post_init__(self):
        if self.subdomain not in (1, 2):
            raise InvalidGeometry("refuge subdomain must be 1 or 2")
        if len(self.box) not in (2, 4):
            raise InvalidGeometry("refuge box must have 2 or 4 coordinates")
        if self.box[0] >= self.box[1]:
            raise InvalidGeometry("refuge box is empty in x")
        if len(self.box) == 4 and self.box[2] >= self.box[3]:
            raise InvalidGeometry("refuge box is empty in y")

    @property
    def diameter(self) -> float:
        if len(self.box) == 2:
            return self.box[1] - self.box[0]
        return float(np.hypot(self.box[1] - self.box[0],
                              self.box[3] - self.box[2]))


@dataclass(frozen=True)
class MembraneMesh:
    """Two structured subdomain grids with duplicated interface nodes.

    Per-subdomain arrays use local node indices; global degrees of freedom
    stack subdomain 1 first, then subdomain 2.  ``shape_1``/``shape_2`` hold
    the structured node-grid shapes, which adjacency checks and refinement
    rely on.
    """

    geometry: Geometry
    nodes_1: np.ndarray
    nodes_2: np.ndarray
    cells_1: np.ndarray
    cells_2: np.ndarray
    interface_pairs: np.ndarray
    boundary_tags_1: np.ndarray
    boundary_tags_2: np.ndarray
    shape_1: Tuple[int, ...]
    shape_2: Tuple[int, ...]
    spacing_1: Tuple[float, ...]
    spacing_2: Tuple[float, ...]
    refuge_mask_1: np.ndarray = field(default=None)
    refuge_mask_2: np.ndarray = field(default=None)
    refuge_regions: Tuple[RefugeRegion, ...] = ()

    def __post_init__(self):
        if self.refuge_mask_1 is None:
            object.__setattr__(self, "refuge_mask_1",
                               np.zeros(len(self.nodes_1), dtype=bool))
        if self.refuge_mask_2 is None:
            object.__setattr__(self, "refuge_mask_2",
                               np.zeros(len(self.nodes_2), dtype=bool))

    # -- basic queries ----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def n1(self) -> int:
        return len(self.nodes_1)

    @property
    def n2(self) -> int:
        return len(self.nodes_2)

    @property
    def num_dofs(self) -> int:
        return self.n1 + self.n2

    @property
    def h(self) -> float:
        """Largest cell edge over both subdomains."""
        return max(self.spacing_1 + self.spacing_2) if self.n2 else \
            max(self.spacing_1)

    def nodes(self, side: int) -> np.ndarray:
        return self.nodes_1 if side == 1 else self.nodes_2

    def tags(self, side: int) -> np.ndarray:
        return self.boundary_tags_1 if side == 1 else self.boundary_tags_2

    def spacing(self, side: int) -> Tuple[float, ...]:
        return self.spacing_1 if side == 1 else self.spacing_2

    def refuge_mask(self, side: int) -> np.ndarray:
        return self.refuge_mask_1 if side == 1 else self.refuge_mask_2

    def coords_global(self) -> np.ndarray:
        if self.n2 == 0:
            return self.nodes_1
        return np.vstack([self.nodes_1, self.nodes_2])

    def tags_global(self) -> np.ndarray:
        return np.concatenate([self.boundary_tags_1, self.boundary_tags_2])

    def dirichlet_mask(self) -> np.ndarray:
        """Global mask of outer-boundary (constrained) degrees of freedom."""
        tags = self.tags_global()
        return (tags == GAMMA_OUTER_1) | (tags == GAMMA_OUTER_2)

    def refuge_mask_global(self) -> np.ndarray:
        return np.concatenate([self.refuge_mask_1, self.refuge_mask_2])

    def global_index(self, side: int, local: np.ndarray) -> np.ndarray:
        offset = 0 if side == 1 else self.n1
        return np.asarray(local) + offset

    def regions_of(self, side: int) -> Tuple[RefugeRegion, ...]:
        return tuple(r for r in self.refuge_regions if r.subdomain == side)


# -- construction ----------------------------------------------------------


def _interval_side(x_lo, x_hi, n, outer_tag, outer_at_left):
    nodes = np.linspace(x_lo, x_hi, n + 1).reshape(-1, 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    tags = np.full(n + 1, INTERIOR, dtype=np.int8)
    if outer_at_left:
        tags[0] = outer_tag
        tags[-1] = GAMMA_INTERFACE
    else:
        tags[0] = GAMMA_INTERFACE
        tags[-1] = outer_tag
    return nodes, cells, tags


def build_interval_mesh(x_lo: float, x_hi: float, gamma: float,
                        n_per_side: int) -> MembraneMesh:
    """Uniform interval mesh split at ``gamma`` with a duplicated node there.

    Each subdomain gets ``n_per_side`` cells; spacings may differ between
    the sides when ``gamma`` is not the midpoint.
    """
    geometry = Geometry("interval", (float(x_lo), float(x_hi)), float(gamma))
    if n_per_side < 2:
        raise TooCoarse(f"n_per_side={n_per_side} < 2")
    nodes_1, cells_1, tags_1 = _interval_side(
        x_lo, gamma, n_per_side, GAMMA_OUTER_1, outer_at_left=True)
    nodes_2, cells_2, tags_2 = _interval_side(
        gamma, x_hi, n_per_side, GAMMA_OUTER_2, outer_at_left=False)
    pairs = np.array([[n_per_side, 0]], dtype=int)
    return MembraneMesh(
        geometry=geometry,
        nodes_1=nodes_1, nodes_2=nodes_2,
        cells_1=cells_1, cells_2=cells_2,
        interface_pairs=pairs,
        boundary_tags_1=tags_1, boundary_tags_2=tags_2,
        shape_1=(n_per_side + 1,), shape_2=(n_per_side + 1,),
        spacing_1=((gamma - x_lo) / n_per_side,),
        spacing_2=((x_hi - gamma) / n_per_side,),
    )


def _rect_side(x_lo, x_hi, y_lo, y_hi, nx, ny, outer_tag, interface_at_right):
    xs = np.linspace(x_lo, x_hi, nx + 1)
    ys = np.linspace(y_lo, y_hi, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    cells = np.column_stack([
        idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(),
        idx[1:, 1:].ravel(), idx[:-1, 1:].ravel(),
    ])

    tags = np.full((nx + 1, ny + 1), INTERIOR, dtype=np.int8)
    interface_col = nx if interface_at_right else 0
    outer_col = 0 if interface_at_right else nx
    tags[interface_col, 1:-1] = GAMMA_INTERFACE
    tags[outer_col, :] = outer_tag
    tags[:, 0] = outer_tag
    tags[:, -1] = outer_tag
    interface_locals = idx[interface_col, :]
    return nodes, cells, tags.ravel(), interface_locals


def build_rect_mesh(bounds: Sequence[float], gamma: float,
                    nx_per_side: int, ny: int) -> MembraneMesh:
    """Tensor-product mesh of the rectangle split along the line x = gamma.

    The interface duplicates ``ny + 1`` node pairs.  Interface endpoints on
    the top and bottom edges are tagged as outer Dirichlet nodes, matching
    the continuity of the two boundary conditions at those corners.
    """
    x_lo, x_hi, y_lo, y_hi = (float(b) for b in bounds)
    geometry = Geometry("rectangle", (x_lo, x_hi, y_lo, y_hi), float(gamma))
    if nx_per_side < 2 or ny < 2:
        raise TooCoarse(f"nx_per_side={nx_per_side}, ny={ny}; need >= 2")

    nodes_1, cells_1, tags_1, iface_1 = _rect_side(
        x_lo, gamma, y_lo, y_hi, nx_per_side, ny,
        GAMMA_OUTER_1, interface_at_right=True)
    nodes_2, cells_2, tags_2, iface_2 = _rect_side(
        gamma, x_hi, y_lo, y_hi, nx_per_side, ny,
        GAMMA_OUTER_2, interface_at_right=False)
    pairs = np.column_stack([iface_1, iface_2])

    return MembraneMesh(
        geometry=geometry,
        nodes_1=nodes_1, nodes_2=nodes_2,
        cells_1=cells_1, cells_2=cells_2,
        interface_pairs=pairs,
        boundary_tags_1=tags_1, boundary_tags_2=tags_2,
        shape_1=(nx_per_side + 1, ny + 1), shape_2=(nx_per_side + 1, ny + 1),
        spacing_1=((gamma - x_lo) / nx_per_side, (y_hi - y_lo) / ny),
        spacing_2=((x_hi - gamma) / nx_per_side, (y_hi - y_lo) / ny),
    )


def single_box_mesh(box: Sequence[float], n: int,
                    ny: Optional[int] = None) -> MembraneMesh:
    """Standalone mesh of one box with Dirichlet tags on its whole boundary.

    Used for the refuge eigenproblems; the second subdomain is empty and
    there is no interface.
    """
    box = tuple(float(b) for b in box)
    if n < 2:
        raise TooCoarse(f"n={n} < 2")
    if len(box) == 2:
        geometry = Geometry("interval", box, None)
        nodes = np.linspace(box[0], box[1], n + 1).reshape(-1, 1)
        cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        tags = np.full(n + 1, INTERIOR, dtype=np.int8)
        tags[0] = tags[-1] = GAMMA_OUTER_1
        shape = (n + 1,)
        spacing = ((box[1] - box[0]) / n,)
    else:
        if ny is None:
            width, height = box[1] - box[0], box[3] - box[2]
            ny = max(2, round(n * height / width))
        if ny < 2:
            raise TooCoarse(f"ny={ny} < 2")
        geometry = Geometry("rectangle", box, None)
        xs = np.linspace(box[0], box[1], n + 1)
        ys = np.linspace(box[2], box[3], ny + 1)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        idx = np.arange((n + 1) * (ny + 1)).reshape(n + 1, ny + 1)
        cells = np.column_stack([
            idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(),
            idx[1:, 1:].ravel(), idx[:-1, 1:].ravel(),
        ])
        tag_grid = np.full((n + 1, ny + 1), INTERIOR, dtype=np.int8)
        tag_grid[0, :] = tag_grid[-1, :] = GAMMA_OUTER_1
        tag_grid[:, 0] = tag_grid[:, -1] = GAMMA_OUTER_1
        tags = tag_grid.ravel()
        shape = (n + 1, ny + 1)
        spacing = ((box[1] - box[0]) / n, (box[3] - box[2]) / ny)

    empty_nodes = np.zeros((0, nodes.shape[1]))
    return MembraneMesh(
        geometry=geometry,
        nodes_1=nodes, nodes_2=empty_nodes,
        cells_1=cells, cells_2=np.zeros((0, cells.shape[1]), dtype=int),
        interface_pairs=np.zeros((0, 2), dtype=int),
        boundary_tags_1=tags, boundary_tags_2=np.zeros(0, dtype=np.int8),
        shape_1=shape, shape_2=(0,) * len(shape),
        spacing_1=spacing, spacing_2=spacing,
    )


# -- refuge tagging ---------------------------------------------------------


def _subdomain_extent(mesh: MembraneMesh, side: int) -> Tuple[float, ...]:
    g = mesh.geometry
    gamma = g.interface_pos
    if g.dim == 1:
        return (g.bounds[0], gamma) if side == 1 else (gamma, g.bounds[1])
    x_lo, x_hi, y_lo, y_hi = g.bounds
    if side == 1:
        return (x_lo, gamma, y_lo, y_hi)
    return (gamma, x_hi, y_lo, y_hi)


def _nodes_in_box(nodes: np.ndarray, box: Tuple[float, ...],
                  tol: float) -> np.ndarray:
    """Nodes strictly inside the open box.

    Strict interior masking keeps nodes sitting exactly on the box edge
    outside the vanishing-coefficient set, so for grid-aligned boxes the
    discrete confinement well spans the box itself rather than one extra
    cell per side (an O(h) widening of every refuge eigenvalue).
    """
    inside = (nodes[:, 0] > box[0] + tol) & (nodes[:, 0] < box[1] - tol)
    if len(box) == 4:
        inside &= (nodes[:, 1] > box[2] + tol) & (nodes[:, 1] < box[3] - tol)
    return inside


def _cell_neighbour_hits(mask: np.ndarray, bad: np.ndarray,
                         shape: Tuple[int, ...]) -> bool:
    """True if any masked node shares a cell with a node from ``bad``."""
    m = mask.reshape(shape)
    b = bad.reshape(shape)
    grown = b.copy()
    if len(shape) == 1:
        grown[:-1] |= b[1:]
        grown[1:] |= b[:-1]
    else:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                shifted = np.zeros_like(b)
                src_x = slice(max(0, -dx), b.shape[0] - max(0, dx))
                dst_x = slice(max(0, dx), b.shape[0] - max(0, -dx))
                src_y = slice(max(0, -dy), b.shape[1] - max(0, dy))
                dst_y = slice(max(0, dy), b.shape[1] - max(0, -dy))
                shifted[dst_x, dst_y] = b[src_x, src_y]
                grown |= shifted
    return bool(np.any(m & grown))


def tag_refuges(mesh: MembraneMesh,
                regions: Sequence[RefugeRegion]) -> MembraneMesh:
    """Return a copy of ``mesh`` with refuge node masks set.

    Every region must keep at least one clear interior node layer between
    itself and the subdomain boundary; otherwise the vanishing-coefficient
    set would touch the interface or the outer boundary at this resolution.
    """
    masks = {1: mesh.refuge_mask_1.copy(), 2: mesh.refuge_mask_2.copy()}
    for region in regions:
        side = region.subdomain
        extent = _subdomain_extent(mesh, side)
        spacing = mesh.spacing(side)
        lo_margin = region.box[0] - extent[0]
        hi_margin = extent[1] - region.box[1]
        tol = 1e-12 * max(abs(b) + 1.0 for b in extent)
        if lo_margin < spacing[0] - tol or hi_margin < spacing[0] - tol:
            raise RefugeTouchesBoundary(
                f"refuge x-range {region.box[:2]} within one cell of the "
                f"subdomain-{side} boundary {extent[:2]}")
        if mesh.dim == 2:
            if (region.box[2] - extent[2] < spacing[1] - tol or
                    extent[3] - region.box[3] < spacing[1] - tol):
                raise RefugeTouchesBoundary(
                    f"refuge y-range {region.box[2:]} within one cell of "
                    f"the subdomain-{side} boundary {extent[2:]}")

        inside = _nodes_in_box(mesh.nodes(side), region.box, tol)
        if not inside.any():
            raise TooCoarse(
                f"refuge box {region.box} contains no nodes at spacing "
                f"{spacing}")
        shape = mesh.shape_1 if side == 1 else mesh.shape_2
        bad = mesh.tags(side) != INTERIOR
        if _cell_neighbour_hits(inside, bad, shape):
            raise RefugeTouchesBoundary(
                f"refuge box {region.box} is cell-adjacent to a boundary "
                f"node in subdomain {side}")
        masks[side] |= inside

    return replace(
        mesh,
        refuge_mask_1=masks[1],
        refuge_mask_2=masks[2],
        refuge_regions=mesh.refuge_regions + tuple(regions),
    )


def restrict_to_refuge(mesh: MembraneMesh, which: int,
                       region_index: int = 0,
                       n: Optional[int] = None) -> MembraneMesh:
    """Standalone Dirichlet mesh over one refuge box of subdomain ``which``.

    The submesh spans the exact refuge box (not its staircase projection
    onto the parent grid) so that refuge eigenvalues converge at second
    order.  ``n`` overrides the inherited cell count along x.
    """
    regions = mesh.regions_of(which)
    if not regions:
        raise EmptyRefuge(f"subdomain {which} has no tagged refuge")
    region = regions[region_index]
    spacing = mesh.spacing(which)
    if n is None:
        n = max(2, round((region.box[1] - region.box[0]) / spacing[0]))
    ny = None
    if mesh.dim == 2:
        ny = max(2, round((region.box[3] - region.box[2]) / spacing[1]))
        if n != max(2, round((region.box[1] - region.box[0]) / spacing[0])):
            ny = max(2, round(n * (region.box[3] - region.box[2]) /
                              (region.box[1] - region.box[0])))
    return single_box_mesh(region.box, n, ny)


def refine(mesh: MembraneMesh, regions: bool = True) -> MembraneMesh:
    """Mesh with every cell split in two per axis (node sets nest exactly)."""
    g = mesh.geometry
    n2x = 2 * (mesh.shape_1[0] - 1)
    if g.dim == 1:
        fine = build_interval_mesh(g.bounds[0], g.bounds[1],
                                   g.interface_pos, n2x)
    else:
        fine = build_rect_mesh(g.bounds, g.interface_pos, n2x,
                               2 * (mesh.shape_1[1] - 1))
    if regions and mesh.refuge_regions:
        fine = tag_refuges(fine, mesh.refuge_regions)
    return fine
