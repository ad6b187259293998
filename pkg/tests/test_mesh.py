import numpy as np
import pytest

from membrane_logistic import (
    GAMMA_INTERFACE,
    GAMMA_OUTER_1,
    GAMMA_OUTER_2,
    EmptyRefuge,
    InvalidGeometry,
    RefugeRegion,
    RefugeTouchesBoundary,
    TooCoarse,
    build_interval_mesh,
    build_rect_mesh,
    refine,
    restrict_to_refuge,
    tag_refuges,
)


def test_interval_counts_and_spacing():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 4)
    assert mesh.n1 == 5 and mesh.n2 == 5
    assert len(mesh.interface_pairs) == 1
    assert mesh.spacing_1 == (0.125,) and mesh.spacing_2 == (0.125,)
    assert mesh.boundary_tags_1[0] == GAMMA_OUTER_1
    assert mesh.boundary_tags_2[-1] == GAMMA_OUTER_2
    assert mesh.boundary_tags_1[-1] == GAMMA_INTERFACE


def test_interval_rejects_degenerate_interface():
    with pytest.raises(InvalidGeometry):
        build_interval_mesh(0.0, 1.0, 0.0, 4)
    with pytest.raises(InvalidGeometry):
        build_interval_mesh(0.0, 1.0, 1.2, 4)


def test_interval_too_coarse():
    with pytest.raises(TooCoarse):
        build_interval_mesh(0.0, 1.0, 0.5, 1)


def test_interval_per_side_spacing():
    mesh = build_interval_mesh(0.0, 1.0, 1.0 / 3.0, 8)
    assert mesh.spacing_1[0] == pytest.approx(1.0 / 24.0)
    assert mesh.spacing_2[0] == pytest.approx(1.0 / 12.0)


def test_interface_pairs_coincide():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 8, 6)
    c1 = mesh.nodes_1[mesh.interface_pairs[:, 0]]
    c2 = mesh.nodes_2[mesh.interface_pairs[:, 1]]
    assert np.array_equal(c1, c2)


def test_rect_counts():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 4, 4)
    assert mesh.n1 == 25 and mesh.n2 == 25
    assert len(mesh.interface_pairs) == 5
    with pytest.raises(TooCoarse):
        build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 1, 4)


def test_rect_cell_sizes():
    mesh = build_rect_mesh((0.0, 2.0, 0.0, 1.0), 1.0, 8, 4)
    assert mesh.spacing_1 == (0.125, 0.25)
    assert mesh.spacing_2 == (0.125, 0.25)


def test_rect_interface_corners_are_dirichlet():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 4, 4)
    # Corner pairs sit on the outer boundary closure: constrained there.
    first = mesh.interface_pairs[0]
    assert mesh.boundary_tags_1[first[0]] == GAMMA_OUTER_1
    assert mesh.boundary_tags_2[first[1]] == GAMMA_OUTER_2
    mid = mesh.interface_pairs[2]
    assert mesh.boundary_tags_1[mid[0]] == GAMMA_INTERFACE


def test_tag_refuges_counts_interior_nodes():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 64)
    tagged = tag_refuges(mesh, [RefugeRegion(1, (0.2, 0.3))])
    count = int(tagged.refuge_mask_1.sum())
    # Strict-interior masking at h = 1/128: nodes with 0.2 < x < 0.3.
    assert 11 <= count <= 14
    assert tagged.refuge_mask_2.sum() == 0


def test_tag_refuges_rejects_straddling_region():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 64)
    with pytest.raises(RefugeTouchesBoundary):
        tag_refuges(mesh, [RefugeRegion(1, (0.45, 0.55))])


def test_tag_refuges_rejects_boundary_adjacent_region():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 64)
    with pytest.raises(RefugeTouchesBoundary):
        tag_refuges(mesh, [RefugeRegion(1, (0.001, 0.1))])


def test_tag_refuges_empty_list():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 16)
    tagged = tag_refuges(mesh, [])
    assert not tagged.refuge_mask_1.any()
    assert not tagged.refuge_mask_2.any()


def test_refuge_nodes_never_touch_tagged_nodes():
    from membrane_logistic.mesh import INTERIOR, _cell_neighbour_hits

    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 16, 16)
    tagged = tag_refuges(mesh, [RefugeRegion(1, (0.2, 0.35, 0.3, 0.7))])
    bad = tagged.boundary_tags_1 != INTERIOR
    assert not _cell_neighbour_hits(tagged.refuge_mask_1, bad,
                                    tagged.shape_1)


def test_restrict_to_refuge_exact_box():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 256)
    tagged = tag_refuges(mesh, [RefugeRegion(1, (0.2, 0.3))])
    sub = restrict_to_refuge(tagged, 1)
    assert sub.nodes_1[0, 0] == pytest.approx(0.2)
    assert sub.nodes_1[-1, 0] == pytest.approx(0.3)
    assert sub.boundary_tags_1[0] == GAMMA_OUTER_1
    assert sub.boundary_tags_1[-1] == GAMMA_OUTER_1
    assert sub.n2 == 0 and len(sub.interface_pairs) == 0


def test_restrict_to_refuge_2d():
    mesh = build_rect_mesh((0.0, 1.0, 0.0, 1.0), 0.5, 32, 32)
    tagged = tag_refuges(mesh, [RefugeRegion(2, (0.6, 0.8, 0.4, 0.6))])
    sub = restrict_to_refuge(tagged, 2)
    tags = sub.boundary_tags_1.reshape(sub.shape_1)
    assert (tags[0, :] == GAMMA_OUTER_1).all()
    assert (tags[:, -1] == GAMMA_OUTER_1).all()


def test_restrict_to_refuge_requires_mask():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 16)
    with pytest.raises(EmptyRefuge):
        restrict_to_refuge(mesh, 1)


def test_refinement_nests_nodes():
    mesh = build_interval_mesh(0.0, 1.0, 0.4, 8)
    fine = refine(mesh)
    coarse = {round(float(x), 12) for x in mesh.nodes_1[:, 0]}
    finer = {round(float(x), 12) for x in fine.nodes_1[:, 0]}
    assert coarse <= finer


def test_refinement_preserves_refuges():
    mesh = build_interval_mesh(0.0, 1.0, 0.5, 64)
    tagged = tag_refuges(mesh, [RefugeRegion(1, (0.2, 0.3))])
    fine = refine(tagged)
    assert fine.refuge_mask_1.sum() > tagged.refuge_mask_1.sum()
    assert fine.refuge_regions == tagged.refuge_regions
