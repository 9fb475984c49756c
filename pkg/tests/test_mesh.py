import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgschwarz.mesh import SubdomainSpec, build_hierarchy, build_uniform_mesh


@pytest.mark.parametrize("n, ne, ni, nb", [(1, 1, 0, 4), (4, 16, 24, 16), (16, 256, 480, 64)])
def test_face_counts(n, ne, ni, nb):
    mesh = build_uniform_mesh(n)
    assert mesh.n_elements == ne
    assert len(mesh.interior_faces) == ni
    assert len(mesh.boundary_faces) == nb


def test_rejects_bad_n():
    with pytest.raises(ValueError):
        build_uniform_mesh(0)
    with pytest.raises(ValueError):
        build_uniform_mesh(2.5)


def test_face_geometry():
    mesh = build_uniform_mesh(3)
    for f in mesh.faces:
        (x0, y0), (x1, y1) = f.endpoints
        assert np.isclose(np.hypot(x1 - x0, y1 - y0), f.h_tilde)
        nx, ny = f.normal
        # normal is orthogonal to the face and of unit length
        assert np.isclose(nx * (x1 - x0) + ny * (y1 - y0), 0.0)
        assert np.isclose(nx**2 + ny**2, 1.0)
        mid = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
        xa, xb, ya, yb = mesh.element_bounds(f.ext_element)
        centre = np.array([(xa + xb) / 2, (ya + yb) / 2])
        if f.is_boundary:
            # outward normal points away from the only neighbour
            assert np.dot(mid - centre, f.normal) > 0
            assert f.classification == "boundary"
        else:
            # exterior element sits on the negative side of the normal
            assert np.dot(mid - centre, f.normal) > 0
            xa, xb, ya, yb = mesh.element_bounds(f.int_element)
            centre_i = np.array([(xa + xb) / 2, (ya + yb) / 2])
            assert np.dot(mid - centre_i, f.normal) < 0


@given(st.integers(1, 6), st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_face_points_shared_by_neighbours(n, t):
    # a point on an interior face lies in the closure of both neighbours
    mesh = build_uniform_mesh(n)
    for f in mesh.faces:
        if f.is_boundary:
            continue
        (x0, y0), (x1, y1) = f.endpoints
        x, y = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
        for e in (f.ext_element, f.int_element):
            xa, xb, ya, yb = mesh.element_bounds(e)
            assert xa - 1e-14 <= x <= xb + 1e-14 and ya - 1e-14 <= y <= yb + 1e-14


def test_locate():
    mesh = build_uniform_mesh(4)
    assert mesh.locate((0.1, 0.1)) == 0
    assert mesh.locate((1.0, 1.0)) == 15
    assert mesh.locate((0.3, 0.6)) == 2 * 4 + 1
    with pytest.raises(ValueError):
        mesh.locate((1.5, 0.0))


def test_quadrant_hierarchy():
    hier = build_hierarchy(4, 2, SubdomainSpec("nonoverlapping"))
    for d in range(4):
        assert len(hier.children(d)) == 4
    groups = hier.subdomain_elements
    assert [len(g) for g in groups] == [4, 4, 4, 4]
    assert sum(len(g) for g in groups) == 16
    # nonoverlapping subdomains are unions of coarse elements here
    for g, d in zip(groups, range(4)):
        assert set(hier.parent[g]) == {d}


def test_overlapping_extension_regions():
    hier = build_hierarchy(8, 2, SubdomainSpec("overlapping", 1 / 8, overlap="extension"))
    assert np.allclose(hier.subdomains.regions[0], (0, 5 / 8, 0, 5 / 8))
    assert np.allclose(hier.subdomains.regions[3], (3 / 8, 1, 3 / 8, 1))
    counts = [len(o) for o in hier.owner]
    assert min(counts) >= 1
    assert sum(counts) > 64
    # the band x in (3/8, 5/8) is shared
    mesh = hier.fine
    for e in range(mesh.n_elements):
        x0, x1, _, _ = mesh.element_bounds(e)
        if 3 / 8 <= x0 and x1 <= 5 / 8:
            assert len(hier.owner[e]) >= 2


def test_overlap_width_convention():
    # delta is the width of the shared strip: each quadrant grows by delta / 2
    hier = build_hierarchy(8, 2, SubdomainSpec("overlapping", 1 / 4))
    assert np.allclose(hier.subdomains.regions[0], (0, 5 / 8, 0, 5 / 8))


def test_adjacency():
    for spec in (SubdomainSpec("nonoverlapping"), SubdomainSpec("overlapping", 1 / 4)):
        hier = build_hierarchy(8, 2, spec)
        adj = hier.subdomains.adjacency
        assert (adj == adj.T).all()
        assert not adj.diagonal().any()
        assert hier.subdomains.max_neighbours == 3


@pytest.mark.parametrize("fine, coarse, spec", [
    (4, 3, SubdomainSpec()),
    (8, 2, SubdomainSpec("overlapping", 1 / 10)),
    (8, 2, SubdomainSpec("overlapping", 0.0)),
    (6, 3, SubdomainSpec("nonoverlapping")),
])
def test_hierarchy_errors(fine, coarse, spec):
    with pytest.raises(ValueError):
        build_hierarchy(fine, coarse, spec)
