import json

import numpy as np
import pytest

from polympe.families import cartesian_two_domain, triangulated_two_domain, VERIFICATION_DIRICHLET
from polympe.mesh import (MeshError, PolyMesh, build_faces, harmonic_h, load_mesh,
                          quality_report, save_mesh)

from conftest import two_square_mesh, unit_square_mesh


def write_mesh_file(tmp_path, doc):
    path = tmp_path / "mesh.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_minimal_two_domain(tmp_path):
    doc = {
        "vertices": [[-1, 0], [0, 0], [1, 0], [1, 1], [0, 1], [-1, 1]],
        "elements": [{"v": [0, 1, 4, 5], "domain": "elastic"},
                     {"v": [1, 2, 3, 4], "domain": "fluid"}],
        "boundary": [{"edge": [0, 1], "label": "el"}, {"edge": [0, 5], "label": "el"},
                     {"edge": [4, 5], "label": "el"}, {"edge": [1, 2], "label": "wall"},
                     {"edge": [2, 3], "label": "out"}, {"edge": [3, 4], "label": "wall"}],
    }
    mesh = load_mesh(write_mesh_file(tmp_path, doc))
    assert mesh.n_elements == 2
    assert mesh.interface_edges() == {(1, 4)}


def test_load_rejects_duplicated_element(tmp_path):
    doc = {
        "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
        "elements": [{"v": [0, 1, 2, 3], "domain": "elastic"},
                     {"v": [0, 1, 2, 3], "domain": "fluid"}],
        "boundary": [],
    }
    with pytest.raises(MeshError, match="overlap"):
        load_mesh(write_mesh_file(tmp_path, doc))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(MeshError, match="parse"):
        load_mesh(path)


def test_cartesian_4x4_split():
    mesh = cartesian_two_domain(4, nx=4)
    assert mesh.n_elements == 16
    faces = build_faces(mesh, VERIFICATION_DIRICHLET)
    assert len(faces.interface) == 4


def test_non_ccw_rejected():
    with pytest.raises(MeshError, match="counterclockwise"):
        PolyMesh([[0, 0], [1, 0], [1, 1]], [[0, 2, 1]], ["elastic"], {})


def test_star_shapedness_rejected():
    # L-shaped element whose centroid lies outside the kernel
    verts = [[0, 0], [4, 0], [4, 1], [1, 1], [1, 4], [0, 4]]
    with pytest.raises(MeshError, match="star-shaped"):
        PolyMesh(verts, [[0, 1, 2, 3, 4, 5]], ["elastic"], {})


def test_edge_shared_by_three_rejected():
    verts = [[0, 0], [1, 0], [0, 1], [0, -1], [1, 1]]
    elems = [[0, 1, 2], [0, 3, 1], [0, 1, 4]]
    with pytest.raises(MeshError):
        PolyMesh(verts, elems, ["elastic"] * 3, {})


def test_interface_classification():
    faces = build_faces(two_square_mesh(), VERIFICATION_DIRICHLET)
    f = faces.faces[faces.interface[0]]
    assert f.kind == "interface"
    assert f.classification() == {"interface"}
    # interface normal points out of the elastic element
    assert np.allclose(f.normal, [1.0, 0.0])


def test_wall_classification_per_variable():
    faces = build_faces(two_square_mesh(), {"el": {"d"}, "wall": {"d", "u"}, "out": set()})
    wall = next(faces.faces[i] for i in faces.boundary_f if faces.faces[i].label == "wall")
    tags = wall.classification(["d", "u", "p:E"])
    assert "dirichlet-u" in tags and "neumann-p(E)" in tags
    out = next(faces.faces[i] for i in faces.boundary_f if faces.faces[i].label == "out")
    assert "neumann-out" in out.classification(["u"])
    assert faces.outlet() == [faces.faces.index(out)]


def test_unlabeled_boundary_edge():
    mesh = two_square_mesh()
    mesh.boundary_labels.pop((2, 3))
    with pytest.raises(MeshError, match="unlabeled"):
        build_faces(mesh, VERIFICATION_DIRICHLET)


def test_harmonic_h_values():
    assert harmonic_h(0.1, 0.1) == pytest.approx(0.1)
    assert harmonic_h(0.1, 0.2) == pytest.approx(2.0 / 15.0)
    assert harmonic_h(0.25) == 0.25


def test_harmonic_h_bounds():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b = rng.uniform(0.01, 2.0, 2)
        h = harmonic_h(a, b)
        assert h == pytest.approx(harmonic_h(b, a))
        assert min(a, b) <= h <= 2.0 * min(a, b)


def test_quality_report_uniform_grid():
    rep = quality_report(cartesian_two_domain(4))
    assert np.allclose(rep.bounded_variation, 1.0)
    assert rep.h_min == pytest.approx(rep.h_max)


def test_quality_report_unit_square():
    rep = quality_report(unit_square_mesh())
    assert rep.shape_ratios[0] == pytest.approx(2 * 0.25 / np.sqrt(2.0))


def test_quality_report_agglomerated(mesh80):
    rep = quality_report(mesh80)
    assert np.all(np.isfinite(rep.shape_ratios)) and np.all(rep.shape_ratios > 0)
    assert np.all(rep.bounded_variation > 0)
    assert "shape ratio" in rep.summary()


def test_area_invariant():
    for mesh in (cartesian_two_domain(4), triangulated_two_domain(5, jitter=0.2)):
        assert mesh.areas.sum() == pytest.approx(2.0, rel=1e-10)


def test_interface_set_invariant_under_reordering():
    mesh = cartesian_two_domain(4)
    order = list(range(mesh.n_elements))[::-1]
    shuffled = PolyMesh(mesh.vertices,
                        [mesh.elements[i] for i in order],
                        [mesh.element_domain[i] for i in order],
                        mesh.boundary_labels)
    assert shuffled.interface_edges() == mesh.interface_edges()


def test_interior_normals_opposite():
    # the stored normal is outward from elem_plus; the minus-side normal is
    # its exact negative by construction, so check outwardness for both
    mesh = triangulated_two_domain(3, jitter=0.2)
    faces = build_faces(mesh, VERIFICATION_DIRICHLET)
    for f in faces.faces:
        mid = 0.5 * (mesh.vertices[f.v0] + mesh.vertices[f.v1])
        assert np.dot(f.normal, mid - mesh.centroids[f.elem_plus]) > 0
        if f.elem_minus is not None:
            assert np.dot(-f.normal, mid - mesh.centroids[f.elem_minus]) > 0


def test_save_load_roundtrip(tmp_path, mesh80):
    path = tmp_path / "m.json"
    save_mesh(mesh80, path)
    again = load_mesh(path)
    assert again.n_elements == mesh80.n_elements
    assert np.allclose(again.vertices, mesh80.vertices)
    assert again.interface_edges() == mesh80.interface_edges()
