import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from mqkrylov.points import (Distribution, ParseError, PointSet, PointSetError,
                             cube_face_normal, generate_cube, generate_sphere, halton,
                             halton_points, import_msh_nodes, import_point_cloud, load_points,
                             write_point_cloud)


@pytest.mark.parametrize("index, base, expected", [
    (1, 2, 0.5), (3, 2, 0.75), (2, 3, 2 / 3), (4, 2, 0.125), (5, 5, 0.04),
])
def test_halton_radical_inverse(index, base, expected):
    assert halton(index, base) == pytest.approx(expected, abs=1e-15)


def test_halton_points_are_in_unit_cube_and_distinct():
    h = halton_points(200)
    assert h.shape == (200, 3)
    assert np.all((h > 0) & (h < 1))
    assert len({tuple(p) for p in h}) == 200


@pytest.mark.parametrize("n, n_i, n_b", [(27, 1, 26), (125, 27, 98)])
def test_uniform_cube_counts(n, n_i, n_b):
    pts = generate_cube(n, Distribution.uniform())
    assert (pts.n_interior, pts.n_boundary, len(pts)) == (n_i, n_b, n)


def test_uniform_27_centre():
    pts = generate_cube(27, Distribution.uniform())
    np.testing.assert_allclose(pts.interior, [[0.5, 0.5, 0.5]])


@pytest.mark.parametrize("kind", [Distribution.random(0), Distribution.halton(1)])
def test_cube_359(kind):
    pts = generate_cube(359, kind)
    assert len(pts) == 359
    assert pts.n_interior >= 1 and pts.n_boundary >= 1
    assert pts.min_distance() > 0
    assert np.all(np.any((pts.boundary == 0) | (pts.boundary == 1), axis=1))
    assert np.all((pts.interior > 0) & (pts.interior < 1))
    np.testing.assert_allclose(np.linalg.norm(pts.normals, axis=1), 1.0, atol=1e-12)


def test_cube_normals_point_outward():
    pts = generate_cube(125, Distribution.uniform())
    centre = np.full(3, 0.5)
    assert np.all(np.einsum("ij,ij->i", pts.boundary - centre, pts.normals) > 0)


def test_cube_face_normal_edge_tie():
    # on the x=0, y=0 edge the x face wins
    np.testing.assert_array_equal(cube_face_normal(np.array([0.0, 0.0, 0.3])), [-1, 0, 0])


def test_random_cube_is_seeded():
    a = generate_cube(359, Distribution.random(7))
    b = generate_cube(359, Distribution.random(7))
    c = generate_cube(359, Distribution.random(8))
    np.testing.assert_array_equal(a.centers, b.centers)
    assert not np.array_equal(a.centers, c.centers)


@pytest.mark.parametrize("kind", ["random", "uniform", "halton"])
def test_sphere_membership(kind):
    dist = {"random": Distribution.random(0), "uniform": Distribution.uniform(),
            "halton": Distribution.halton(1)}[kind]
    pts = generate_sphere(359, dist)
    assert len(pts) == 359
    assert np.all(np.abs(np.linalg.norm(pts.boundary, axis=1) - 1) < 1e-12)
    assert np.all(np.linalg.norm(pts.interior, axis=1) < 1)
    np.testing.assert_allclose(pts.normals, pts.boundary, atol=1e-12)


def test_sphere_halton_is_deterministic():
    a = generate_sphere(359, Distribution.halton(1))
    b = generate_sphere(359, Distribution.halton(1))
    np.testing.assert_array_equal(a.centers, b.centers)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(27, 400), seed=st.integers(0, 1000))
def test_generated_sets_satisfy_invariants(n, seed):
    for gen in (generate_cube, generate_sphere):
        pts = gen(n, Distribution.random(seed))
        assert len(pts) == pts.n_interior + pts.n_boundary
        assert pts.n_interior >= 1 and pts.n_boundary >= 1
        assert pts.min_distance() > 0
        assert np.all(np.abs(np.linalg.norm(pts.normals, axis=1) - 1) < 1e-10)


def test_pointset_validation():
    with pytest.raises(PointSetError, match="N_I"):
        PointSet(np.zeros((0, 3)), [[1, 0, 0]], [[1, 0, 0]])
    with pytest.raises(PointSetError):
        PointSet([[0, 0, 0]], [[0, 0, 0]], [[1, 0, 0]])
    with pytest.raises(PointSetError):
        PointSet([[0, 0, 0]], [[1, 0, 0]], [[2, 0, 0]])


def test_pointset_arrays_are_read_only():
    pts = generate_cube(27, Distribution.uniform())
    with pytest.raises(ValueError):
        pts.interior[0, 0] = 3.0


def test_native_roundtrip(tmp_path):
    pts = generate_sphere(100, Distribution.random(3))
    path = write_point_cloud(pts, tmp_path / "s.txt")
    back = import_point_cloud(path)
    np.testing.assert_array_equal(back.centers, pts.centers)
    np.testing.assert_array_equal(back.normals, pts.normals)


def test_native_five_points(tmp_path):
    text = "pointset v1\nI 0.5 0.5 0.5\n" + "".join(
        f"B {x} {y} 0 0 0 -1\n" for x, y in [(0, 0), (1, 0), (0, 1), (1, 1)])
    (tmp_path / "p.txt").write_text(text)
    pts = load_points(tmp_path / "p.txt")
    assert (len(pts), pts.n_interior, pts.n_boundary) == (5, 1, 4)


def test_native_duplicate_is_rejected(tmp_path):
    (tmp_path / "p.txt").write_text("pointset v1\nI 0.5 0.5 0.5\nB 0 0 0 1 0 0\nI 0.5 0.5 0.5\n")
    with pytest.raises(PointSetError, match="line 4"):
        import_point_cloud(tmp_path / "p.txt")


def test_native_renormalizes_nearly_unit_normal(tmp_path):
    (tmp_path / "p.txt").write_text("pointset v1\nI 0.5 0.5 0.5\nB 0 0 0 1.05 0 0\n")
    with pytest.warns(UserWarning):
        pts = import_point_cloud(tmp_path / "p.txt")
    np.testing.assert_allclose(pts.normals, [[1, 0, 0]])


def test_native_bad_header(tmp_path):
    (tmp_path / "p.txt").write_text("points\nI 0 0 0\n")
    with pytest.raises(ParseError):
        import_point_cloud(tmp_path / "p.txt")


def _msh(nodes, elements):
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(nodes))]
    lines += [f"{i + 1} {x} {y} {z}" for i, (x, y, z) in enumerate(nodes)]
    lines += ["$EndNodes", "$Elements", str(len(elements))]
    for i, (etype, conn) in enumerate(elements):
        lines.append(f"{i + 1} {etype} 2 0 1 " + " ".join(str(c) for c in conn))
    lines.append("$EndElements")
    return "\n".join(lines) + "\n"


def test_msh_single_tetrahedron_has_no_interior(tmp_path):
    nodes = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    faces = [(2, (1, 2, 3)), (2, (1, 2, 4)), (2, (1, 3, 4)), (2, (2, 3, 4)), (4, (1, 2, 3, 4))]
    (tmp_path / "t.msh").write_text(_msh(nodes, faces))
    with pytest.raises(PointSetError, match="N_I"):
        import_msh_nodes(tmp_path / "t.msh")


def _coarse_cube():
    corners = list(itertools.product((0.0, 1.0), repeat=3))
    nodes = corners + [(0.5, 0.5, 0.5)]
    idx = {c: i + 1 for i, c in enumerate(corners)}
    tris = []
    for axis in range(3):
        for side in (0.0, 1.0):
            q = [idx[c] for c in corners if c[axis] == side]
            tris += [(2, (q[0], q[1], q[3])), (2, (q[0], q[3], q[2]))]
    tets = [(4, (t[0], t[1], t[2], 9)) for _, t in tris]
    return nodes, tris + tets


def test_msh_coarse_cube_matches_convex_hull(tmp_path):
    nodes, elements = _coarse_cube()
    (tmp_path / "c.msh").write_text(_msh(nodes, elements))
    pts = load_points(tmp_path / "c.msh")
    hull = ConvexHull(np.array(nodes))
    assert {tuple(p) for p in pts.boundary} == {tuple(nodes[i]) for i in hull.vertices}
    np.testing.assert_allclose(pts.interior, [[0.5, 0.5, 0.5]])
    outward = pts.boundary - 0.5
    assert np.all(np.einsum("ij,ij->i", outward, pts.normals) > 0)


def test_msh_truncated_names_section(tmp_path):
    nodes, elements = _coarse_cube()
    text = _msh(nodes, elements)
    cut = text[: text.index("$EndNodes")]
    (tmp_path / "bad.msh").write_text(cut)
    with pytest.raises(ParseError, match="Nodes"):
        import_msh_nodes(tmp_path / "bad.msh")


def test_msh_unknown_node_reference(tmp_path):
    nodes, elements = _coarse_cube()
    elements = elements + [(2, (1, 2, 42))]
    (tmp_path / "bad.msh").write_text(_msh(nodes, elements))
    with pytest.raises(ParseError, match="unknown node 42"):
        import_msh_nodes(tmp_path / "bad.msh")
