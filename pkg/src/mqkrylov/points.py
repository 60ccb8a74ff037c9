"""Collocation point sets: generators for the cube and the ball, and readers
for the native point-cloud text format and ASCII Gmsh v2 meshes."""

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


class PointSetError(ValueError):
    """A point set violates one of its structural invariants."""


class ParseError(ValueError):
    """A point file could not be parsed."""

    def __init__(self, message, line=None, section=None):
        where = []
        if section is not None:
            where.append(f"section {section}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.section = section


def _frozen(a, shape_tail=3):
    a = np.array(a, dtype=float).reshape(-1, shape_tail)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointSet:
    """Interior nodes, boundary nodes and their outward unit normals.

    Centers are ordered interior first, then boundary.
    """

    interior: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        interior = _frozen(self.interior)
        boundary = _frozen(self.boundary)
        normals = _frozen(self.normals)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "normals", normals)
        if len(interior) < 1:
            raise PointSetError("point set needs N_I >= 1 interior nodes")
        if len(boundary) < 1:
            raise PointSetError("point set needs N_B >= 1 boundary nodes")
        if normals.shape != boundary.shape:
            raise PointSetError("one normal per boundary node is required")
        if not np.all(np.isfinite(self.centers)) or not np.all(np.isfinite(normals)):
            raise PointSetError("coordinates must be finite")
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-10):
            raise PointSetError("boundary normals must have unit length")
        if self.min_distance() <= 0.0:
            raise PointSetError("point set contains duplicate points")

    @property
    def centers(self):
        return np.vstack([self.interior, self.boundary])

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def n_boundary(self):
        return len(self.boundary)

    def __len__(self):
        return self.n_interior + self.n_boundary

    def min_distance(self):
        pts = np.vstack([self.interior, self.boundary])
        if len(pts) < 2:
            return math.inf
        d, _ = cKDTree(pts).query(pts, k=2)
        return float(d[:, 1].min())

    def permuted(self, interior_order, boundary_order):
        """Same nodes, reordered within each block."""
        return PointSet(
            self.interior[interior_order],
            self.boundary[boundary_order],
            self.normals[boundary_order],
            self.label,
            dict(self.meta),
        )


@dataclass(frozen=True)
class Distribution:
    """How interior nodes are placed: ``random``, ``uniform`` or ``halton``."""

    kind: str
    seed: int = 0
    start_index: int = 1

    def __post_init__(self):
        if self.kind not in ("random", "uniform", "halton"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.start_index < 1:
            raise ValueError("halton start_index must be >= 1")

    @classmethod
    def random(cls, seed=0):
        return cls("random", seed=seed)

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def halton(cls, start_index=1):
        return cls("halton", start_index=start_index)


def halton(index, base):
    """Radical inverse of ``index`` in ``base``."""
    if index < 1 or base < 2:
        raise ValueError("halton needs index >= 1 and base >= 2")
    result, f = 0.0, 1.0
    i = index
    while i > 0:
        f /= base
        i, digit = divmod(i, base)
        result += digit * f
    return result


def halton_points(n, start_index=1, bases=(2, 3, 5)):
    return np.array(
        [[halton(i, b) for b in bases] for i in range(start_index, start_index + n)]
    )


def _icbrt(n):
    m = int(round(n ** (1.0 / 3.0)))
    while m ** 3 > n:
        m -= 1
    while (m + 1) ** 3 <= n:
        m += 1
    return m


# outward normals of the cube faces x=0, x=1, y=0, y=1, z=0, z=1
_CUBE_FACE_NORMALS = np.array(
    [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], dtype=float
)


def cube_face_normal(p):
    """Normal of the lowest-index face of the unit cube containing ``p``."""
    for axis in range(3):
        if p[axis] == 0.0:
            return _CUBE_FACE_NORMALS[2 * axis]
        if p[axis] == 1.0:
            return _CUBE_FACE_NORMALS[2 * axis + 1]
    raise ValueError(f"{p} is not on the cube boundary")


def _cube_grid(m):
    t = np.linspace(0.0, 1.0, m)
    g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    on_boundary = np.any((g == 0.0) | (g == 1.0), axis=1)
    return g, on_boundary


def _interior_samples(n, dist, accept, low, high, bases=(2, 3, 5)):
    """Draw ``n`` points of the generator in the box [low, high]^3 that pass ``accept``."""
    out = []
    if dist.kind == "random":
        rng = np.random.default_rng(dist.seed)
        while len(out) < n:
            batch = rng.uniform(low, high, size=(max(2 * (n - len(out)), 16), 3))
            out.extend(p for p in batch if accept(p))
    else:
        index = dist.start_index
        while len(out) < n:
            p = low + (high - low) * np.array([halton(index, b) for b in bases])
            index += 1
            if accept(p):
                out.append(p)
    return np.array(out[:n])


def generate_cube(n_target, dist):
    """Collocation nodes in the unit cube [0, 1]^3."""
    if n_target < 27:
        raise ValueError("cube point sets need n_target >= 27")
    if dist.kind == "uniform":
        m = math.ceil(round(n_target ** (1.0 / 3.0), 12))
        g, on_b = _cube_grid(m)
        interior, boundary = g[~on_b], g[on_b]
    else:
        # boundary layer = faces of the largest grid with m^3 <= n_target
        m = _icbrt(n_target)
        g, on_b = _cube_grid(m)
        boundary = g[on_b]
        interior = _interior_samples(
            n_target - len(boundary),
            dist,
            lambda p: bool(np.all((p > 0.0) & (p < 1.0))),
            0.0,
            1.0,
        )
    normals = np.array([cube_face_normal(p) for p in boundary])
    return PointSet(
        interior, boundary, normals, label=f"cube-{dist.kind}-{n_target}",
        meta={"geometry": "cube", "distribution": dist},
    )


def fibonacci_sphere(n):
    """Quasi-uniform points on the unit sphere (Fibonacci lattice)."""
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    rad = np.sqrt(1.0 - z * z)
    theta = i * math.pi * (3.0 - math.sqrt(5.0))
    q = np.column_stack([rad * np.cos(theta), rad * np.sin(theta), z])
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _sphere_boundary_count(n):
    # share of nodes in a surface shell one mean spacing thick
    h = (4.0 * math.pi / 3.0 / n) ** (1.0 / 3.0)
    share = 1.0 - max(0.0, 1.0 - h) ** 3
    return int(min(max(round(n * share), 1), n - 1))


def generate_sphere(n_target, dist):
    """Collocation nodes in the unit ball with a Fibonacci boundary lattice."""
    if n_target < 27:
        raise ValueError("sphere point sets need n_target >= 27")
    n_b = _sphere_boundary_count(n_target)
    if dist.kind == "uniform":
        # densest grid whose points with |p| < 1 - h/2 do not exceed the interior share
        best = None
        m = 2
        while True:
            t = np.linspace(-1.0, 1.0, m)
            h = t[1] - t[0]
            g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
            inside = g[np.linalg.norm(g, axis=1) < 1.0 - 0.5 * h]
            if len(inside) > n_target - n_b:
                break
            if len(inside) >= 1:
                best = inside
            m += 1
        interior = best
        n_b = n_target - len(interior)
    else:
        interior = _interior_samples(
            n_target - n_b, dist, lambda p: float(p @ p) < 1.0, -1.0, 1.0
        )
    boundary = fibonacci_sphere(n_b)
    return PointSet(
        interior, boundary, boundary.copy(), label=f"sphere-{dist.kind}-{n_target}",
        meta={"geometry": "sphere", "distribution": dist},
    )


def _unit_normal(v, lineno):
    v = np.asarray(v, dtype=float)
    length = float(np.linalg.norm(v))
    if abs(length - 1.0) <= 1e-10:
        return v
    if abs(length - 1.0) <= 0.1:
        warnings.warn(f"line {lineno}: normal of length {length:.6g} renormalized")
        return v / length
    raise PointSetError(f"line {lineno}: normal has length {length:.6g}, expected 1")


def import_point_cloud(path):
    """Read the native ``pointset v1`` text format."""
    path = Path(path)
    interior, boundary, normals = [], [], []
    seen = {}
    header_seen = False
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "pointset v1":
                    raise ParseError("expected header 'pointset v1'", line=lineno)
                header_seen = True
                continue
            tok = line.split()
            try:
                if tok[0] == "I" and len(tok) == 4:
                    xyz = tuple(float(t) for t in tok[1:4])
                    interior.append(xyz)
                elif tok[0] == "B" and len(tok) == 7:
                    xyz = tuple(float(t) for t in tok[1:4])
                    boundary.append(xyz)
                    normals.append(_unit_normal([float(t) for t in tok[4:7]], lineno))
                else:
                    raise ParseError(f"malformed record {line!r}", line=lineno)
            except ValueError as exc:
                if isinstance(exc, (ParseError, PointSetError)):
                    raise
                raise ParseError(f"bad number in {line!r}", line=lineno) from exc
            if xyz in seen:
                raise PointSetError(
                    f"line {lineno}: duplicate point {xyz} (first at line {seen[xyz]})"
                )
            seen[xyz] = lineno
    if not header_seen:
        raise ParseError("empty file, missing 'pointset v1' header")
    return PointSet(interior, boundary, normals, label=path.stem,
                    meta={"geometry": "imported", "path": str(path)})


def write_point_cloud(points, path):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("pointset v1\n")
        if points.label:
            fh.write(f"# {points.label}\n")
        for p in points.interior:
            fh.write("I {!r} {!r} {!r}\n".format(*map(float, p)))
        for p, n in zip(points.boundary, points.normals):
            fh.write("B {!r} {!r} {!r} {!r} {!r} {!r}\n".format(*map(float, p), *map(float, n)))
    return path


_SURFACE_TYPES = {2: 3, 3: 4}
_VOLUME_TYPES = {4: 4}


def _read_msh_sections(path):
    sections = {}
    current, body, start = None, [], 0
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("$"):
                if current is None:
                    current, body, start = line[1:], [], lineno
                elif line == "$End" + current:
                    sections[current] = (start, body)
                    current = None
                else:
                    raise ParseError(f"unexpected {line} before $End{current}",
                                     line=lineno, section=current)
            elif current is not None:
                body.append((lineno, line))
    if current is not None:
        raise ParseError("file ends before section is closed", section=current)
    return sections


def import_msh_nodes(path):
    """Nodes of an ASCII Gmsh v2 mesh, split into hull and interior nodes.

    Nodes referenced by triangle (type 2) or quad (type 3) elements are boundary
    nodes; their normal is the mean of the incident face normals, each oriented
    away from the centroid of all nodes.
    """
    sections = _read_msh_sections(path)
    for name in ("MeshFormat", "Nodes", "Elements"):
        if name not in sections:
            raise ParseError(f"missing ${name} section", section=name)

    start, body = sections["MeshFormat"]
    if not body or not body[0][1].split()[0].startswith("2"):
        raise ParseError("only ASCII MSH version 2 is supported", line=start,
                         section="MeshFormat")
    if len(body[0][1].split()) > 1 and body[0][1].split()[1] != "0":
        raise ParseError("binary MSH files are not supported", line=body[0][0],
                         section="MeshFormat")

    start, body = sections["Nodes"]
    try:
        count = int(body[0][1])
        ids, coords = [], []
        for lineno, line in body[1:]:
            tok = line.split()
            if len(tok) != 4:
                raise ParseError(f"malformed node record {line!r}", line=lineno,
                                 section="Nodes")
            ids.append(int(tok[0]))
            coords.append([float(t) for t in tok[1:]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError("bad node data", line=start, section="Nodes") from exc
    if len(ids) != count:
        raise ParseError(f"expected {count} nodes, found {len(ids)}", line=start,
                         section="Nodes")
    coords = np.array(coords, dtype=float)
    index = {nid: i for i, nid in enumerate(ids)}

    start, body = sections["Elements"]
    faces = []
    try:
        count = int(body[0][1])
        for lineno, line in body[1:]:
            tok = [int(t) for t in line.split()]
            etype, ntags = tok[1], tok[2]
            conn = tok[3 + ntags:]
            for nid in conn:
                if nid not in index:
                    raise ParseError(f"element {tok[0]} references unknown node {nid}",
                                     line=lineno, section="Elements")
            if etype in _SURFACE_TYPES:
                faces.append([index[n] for n in conn[: _SURFACE_TYPES[etype]]])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError("bad element data", line=start, section="Elements") from exc
    if len(body) - 1 != count:
        raise ParseError(f"expected {count} elements, found {len(body) - 1}",
                         line=start, section="Elements")

    centroid = coords.mean(axis=0)
    acc = np.zeros_like(coords)
    on_hull = np.zeros(len(coords), dtype=bool)
    for face in faces:
        p = coords[face]
        if len(face) == 3:
            n = np.cross(p[1] - p[0], p[2] - p[0])
        else:
            n = np.cross(p[2] - p[0], p[3] - p[1])
        length = np.linalg.norm(n)
        if length == 0.0:
            continue
        n = n / length
        if n @ (p.mean(axis=0) - centroid) < 0:
            n = -n
        acc[face] += n
        on_hull[face] = True

    normals = []
    for i in np.flatnonzero(on_hull):
        n = acc[i]
        if np.linalg.norm(n) < 1e-12:
            n = coords[i] - centroid
        normals.append(n / np.linalg.norm(n))
    return PointSet(coords[~on_hull], coords[on_hull], np.array(normals).reshape(-1, 3),
                    label=Path(path).stem,
                    meta={"geometry": "imported", "path": str(path)})


def load_points(path):
    """Dispatch on file suffix: ``.msh`` to the Gmsh reader, anything else native."""
    path = Path(path)
    if path.suffix.lower() == ".msh":
        return import_msh_nodes(path)
    return import_point_cloud(path)
