"""Triangle meshes: template spheres, adjacency, surface sampling, OBJ IO.

Meshes are immutable value objects; adjacency caches are computed on demand
and memoized. All coordinates are world-space meters. Faces use
counter-clockwise winding for outward normals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

# Golden-ratio icosahedron; unit-normalized in make_icosphere.
_ICO_T = (1.0 + 5.0**0.5) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
        [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
        [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int32,
)


@dataclass(frozen=True)
class TriangleMesh:
    """Vertices (V,3) float64 and faces (F,3) int32, CCW winding."""

    vertices: np.ndarray
    faces: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int32))
        if v.size == 0:
            v = v.reshape(0, 3)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (V,3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must be (F,3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite coordinates")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise ValueError("face index out of range")
            degenerate = (
                (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            )
            if degenerate.any():
                raise ValueError(f"degenerate face at index {int(np.argmax(degenerate))}")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted (E,2) int array."""
        if "edges" not in self._cache:
            f = self.faces
            e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            e = np.sort(e, axis=1)
            self._cache["edges"] = np.unique(e, axis=0)
        return self._cache["edges"]

    def neighbor_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Vertex neighbors N(i) in CSR form: (indices, offsets).

        Neighbors of vertex i are indices[offsets[i]:offsets[i+1]], sorted.
        """
        if "csr" not in self._cache:
            e = self.edges()
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
            counts = np.bincount(src, minlength=self.n_vertices)
            offsets = np.zeros(self.n_vertices + 1, dtype=np.int64)
            np.cumsum(counts, out=offsets[1:])
            self._cache["csr"] = (dst.astype(np.int64), offsets)
        return self._cache["csr"]

    def vertex_neighbors(self, i: int) -> np.ndarray:
        indices, offsets = self.neighbor_csr()
        return indices[offsets[i]:offsets[i + 1]]

    def edge_face_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior edges and their two incident faces.

        Returns (edge_verts (E,2), edge_faces (E,2)); boundary edges (one
        incident face) are excluded.
        """
        if "edge_faces" not in self._cache:
            f = self.faces
            e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            face_of = np.tile(np.arange(len(f), dtype=np.int64), 3)
            e = np.sort(e, axis=1)
            order = np.lexsort((e[:, 1], e[:, 0]))
            e, face_of = e[order], face_of[order]
            same = (e[:-1] == e[1:]).all(axis=1)
            starts = np.flatnonzero(np.concatenate([[True], ~same]))
            counts = np.diff(np.concatenate([starts, [len(e)]]))
            if np.any(counts > 2):
                raise ValueError("non-manifold edge (more than 2 incident faces)")
            interior = starts[counts == 2]
            ev = e[interior]
            ef = np.stack([face_of[interior], face_of[interior + 1]], axis=1)
            self._cache["edge_faces"] = (ev, ef)
        return self._cache["edge_faces"]

    def is_closed(self) -> bool:
        ev, _ = self.edge_face_adjacency()
        return len(ev) == len(self.edges())

    def face_areas(self) -> np.ndarray:
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit outward normals; zero vector for degenerate-area faces."""
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.maximum(norm, 1e-300)

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same topology, new vertex positions (adjacency caches carry over)."""
        m = TriangleMesh(vertices, self.faces)
        for k in ("edges", "csr", "edge_faces"):
            if k in self._cache:
                m._cache[k] = self._cache[k]
        return m


@dataclass(frozen=True)
class PointCloud:
    """Unordered 3D points (N,3) float64, finite."""

    points: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if p.size == 0:
            p = p.reshape(0, 3)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"points must be (N,3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("points contain non-finite coordinates")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)


def make_icosphere(subdivisions: int, radius: float) -> TriangleMesh:
    """Icosahedron subdivided 4-way `subdivisions` times, projected to a sphere."""
    if not (0 <= subdivisions <= 6):
        raise ValueError(f"subdivisions must be in [0, 6], got {subdivisions}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    faces = _ICO_FACES
    for _ in range(subdivisions):
        verts, faces = _subdivide_unit(verts, faces)
    return TriangleMesh(verts * radius, faces)


def _subdivide_unit(verts: np.ndarray, faces: np.ndarray):
    # Midpoint vertices are shared per undirected edge, then re-projected.
    edges = np.sort(
        np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1
    )
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    mid_idx = len(verts) + inverse.reshape(3, len(faces))  # [ab, bc, ca] per face
    ab, bc, ca = mid_idx[0], mid_idx[1], mid_idx[2]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    ).astype(np.int32)
    return np.concatenate([verts, mid]), new_faces


def sample_surface(mesh: TriangleMesh, n: int, seed: int) -> PointCloud:
    """n points uniform by area over the mesh surface, deterministic per seed."""
    if mesh.n_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero total area")
    fidx = rng.choice(mesh.n_faces, size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[fidx]]
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    return PointCloud(pts)


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write `v`/`f` records only; floats via repr for exact text roundtrip."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for i, j, k in mesh.faces + 1:  # OBJ is 1-based
        lines.append(f"f {i} {j} {k}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_obj(path) -> TriangleMesh:
    """Parse v/f records; >3-gon faces are fan-triangulated; other records ignored."""
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise FormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(p) for p in parts[1:4]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise FormatError(f"{path}:{lineno}: face needs >= 3 indices")
            idx = []
            for p in parts[1:]:
                head = p.split("/")[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad face index {head!r}") from exc
                if i == 0:
                    raise FormatError(f"{path}:{lineno}: OBJ indices are 1-based, got 0")
                if i < 0:
                    raise FormatError(f"{path}:{lineno}: negative indices unsupported")
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
        # vn/vt/usemtl/etc. are out of scope and skipped
    try:
        return TriangleMesh(np.array(verts, dtype=np.float64).reshape(len(verts), 3),
                            np.array(faces, dtype=np.int32).reshape(len(faces), 3))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
