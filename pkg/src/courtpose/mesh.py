"""Triangle meshes segmented into named body parts, plus the mesh operators
the rest of the library leans on (normals, uniform Laplacian, OBJ files).

Meshes may be non-watertight and may contain multiple connected components;
nothing here assumes manifoldness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

PART_NAMES = ("head", "arms", "shirt", "pants", "legs", "shoes")

# per-part vertex counts of the released full-body template
TEMPLATE_PART_VERTICES = {
    "head": 348, "arms": 842, "shoes": 937, "shirt": 2098, "pants": 1439, "legs": 372,
}
TEMPLATE_TOTAL_VERTICES = 6036
TEMPLATE_TOTAL_FACES = 11576

_DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class PartMesh:
    vertices: np.ndarray  # (N, 3), meters
    faces: np.ndarray     # (M, 3), vertex indices
    part: str

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=int).reshape(-1, 3))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError("vertices must be (N, 3)")
        if self.part not in PART_NAMES:
            raise ValidationError(f"unknown part {self.part!r}; expected one of {PART_NAMES}")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValidationError("face index out of range")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices: np.ndarray) -> "PartMesh":
        return PartMesh(vertices, self.faces, self.part)


@dataclass(frozen=True)
class BodyMesh:
    """Ordered collection of part meshes making up one body."""

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        names = [p.part for p in self.parts]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate part names in body mesh")

    def part(self, name: str) -> PartMesh:
        for p in self.parts:
            if p.part == name:
                return p
        raise ValidationError(f"body has no part {name!r}")

    def has_part(self, name: str) -> bool:
        return any(p.part == name for p in self.parts)

    @property
    def total_vertices(self) -> int:
        return sum(p.num_vertices for p in self.parts)

    @property
    def total_faces(self) -> int:
        return sum(p.num_faces for p in self.parts)

    def merged(self):
        """Single (vertices, faces) pair with per-part index offsets applied."""
        vs, fs, off = [], [], 0
        for p in self.parts:
            vs.append(p.vertices)
            fs.append(p.faces + off)
            off += p.num_vertices
        return np.concatenate(vs, axis=0), np.concatenate(fs, axis=0)

    def with_parts(self, parts) -> "BodyMesh":
        return BodyMesh(tuple(parts))

    def matches_template(self) -> bool:
        return (self.total_vertices == TEMPLATE_TOTAL_VERTICES
                and self.total_faces == TEMPLATE_TOTAL_FACES)


def face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    b = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


def face_normals(vertices: np.ndarray, faces: np.ndarray, normalize: bool = True) -> np.ndarray:
    a = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    b = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    n = np.cross(a, b)
    if normalize:
        ln = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.divide(n, ln, out=np.zeros_like(n), where=ln > 0)
    return n


def vertex_normals(mesh: PartMesh) -> np.ndarray:
    """Area-weighted average of incident face normals, unit length.

    Isolated vertices get a zero normal (flagged by the zero length rather
    than an exception so partially used buffers stay usable).
    """
    V, F = mesh.vertices, mesh.faces
    weighted = face_normals(V, F, normalize=False)  # length = 2 * area
    out = np.zeros_like(V)
    for k in range(3):
        np.add.at(out, F[:, k], weighted)
    ln = np.linalg.norm(out, axis=1, keepdims=True)
    return np.divide(out, ln, out=np.zeros_like(out), where=ln > 0)


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges (K, 2) with i < j, sorted lexicographically."""
    faces = np.asarray(faces, dtype=int)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0)
    e.sort(axis=1)
    return np.unique(e, axis=0)


def adjacency_lists(num_vertices: int, faces: np.ndarray) -> list:
    adj = [set() for _ in range(num_vertices)]
    for i, j in mesh_edges(faces):
        adj[i].add(int(j))
        adj[j].add(int(i))
    return [sorted(s) for s in adj]


def uniform_laplacian(mesh: PartMesh) -> sp.csr_matrix:
    """Sparse N x N operator; row i maps vertices to (mean of neighbors) - v_i.

    Isolated vertices get an all-zero row.
    """
    n = mesh.num_vertices
    if mesh.num_faces == 0:
        raise ValidationError("mesh has no faces, Laplacian undefined")
    rows, cols, vals = [], [], []
    for i, nbrs in enumerate(adjacency_lists(n, mesh.faces)):
        if not nbrs:
            continue
        w = 1.0 / len(nbrs)
        for j in nbrs:
            rows.append(i)
            cols.append(j)
            vals.append(w)
        rows.append(i)
        cols.append(i)
        vals.append(-1.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


# ---------------------------------------------------------------------------
# OBJ I/O (ASCII, with `# part: <name>` section tags)
# ---------------------------------------------------------------------------

def save_obj(path, mesh) -> None:
    """Write a PartMesh or BodyMesh. Parts are tagged with `# part: <name>`."""
    parts = mesh.parts if isinstance(mesh, BodyMesh) else (mesh,)
    lines = []
    offset = 0
    for p in parts:
        lines.append(f"# part: {p.part}")
        for v in p.vertices:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        for f in p.faces:
            lines.append(f"f {f[0] + 1 + offset} {f[1] + 1 + offset} {f[2] + 1 + offset}")
        offset += p.num_vertices
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_obj(path, default_part: str = "shirt"):
    """Read an OBJ written by save_obj (or a plain single-part OBJ).

    Returns a BodyMesh when the file tags multiple parts, else a PartMesh.
    Faces with area below 1e-12 are rejected.
    """
    sections = []  # (part, first_vertex_index)
    verts, faces = [], []
    try:
        fh = open(path)
    except OSError as e:
        raise ValidationError(f"cannot read OBJ file {path}: {e}") from e
    with fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# part:"):
                sections.append((line.split(":", 1)[1].strip(), len(verts)))
            elif line.startswith("v "):
                xyz = [float(x) for x in line.split()[1:4]]
                verts.append(xyz)
            elif line.startswith("f "):
                idx = [int(tok.split("/")[0]) - 1 for tok in line.split()[1:]]
                if len(idx) != 3:
                    raise ValidationError("only triangle faces are supported")
                faces.append(idx)
    if not verts:
        raise ValidationError(f"OBJ file {path} has no vertices")
    verts = np.asarray(verts, dtype=float)
    faces = np.asarray(faces, dtype=int).reshape(-1, 3)
    if faces.size:
        bad = np.nonzero(face_areas(verts, faces) < _DEGENERATE_AREA)[0]
        if bad.size:
            raise ValidationError(f"degenerate (zero-area) faces at rows {bad[:8].tolist()}")
    if not sections:
        sections = [(default_part, 0)]
    bounds = [s[1] for s in sections] + [len(verts)]
    parts = []
    for k, (name, lo) in enumerate(sections):
        hi = bounds[k + 1]
        pv = verts[lo:hi]
        mask = np.all((faces >= lo) & (faces < hi), axis=1) if faces.size else np.zeros(0, bool)
        pf = faces[mask] - lo
        parts.append(PartMesh(pv, pf, name))
    if len(parts) == 1:
        return parts[0]
    return BodyMesh(tuple(parts))
