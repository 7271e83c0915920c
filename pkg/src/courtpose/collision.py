"""Nearest-point-on-mesh queries (brute force and BVH) and the garment
collision detector.

A body vertex collides with a garment when it sits OUTSIDE the garment
surface (positive signed offset along the nearest triangle's outward normal)
and within a proximity band of it. Garments are open shells, so parity-based
inside/outside tests are undefined; the sign-plus-band predicate is the
documented stand-in, isolated here for replacement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mesh import PartMesh, face_normals

COLLISION_BAND = 0.05  # meters


def point_triangle_closest(p, a, b, c):
    """Closest point on triangle abc to p and its barycentric coordinates."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a, (1.0, 0.0, 0.0)
    bp = p - b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b, (0.0, 1.0, 0.0)
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, (1.0 - v, v, 0.0)
    cp = p - c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c, (0.0, 0.0, 1.0)
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, (1.0 - w, 0.0, w)
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), (0.0, 1.0 - w, w)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w, (1.0 - v - w, v, w)


def nearest_triangle_bruteforce(p, vertices, faces):
    """(face index, closest point, squared distance); lowest face index wins ties."""
    best = (np.inf, -1, None)
    for fi in range(len(faces)):
        a, b, c = vertices[faces[fi]]
        q, _ = point_triangle_closest(p, a, b, c)
        d2 = float(np.sum((p - q) ** 2))
        if d2 < best[0]:
            best = (d2, fi, q)
    if best[1] < 0:
        raise ValidationError("mesh has no faces")
    return best[1], best[2], best[0]


class TriangleBVH:
    """Median-split AABB tree over triangles, exact nearest-triangle queries.

    Distance ties resolve toward the lower face index, matching the brute
    force scan exactly.
    """

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, leaf_size: int = 8):
        if len(faces) == 0:
            raise ValidationError("cannot build a BVH over an empty mesh")
        self.vertices = np.asarray(vertices, dtype=float)
        self.faces = np.asarray(faces, dtype=int)
        tri = self.vertices[self.faces]
        self._lo = tri.min(axis=1)
        self._hi = tri.max(axis=1)
        self._nodes = []
        order = np.arange(len(faces))
        self._root = self._build(order, leaf_size)

    def _build(self, idx, leaf_size):
        lo = self._lo[idx].min(axis=0)
        hi = self._hi[idx].max(axis=0)
        node = {"lo": lo, "hi": hi, "faces": None, "left": -1, "right": -1}
        self._nodes.append(node)
        me = len(self._nodes) - 1
        if len(idx) <= leaf_size:
            node["faces"] = np.sort(idx)
            return me
        axis = int(np.argmax(hi - lo))
        centers = (self._lo[idx, axis] + self._hi[idx, axis]) / 2.0
        half = np.argsort(centers, kind="stable")
        mid = len(idx) // 2
        node["left"] = self._build(idx[half[:mid]], leaf_size)
        node["right"] = self._build(idx[half[mid:]], leaf_size)
        return me

    @staticmethod
    def _box_dist2(p, lo, hi):
        d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
        return float(d @ d)

    def nearest(self, p):
        """(face index, closest point, squared distance) for one query point."""
        p = np.asarray(p, dtype=float)
        best = [np.inf, -1, None]

        def visit(ni):
            node = self._nodes[ni]
            if self._box_dist2(p, node["lo"], node["hi"]) > best[0]:
                return
            if node["faces"] is not None:
                for fi in node["faces"]:
                    a, b, c = self.vertices[self.faces[fi]]
                    q, _ = point_triangle_closest(p, a, b, c)
                    d2 = float(np.sum((p - q) ** 2))
                    if d2 < best[0] or (d2 == best[0] and fi < best[1]):
                        best[0], best[1], best[2] = d2, int(fi), q
                return
            l, r = node["left"], node["right"]
            dl = self._box_dist2(p, self._nodes[l]["lo"], self._nodes[l]["hi"])
            dr = self._box_dist2(p, self._nodes[r]["lo"], self._nodes[r]["hi"])
            first, second = (l, r) if (dl, l) <= (dr, r) else (r, l)
            visit(first)
            visit(second)

        visit(self._root)
        return best[1], best[2], best[0]


@dataclass(frozen=True)
class CollisionReport:
    """Colliding body-vertex indices with their nearest garment point/normal."""

    vertex_indices: np.ndarray   # (K,)
    garment_points: np.ndarray   # (K, 3)
    garment_normals: np.ndarray  # (K, 3)

    @property
    def count(self) -> int:
        return len(self.vertex_indices)


def detect_collisions(body: PartMesh, garment: PartMesh,
                      band: float = COLLISION_BAND) -> CollisionReport:
    """Flag body vertices outside the garment shell within ``band`` meters."""
    if garment.num_faces == 0:
        raise ValidationError("garment mesh has no faces")
    bvh = TriangleBVH(garment.vertices, garment.faces)
    fnorm = face_normals(garment.vertices, garment.faces)
    idx, pts, nrm = [], [], []
    for vi, p in enumerate(body.vertices):
        fi, q, d2 = bvh.nearest(p)
        n = fnorm[fi]
        if (p - q) @ n > 0.0 and d2 < band * band:
            idx.append(vi)
            pts.append(q)
            nrm.append(n)
    return CollisionReport(
        np.asarray(idx, dtype=int),
        np.asarray(pts, dtype=float).reshape(-1, 3),
        np.asarray(nrm, dtype=float).reshape(-1, 3),
    )
