"""Procedural test/demo geometry: capsules, icospheres, tubes, grids.

Everything returns a PartMesh with outward-facing (CCW) winding.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .mesh import PartMesh

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array([
    (-1, _GOLDEN, 0), (1, _GOLDEN, 0), (-1, -_GOLDEN, 0), (1, -_GOLDEN, 0),
    (0, -1, _GOLDEN), (0, 1, _GOLDEN), (0, -1, -_GOLDEN), (0, 1, -_GOLDEN),
    (_GOLDEN, 0, -1), (_GOLDEN, 0, 1), (-_GOLDEN, 0, -1), (-_GOLDEN, 0, 1),
], dtype=float)

_ICO_FACES = np.array([
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
], dtype=int)


def icosphere(radius: float = 1.0, subdivisions: int = 2, center=(0, 0, 0),
              part: str = "shirt") -> PartMesh:
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return PartMesh(verts * radius + np.asarray(center, dtype=float), faces, part)


def _subdivide(verts, faces):
    verts = list(map(tuple, verts))
    cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            cache[key] = len(verts)
            verts.append(tuple((np.array(verts[i]) + np.array(verts[j])) / 2.0))
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.asarray(verts, dtype=float), np.asarray(out, dtype=int)


def _frame_from_axis(axis: np.ndarray) -> np.ndarray:
    """Rotation whose third column is the (unit) axis."""
    z = np.asarray(axis, dtype=float)
    n = np.linalg.norm(z)
    if n < 1e-12:
        raise ValidationError("degenerate axis")
    z = z / n
    pick = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(pick, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


def _lathe(profile, n_seg, bottom_pole=None, top_pole=None):
    """Surface of revolution around local +z from (z, radius) profile rows."""
    rings = []
    verts = []
    for z, rad in profile:
        base = len(verts)
        for i in range(n_seg):
            phi = 2.0 * np.pi * i / n_seg
            verts.append((rad * np.cos(phi), rad * np.sin(phi), z))
        rings.append(base)
    faces = []
    for a, b in zip(rings[:-1], rings[1:]):
        for i in range(n_seg):
            j = (i + 1) % n_seg
            faces.append((a + i, a + j, b + j))
            faces.append((a + i, b + j, b + i))
    if bottom_pole is not None:
        p = len(verts)
        verts.append((0.0, 0.0, bottom_pole))
        r0 = rings[0]
        for i in range(n_seg):
            j = (i + 1) % n_seg
            faces.append((p, r0 + j, r0 + i))
    if top_pole is not None:
        p = len(verts)
        verts.append((0.0, 0.0, top_pole))
        rt = rings[-1]
        for i in range(n_seg):
            j = (i + 1) % n_seg
            faces.append((p, rt + i, rt + j))
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=int)


def capsule(p0, p1, radius: float, n_seg: int = 10, cap_rings: int = 3,
            shaft_rings: int = 2, part: str = "arms") -> PartMesh:
    """Closed capsule from p0 to p1 (hemispherical caps)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    L = np.linalg.norm(p1 - p0)
    if radius <= 0:
        raise ValidationError("capsule radius must be positive")
    profile = []
    for t in range(1, cap_rings + 1):
        ang = -np.pi / 2 + (np.pi / 2) * t / cap_rings
        profile.append((radius * np.sin(ang), radius * np.cos(ang)))
    for k in range(1, shaft_rings + 1):
        profile.append((L * k / (shaft_rings + 1), radius))
    for t in range(0, cap_rings):
        ang = (np.pi / 2) * t / cap_rings
        profile.append((L + radius * np.sin(ang), radius * np.cos(ang)))
    verts, faces = _lathe(profile, n_seg, bottom_pole=-radius, top_pole=L + radius)
    R = _frame_from_axis(p1 - p0) if L > 1e-12 else np.eye(3)
    return PartMesh(verts @ R.T + p0, faces, part)


def tube(p0, p1, radius: float, n_seg: int = 12, n_rings: int = 4,
         part: str = "shirt") -> PartMesh:
    """Open cylinder (a sleeve): no caps, boundary rings at both ends."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    L = np.linalg.norm(p1 - p0)
    if L < 1e-12:
        raise ValidationError("tube endpoints coincide")
    profile = [(L * k / (n_rings - 1), radius) for k in range(n_rings)]
    verts, faces = _lathe(profile, n_seg)
    R = _frame_from_axis(p1 - p0)
    return PartMesh(verts @ R.T + p0, faces, part)


def plane_grid(nx: int, ny: int, spacing: float = 1.0, part: str = "shirt") -> PartMesh:
    """Regular right-triangle grid in the z=0 plane, normals +z."""
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    verts = np.stack([xs.ravel() * spacing, ys.ravel() * spacing,
                      np.zeros(nx * ny)], axis=1)
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            faces.append((a, b, b + 1))
            faces.append((a, b + 1, a + 1))
    return PartMesh(verts, np.asarray(faces, dtype=int), part)


def tri_grid(rows: int, cols: int, spacing: float = 1.0, part: str = "shirt") -> PartMesh:
    """Equilateral-triangle lattice in the z=0 plane (interior valence 6)."""
    verts = []
    for r in range(rows):
        for c in range(cols):
            verts.append(((c + 0.5 * (r % 2)) * spacing,
                          r * spacing * np.sqrt(3.0) / 2.0, 0.0))
    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a = r * cols + c
            b = a + 1
            d = (r + 1) * cols + c
            e = d + 1
            if r % 2 == 0:
                faces.append((a, b, d))
                faces.append((b, e, d))
            else:
                faces.append((a, b, e))
                faces.append((a, e, d))
    return PartMesh(np.asarray(verts, dtype=float), np.asarray(faces, dtype=int), part)
