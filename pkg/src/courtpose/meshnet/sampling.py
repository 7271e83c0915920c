"""COMA-style mesh down/up-sampling operators.

Down-sampling removes vertices by greedy edge collapse in ascending quadric
error (collapses that would invalidate faces are skipped). D selects the
surviving vertices; U returns removed vertices through the barycentric
coordinates of their projection onto the nearest kept triangle, so D @ U is
the identity on coarse vertex features.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..collision import nearest_triangle_bruteforce, point_triangle_closest
from ..errors import ValidationError
from ..mesh import PartMesh

_AREA_EPS = 1e-12


@dataclass(frozen=True)
class SamplingOperator:
    D: sp.csr_matrix        # (Nc, N) indicator rows over kept vertices
    U: sp.csr_matrix        # (N, Nc) barycentric rows, each summing to 1
    coarse: PartMesh
    reached_target: bool


def build_sampling(mesh: PartMesh, factor: float) -> SamplingOperator:
    if factor < 1:
        raise ValidationError("sampling factor must be >= 1")
    n = mesh.num_vertices
    target = int(np.floor(n / factor))
    if factor == 1 or target >= n:
        eye = sp.identity(n, format="csr")
        return SamplingOperator(eye, eye.copy(), mesh, True)

    verts = mesh.vertices
    faces = [tuple(f) for f in mesh.faces]
    face_alive = [True] * len(faces)
    vert_faces = [set() for _ in range(n)]
    for fi, f in enumerate(faces):
        for v in f:
            vert_faces[v].add(fi)
    alive = np.ones(n, dtype=bool)
    quadrics = _vertex_quadrics(verts, mesh.faces)
    version = np.zeros(n, dtype=int)

    def collapse_cost(u, v):
        """Cost of moving u into v, evaluated at v's position."""
        Q = quadrics[u] + quadrics[v]
        p = np.append(verts[v], 1.0)
        return float(p @ Q @ p)

    heap = []
    def push(u, v):
        heapq.heappush(heap, (collapse_cost(u, v), u, v, version[u], version[v]))

    edges = set()
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            e = (min(u, v), max(u, v))
            if e not in edges:
                edges.add(e)
                push(e[0], e[1])
                push(e[1], e[0])

    removed = 0
    alive_faces = len(faces)
    while n - removed > target and heap:
        cost, u, v, vu, vv = heapq.heappop(heap)
        if not (alive[u] and alive[v]) or vu != version[u] or vv != version[v]:
            continue
        if v not in _neighbors(u, faces, vert_faces):
            continue
        if not _collapse_valid(u, v, verts, faces, face_alive, vert_faces):
            continue
        dying = sum(1 for fi in vert_faces[u] if v in faces[fi])
        if alive_faces - dying < 1:
            continue  # never decimate the mesh out of existence
        # collapse u -> v
        quadrics[v] = quadrics[u] + quadrics[v]
        alive[u] = False
        removed += 1
        alive_faces -= dying
        dead_faces = [fi for fi in vert_faces[u] if v in faces[fi]]
        for fi in dead_faces:
            face_alive[fi] = False
            for w in faces[fi]:
                vert_faces[w].discard(fi)
        for fi in list(vert_faces[u]):
            f = faces[fi]
            faces[fi] = tuple(v if w == u else w for w in f)
            vert_faces[v].add(fi)
        vert_faces[u] = set()
        version[u] += 1
        version[v] += 1
        for w in _neighbors(v, faces, vert_faces):
            version[w] += 1
            push(w, v)
            push(v, w)
            for x in _neighbors(w, faces, vert_faces):
                if alive[x]:
                    push(w, x)
                    push(x, w)

    kept = np.nonzero(alive)[0]
    nc = len(kept)
    new_index = -np.ones(n, dtype=int)
    new_index[kept] = np.arange(nc)
    coarse_faces = np.asarray(
        [[new_index[w] for w in faces[fi]] for fi in range(len(faces)) if face_alive[fi]],
        dtype=int).reshape(-1, 3)
    coarse = PartMesh(verts[kept], coarse_faces, mesh.part)

    D = sp.csr_matrix((np.ones(nc), (np.arange(nc), kept)), shape=(nc, n))
    rows, cols, vals = [], [], []
    for i in range(n):
        if alive[i]:
            rows.append(i)
            cols.append(new_index[i])
            vals.append(1.0)
        else:
            if len(coarse_faces) == 0:
                raise ValidationError("decimation removed every face")
            fi, _, _ = nearest_triangle_bruteforce(verts[i], coarse.vertices, coarse_faces)
            a, b, c = coarse.vertices[coarse_faces[fi]]
            _, bary = point_triangle_closest(verts[i], a, b, c)
            for k in range(3):
                rows.append(i)
                cols.append(int(coarse_faces[fi][k]))
                vals.append(float(bary[k]))
    U = sp.csr_matrix((vals, (rows, cols)), shape=(n, nc))
    return SamplingOperator(D, U, coarse, n - removed <= target)


def _neighbors(v, faces, vert_faces):
    out = set()
    for fi in vert_faces[v]:
        out.update(faces[fi])
    out.discard(v)
    return out


def _vertex_quadrics(verts, faces):
    q = np.zeros((len(verts), 4, 4))
    for f in faces:
        a, b, c = verts[f]
        nrm = np.cross(b - a, c - a)
        area = 0.5 * np.linalg.norm(nrm)
        if area < _AREA_EPS:
            continue
        nrm = nrm / (2.0 * area)
        plane = np.append(nrm, -nrm @ a)
        K = area * np.outer(plane, plane)
        for v in f:
            q[v] += K
    return q


def _collapse_valid(u, v, verts, faces, face_alive, vert_faces):
    """Collapsing u into v must not create degenerate or flipped faces."""
    for fi in vert_faces[u]:
        if not face_alive[fi]:
            continue
        f = faces[fi]
        if v in f:
            continue  # this face dies with the edge
        newf = [v if w == u else w for w in f]
        if len(set(newf)) < 3:
            return False
        a, b, c = verts[f[0]], verts[f[1]], verts[f[2]]
        na = np.cross(b - a, c - a)
        a2, b2, c2 = verts[newf[0]], verts[newf[1]], verts[newf[2]]
        nb = np.cross(b2 - a2, c2 - a2)
        if np.linalg.norm(nb) < 2.0 * _AREA_EPS:
            return False
        if na @ nb <= 0.0:
            return False
    return True
