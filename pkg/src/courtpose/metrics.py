"""Evaluation metrics: Procrustes alignment, ICP, MPJPE/MPVPE, Chamfer
distance (x1000, squared convention) and exact earth-mover distance on
farthest-point subsamples.

Every accelerated implementation here has a brute-force oracle in the test
suite (quadratic scans, permutation enumeration, random-restart alignment).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .errors import ValidationError
from .model import Pose3D


@dataclass(frozen=True)
class ProcrustesResult:
    scale: float
    R: np.ndarray
    t: np.ndarray
    aligned: np.ndarray
    residual: float          # sum of squared distances after alignment
    degenerate: bool


def procrustes_align(X: np.ndarray, Y: np.ndarray, with_scale: bool = True) -> ProcrustesResult:
    """Closed-form minimizer of sum ||s R x_i + t - y_i||^2 (Umeyama).

    A reflection guard keeps R a proper rotation; rank-deficient point sets
    set the ``degenerate`` flag.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != 3 or len(X) < 3:
        raise ValidationError("procrustes needs matching (K>=3, 3) point sets")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    cov = Yc.T @ Xc / len(X)
    U, D, Vt = np.linalg.svd(cov)
    degenerate = bool(np.sum(D > 1e-12 * max(D[0], 1e-300)) < 2)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    if with_scale:
        var_x = float(np.mean(np.sum(Xc ** 2, axis=1)))
        if var_x < 1e-300:
            raise ValidationError("source points are all identical")
        s = float(np.trace(np.diag(D) @ S) / var_x)
    else:
        s = 1.0
    t = my - s * (R @ mx)
    aligned = s * (X @ R.T) + t
    residual = float(np.sum((aligned - Y) ** 2))
    return ProcrustesResult(s, R, t, aligned, residual, degenerate)


def _subset_positions(pose: Pose3D, subset) -> np.ndarray:
    idx = np.asarray(subset, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= pose.num_joints):
        raise ValidationError("evaluation subset indexes a missing joint")
    return pose.positions[idx]


def mpjpe(pred: Pose3D, gt: Pose3D, subset, procrustes: bool = False) -> float:
    """Mean per-joint position error over the subset, in millimeters."""
    P = _subset_positions(pred, subset)
    G = _subset_positions(gt, subset)
    if procrustes:
        P = procrustes_align(P, G, with_scale=True).aligned
    return float(np.mean(np.linalg.norm(P - G, axis=1)) * 1000.0)


def mpvpe(pred_vertices: np.ndarray, gt_vertices: np.ndarray,
          procrustes: bool = False) -> float:
    """Mean per-vertex position error (one-to-one correspondence), mm."""
    P = np.asarray(pred_vertices, dtype=float)
    G = np.asarray(gt_vertices, dtype=float)
    if P.shape != G.shape:
        raise ValidationError("vertex counts differ; MPVPE needs correspondence")
    if procrustes:
        P = procrustes_align(P, G, with_scale=True).aligned
    return float(np.mean(np.linalg.norm(P - G, axis=1)) * 1000.0)


def chamfer(A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric mean squared nearest-neighbor distance, scaled by 1000."""
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3)
    if len(A) == 0 or len(B) == 0:
        raise ValidationError("chamfer distance of an empty point set")
    da, _ = cKDTree(B).query(A)
    db, _ = cKDTree(A).query(B)
    return 1000.0 * float(np.mean(da ** 2) + np.mean(db ** 2))


def farthest_point_subsample(points: np.ndarray, count: int) -> np.ndarray:
    """Deterministic FPS: start at the point farthest from the centroid
    (lowest index on ties), then greedily maximize the min distance."""
    P = np.asarray(points, dtype=float)
    if count >= len(P):
        return P.copy()
    d0 = np.linalg.norm(P - P.mean(axis=0), axis=1)
    chosen = [int(np.argmax(d0))]
    dmin = np.linalg.norm(P - P[chosen[0]], axis=1)
    for _ in range(count - 1):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(P - P[nxt], axis=1))
    return P[chosen]


def emd(A: np.ndarray, B: np.ndarray, subsample: int = 512) -> float:
    """Mean matched distance of the exact min-cost perfect matching between
    equal-size farthest-point subsamples (shortest augmenting path)."""
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3)
    if len(A) == 0 or len(B) == 0:
        raise ValidationError("earth-mover distance of an empty point set")
    m = min(subsample, len(A), len(B))
    Am = farthest_point_subsample(A, m)
    Bm = farthest_point_subsample(B, m)
    cost = np.linalg.norm(Am[:, None, :] - Bm[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


@dataclass(frozen=True)
class ICPResult:
    R: np.ndarray
    t: np.ndarray
    residuals: list   # RMS correspondence distance per iteration
    iterations: int


def icp(A: np.ndarray, B: np.ndarray, max_iters: int = 50, tol: float = 1e-8) -> ICPResult:
    """Rigid alignment of A onto B by alternating nearest-neighbor
    correspondence with closed-form rigid Procrustes."""
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3)
    if len(A) < 3 or len(B) < 3:
        raise ValidationError("ICP needs at least 3 points per set")
    tree = cKDTree(B)
    R = np.eye(3)
    t = np.zeros(3)
    residuals = []
    it = 0
    for it in range(1, max_iters + 1):
        moved = A @ R.T + t
        d, j = tree.query(moved)
        res = float(np.sqrt(np.mean(d ** 2)))
        residuals.append(res)
        fit = procrustes_align(A, B[j], with_scale=False)
        R, t = fit.R, fit.t
        if len(residuals) >= 2:
            prev = residuals[-2]
            if prev - res < tol * max(prev, 1e-300):
                break
    return ICPResult(R, t, residuals, it)
