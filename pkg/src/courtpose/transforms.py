"""Small rigid-transform toolbox: rotation checks, axis-angle, look-at."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError


def rotation_defect(R: np.ndarray) -> float:
    """Max-abs deviation of R from a proper rotation (orthonormality + det)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return np.inf
    ortho = np.abs(R @ R.T - np.eye(3)).max()
    return max(ortho, abs(np.linalg.det(R) - 1.0))


def check_rotation(R: np.ndarray, tol: float = 1e-9, what: str = "rotation") -> None:
    d = rotation_defect(R)
    if not np.isfinite(d) or d > tol:
        raise ValidationError(f"{what} is not orthonormal with det +1 (defect {d:.3g} > {tol:.3g})")


def axis_angle_to_matrix(aa: np.ndarray) -> np.ndarray:
    """Rodrigues' formula; aa is the rotation vector (axis * angle, radians)."""
    aa = np.asarray(aa, dtype=float).reshape(3)
    theta = np.linalg.norm(aa)
    if theta < 1e-12:
        # second-order series keeps the map smooth through zero
        K = skew(aa)
        return np.eye(3) + K + 0.5 * (K @ K)
    k = aa / theta
    K = skew(k)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    cos = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos)
    if theta < 1e-9:
        return np.zeros(3)
    if np.pi - theta < 1e-6:
        # near-pi: extract axis from R + I
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
        # fix signs from off-diagonals using the largest component
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = A[i] / axis[i]
        n = np.linalg.norm(axis)
        if n == 0:
            return np.zeros(3)
        return axis / n * theta
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return v / (2.0 * np.sin(theta)) * theta


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Closest rotation to M in Frobenius norm (SVD sign-corrected)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    return axis_angle_to_matrix(axis * angle)


def compose_rigid(Ra, ta, Rb, tb):
    """(Ra,ta) o (Rb,tb): first apply b, then a."""
    Ra = np.asarray(Ra, float)
    return Ra @ np.asarray(Rb, float), Ra @ np.asarray(tb, float) + np.asarray(ta, float)


def look_at_rotation(eye: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-to-camera rotation of a camera at `eye` looking at `target`.

    Camera convention: x right, y down, z forward (into the scene).
    """
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValidationError("look-at target coincides with eye")
    fwd = fwd / n
    upv = np.asarray(up, dtype=float)
    right = np.cross(fwd, upv)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise ValidationError("look-at direction parallel to up vector")
    right /= rn
    # y axis points down so that image rows grow downward
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=0)
