import itertools

import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.metrics import (chamfer, emd, farthest_point_subsample, icp,
                               mpjpe, mpvpe, procrustes_align)
from courtpose.model import Frame, Pose3D
from courtpose.transforms import axis_angle_to_matrix, random_rotation


def rigid(rng):
    return random_rotation(rng), rng.normal(size=3)


# ---------------------------------------------------------------------------
# Procrustes
# ---------------------------------------------------------------------------

def test_procrustes_identity():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    fit = procrustes_align(X, X, with_scale=True)
    assert fit.residual < 1e-20
    assert np.abs(fit.R - np.eye(3)).max() < 1e-9
    assert abs(fit.scale - 1.0) < 1e-9
    assert np.abs(fit.t).max() < 1e-9


def test_procrustes_recovers_constructed_similarity():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    R, t = rigid(rng)
    s = 1.7
    Y = s * X @ R.T + t
    fit = procrustes_align(X, Y, with_scale=True)
    assert abs(fit.scale - s) < 1e-9
    assert np.abs(fit.R - R).max() < 1e-9
    assert np.abs(fit.t - t).max() < 1e-9
    assert fit.residual < 1e-18


def test_procrustes_beats_random_restarts():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(15, 3))
    Y = rng.normal(size=(15, 3))
    fit = procrustes_align(X, Y, with_scale=False)
    for _ in range(100):
        R, t = rigid(rng)
        res = float(np.sum((X @ R.T + t - Y) ** 2))
        assert fit.residual <= res + 1e-9


def test_procrustes_reduces_residual():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(9, 3))
    Y = rng.normal(size=(9, 3))
    before = float(np.sum((X - Y) ** 2))
    assert procrustes_align(X, Y).residual <= before + 1e-12


def test_procrustes_degenerate_flag():
    X = np.zeros((4, 3))
    X[:, 0] = [0.0, 1.0, 2.0, 3.0]  # collinear
    fit = procrustes_align(X, X.copy(), with_scale=False)
    assert fit.degenerate


# ---------------------------------------------------------------------------
# MPJPE / MPVPE
# ---------------------------------------------------------------------------

def test_mpjpe_zero_translation_and_pa():
    rng = np.random.default_rng(4)
    pos = rng.normal(size=(35, 3))
    pos[0] = 0
    gt = Pose3D(pos)
    subset = list(range(14))
    assert mpjpe(gt, gt, subset) == 0.0
    shifted = Pose3D(pos + [0.01, 0.0, 0.0], frame=Frame.WORLD)
    assert mpjpe(shifted, gt, subset) == pytest.approx(10.0, rel=1e-9)
    assert mpjpe(shifted, gt, subset, procrustes=True) < 1e-6


def test_mpjpe_matches_loop_oracle():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(35, 3))
    b = rng.normal(size=(35, 3))
    a[0] = b[0] = 0
    subset = rng.choice(35, size=14, replace=False)
    got = mpjpe(Pose3D(a), Pose3D(b), subset)
    expect = np.mean([np.linalg.norm(a[j] - b[j]) for j in subset]) * 1000
    assert got == pytest.approx(expect, rel=1e-12)


def test_mpjpe_missing_joint():
    gt = Pose3D(np.zeros((10, 3)))
    with pytest.raises(ValidationError):
        mpjpe(gt, gt, [0, 20])


def test_mpvpe_mirrors_mpjpe():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(50, 3))
    assert mpvpe(a, a) == 0.0
    assert mpvpe(a + [0.0, 0.005, 0.0], a) == pytest.approx(5.0, rel=1e-9)
    assert mpvpe(a + [0.0, 0.005, 0.0], a, procrustes=True) < 1e-6
    b = rng.normal(size=(50, 3))
    expect = np.mean(np.linalg.norm(a - b, axis=1)) * 1000
    assert mpvpe(a, b) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ValidationError):
        mpvpe(a, b[:20])


# ---------------------------------------------------------------------------
# Chamfer
# ---------------------------------------------------------------------------

def test_chamfer_zero_and_singletons():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 3))
    assert chamfer(X, X) == 0.0
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[0.1, 0.0, 0.0]])
    assert chamfer(a, b) == pytest.approx(20.0, rel=1e-12)


def test_chamfer_matches_quadratic_oracle():
    rng = np.random.default_rng(8)
    A = rng.normal(size=(150, 3))
    B = rng.normal(size=(130, 3))
    got = chamfer(A, B)
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    expect = 1000.0 * (d2.min(axis=1).mean() + d2.min(axis=0).mean())
    assert got == pytest.approx(expect, abs=1e-9)


def test_chamfer_symmetric_and_rigid_invariant():
    rng = np.random.default_rng(9)
    A = rng.normal(size=(80, 3))
    B = rng.normal(size=(70, 3))
    assert chamfer(A, B) == pytest.approx(chamfer(B, A), rel=1e-12)
    R, t = rigid(rng)
    assert chamfer(A @ R.T + t, B @ R.T + t) == pytest.approx(
        chamfer(A, B), rel=1e-9)


def test_chamfer_empty_rejected():
    with pytest.raises(ValidationError):
        chamfer(np.zeros((0, 3)), np.zeros((4, 3)))


# ---------------------------------------------------------------------------
# EMD
# ---------------------------------------------------------------------------

def test_emd_zero_and_permutation_invariance():
    rng = np.random.default_rng(10)
    A = rng.normal(size=(40, 3))
    assert emd(A, A) == 0.0
    perm = rng.permutation(40)
    assert emd(A, A[perm]) == 0.0


def test_emd_matches_permutation_enumeration():
    rng = np.random.default_rng(11)
    for n in (4, 6, 8):
        A = rng.normal(size=(n, 3))
        B = rng.normal(size=(n, 3))
        got = emd(A, B)
        cost = np.linalg.norm(A[:, None] - B[None, :], axis=2)
        best = min(np.mean([cost[i, p[i]] for i in range(n)])
                   for p in itertools.permutations(range(n)))
        assert got == pytest.approx(best, rel=1e-9)


def test_emd_symmetric_equal_sizes_and_rigid_invariant():
    rng = np.random.default_rng(12)
    A = rng.normal(size=(30, 3))
    B = rng.normal(size=(30, 3))
    assert emd(A, B) == pytest.approx(emd(B, A), rel=1e-12)
    R, t = rigid(rng)
    assert emd(A @ R.T + t, B @ R.T + t) == pytest.approx(emd(A, B), rel=1e-9)


def test_emd_subsampling_deterministic():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(900, 3))
    B = rng.normal(size=(800, 3))
    assert emd(A, B, subsample=64) == emd(A, B, subsample=64)


def test_farthest_point_subsample_spreads():
    rng = np.random.default_rng(14)
    P = rng.normal(size=(200, 3))
    S = farthest_point_subsample(P, 20)
    assert S.shape == (20, 3)
    assert len(np.unique(S, axis=0)) == 20


# ---------------------------------------------------------------------------
# ICP
# ---------------------------------------------------------------------------

def cloud(rng, n=120):
    # deliberately non-symmetric
    base = rng.normal(size=(n, 3)) * np.array([1.0, 0.4, 0.2])
    base[:, 0] += 0.3 * base[:, 1] ** 2
    return base


def test_icp_identity():
    rng = np.random.default_rng(15)
    A = cloud(rng)
    fit = icp(A, A)
    assert np.abs(fit.R - np.eye(3)).max() < 1e-9
    assert np.abs(fit.t).max() < 1e-9


def test_icp_recovers_8_degree_rigid_motion():
    rng = np.random.default_rng(16)
    A = cloud(rng)
    R = axis_angle_to_matrix(np.deg2rad(8.0) * np.array([0.2, 1.0, -0.3])
                             / np.linalg.norm([0.2, 1.0, -0.3]))
    t = np.array([0.3, -0.1, 0.2])
    B = A @ R.T + t
    fit = icp(A, B)
    assert np.abs(fit.R - R).max() < 1e-3
    assert np.abs(fit.t - t).max() < 1e-3
    assert all(b <= a + 1e-12 for a, b in zip(fit.residuals, fit.residuals[1:]))


def test_icp_empty_rejected():
    with pytest.raises(ValidationError):
        icp(np.zeros((2, 3)), np.zeros((5, 3)))
