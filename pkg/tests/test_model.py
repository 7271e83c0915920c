import json

import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.model import (BoneTransforms, Frame, Pose2D, Pose3D, Skeleton,
                             bone_lengths, forward_kinematics, lsp14_indices,
                             pose3d_from_json, pose3d_to_json, rest_pose,
                             skeleton_from_json, skeleton_to_json,
                             transforms_from_json, transforms_to_json)
from courtpose.transforms import axis_angle_to_matrix, random_rotation


def chain_skeleton(offsets):
    n = len(offsets)
    return Skeleton([f"j{i}" for i in range(n)], [-1] + list(range(n - 1)), offsets)


def test_canonical_skeleton_is_35_joint_tree():
    s = Skeleton.canonical()
    assert s.num_joints == 35
    assert s.parent[0] == -1
    assert len(set(s.joint_names)) == 35
    assert lsp14_indices(s).shape == (14,)


def test_identity_transforms_give_rest_pose_cumulative_offsets():
    offs = [[0, 0, 0], [0, 0.2, 0], [0.1, 0.2, 0], [0, 0.3, 0.05]]
    sk = chain_skeleton(offs)
    pose = forward_kinematics(sk, BoneTransforms.identity(4))
    expect = np.cumsum(np.asarray(offs, dtype=float), axis=0)
    assert np.allclose(pose.positions, expect, atol=1e-15)


def test_root_translation_equivariance():
    sk = chain_skeleton([[0, 0, 0], [0, 0.2, 0], [0.1, 0.2, 0]])
    t = np.array([1.0, -2.0, 0.5])
    bt = BoneTransforms.identity(3)
    moved = BoneTransforms(bt.rotations, np.vstack([t, np.zeros((2, 3))]))
    rr = forward_kinematics(sk, moved)  # root relative unchanged
    assert np.allclose(rr.positions, forward_kinematics(sk, bt).positions)
    world = forward_kinematics(sk, moved, frame=Frame.WORLD)
    base = forward_kinematics(sk, bt, frame=Frame.WORLD)
    assert np.allclose(world.positions, base.positions + t)


def test_fk_matches_homogeneous_matrix_oracle():
    """4-joint chain with random rotations vs explicit 4x4 products."""
    rng = np.random.default_rng(7)
    offs = rng.normal(scale=0.3, size=(4, 3))
    offs[0] = 0
    sk = chain_skeleton(offs.tolist())
    rots = np.stack([random_rotation(rng) for _ in range(4)])
    trans = rng.normal(scale=0.1, size=(4, 3))
    bt = BoneTransforms(rots, trans)

    G = np.eye(4)
    expect = []
    for j in range(4):
        L = np.eye(4)
        L[:3, :3] = rots[j]
        L[:3, 3] = offs[j] + trans[j]
        G = G @ L
        expect.append(G[:3, 3].copy())
    expect = np.asarray(expect)

    world = forward_kinematics(sk, bt, frame=Frame.WORLD)
    assert np.abs(world.positions - expect).max() < 1e-9
    rr = forward_kinematics(sk, bt)
    assert np.abs(rr.positions - (expect - expect[0])).max() < 1e-9


def test_fk_rigid_equivariance_through_root():
    rng = np.random.default_rng(3)
    offs = np.vstack([np.zeros(3), rng.normal(scale=0.2, size=(4, 3))])
    sk = chain_skeleton(offs.tolist())
    rots = np.stack([random_rotation(rng) for _ in range(5)])
    bt = BoneTransforms(rots, np.zeros((5, 3)))
    base = forward_kinematics(sk, bt, frame=Frame.WORLD)

    g = random_rotation(rng)
    gt = rng.normal(size=3)
    rots2 = rots.copy()
    rots2[0] = g @ rots[0]
    trans2 = np.zeros((5, 3))
    trans2[0] = gt
    moved = forward_kinematics(sk, BoneTransforms(rots2, trans2), frame=Frame.WORLD)
    assert np.abs(moved.positions - (base.positions @ g.T + gt)).max() < 1e-12


def test_fk_errors():
    sk = chain_skeleton([[0, 0, 0], [0, 1, 0]])
    with pytest.raises(ValidationError):
        forward_kinematics(sk, BoneTransforms.identity(3))
    bad = BoneTransforms.identity(2)
    object.__setattr__(bad, "rotations", bad.rotations.copy())
    bad.rotations[1, 0, 0] = 1.0 + 1e-4  # bypass the constructor check
    with pytest.raises(ValidationError):
        forward_kinematics(sk, bad)


def test_bone_transforms_validate_orthonormality():
    R = np.broadcast_to(np.eye(3), (2, 3, 3)).copy()
    R[1, 0, 1] = 1e-7
    with pytest.raises(ValidationError):
        BoneTransforms(R, np.zeros((2, 3)))


def test_bone_lengths_basic_and_invariance():
    pose = Pose3D(np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.3, 0.5, 0.0]]))
    L = bone_lengths(pose, [(0, 1), (1, 2)])
    assert np.allclose(L, [0.5, 0.3])

    rng = np.random.default_rng(11)
    pts = rng.normal(size=(8, 3))
    pts[0] = 0
    pose = Pose3D(pts)
    edges = [(i, (i + 3) % 8) for i in range(8)]
    L0 = bone_lengths(pose, edges)
    R = random_rotation(rng)
    t = rng.normal(size=3)
    moved = Pose3D(pts @ R.T + t, frame=Frame.WORLD)
    L1 = bone_lengths(moved, edges)
    assert np.abs(L1 - L0).max() <= 1e-12 * max(1.0, np.abs(L0).max())

    # direct per-edge norm oracle
    oracle = np.array([np.linalg.norm(pts[i] - pts[j]) for i, j in edges])
    assert np.array_equal(L0, oracle)


def test_bone_lengths_index_validation():
    pose = Pose3D(np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        bone_lengths(pose, [(0, 5)])


def test_pose3d_root_relative_invariant():
    with pytest.raises(ValidationError):
        Pose3D(np.array([[0.1, 0.0, 0.0], [0.0, 0.0, 0.0]]))


def test_pose2d_shapes():
    with pytest.raises(ValidationError):
        Pose2D(np.zeros((3, 2)), np.zeros(2, dtype=bool))


def test_json_round_trips():
    s = Skeleton.canonical()
    assert skeleton_from_json(skeleton_to_json(s)).joint_names == s.joint_names

    rng = np.random.default_rng(0)
    pose = rest_pose(s)
    d = json.loads(json.dumps(pose3d_to_json(pose)))
    back = pose3d_from_json(d)
    assert np.allclose(back.positions, pose.positions)
    assert back.frame is Frame.ROOT_RELATIVE

    rots = np.stack([random_rotation(rng) for _ in range(s.num_joints)])
    bt = BoneTransforms(rots, rng.normal(size=(s.num_joints, 3)))
    back = transforms_from_json(json.loads(json.dumps(transforms_to_json(bt))))
    assert np.allclose(back.rotations, bt.rotations)
    assert np.allclose(back.translations, bt.translations)
