"""Articulated body model: skeleton, poses, per-bone transforms, forward kinematics.

Conventions
-----------
* 35 joints; the canonical naming lives in ``data/skeleton_v1.json``.
* Rest offsets are stored in the parent joint's frame, meters, y up.
* A per-joint local transform (R, t) maps child coordinates into the parent
  frame as ``x_parent = R @ x_child + offset + t``; forward kinematics
  composes these down the tree.
* Root-relative poses have the pelvis at the origin.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ValidationError
from .transforms import rotation_defect

NUM_JOINTS = 35


class Frame(enum.Enum):
    ROOT_RELATIVE = "root_relative"
    WORLD = "world"


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with rest offsets (one 3-vector per joint, parent frame).

    The root (pelvis) must sit at index 0. The full-body rig has NUM_JOINTS
    joints (see ``Skeleton.canonical``); smaller rigs are allowed for toy
    bodies and focused tests.
    """

    joint_names: tuple
    parent: np.ndarray        # (J,) int, -1 for the root
    rest_offsets: np.ndarray  # (J, 3) float, meters

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "parent", np.asarray(self.parent, dtype=int))
        object.__setattr__(self, "rest_offsets", np.asarray(self.rest_offsets, dtype=float))
        J = len(self.joint_names)
        if J < 1:
            raise ValidationError("skeleton needs at least one joint")
        if self.parent.shape != (J,) or self.rest_offsets.shape != (J, 3):
            raise ValidationError("parent/rest_offsets shapes do not match joint count")
        if not np.all(np.isfinite(self.rest_offsets)):
            raise ValidationError("rest offsets must be finite")
        if np.count_nonzero(self.parent < 0) != 1 or self.parent[0] != -1:
            raise ValidationError("skeleton must have exactly one root, at index 0")
        # tree check: every joint must reach the root without cycles
        for j in range(J):
            seen, k = set(), j
            while self.parent[k] >= 0:
                if k in seen:
                    raise ValidationError("parent graph has a cycle")
                seen.add(k)
                k = int(self.parent[k])
                if not 0 <= k < J:
                    raise ValidationError("parent index out of range")
        object.__setattr__(self, "_topo_order", tuple(_topological_order(self.parent)))

    root = 0

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown joint name {name!r}") from None

    def bone_edges(self) -> list:
        """(parent, child) pairs, one per non-root joint, child order."""
        return [(int(self.parent[j]), j) for j in range(self.num_joints) if self.parent[j] >= 0]

    def children(self, j: int) -> list:
        return [int(c) for c in np.nonzero(self.parent == j)[0]]

    @staticmethod
    def canonical() -> "Skeleton":
        raw = json.loads(resources.files("courtpose.data").joinpath("skeleton_v1.json").read_text())
        joints = raw["joints"]
        skel = Skeleton(
            joint_names=[j["name"] for j in joints],
            parent=[j["parent"] for j in joints],
            rest_offsets=[j["offset"] for j in joints],
        )
        assert skel.num_joints == NUM_JOINTS
        return skel


def lsp14_indices(skeleton: Skeleton) -> np.ndarray:
    """Indices of the 14 LSP evaluation joints (versioned mapping file)."""
    raw = json.loads(resources.files("courtpose.data").joinpath("lsp14_v1.json").read_text())
    return np.array([skeleton.index(name) for name in raw["joints"]], dtype=int)


@dataclass(frozen=True)
class BoneTransforms:
    """Per-joint rigid transforms (rotation + translation, meters)."""

    rotations: np.ndarray     # (J, 3, 3)
    translations: np.ndarray  # (J, 3)

    def __post_init__(self):
        object.__setattr__(self, "rotations", np.asarray(self.rotations, dtype=float))
        object.__setattr__(self, "translations", np.asarray(self.translations, dtype=float))
        if self.rotations.ndim != 3 or self.rotations.shape[1:] != (3, 3):
            raise ValidationError("rotations must be (J, 3, 3)")
        if self.translations.shape != (self.rotations.shape[0], 3):
            raise ValidationError("translations must be (J, 3)")
        for j, R in enumerate(self.rotations):
            d = rotation_defect(R)
            if not np.isfinite(d) or d > 1e-9:
                raise ValidationError(f"rotation {j} not orthonormal within 1e-9 (defect {d:.3g})")

    @property
    def num_joints(self) -> int:
        return self.rotations.shape[0]

    @staticmethod
    def identity(num_joints: int = NUM_JOINTS) -> "BoneTransforms":
        return BoneTransforms(
            rotations=np.broadcast_to(np.eye(3), (num_joints, 3, 3)).copy(),
            translations=np.zeros((num_joints, 3)),
        )


@dataclass(frozen=True)
class Pose3D:
    positions: np.ndarray  # (J, 3), meters
    frame: Frame = Frame.ROOT_RELATIVE

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        if isinstance(self.frame, str):
            object.__setattr__(self, "frame", Frame(self.frame))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValidationError("positions must be (J, 3)")
        if not np.all(np.isfinite(self.positions)):
            raise ValidationError("pose positions must be finite")
        if self.frame is Frame.ROOT_RELATIVE and np.abs(self.positions[0]).max() > 1e-9:
            raise ValidationError("root-relative pose must have the pelvis at the origin")

    @property
    def num_joints(self) -> int:
        return self.positions.shape[0]

    def translated(self, offset) -> "Pose3D":
        return Pose3D(self.positions + np.asarray(offset, dtype=float), frame=Frame.WORLD)

    def to_root_relative(self) -> "Pose3D":
        return Pose3D(self.positions - self.positions[0], frame=Frame.ROOT_RELATIVE)


@dataclass(frozen=True)
class Pose2D:
    """Joint pixels in a 256x256 person crop; invisible joints carry no pixel."""

    pixels: np.ndarray      # (J, 2), crop pixels
    visibility: np.ndarray  # (J,) bool

    CROP_SIZE = 256

    def __post_init__(self):
        object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=float))
        object.__setattr__(self, "visibility", np.asarray(self.visibility, dtype=bool))
        if self.pixels.ndim != 2 or self.pixels.shape[1] != 2:
            raise ValidationError("pixels must be (J, 2)")
        if self.visibility.shape != (self.pixels.shape[0],):
            raise ValidationError("visibility must be (J,)")

    @property
    def num_joints(self) -> int:
        return self.pixels.shape[0]

    def in_crop(self) -> np.ndarray:
        ok = (self.pixels >= 0.0).all(axis=1) & (self.pixels < self.CROP_SIZE).all(axis=1)
        return ok | ~self.visibility


def _topological_order(parent: np.ndarray) -> list:
    order, placed = [], np.zeros(len(parent), dtype=bool)
    pending = list(range(len(parent)))
    while pending:
        stay = []
        for j in pending:
            p = parent[j]
            if p < 0 or placed[p]:
                order.append(j)
                placed[j] = True
            else:
                stay.append(j)
        if len(stay) == len(pending):
            raise ValidationError("parent graph is not a tree")
        pending = stay
    return order


def fk_global(skeleton: Skeleton, transforms: BoneTransforms):
    """Global joint rotations and world positions from local bone transforms.

    Returns (R_glob (J,3,3), pos_world (J,3)). The world position of a joint is
    the composition of all ancestor transforms applied to its rest offset.
    """
    J = skeleton.num_joints
    if transforms.num_joints != J:
        raise ValidationError(
            f"transform count {transforms.num_joints} does not match joint count {J}")
    for j in range(J):
        d = rotation_defect(transforms.rotations[j])
        if d > 1e-6:
            raise ValidationError(f"rotation {j} not orthonormal within 1e-6")
    R_glob = np.empty((J, 3, 3))
    pos = np.empty((J, 3))
    for j in skeleton._topo_order:
        p = skeleton.parent[j]
        local_t = skeleton.rest_offsets[j] + transforms.translations[j]
        if p < 0:
            R_glob[j] = transforms.rotations[j]
            pos[j] = local_t
        else:
            R_glob[j] = R_glob[p] @ transforms.rotations[j]
            pos[j] = R_glob[p] @ local_t + pos[p]
    return R_glob, pos


def forward_kinematics(skeleton: Skeleton, transforms: BoneTransforms,
                       frame: Frame = Frame.ROOT_RELATIVE) -> Pose3D:
    """Joint positions from per-bone transforms, in the requested frame."""
    _, pos = fk_global(skeleton, transforms)
    if frame is Frame.ROOT_RELATIVE:
        return Pose3D(pos - pos[skeleton.root], frame=Frame.ROOT_RELATIVE)
    return Pose3D(pos, frame=Frame.WORLD)


def rest_pose(skeleton: Skeleton) -> Pose3D:
    return forward_kinematics(skeleton, BoneTransforms.identity(skeleton.num_joints))


def bone_lengths(pose: Pose3D, edges) -> np.ndarray:
    """Euclidean length of each (i, j) joint pair, order preserving."""
    edges = np.asarray(edges, dtype=int)
    if edges.size == 0:
        return np.zeros(0)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValidationError("edges must be a list of joint index pairs")
    J = pose.num_joints
    if edges.size and (edges.min() < 0 or edges.max() >= J):
        raise ValidationError("edge index out of range")
    diff = pose.positions[edges[:, 0]] - pose.positions[edges[:, 1]]
    return np.linalg.norm(diff, axis=1)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def skeleton_to_json(s: Skeleton) -> dict:
    return {
        "version": 1,
        "joints": [
            {"name": n, "parent": int(p), "offset": o.tolist()}
            for n, p, o in zip(s.joint_names, s.parent, s.rest_offsets)
        ],
    }


def skeleton_from_json(d: dict) -> Skeleton:
    joints = d["joints"]
    return Skeleton(
        joint_names=[j["name"] for j in joints],
        parent=[j["parent"] for j in joints],
        rest_offsets=[j["offset"] for j in joints],
    )


def pose3d_to_json(p: Pose3D) -> dict:
    return {"frame": p.frame.value, "positions": p.positions.tolist()}


def pose3d_from_json(d: dict) -> Pose3D:
    return Pose3D(np.asarray(d["positions"], dtype=float), frame=Frame(d["frame"]))


def pose2d_to_json(p: Pose2D) -> dict:
    return {"pixels": p.pixels.tolist(), "visibility": p.visibility.tolist()}


def pose2d_from_json(d: dict) -> Pose2D:
    return Pose2D(np.asarray(d["pixels"], dtype=float), np.asarray(d["visibility"], dtype=bool))


def transforms_to_json(t: BoneTransforms) -> dict:
    return {
        "rotations": [R.reshape(9).tolist() for R in t.rotations],
        "translations": t.translations.tolist(),
    }


def transforms_from_json(d: dict) -> BoneTransforms:
    R = np.asarray(d["rotations"], dtype=float).reshape(-1, 3, 3)
    return BoneTransforms(R, np.asarray(d["translations"], dtype=float))
