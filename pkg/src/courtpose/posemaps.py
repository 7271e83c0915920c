"""Heatmap / XYZ-location-map codecs and the pose training loss.

Encoding follows the training-target recipe: crop pixels divide by 4 onto a
64x64 grid, an unnormalized Gaussian (peak 1.0) is stamped at the joint
cell, and the location map carries the joint's root-relative XYZ on the
heatmap's support. Decoding takes the per-map argmax (row-major first on
ties) and maps cells back through the cell center, ``4*c + 2``.

Gaussian values below 1e-8 are truncated to zero so "support" is a finite,
well-defined cell set.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Frame, Pose2D, Pose3D, bone_lengths

MAP_RES = 64
CROP_SIZE = 256
CELL = CROP_SIZE // MAP_RES  # 4 px per heatmap cell
SUPPORT_EPS = 1e-8
_PROB_FLOOR = 1e-7


@dataclass(frozen=True)
class HeatmapStack:
    values: np.ndarray              # (J, RES, RES), in [0, 1]
    clamped: np.ndarray | None = None  # joints whose pixel was clamped into the crop

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        v = self.values
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValidationError("heatmaps must be (J, R, R)")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1.0 + 1e-12:
            raise ValidationError("heatmap values must be finite and in [0, 1]")

    @property
    def num_joints(self) -> int:
        return self.values.shape[0]

    @property
    def resolution(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LocationMapStack:
    values: np.ndarray  # (J, 3, RES, RES), meters, root-relative XYZ

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        v = self.values
        if v.ndim != 4 or v.shape[1] != 3 or v.shape[2] != v.shape[3]:
            raise ValidationError("location maps must be (J, 3, R, R)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("location map values must be finite")

    @property
    def num_joints(self) -> int:
        return self.values.shape[0]

    @property
    def resolution(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class JumpInfo:
    """Binary airborne class and jump height; ``score`` optionally carries a
    classifier probability for loss computation."""

    airborne: bool
    height: float
    score: float | None = None

    JUMP_THRESHOLD = 0.1  # meters; strictly greater counts as airborne

    def __post_init__(self):
        if not np.isfinite(self.height) or self.height < 0:
            raise ValidationError("jump height must be finite and >= 0")

    @staticmethod
    def from_height(height: float) -> "JumpInfo":
        return JumpInfo(airborne=bool(height > JumpInfo.JUMP_THRESHOLD), height=float(height))

    @property
    def probability(self) -> float:
        return float(self.score) if self.score is not None else float(self.airborne)


@dataclass(frozen=True)
class PoseLossWeights:
    w2d: float = 10.0
    w3d: float = 10.0
    wbl: float = 0.5
    wjht: float = 0.4
    wjcls: float = 0.2

    def __post_init__(self):
        for f in ("w2d", "w3d", "wbl", "wjht", "wjcls"):
            if getattr(self, f) < 0:
                raise ValidationError("loss weights must be nonnegative")


@dataclass(frozen=True)
class PoseMapTargets:
    """The triplet the pose network is supervised with."""

    heatmaps: HeatmapStack
    location_maps: LocationMapStack
    jump: JumpInfo


def encode_heatmaps(pose: Pose2D, sigma: float = 1.0) -> HeatmapStack:
    """Per-joint 64x64 Gaussians; invisible joints map to all-zero maps.

    Visible joints outside the crop are clamped to the border cell and
    flagged in the returned stack's ``clamped`` array.
    """
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    J = pose.num_joints
    maps = np.zeros((J, MAP_RES, MAP_RES))
    clamped = np.zeros(J, dtype=bool)
    grid = np.arange(MAP_RES, dtype=float)
    for j in range(J):
        if not pose.visibility[j]:
            continue
        x, y = pose.pixels[j]
        if not (0 <= x < CROP_SIZE and 0 <= y < CROP_SIZE):
            clamped[j] = True
        cx = int(np.clip(np.floor(x / CELL), 0, MAP_RES - 1))
        cy = int(np.clip(np.floor(y / CELL), 0, MAP_RES - 1))
        g = np.exp(-((grid[None, :] - cx) ** 2 + (grid[:, None] - cy) ** 2)
                   / (2.0 * sigma * sigma))
        g[g < SUPPORT_EPS] = 0.0
        maps[j] = g
    return HeatmapStack(maps, clamped=clamped)


def decode_heatmaps(maps: HeatmapStack) -> Pose2D:
    """Argmax cell back to crop pixels at cell centers; all-zero -> invisible."""
    J, R = maps.num_joints, maps.resolution
    pixels = np.zeros((J, 2))
    vis = np.zeros(J, dtype=bool)
    for j in range(J):
        m = maps.values[j]
        if m.max() <= 0.0:
            continue
        flat = int(np.argmax(m))  # row-major, first cell wins ties
        cy, cx = divmod(flat, R)
        pixels[j] = (CELL * cx + CELL // 2, CELL * cy + CELL // 2)
        vis[j] = True
    return Pose2D(pixels, vis)


def encode_location_maps(pose3d: Pose3D, pose2d: Pose2D, sigma: float = 1.0) -> LocationMapStack:
    """Write each joint's root-relative XYZ on its heatmap support."""
    if pose3d.frame is not Frame.ROOT_RELATIVE:
        raise ValidationError("location maps encode root-relative poses")
    if pose3d.num_joints != pose2d.num_joints:
        raise ValidationError("2D/3D joint counts differ")
    heat = encode_heatmaps(pose2d, sigma)
    loc = np.zeros((pose3d.num_joints, 3, MAP_RES, MAP_RES))
    for j in range(pose3d.num_joints):
        support = heat.values[j] > 0.0
        for k in range(3):
            loc[j, k][support] = pose3d.positions[j, k]
    return LocationMapStack(loc)


def decode_location_maps(loc: LocationMapStack, heat: HeatmapStack) -> Pose3D:
    """Read XYZ at each heatmap argmax; zero-support joints decode to the origin."""
    if loc.num_joints != heat.num_joints or loc.resolution != heat.resolution:
        raise ValidationError("heatmap and location stacks are not aligned")
    J, R = heat.num_joints, heat.resolution
    out = np.zeros((J, 3))
    for j in range(J):
        m = heat.values[j]
        if m.max() <= 0.0:
            continue
        cy, cx = divmod(int(np.argmax(m)), R)
        out[j] = loc.values[j, :, cy, cx]
    return Pose3D(out, frame=Frame.ROOT_RELATIVE)


def pose_loss(pred: PoseMapTargets, gt: PoseMapTargets, edges, gt_bone_lengths,
              weights: PoseLossWeights = PoseLossWeights()):
    """Weighted sum of heatmap L1, location L1, bone-length L1, jump-height L1
    and binary cross-entropy on the jump class. L1 terms are means over
    elements. Returns (total, per-term dict)."""
    if pred.heatmaps.values.shape != gt.heatmaps.values.shape:
        raise ValidationError("heatmap shapes differ")
    if pred.location_maps.values.shape != gt.location_maps.values.shape:
        raise ValidationError("location map shapes differ")
    gt_bl = np.asarray(gt_bone_lengths, dtype=float)
    l2d = float(np.mean(np.abs(pred.heatmaps.values - gt.heatmaps.values)))
    l3d = float(np.mean(np.abs(pred.location_maps.values - gt.location_maps.values)))
    decoded = decode_location_maps(pred.location_maps, pred.heatmaps)
    bl = bone_lengths(decoded, edges)
    if bl.shape != gt_bl.shape:
        raise ValidationError("bone length vector shape mismatch")
    lbl = float(np.mean(np.abs(bl - gt_bl))) if bl.size else 0.0
    ljht = float(abs(pred.jump.height - gt.jump.height))
    p = float(np.clip(pred.jump.probability, _PROB_FLOOR, 1.0 - _PROB_FLOOR))
    y = 1.0 if gt.jump.airborne else 0.0
    ljcls = float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    w = weights
    terms = {"l2d": l2d, "l3d": l3d, "lbl": lbl, "ljht": ljht, "ljcls": ljcls}
    total = (w.w2d * l2d + w.w3d * l3d + w.wbl * lbl
             + w.wjht * ljht + w.wjcls * ljcls)
    return total, terms


# ---------------------------------------------------------------------------
# Binary stack format: 8-byte header (uint32 joint count, uint32 resolution)
# followed by little-endian float32 data.
# ---------------------------------------------------------------------------

def save_heatmaps(path, stack: HeatmapStack) -> None:
    _save_stack(path, stack.values, stack.num_joints, stack.resolution)


def load_heatmaps(path) -> HeatmapStack:
    data, J, R = _load_stack(path)
    if data.size != J * R * R:
        raise ValidationError("heatmap payload size does not match header")
    return HeatmapStack(data.reshape(J, R, R))


def save_location_maps(path, stack: LocationMapStack) -> None:
    _save_stack(path, stack.values, stack.num_joints, stack.resolution)


def load_location_maps(path) -> LocationMapStack:
    data, J, R = _load_stack(path)
    if data.size != J * 3 * R * R:
        raise ValidationError("location map payload size does not match header")
    return LocationMapStack(data.reshape(J, 3, R, R))


def _save_stack(path, values, joints, res) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", joints, res))
        fh.write(np.asarray(values, dtype="<f4").tobytes())


def _load_stack(path):
    try:
        with open(path, "rb") as fh:
            header = fh.read(8)
            if len(header) != 8:
                raise ValidationError(f"{path}: truncated stack header")
            J, R = struct.unpack("<II", header)
            data = np.frombuffer(fh.read(), dtype="<f4").astype(float)
    except OSError as e:
        raise ValidationError(f"cannot read stack file {path}: {e}") from e
    return data, J, R


def jump_to_json(j: JumpInfo) -> dict:
    d = {"airborne": bool(j.airborne), "height": float(j.height)}
    if j.score is not None:
        d["score"] = float(j.score)
    return d


def jump_from_json(d: dict) -> JumpInfo:
    return JumpInfo(bool(d["airborne"]), float(d["height"]), d.get("score"))
