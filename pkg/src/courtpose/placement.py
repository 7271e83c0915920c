"""Jump-aware global positioning of a player on (or above) the court.

A ray is cast from the camera center through the image pixel of the lowest
joint; the joint's world position is where the ray reaches world height h
(the jump height, or 0 when the jump classifier says grounded). The rest of
the root-relative pose translates rigidly to follow it.
"""
from __future__ import annotations

import numpy as np

from .camera import Camera, pixel_ray
from .errors import NumericalError, ValidationError
from .model import Frame, Pose2D, Pose3D
from .posemaps import JumpInfo


def lowest_joint(pose2d: Pose2D, pose3d: Pose3D) -> int:
    """Visible joint with the smallest up (y) coordinate in the 3D pose.

    Ties break toward the larger image y (lower in the image), then the
    smaller joint index.
    """
    vis = np.nonzero(pose2d.visibility)[0]
    if vis.size == 0:
        raise ValidationError("no visible joints")
    ys = pose3d.positions[vis, 1]
    lowest = ys.min()
    cand = vis[ys == lowest]
    if len(cand) > 1:
        pix_y = pose2d.pixels[cand, 1]
        cand = cand[pix_y == pix_y.max()]
    return int(cand[0])


def solve_depth_for_height(camera: Camera, pixel, height: float):
    """Depth z_c and world point where the pixel ray hits world height h.

    Solving R[:,1] . (z_c * d - T) = h for z_c, with d the unit-depth ray
    direction through the pixel.
    """
    d = pixel_ray(camera, pixel)
    r2 = camera.R[:, 1]
    denom = float(r2 @ d)
    if abs(denom) < 1e-9:
        raise NumericalError("pixel ray is parallel to the height plane")
    z_c = (height + float(r2 @ camera.T)) / denom
    if z_c <= 0:
        raise NumericalError("height plane intersection is behind the camera")
    world = camera.to_world(z_c * d)
    return z_c, world


def place_player(camera: Camera, pose2d: Pose2D, pose3d: Pose3D, jump: JumpInfo):
    """World-frame pose and the world translation that achieves it.

    The jump class gates the height: a grounded classification zeroes the
    height regardless of the regressed value.
    """
    height = jump.height if jump.airborne else 0.0
    j = lowest_joint(pose2d, pose3d)
    _, anchor = solve_depth_for_height(camera, pose2d.pixels[j], height)
    offset = anchor - pose3d.positions[j]
    placed = Pose3D(pose3d.positions + offset, frame=Frame.WORLD)
    return placed, offset
