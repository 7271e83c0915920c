"""Planar basketball-court model: line segments and circular arcs on y = 0.

The default preset follows official pro-court geometry (28.65 m x 15.24 m
playing surface, 1.8288 m circle radii, 7.24 m three-point arc meeting
straight segments 0.9144 m in from the sidelines). All feature dimensions sit
in CourtConfig, so scaled or non-standard courts are plain config edits.

Court coordinates: x runs along the court length, z across the width, y up.
The origin is the center of the court; a 2D primitive point (u, v) lifts to
the 3D point (u, 0, v).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class LineSegment2D:
    p0: tuple
    p1: tuple

    def sample(self, spacing: float) -> np.ndarray:
        p0 = np.asarray(self.p0, dtype=float)
        p1 = np.asarray(self.p1, dtype=float)
        n = max(2, int(np.ceil(np.linalg.norm(p1 - p0) / spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)
        return p0 + t[:, None] * (p1 - p0)

    def scaled(self, s: float) -> "LineSegment2D":
        return LineSegment2D(tuple(np.asarray(self.p0) * s), tuple(np.asarray(self.p1) * s))


@dataclass(frozen=True)
class Arc2D:
    center: tuple
    radius: float
    angle_start: float  # radians, measured in the (u, v) plane
    angle_end: float

    def sample(self, spacing: float) -> np.ndarray:
        span = abs(self.angle_end - self.angle_start)
        n = max(2, int(np.ceil(span * self.radius / spacing)) + 1)
        a = np.linspace(self.angle_start, self.angle_end, n)
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.stack([np.cos(a), np.sin(a)], axis=1)

    def scaled(self, s: float) -> "Arc2D":
        return Arc2D(tuple(np.asarray(self.center) * s), self.radius * s,
                     self.angle_start, self.angle_end)


@dataclass(frozen=True)
class CourtConfig:
    length: float = 28.65            # baseline to baseline
    width: float = 15.24             # sideline to sideline
    center_circle_radius: float = 1.8288
    three_point_radius: float = 7.24
    three_point_side_inset: float = 0.9144   # straight segment distance from sideline
    hoop_from_baseline: float = 1.6002
    key_width: float = 4.8768
    key_depth: float = 5.7912        # baseline to free-throw line
    ft_circle_radius: float = 1.8288

    def scaled(self, s: float) -> "CourtConfig":
        return CourtConfig(*(getattr(self, f) * s for f in (
            "length", "width", "center_circle_radius", "three_point_radius",
            "three_point_side_inset", "hoop_from_baseline", "key_width",
            "key_depth", "ft_circle_radius")))


@dataclass(frozen=True)
class CourtModel:
    primitives: tuple   # LineSegment2D / Arc2D on the y=0 plane
    length: float
    width: float

    def sample_points3d(self, spacing: float = 0.15) -> np.ndarray:
        """World-space samples of every primitive, (K, 3) with y = 0."""
        pts = np.concatenate([p.sample(spacing) for p in self.primitives], axis=0)
        return lift_to_plane(pts)

    def landmarks3d(self) -> np.ndarray:
        """Deterministic named court points: corners, center, key corners.

        Used as calibration correspondences and as the reprojection-error
        evaluation set.
        """
        L2, W2 = self.length / 2.0, self.width / 2.0
        pts = [(-L2, -W2), (-L2, W2), (L2, W2), (L2, -W2), (0.0, 0.0),
               (0.0, -W2), (0.0, W2)]
        for seg in self.primitives:
            if isinstance(seg, LineSegment2D):
                pts.append(tuple(seg.p0))
                pts.append(tuple(seg.p1))
        uniq = sorted(set((round(u, 9), round(v, 9)) for u, v in pts))
        return lift_to_plane(np.asarray(uniq, dtype=float))


def lift_to_plane(uv: np.ndarray) -> np.ndarray:
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    out = np.zeros((len(uv), 3))
    out[:, 0] = uv[:, 0]
    out[:, 2] = uv[:, 1]
    return out


def make_court_model(config: CourtConfig = CourtConfig()) -> CourtModel:
    """Build the primitive list: boundary, center line + circle, three-point
    arcs, free-throw boxes with circles."""
    c = config
    if c.length <= 0 or c.width <= 0:
        raise ValidationError("court dimensions must be positive")
    L2, W2 = c.length / 2.0, c.width / 2.0
    prims = [
        # boundary rectangle
        LineSegment2D((-L2, -W2), (L2, -W2)),
        LineSegment2D((L2, -W2), (L2, W2)),
        LineSegment2D((L2, W2), (-L2, W2)),
        LineSegment2D((-L2, W2), (-L2, -W2)),
        # center line and circle
        LineSegment2D((0.0, -W2), (0.0, W2)),
        Arc2D((0.0, 0.0), c.center_circle_radius, 0.0, 2.0 * np.pi),
    ]
    for side in (-1.0, 1.0):
        # side = -1: hoop near x = -L/2, side = +1: mirrored
        hoop_u = side * (L2 - c.hoop_from_baseline)
        # three-point straight segments run from the baseline to the arc
        v_in = W2 - c.three_point_side_inset
        du = np.sqrt(max(c.three_point_radius ** 2 - v_in ** 2, 0.0))
        for sv in (-1.0, 1.0):
            prims.append(LineSegment2D((side * L2, sv * v_in),
                                       (hoop_u - side * du, sv * v_in)))
        # arc spans between the two straight segments, opening to mid-court
        a = np.arctan2(v_in, -side * du)
        if side < 0:
            prims.append(Arc2D((hoop_u, 0.0), c.three_point_radius, -a, a))
        else:
            prims.append(Arc2D((hoop_u, 0.0), c.three_point_radius, a, 2.0 * np.pi - a))
        # free-throw box (the key) and circle
        ft_u = side * (L2 - c.key_depth)
        k2 = c.key_width / 2.0
        prims += [
            LineSegment2D((side * L2, -k2), (ft_u, -k2)),
            LineSegment2D((side * L2, k2), (ft_u, k2)),
            LineSegment2D((ft_u, -k2), (ft_u, k2)),
            Arc2D((ft_u, 0.0), c.ft_circle_radius, 0.0, 2.0 * np.pi),
        ]
    return CourtModel(tuple(prims), c.length, c.width)
