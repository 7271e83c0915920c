"""Heatmap / location-map codec round trip and the pose loss.

A 2D pose in the 256x256 crop becomes a stack of 64x64 Gaussians; the 3D
pose rides along in XYZ location maps on the same support. Decoding reads
the argmax cell back through its center, so 2D error is bounded by half a
cell (2 px) while 3D values come back exactly.
"""
import numpy as np

from courtpose import (JumpInfo, Pose2D, Pose3D, PoseLossWeights,
                       PoseMapTargets, bone_lengths, decode_heatmaps,
                       decode_location_maps, encode_heatmaps,
                       encode_location_maps, pose_loss)

rng = np.random.default_rng(1)
pixels = rng.uniform(0, 256, size=(35, 2))
positions = rng.normal(scale=0.5, size=(35, 3))
positions[0] = 0.0

pose2d = Pose2D(pixels, np.ones(35, dtype=bool))
pose3d = Pose3D(positions)

heat = encode_heatmaps(pose2d, sigma=1.0)
loc = encode_location_maps(pose3d, pose2d)
print(f"heatmaps: {heat.values.shape}, peak value {heat.values.max():.1f}")
print(f"location maps: {loc.values.shape}")

dec2 = decode_heatmaps(heat)
dec3 = decode_location_maps(loc, heat)
print(f"2D round trip: max error {np.abs(dec2.pixels - pixels).max():.3f} px (bound: 2)")
print(f"3D round trip: max error {np.abs(dec3.positions - positions).max():.1e} m")

edges = [(i, i + 1) for i in range(6)]
gt_bl = bone_lengths(dec3, edges)
targets = PoseMapTargets(heat, loc, JumpInfo.from_height(0.35))
total, terms = pose_loss(targets, targets, edges, gt_bl)
w = PoseLossWeights()
print(f"loss weights: {w.w2d}, {w.w3d}, {w.wbl}, {w.wjht}, {w.wjcls}")
print(f"self-loss (should be ~0 up to the class floor): {total:.2e}  terms: "
      + ", ".join(f"{k}={v:.1e}" for k, v in terms.items()))

print("jump class strictly above 0.1 m:",
      {h: JumpInfo.from_height(h).airborne for h in (0.05, 0.1, 0.15)})
