"""Small synthetic datasets for the toy mesh networks: one capsule body part
posed by the shared skeleton, with ground-truth posed vertices from LBS."""
from __future__ import annotations

import numpy as np

from .meshnet import NetConfig, PartOps
from .model import forward_kinematics
from .skinning import lbs
from .synth import canonical_body, random_pose_transforms

TOY_PART = "head"


def toy_part_dataset(seed: int = 0, count: int = 50, part: str = TOY_PART,
                     voxel_res: int = 22, angle_std: float = 0.12,
                     config: NetConfig = NetConfig()):
    """(dataset, ops, config): `dataset` holds (pose, rest part, posed part)
    triplets in the root-relative frame; `ops` is the part's operator pyramid."""
    skeleton, rest_body, weights = canonical_body(voxel_res)
    rest_part = rest_body.part(part)
    ops = PartOps.build(rest_part, config)
    rng = np.random.default_rng(seed)
    dataset = []
    for _ in range(count):
        transforms = random_pose_transforms(skeleton, rng, angle_std)
        pose = forward_kinematics(skeleton, transforms)
        posed = lbs(rest_body, weights, transforms, skeleton).part(part)
        dataset.append((pose, rest_part, posed))
    return dataset, ops, config
