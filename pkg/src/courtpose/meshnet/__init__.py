from .spirals import SpiralIndices, build_spirals, spiral_conv
from .sampling import SamplingOperator, build_sampling
from .network import (NetConfig, PartOps, init_params, tl_forward,
                      tl_training_forward, skin_loss, identity_offsets,
                      identity_offsets_loss, init_identity_params)
from .training import TrainConfig, train_toy, save_params, load_params

__all__ = [
    "SpiralIndices", "build_spirals", "spiral_conv",
    "SamplingOperator", "build_sampling",
    "NetConfig", "PartOps", "init_params", "tl_forward", "tl_training_forward",
    "skin_loss", "identity_offsets", "identity_offsets_loss", "init_identity_params",
    "TrainConfig", "train_toy", "save_params", "load_params",
]
