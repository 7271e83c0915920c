"""Toy-scale pose-to-mesh networks built from spiral convolutions.

The assembly mirrors the TL-embedding layout: a pose encoder (input linear,
two linear residual blocks, output linear) and a spiral-conv mesh encoder
(SC-ELU-DS x 4 + linear) both produce 32-d codes; their concatenation passes
through a fusion linear to give the predicted code; a shared spiral decoder
(linear + US-SC-ELU x 4 + SC) turns codes into part vertices. A second mesh
encoder embeds the ground-truth posed part during training, and the decoder
can run from either code.

All math is float64 and flows through the local autograd tape so analytic
gradients are available for every parameter.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..mesh import BodyMesh, PartMesh
from ..model import Pose3D
from . import autograd as ag
from .sampling import SamplingOperator, build_sampling
from .spirals import SpiralIndices, build_spirals


@dataclass(frozen=True)
class NetConfig:
    spiral_length: int = 9
    encoder_channels: tuple = (16, 32, 64, 64)
    decoder_channels: tuple = (64, 32, 16, 16, 3)
    encoder_dilations: tuple = (2, 2, 1, 1)
    decoder_dilations: tuple = (1, 1, 2, 2, 2)
    ds_factors: tuple = (2, 2, 2, 1)
    latent: int = 32
    pose_hidden: int = 64
    dropout: float = 0.5

    def __post_init__(self):
        if len(self.encoder_channels) != len(self.ds_factors):
            raise ValidationError("one encoder channel per downsampling stage")
        if len(self.decoder_channels) != len(self.ds_factors) + 1:
            raise ValidationError("decoder needs ds_factors+1 channel entries")
        if self.decoder_channels[-1] != 3:
            raise ValidationError("decoder must end in 3 channels (XYZ)")
        if len(self.encoder_dilations) != len(self.encoder_channels):
            raise ValidationError("one encoder dilation per SC layer")
        if len(self.decoder_dilations) != len(self.decoder_channels):
            raise ValidationError("one decoder dilation per SC layer")


@dataclass(frozen=True)
class PartOps:
    """Per-part machinery: mesh pyramid, sampling operators, spiral tables."""

    meshes: tuple
    samplers: tuple           # SamplingOperator per level transition
    spirals_enc: tuple        # per encoder SC layer (fine -> coarse)
    spirals_dec: tuple        # per decoder SC layer (coarse -> fine)
    spirals_final: SpiralIndices

    @staticmethod
    def build(mesh: PartMesh, config: NetConfig = NetConfig()) -> "PartOps":
        meshes = [mesh]
        samplers = []
        for f in config.ds_factors:
            op = build_sampling(meshes[-1], f)
            samplers.append(op)
            meshes.append(op.coarse)
        L = len(config.ds_factors)
        spirals_enc = tuple(
            build_spirals(meshes[k], config.spiral_length, config.encoder_dilations[k])
            for k in range(L))
        spirals_dec = tuple(
            build_spirals(meshes[L - 1 - k], config.spiral_length, config.decoder_dilations[k])
            for k in range(L))
        spirals_final = build_spirals(meshes[0], config.spiral_length,
                                      config.decoder_dilations[L])
        return PartOps(tuple(meshes), tuple(samplers), spirals_enc, spirals_dec,
                       spirals_final)

    @property
    def coarsest_vertices(self) -> int:
        return self.meshes[-1].num_vertices


def _glorot(rng, fan_in, fan_out):
    s = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, s, size=(fan_in, fan_out))


def init_params(config: NetConfig, ops: PartOps, num_joints: int,
                rng: np.random.Generator) -> dict:
    """Fresh parameter dict (name -> autograd Var) for one body part."""
    S, Z, h = config.spiral_length, config.latent, config.pose_hidden
    p = {}

    def lin(name, nin, nout):
        p[f"{name}.W"] = ag.Var(_glorot(rng, nin, nout))
        p[f"{name}.b"] = ag.Var(np.zeros(nout))

    lin("pose.lin_in", 3 * num_joints, h)
    for blk in ("pose.res1", "pose.res2"):
        lin(f"{blk}.l1", h, h)
        lin(f"{blk}.l2", h, h)
    lin("pose.lin_out", h, Z)

    n4 = ops.coarsest_vertices
    for enc in ("enc_rest", "enc_gt"):
        cin = 3
        for k, cout in enumerate(config.encoder_channels):
            lin(f"{enc}.sc{k}", S * cin, cout)
            cin = cout
        lin(f"{enc}.lin", n4 * config.encoder_channels[-1], Z)

    lin("fuse", 2 * Z, Z)

    lin("dec.lin", Z, n4 * config.encoder_channels[-1])
    cin = config.encoder_channels[-1]
    for k, cout in enumerate(config.decoder_channels[:-1]):
        lin(f"dec.sc{k}", S * cin, cout)
        cin = cout
    lin("dec.sc_final", S * cin, config.decoder_channels[-1])
    return p


def _sc(x, spirals, W, b):
    return ag.add(ag.matmul(ag.spiral_gather(x, spirals.indices), W), b)


def _dropout_mask(rng, shape, rate):
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(float) / keep


def pose_encode(params, pose_flat: ag.Var, config: NetConfig,
                training: bool = False, rng=None) -> ag.Var:
    x = ag.add(ag.matmul(pose_flat, params["pose.lin_in.W"]), params["pose.lin_in.b"])
    for blk in ("pose.res1", "pose.res2"):
        y = x
        for sub in ("l1", "l2"):
            y = ag.add(ag.matmul(y, params[f"{blk}.{sub}.W"]), params[f"{blk}.{sub}.b"])
            y = ag.relu(y)
            if training and config.dropout > 0:
                y = ag.dropout(y, _dropout_mask(rng, y.shape, config.dropout))
        x = ag.add(x, y)
    return ag.add(ag.matmul(x, params["pose.lin_out.W"]), params["pose.lin_out.b"])


def mesh_encode(params, prefix: str, verts: ag.Var, ops: PartOps,
                config: NetConfig) -> ag.Var:
    x = verts
    for k in range(len(config.encoder_channels)):
        x = _sc(x, ops.spirals_enc[k], params[f"{prefix}.sc{k}.W"], params[f"{prefix}.sc{k}.b"])
        x = ag.elu(x)
        x = ag.sparse_mm(ops.samplers[k].D, x)
    flat = ag.reshape(x, (1, -1))
    return ag.add(ag.matmul(flat, params[f"{prefix}.lin.W"]), params[f"{prefix}.lin.b"])


def decode(params, z: ag.Var, ops: PartOps, config: NetConfig) -> ag.Var:
    n4 = ops.coarsest_vertices
    c = config.encoder_channels[-1]
    x = ag.add(ag.matmul(z, params["dec.lin.W"]), params["dec.lin.b"])
    x = ag.reshape(x, (n4, c))
    L = len(config.ds_factors)
    for k in range(L):
        x = ag.sparse_mm(ops.samplers[L - 1 - k].U, x)
        x = _sc(x, ops.spirals_dec[k], params[f"dec.sc{k}.W"], params[f"dec.sc{k}.b"])
        x = ag.elu(x)
    return _sc(x, ops.spirals_final, params["dec.sc_final.W"], params["dec.sc_final.b"])


def fuse(params, z_pose: ag.Var, z_rest: ag.Var) -> ag.Var:
    zc = ag.concat([z_pose, z_rest], axis=1)
    return ag.add(ag.matmul(zc, params["fuse.W"]), params["fuse.b"])


def tl_graph(pose_positions: np.ndarray, rest_vertices: np.ndarray, params: dict,
             ops: PartOps, config: NetConfig, training: bool = False, rng=None):
    """Autograd graph of the test-time path: returns (Z_pred, V_pred) Vars."""
    pose_flat = ag.Var(np.asarray(pose_positions, dtype=float).reshape(1, -1))
    rest = ag.Var(np.asarray(rest_vertices, dtype=float))
    z_pose = pose_encode(params, pose_flat, config, training, rng)
    z_rest = mesh_encode(params, "enc_rest", rest, ops, config)
    z_pred = fuse(params, z_pose, z_rest)
    v_pred = decode(params, z_pred, ops, config)
    return z_pred, v_pred


def tl_forward(pose: Pose3D, rest_part: PartMesh, params: dict, ops: PartOps,
               config: NetConfig = NetConfig()) -> dict:
    """Inference: pose + rest part -> predicted code and posed vertices."""
    if rest_part.num_vertices != ops.meshes[0].num_vertices:
        raise ValidationError("rest part does not match the operator pyramid")
    z_pred, v_pred = tl_graph(pose.positions, rest_part.vertices, params, ops, config)
    return {"Z_pred": z_pred.value.ravel().copy(), "V_pred": v_pred.value.copy()}


def tl_training_forward(pose: Pose3D, rest_part: PartMesh, posed_part: PartMesh,
                        params: dict, ops: PartOps, config: NetConfig = NetConfig(),
                        training: bool = True, rng=None) -> dict:
    """Training path: both codes, plus decodes of Z_gt and Z_pred (Vars)."""
    z_pred, v_from_pred = tl_graph(pose.positions, rest_part.vertices, params, ops,
                                   config, training, rng)
    posed = ag.Var(posed_part.vertices)
    z_gt = mesh_encode(params, "enc_gt", posed, ops, config)
    v_from_gt = decode(params, z_gt, ops, config)
    return {"Z_pred": z_pred, "Z_gt": z_gt, "V_from_pred": v_from_pred,
            "V_from_gt": v_from_gt, "V_posed": posed}


DEFAULT_WZ = 5.0
DEFAULT_WMESH = 50.0


def skin_loss_var(z_pred: ag.Var, z_gt: ag.Var, v_pred: ag.Var, v_posed: ag.Var,
                  w_z: float = DEFAULT_WZ, w_mesh: float = DEFAULT_WMESH) -> ag.Var:
    return ag.add_scalars([
        ag.scale(ag.l1_mean(z_pred, z_gt), w_z),
        ag.scale(ag.l1_mean(v_pred, v_posed), w_mesh),
    ])


def skin_loss(z_pred, z_gt, v_pred, v_posed,
              w_z: float = DEFAULT_WZ, w_mesh: float = DEFAULT_WMESH) -> float:
    """w_z * mean|Z_pred - Z_gt| + w_mesh * mean|V_pred - V_posed|."""
    z_pred, z_gt = np.asarray(z_pred, float), np.asarray(z_gt, float)
    v_pred, v_posed = np.asarray(v_pred, float), np.asarray(v_posed, float)
    if z_pred.shape != z_gt.shape or v_pred.shape != v_posed.shape:
        raise ValidationError("loss inputs must have matching shapes")
    return float(w_z * np.mean(np.abs(z_pred - z_gt))
                 + w_mesh * np.mean(np.abs(v_pred - v_posed)))


# ---------------------------------------------------------------------------
# Per-vertex identity offsets
# ---------------------------------------------------------------------------

def init_identity_params(feature_dim: int, rng: np.random.Generator,
                         hidden: int = 32) -> dict:
    return {
        "id.l1.W": ag.Var(_glorot(rng, 3 + feature_dim, hidden)),
        "id.l1.b": ag.Var(np.zeros(hidden)),
        "id.l2.W": ag.Var(_glorot(rng, hidden, 3)),
        "id.l2.b": ag.Var(np.zeros(3)),
    }


def identity_offsets_graph(template_vertices: np.ndarray, feature: np.ndarray,
                           params: dict) -> ag.Var:
    verts = np.asarray(template_vertices, dtype=float)
    feat = np.asarray(feature, dtype=float).ravel()
    if params["id.l1.W"].shape[0] != 3 + feat.size:
        raise ValidationError("feature dimension does not match identity params")
    x = ag.Var(np.concatenate([verts, np.tile(feat, (len(verts), 1))], axis=1))
    h = ag.relu(ag.add(ag.matmul(x, params["id.l1.W"]), params["id.l1.b"]))
    off = ag.add(ag.matmul(h, params["id.l2.W"]), params["id.l2.b"])
    return ag.add(ag.Var(verts), off)


def identity_offsets(template: BodyMesh, feature: np.ndarray, params: dict) -> BodyMesh:
    """Template deformed by per-vertex offsets predicted from [vertex; feature]."""
    verts, _ = template.merged()
    out = identity_offsets_graph(verts, feature, params).value
    parts, off = [], 0
    for p in template.parts:
        parts.append(p.with_vertices(out[off:off + p.num_vertices]))
        off += p.num_vertices
    return template.with_parts(parts)


def identity_offsets_loss(template: BodyMesh, feature: np.ndarray, params: dict,
                          target: BodyMesh):
    """L1 loss against a target body and its analytic parameter gradients."""
    verts, _ = template.merged()
    tgt, _ = target.merged()
    if tgt.shape != verts.shape:
        raise ValidationError("target and template vertex counts differ")
    pred = identity_offsets_graph(verts, feature, params)
    loss = ag.l1_mean(pred, ag.Var(tgt))
    for v in params.values():
        v.zero_grad()
    ag.backward(loss)
    grads = {k: (v.grad.copy() if v.grad is not None else np.zeros_like(v.value))
             for k, v in params.items()}
    return float(loss.value), grads
