import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.mesh import BodyMesh
from courtpose.meshnet import (NetConfig, PartOps, identity_offsets,
                               identity_offsets_loss, init_identity_params,
                               init_params, skin_loss, tl_forward)
from courtpose.meshnet import autograd as ag
from courtpose.meshnet.network import decode, skin_loss_var, tl_graph
from courtpose.model import Pose3D
from courtpose.primitives import capsule

CFG = NetConfig()


@pytest.fixture(scope="module")
def part_ops():
    mesh = capsule((0, 0, 0), (0, 0.4, 0), 0.08, part="arms")
    return mesh, PartOps.build(mesh, CFG)


def random_pose(rng, joints=35):
    pos = rng.normal(scale=0.3, size=(joints, 3))
    pos[0] = 0
    return Pose3D(pos)


def numeric_grad(fn, var, idx, h=1e-5):
    old = var.value[idx]
    var.value[idx] = old + h
    fp = fn()
    var.value[idx] = old - h
    fm = fn()
    var.value[idx] = old
    return (fp - fm) / (2 * h)


# ---------------------------------------------------------------------------
# autograd op-level checks
# ---------------------------------------------------------------------------

def test_autograd_elementary_ops():
    rng = np.random.default_rng(0)
    a = ag.Var(rng.normal(size=(4, 3)))
    b = ag.Var(rng.normal(size=(3, 5)))
    c = ag.Var(rng.normal(size=5))
    out = ag.sum_all(ag.elu(ag.add(ag.matmul(a, b), c)))
    ag.backward(out)

    def f():
        return float(np.sum(np.where((a.value @ b.value + c.value) > 0,
                                     a.value @ b.value + c.value,
                                     np.exp(np.minimum(a.value @ b.value + c.value, 0)) - 1)))

    for var in (a, b, c):
        idx = tuple(rng.integers(0, s) for s in var.value.shape)
        fd = numeric_grad(f, var, idx)
        assert abs(fd - var.grad[idx]) / max(abs(fd), 1e-8) < 1e-4


def test_autograd_l1_mean():
    rng = np.random.default_rng(1)
    a = ag.Var(rng.normal(size=(6, 3)))
    b = ag.Var(rng.normal(size=(6, 3)))
    out = ag.l1_mean(a, b)
    ag.backward(out)
    idx = (2, 1)
    fd = numeric_grad(lambda: float(np.mean(np.abs(a.value - b.value))), a, idx)
    assert abs(fd - a.grad[idx]) < 1e-7


# ---------------------------------------------------------------------------
# network-level behavior
# ---------------------------------------------------------------------------

def test_zero_params_give_zero_output(part_ops):
    mesh, ops = part_ops
    rng = np.random.default_rng(0)
    params = init_params(CFG, ops, 35, rng)
    zeros = {k: ag.Var(np.zeros_like(v.value)) for k, v in params.items()}
    out = tl_forward(random_pose(rng), mesh, zeros, ops, CFG)
    assert np.abs(out["V_pred"]).max() == 0.0
    assert np.abs(out["Z_pred"]).max() == 0.0


def test_decoder_path_equivalence(part_ops):
    """Decoding Z_gt equals decoding Z_pred whenever the codes coincide."""
    mesh, ops = part_ops
    rng = np.random.default_rng(2)
    params = init_params(CFG, ops, 35, rng)
    z = ag.Var(rng.normal(size=(1, CFG.latent)))
    v1 = decode(params, z, ops, CFG)
    v2 = decode(params, ag.Var(z.value.copy()), ops, CFG)
    assert np.array_equal(v1.value, v2.value)


def test_tl_forward_deterministic(part_ops):
    mesh, ops = part_ops
    rng = np.random.default_rng(3)
    params = init_params(CFG, ops, 35, rng)
    pose = random_pose(rng)
    a = tl_forward(pose, mesh, params, ops, CFG)
    b = tl_forward(pose, mesh, params, ops, CFG)
    assert np.array_equal(a["V_pred"], b["V_pred"])


def test_tl_forward_gradients_match_finite_differences(part_ops):
    mesh, ops = part_ops
    rng = np.random.default_rng(4)
    params = init_params(CFG, ops, 35, rng)
    pose = random_pose(rng)

    _, v = tl_graph(pose.positions, mesh.vertices, params, ops, CFG)
    loss = ag.sum_all(v)
    for p in params.values():
        p.zero_grad()
    ag.backward(loss)

    def f():
        _, vv = tl_graph(pose.positions, mesh.vertices, params, ops, CFG)
        return float(vv.value.sum())

    for name in ("pose.lin_in.W", "pose.res2.l1.W", "enc_rest.sc1.W",
                 "enc_rest.lin.b", "fuse.W", "dec.lin.W", "dec.sc3.W",
                 "dec.sc_final.b"):
        var = params[name]
        for _ in range(2):
            idx = tuple(rng.integers(0, s) for s in var.value.shape)
            fd = numeric_grad(f, var, idx)
            an = var.grad[idx]
            assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-4, name


def test_skin_loss_zero_and_weights():
    rng = np.random.default_rng(5)
    z = rng.normal(size=32)
    v = rng.normal(size=(10, 3))
    assert skin_loss(z, z, v, v) == 0.0

    # hand toy: 2 vertices, manual arithmetic
    z1 = np.array([1.0, 2.0])
    z2 = np.array([1.5, 1.0])
    v1 = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    v2 = np.array([[0.5, 0.0, 0.0], [1.0, 0.0, 1.0]])
    manual = 5.0 * (0.5 + 1.0) / 2 + 50.0 * (0.5 + 1.0) / 6
    assert skin_loss(z1, z2, v1, v2) == pytest.approx(manual, rel=1e-15)


def test_skin_loss_var_matches_plain(part_ops):
    rng = np.random.default_rng(6)
    zp = ag.Var(rng.normal(size=(1, 32)))
    zg = ag.Var(rng.normal(size=(1, 32)))
    vp = ag.Var(rng.normal(size=(20, 3)))
    vg = ag.Var(rng.normal(size=(20, 3)))
    lv = skin_loss_var(zp, zg, vp, vg)
    assert float(lv.value) == pytest.approx(
        skin_loss(zp.value, zg.value, vp.value, vg.value), rel=1e-15)


# ---------------------------------------------------------------------------
# identity offsets
# ---------------------------------------------------------------------------

def test_identity_offsets_zero_params_is_template():
    rng = np.random.default_rng(7)
    template = BodyMesh((capsule((0, 0, 0), (0, 0.4, 0), 0.08, part="arms"),))
    params = init_identity_params(8, rng)
    zeros = {k: ag.Var(np.zeros_like(v.value)) for k, v in params.items()}
    out = identity_offsets(template, rng.normal(size=8), zeros)
    assert np.array_equal(out.merged()[0], template.merged()[0])


def test_identity_offsets_self_loss_zero():
    rng = np.random.default_rng(8)
    template = BodyMesh((capsule((0, 0, 0), (0, 0.4, 0), 0.08, part="arms"),))
    params = init_identity_params(4, rng)
    feature = rng.normal(size=4)
    deformed = identity_offsets(template, feature, params)
    loss, _ = identity_offsets_loss(template, feature, params, deformed)
    assert loss == 0.0


def test_identity_offsets_gradients():
    rng = np.random.default_rng(9)
    template = BodyMesh((capsule((0, 0, 0), (0, 0.3, 0), 0.06, part="arms"),))
    params = init_identity_params(6, rng)
    feature = rng.normal(size=6)
    target = BodyMesh(tuple(
        p.with_vertices(p.vertices + rng.normal(scale=0.01, size=p.vertices.shape))
        for p in template.parts))
    _, grads = identity_offsets_loss(template, feature, params, target)

    def f():
        loss, _ = identity_offsets_loss(template, feature, params, target)
        return loss

    for name, var in params.items():
        idx = tuple(rng.integers(0, s) for s in var.value.shape)
        fd = numeric_grad(f, var, idx)
        an = grads[name][idx]
        assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-4, name


def test_identity_offsets_feature_dim_check():
    rng = np.random.default_rng(10)
    template = BodyMesh((capsule((0, 0, 0), (0, 0.3, 0), 0.06, part="arms"),))
    params = init_identity_params(6, rng)
    with pytest.raises(ValidationError):
        identity_offsets(template, rng.normal(size=3), params)
