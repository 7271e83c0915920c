"""Command-line front door.

Subcommands: synth, calibrate, place, codec, skin, compose, train-toy,
infer-part, eval, pipeline. Options can come from a `key = value` config
file (--config) with command-line flags taking precedence.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .calibrate import load_pgm, solve_pnp_planar, refine_camera_lines
from .camera import camera_from_json, camera_to_json
from .composer import resolve_interpenetration
from .court import make_court_model
from .errors import NumericalError, StageError, ValidationError
from .mesh import BodyMesh, PART_NAMES, load_obj, save_obj
from .metrics import chamfer, emd, icp, mpvpe
from .model import (Skeleton, pose2d_from_json, pose2d_to_json,
                    pose3d_from_json, pose3d_to_json, skeleton_from_json,
                    transforms_from_json)
from .placement import place_player
from .posemaps import (decode_heatmaps, decode_location_maps, encode_heatmaps,
                       encode_location_maps, jump_from_json, load_heatmaps,
                       load_location_maps, save_heatmaps, save_location_maps)
from .skinning import lbs, weights_from_json
from .synth import SceneConfig, load_scene, run_pipeline, save_scene, synth_scene


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path} is not valid JSON: {e}") from e


def _write_json(path, payload):
    text = json.dumps(payload, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_config_file(path):
    """TOML-style `key = value` lines; '#' comments; numbers parsed."""
    out = {}
    try:
        with open(path) as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValidationError(f"bad config line: {raw.strip()!r}")
                key, val = (x.strip() for x in line.split("=", 1))
                try:
                    out[key] = json.loads(val)
                except json.JSONDecodeError:
                    out[key] = val.strip("\"'")
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from e
    return out


def _image_size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except Exception:
        raise ValidationError(f"bad --image-size {text!r}; expected WxH") from None


def cmd_synth(args, cfg):
    bundle = synth_scene(args.seed, _scene_config(cfg))
    save_scene(bundle, args.out)
    print(f"scene {args.seed} written to {args.out}")
    return 0


def _scene_config(cfg):
    kwargs = {}
    if "voxel_res" in cfg:
        kwargs["voxel_res"] = int(cfg["voxel_res"])
    if "image_width" in cfg and "image_height" in cfg:
        kwargs["image_size"] = (int(cfg["image_width"]), int(cfg["image_height"]))
    return SceneConfig(**kwargs)


def cmd_calibrate(args, cfg):
    size = _image_size(args.image_size)
    pts = _read_json(args.points)
    corrs = [(p["pixel"], p["court"]) for p in pts]
    cam, rms = solve_pnp_planar(corrs, size, focal=args.focal)
    result = {"pnp_rms_px": rms}
    if args.mask:
        mask = load_pgm(args.mask)
        ref = refine_camera_lines(cam, mask, make_court_model())
        cam = ref.camera
        result.update(initial_cost=ref.initial_cost, final_cost=ref.final_cost,
                      iterations=ref.iterations)
    result["camera"] = camera_to_json(cam)
    _write_json(args.out, result)
    return 0


def cmd_place(args, cfg):
    camera = camera_from_json(_read_json(args.camera))
    pose2d = pose2d_from_json(_read_json(args.pose2d))
    pose3d = pose3d_from_json(_read_json(args.pose3d))
    jump = jump_from_json(_read_json(args.jump))
    placed, offset = place_player(camera, pose2d, pose3d, jump)
    _write_json(args.out, {"pose_world": pose3d_to_json(placed),
                           "offset": offset.tolist()})
    return 0


def cmd_codec(args, cfg):
    pose2d = pose2d_from_json(_read_json(args.pose2d))
    pose3d = pose3d_from_json(_read_json(args.pose3d))
    heat = encode_heatmaps(pose2d, sigma=args.sigma)
    loc = encode_location_maps(pose3d, pose2d, sigma=args.sigma)
    os.makedirs(args.out_dir, exist_ok=True)
    save_heatmaps(os.path.join(args.out_dir, "heatmaps.bin"), heat)
    save_location_maps(os.path.join(args.out_dir, "location_maps.bin"), loc)
    heat2 = load_heatmaps(os.path.join(args.out_dir, "heatmaps.bin"))
    loc2 = load_location_maps(os.path.join(args.out_dir, "location_maps.bin"))
    p2 = decode_heatmaps(heat2)
    p3 = decode_location_maps(loc2, heat2)
    report = {
        "max_2d_err_px": float(np.abs(p2.pixels[pose2d.visibility]
                                      - pose2d.pixels[pose2d.visibility]).max(initial=0.0)),
        "max_3d_err_m": float(np.abs(p3.positions - pose3d.positions).max()),
        "pose2d_decoded": pose2d_to_json(p2),
        "pose3d_decoded": pose3d_to_json(p3),
    }
    _write_json(os.path.join(args.out_dir, "codec_report.json"), report)
    print(f"codec round trip written to {args.out_dir}")
    return 0


def cmd_skin(args, cfg):
    rest = load_obj(args.rest)
    if not isinstance(rest, BodyMesh):
        rest = BodyMesh((rest,))
    weights = weights_from_json(_read_json(args.weights))
    transforms = transforms_from_json(_read_json(args.pose))
    skeleton = (skeleton_from_json(_read_json(args.skeleton)) if args.skeleton
                else Skeleton.canonical())
    posed = lbs(rest, weights, transforms, skeleton)
    save_obj(args.out, posed)
    print(f"posed mesh written to {args.out}")
    return 0


def cmd_compose(args, cfg):
    parts = []
    for name in PART_NAMES:
        path = os.path.join(args.parts, f"{name}.obj")
        if os.path.exists(path):
            m = load_obj(path, default_part=name)
            parts.extend(m.parts if isinstance(m, BodyMesh) else [m])
    if not parts:
        raise ValidationError(f"no part OBJ files found under {args.parts}")
    body, rep = resolve_interpenetration(BodyMesh(tuple(parts)))
    save_obj(args.out, body)
    _write_json(args.report, {
        "residual_collisions": rep["residual_collisions"],
        "iterations": [{"collisions": it["collisions"],
                        "losses": it["losses"]} for it in rep["iterations"]],
    })
    return 0


def cmd_train_toy(args, cfg):
    from .meshnet import init_params, save_params
    from .meshnet.training import TrainConfig, eval_mesh_term, train_toy
    from .toydata import toy_part_dataset

    dataset, ops, config = toy_part_dataset(seed=args.seed, count=args.count)
    rng = np.random.default_rng(args.seed)
    params = init_params(config, ops, dataset[0][0].num_joints, rng)
    tc = TrainConfig(epochs=args.epochs, max_steps=args.steps, seed=args.seed)
    before = eval_mesh_term(dataset, params, ops, config)
    params, curve = train_toy(dataset, params, ops, config, tc)
    after = eval_mesh_term(dataset, params, ops, config)
    save_params(args.out, params)
    _write_json(None, {"steps": len(curve), "mesh_term_initial": before,
                       "mesh_term_final": after,
                       "final_total": curve[-1]["total"]})
    return 0


def cmd_infer_part(args, cfg):
    from .meshnet import load_params, tl_forward
    from .toydata import toy_part_dataset

    _, ops, config = toy_part_dataset(seed=args.seed, count=1)
    params = load_params(args.params)
    pose = pose3d_from_json(_read_json(args.pose))
    rest = load_obj(args.rest)
    if isinstance(rest, BodyMesh):
        rest = rest.parts[0]
    out = tl_forward(pose, rest, params, ops, config)
    save_obj(args.out, rest.with_vertices(out["V_pred"]))
    print(f"inferred part written to {args.out}")
    return 0


def cmd_eval(args, cfg):
    pred = load_obj(args.pred)
    gt = load_obj(args.gt)
    pv = pred.merged()[0] if isinstance(pred, BodyMesh) else pred.vertices
    gv = gt.merged()[0] if isinstance(gt, BodyMesh) else gt.vertices
    if args.icp:
        fit = icp(pv, gv)
        pv = pv @ fit.R.T + fit.t
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    out = {}
    for m in wanted:
        if m == "cd":
            out["cd"] = chamfer(pv, gv)
        elif m == "emd":
            out["emd"] = emd(pv, gv)
        elif m == "mpvpe":
            out["mpvpe_mm"] = mpvpe(pv, gv)
            out["mpvpe_pa_mm"] = mpvpe(pv, gv, procrustes=True)
        else:
            raise ValidationError(f"unknown metric {m!r} (expected cd, emd, mpvpe)")
    _write_json(args.out, out)
    return 0


def _pipeline_one(seed_and_cfg):
    seed, config = seed_and_cfg
    return run_pipeline(synth_scene(seed, config))


def cmd_pipeline(args, cfg):
    config = _scene_config(cfg)
    if args.scene_dir:
        reports = [run_pipeline(load_scene(args.scene_dir, config))]
    elif args.jobs > 1:
        # stages stay sequential; only independent scenes run in parallel
        import multiprocessing
        with multiprocessing.Pool(args.jobs) as pool:
            reports = pool.map(_pipeline_one,
                               [(args.seed + k, config) for k in range(args.scenes)])
    else:
        reports = [run_pipeline(synth_scene(args.seed + k, config))
                   for k in range(args.scenes)]
    _write_json(args.out, reports if len(reports) > 1 else reports[0])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="courtpose",
                                 description="Court-aware player reconstruction toolkit")
    ap.add_argument("--config", help="key = value option file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("calibrate", help="camera from correspondences (+ optional mask)")
    p.add_argument("--image-size", required=True)
    p.add_argument("--points", required=True, help="JSON [{pixel, court}, ...]")
    p.add_argument("--mask", help="court line mask (PGM P5)")
    p.add_argument("--focal", type=float, help="pin the focal length (px)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("place", help="solve global player position")
    p.add_argument("--camera", required=True)
    p.add_argument("--pose2d", required=True)
    p.add_argument("--pose3d", required=True)
    p.add_argument("--jump", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_place)

    p = sub.add_parser("codec", help="round-trip JSON poses through the map codecs")
    p.add_argument("--pose2d", required=True)
    p.add_argument("--pose3d", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_codec)

    p = sub.add_parser("skin", help="pose a rest mesh with LBS")
    p.add_argument("--rest", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--pose", required=True, help="bone transforms JSON")
    p.add_argument("--skeleton")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_skin)

    p = sub.add_parser("compose", help="combine parts, resolving interpenetration")
    p.add_argument("--parts", required=True, help="directory of <part>.obj files")
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_compose)

    p = sub.add_parser("train-toy", help="overfit the toy mesh network")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("infer-part", help="run the mesh network on one part")
    p.add_argument("--params", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--rest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_infer_part)

    p = sub.add_parser("eval", help="mesh metrics between two OBJ files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--metrics", default="cd,emd,mpvpe")
    p.add_argument("--icp", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("pipeline", help="full synthetic reconstruction run")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1,
                   help="process this many scenes in parallel")
    p.add_argument("--scene-dir", help="run on a saved scene instead")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    cfg = _parse_config_file(args.config) if args.config else {}
    try:
        return args.fn(args, cfg)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2 if isinstance(e.cause, ValidationError) else 3
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
