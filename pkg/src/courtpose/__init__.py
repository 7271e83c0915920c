"""courtpose: geometry, optimization and evaluation toolkit for
court-calibrated single-image basketball player reconstruction."""

from .errors import (BehindCameraError, CourtposeError, DegenerateGeometryError,
                     NumericalError, StageError, ValidationError)
from .model import (BoneTransforms, Frame, Pose2D, Pose3D, Skeleton,
                    bone_lengths, forward_kinematics, fk_global, lsp14_indices,
                    rest_pose)
from .mesh import (BodyMesh, PART_NAMES, PartMesh, load_obj, mesh_edges,
                   save_obj, uniform_laplacian, vertex_normals)
from .camera import Camera, pixel_ray, project
from .court import CourtConfig, CourtModel, make_court_model
from .calibrate import (LineMask, load_pgm, rasterize_court_lines,
                        refine_camera_lines, save_pgm, solve_pnp_planar)
from .posemaps import (HeatmapStack, JumpInfo, LocationMapStack,
                       PoseLossWeights, PoseMapTargets, decode_heatmaps,
                       decode_location_maps, encode_heatmaps,
                       encode_location_maps, pose_loss)
from .placement import lowest_joint, place_player, solve_depth_for_height
from .skinning import (FitConfig, SkinningWeights, fit_pose_to_keypoints,
                       heat_diffusion_weights, lbs)
from .collision import CollisionReport, detect_collisions
from .composer import (PenetrationWeights, penetration_loss,
                       resolve_interpenetration)
from .metrics import (ICPResult, ProcrustesResult, chamfer, emd,
                      farthest_point_subsample, icp, mpjpe, mpvpe,
                      procrustes_align)
from .synth import SceneBundle, SceneConfig, run_pipeline, synth_scene

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError", "CourtposeError", "DegenerateGeometryError",
    "NumericalError", "StageError", "ValidationError",
    "BoneTransforms", "Frame", "Pose2D", "Pose3D", "Skeleton",
    "bone_lengths", "forward_kinematics", "fk_global", "lsp14_indices", "rest_pose",
    "BodyMesh", "PART_NAMES", "PartMesh", "load_obj", "mesh_edges", "save_obj",
    "uniform_laplacian", "vertex_normals",
    "Camera", "pixel_ray", "project",
    "CourtConfig", "CourtModel", "make_court_model",
    "LineMask", "load_pgm", "rasterize_court_lines", "refine_camera_lines",
    "save_pgm", "solve_pnp_planar",
    "HeatmapStack", "JumpInfo", "LocationMapStack", "PoseLossWeights",
    "PoseMapTargets", "decode_heatmaps", "decode_location_maps",
    "encode_heatmaps", "encode_location_maps", "pose_loss",
    "lowest_joint", "place_player", "solve_depth_for_height",
    "FitConfig", "SkinningWeights", "fit_pose_to_keypoints",
    "heat_diffusion_weights", "lbs",
    "CollisionReport", "detect_collisions",
    "PenetrationWeights", "penetration_loss", "resolve_interpenetration",
    "ICPResult", "ProcrustesResult", "chamfer", "emd",
    "farthest_point_subsample", "icp", "mpjpe", "mpvpe", "procrustes_align",
    "SceneBundle", "SceneConfig", "run_pipeline", "synth_scene",
]
