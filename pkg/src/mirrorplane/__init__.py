"""Mirror-plane depth refinement and depth/detection evaluation."""

from .anchors import AnchorCode, AnchorCodebook, build_codebook, decode_normal, encode_normal
from .errors import MirrorPlaneError
from .geometry import (
    CameraIntrinsics,
    Plane3D,
    Point3,
    angle_between,
    backproject,
    canonicalize,
    project,
    ray_plane_depth,
)
from .imaging import DepthMap, InstanceMask, border_band, iou, read_depth, read_mask, to_pointcloud, write_depth, write_ply
from .plane_fit import RansacConfig, offset_from_border, ransac_plane
from .refine import RefinementResult, refine_depth, refine_frame
from .synth import SceneSpec, corrupt, random_scene, render_gt

__version__ = "0.1.0"
