"""motionlift: absolute-position 3D human motion from single-view 2D keypoints.

The pipeline poses monocular lifting as multi-view generation: a diffusion
model conditioned on the observed view (and ground-plane pointmaps)
produces consistent virtual-view 2D motion, which is triangulated into
world coordinates at every denoising step.
"""

from .errors import (
    BadStepCount,
    DatasetModeMismatch,
    DegenerateConfiguration,
    DegenerateGeometry,
    InsufficientViews,
    IoFailure,
    ModeMismatch,
    MotionLiftError,
    NonFiniteCost,
    NonFiniteState,
    NonPositiveDepth,
    ShapeMismatch,
    TooShort,
    UnknownKind,
)
from .estimators import MotionDisentangler, MotionLifter, SkeletonRefiner
from .geometry import (
    Camera,
    CameraRig,
    Pointmap,
    look_at_camera,
    pointmap_generate,
    project,
    ray_ground_intersect,
    triangulate,
)
from .lifting import LiftResult, consistency_project, lift
from .metrics import (
    MetricsReport,
    accel_error,
    evaluate_all,
    foot_sliding,
    jitter,
    mpjpe,
    pa_mpjpe,
    procrustes,
    t_root,
    w_mpjpe,
    wa_mpjpe,
)
from .motion import Motion3D
from .refine import FitConfig, bone_lengths, fit_skeleton
from .representation import (
    EPS_SCALE,
    DisentangledMotion,
    GlobalMotion2D,
    bbox_per_frame,
    decode,
    encode,
)
from .skeleton import SKELETONS, Skeleton, get_skeleton
from .synth import (
    AugmentParams,
    MotionSample,
    augment_motion,
    build_dataset,
    default_rig,
    generate_motion,
    generate_samples,
    load_dataset,
    sample_camera_rig,
)

__version__ = "0.1.0"
