"""Structure from motion for cameras constrained to spherical motion.

The camera moves on a unit sphere with its optical axis through the sphere
center (inward for object scanning, outward for panoramic capture), so the
relative pose between any two views has only three rotational degrees of
freedom and the essential matrix can be estimated from three point
correspondences.
"""

from .averaging import RotationEdge, RotationGraph, average_rotations_l1, spanning_tree_init
from .bundle import (
    BaConfig,
    BaResult,
    BaState,
    Track,
    TrackGraph,
    bundle_adjust,
    init_inverse_depth,
    point_from_inverse_depth,
    reprojection_cost,
    reprojection_residuals,
)
from .errors import (
    CalibrationMismatch,
    DegenerateMotion,
    DisconnectedGraph,
    EliminationFailed,
    GenerationFailed,
    InsufficientCorrespondences,
    NoValidHypothesis,
    NonConvergenceWarning,
    ParseError,
    RankDeficient,
    SphericalSfmError,
)
from .pipeline import PipelineConfig, ReconstructionOutput, reconstruct, run_sfm
from .ransac import RansacConfig, RansacResult, preemptive_ransac, sampson_error, sampson_errors
from .so3 import (
    Facing,
    RelativePose,
    camera_center,
    essential_from_relative,
    essential_from_rotation,
    exp_so3,
    is_rotation,
    is_spherical_essential,
    log_so3,
    relative_pose,
    rotation_about,
)
from .solver import (
    ACTION_MATRIX,
    POLYNOMIAL,
    ConstraintSystem,
    CorrespondenceSet,
    EssentialCandidate,
    build_cubic_constraints,
    build_epipolar_system,
    compute_nullspace,
    decompose_essential,
    solve_action_matrix,
    solve_essential,
    solve_polynomial,
    solve_relative_pose,
)
from .synthetic import (
    ProblemSpec,
    SyntheticProblem,
    angular_error,
    frobenius_error,
    generate_circle_sequence,
    generate_problem,
    run_benchmark,
)

__version__ = "0.1.0"
