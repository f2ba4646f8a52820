"""Pose a simplified human arm model so it overlays an anthropomorphic robot arm."""
from .armmodel import (ArmPose, BodyAlignment, HumanArmModel, JointConstraints, align_body, clamp_pose,
                       default_model, fk_arm, gripper_to_gesture)
from .fabrik import FabrikSolver, fabrik_solve
from .geom import Rotation, rot_from_to, swing_twist
from .jacobian import JacobianSolver, SolverDivergedError, jacobian_solve
from .metrics import Capsule, MetricsRecord, RenderParams, deviations, overlay_ratio, stretch_metrics, timed
from .onia import OniaParams, OniaSolver, onia_solve
from .session import ArmRefs, SessionFrame, pose_catalog, read_session, therapy_trajectory, write_session

__version__ = "0.1.0"

__all__ = [
    "ArmPose", "ArmRefs", "BodyAlignment", "Capsule", "FabrikSolver", "HumanArmModel", "JacobianSolver",
    "JointConstraints", "MetricsRecord", "OniaParams", "OniaSolver", "RenderParams", "Rotation",
    "SessionFrame", "SolverDivergedError", "align_body", "clamp_pose", "default_model", "deviations",
    "fabrik_solve", "fk_arm", "gripper_to_gesture", "jacobian_solve", "onia_solve", "overlay_ratio",
    "pose_catalog", "read_session", "rot_from_to", "stretch_metrics", "swing_twist", "therapy_trajectory",
    "timed", "write_session",
]
