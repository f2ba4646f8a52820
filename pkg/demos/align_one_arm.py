"""Align the right arm of the human model to one robot pose and inspect the result."""
import numpy as np

from armalign import default_model, onia_solve, pose_catalog
from armalign.armmodel import fk_arm, hinge_angle
from armalign.metrics import deviations

model = default_model("right")
frame = pose_catalog()[4]          # second of the hands-up poses
refs = frame.right

pose = onia_solve(model, refs)
elbow, wrist = fk_arm(model, pose)

print("robot elbow ", np.round(refs.x_e_r, 4))
print("model elbow ", np.round(elbow, 4))
print("robot wrist ", np.round(refs.x_w_r, 4))
print("model wrist ", np.round(wrist, 4))

# the closed-form solver reaches both references exactly, by stretching the segments
dx_e, dx_w = deviations(model, pose, refs)
print(f"deviations   elbow {dx_e:.1e} m, wrist {dx_w:.1e} m")
print(f"stretch      upper {pose.S_u:.3f}, forearm {pose.S_f:.3f}")
print(f"hinge        {np.degrees(hinge_angle(pose, model)):.1f} deg")
print("flags       ", sorted(pose.flags) or "none")
