"""Run the three solvers over the pose catalog and print a summary.

Same numbers as ``armalign run --input catalog``, computed in-process.
"""
import numpy as np

from armalign.config import Config
from armalign.replay import ReplayOptions, replay
from armalign.session import HANDS_DOWN, pose_catalog

cfg = Config()
records = replay(pose_catalog(), ["onia", "jacobian", "fabrik"], cfg, ReplayOptions(overlay=True))

print(f"{'solver':<9}{'overlay':>9}{'dx_w mm':>10}{'time us':>10}")
for name in ("onia", "jacobian", "fabrik"):
    rows = [r for r in records if r.solver == name and r.frame not in HANDS_DOWN]
    overlay = np.nanmedian([r.overlay for r in rows])
    dx_w = np.median([r.dx_w for r in rows]) * 1e3
    t = np.median([r.solve_time_us for r in rows])
    print(f"{name:<9}{overlay:9.3f}{dx_w:10.3f}{t:10.0f}")

# poses with the hands down are outside the model's joint limits; the
# iterative solvers give best-effort answers there
for r in records:
    if r.frame in HANDS_DOWN and r.side == "right":
        print(f"pose {r.frame:2d} {r.solver:<9} wrist off by {r.dx_w * 1e3:6.1f} mm  {r.flags}")
