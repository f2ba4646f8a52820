"""Stream a short therapy session over the loopback relay and smooth the base pose."""
import numpy as np

from armalign.relay import RelayConfig, serve, subscribe
from armalign.session import add_tracking_noise, therapy_trajectory

rng = np.random.default_rng(7)
frames = add_tracking_noise(therapy_trajectory(2.0, 100.0), rng)

with serve(frames, RelayConfig(rate=200.0, wait_for=1)) as server:
    raw = [f.base_pose[0] for f in frames]
    smooth = [f.base_pose[0] for f in subscribe(server.address, filter_beta=0.2, timeout=10.0)]

raw, smooth = np.array(raw), np.array(smooth)
print(f"received {len(smooth)} of {len(raw)} frames")
print(f"base jitter, frame to frame: raw {np.diff(raw, axis=0).std():.2e} m, "
      f"filtered {np.diff(smooth, axis=0).std():.2e} m")
