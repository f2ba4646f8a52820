"""Evaluation metrics: joint deviations, stretch, solve time and overlay ratio.

The overlay ratio is the fraction of robot-arm pixels, seen from the patient
camera, that the human model covers. Arm segments and robot links are
capsules; pixels are classified by perspective ray casting.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .armmodel import ArmPose, HumanArmModel, fk_arm
from .geom import Rotation, norm3
from .session import ArmRefs

ROBOT_RADIUS = 0.045
UPPER_ARM_RADIUS = 0.042
FOREARM_RADIUS = 0.036


@dataclass(frozen=True, eq=False)
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("capsule radius must be positive")
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(3))


@dataclass(frozen=True)
class RenderParams:
    width: int = 512
    height: int = 512
    fov_y: float = math.radians(60.0)
    near: float = 0.05
    depth_slack: float = 0.01


def deviations(model: HumanArmModel, pose: ArmPose, refs: ArmRefs) -> tuple[float, float]:
    elbow, wrist = fk_arm(model, pose)
    return norm3(elbow - refs.x_e_r), norm3(wrist - refs.x_w_r)


def stretch_metrics(pose: ArmPose) -> tuple[float, float]:
    return abs(pose.S_u - 1.0), abs(pose.S_f - 1.0)


def timed(solver: Callable, *args, **kwargs):
    """Call ``solver`` and return ``(output, seconds)`` on the monotonic clock."""
    t0 = time.perf_counter_ns()
    out = solver(*args, **kwargs)
    return out, (time.perf_counter_ns() - t0) * 1e-9


def robot_capsules(shoulder, refs: ArmRefs, radius: float = ROBOT_RADIUS) -> list[Capsule]:
    return [Capsule(shoulder, refs.x_e_r, radius), Capsule(refs.x_e_r, refs.x_w_r, radius)]


def human_capsules(model: HumanArmModel, pose: ArmPose, upper_radius: float = UPPER_ARM_RADIUS,
                   fore_radius: float = FOREARM_RADIUS) -> list[Capsule]:
    elbow, wrist = fk_arm(model, pose)
    return [Capsule(model.x_s_h, elbow, upper_radius), Capsule(elbow, wrist, fore_radius)]


# -- ray casting -------------------------------------------------------------

def _camera_rays(cam_pose, params: RenderParams, rows: slice, cols: slice):
    pos, rot = cam_pose
    if not isinstance(rot, Rotation):
        rot = Rotation.from_quat(rot)  # raises on a zero quaternion
    w, h = params.width, params.height
    ty = math.tan(0.5 * params.fov_y)
    tx = ty * w / h
    j = np.arange(w)[cols] + 0.5
    i = np.arange(h)[rows] + 0.5
    xs = (2.0 * j / w - 1.0) * tx
    ys = (1.0 - 2.0 * i / h) * ty
    X, Y = np.meshgrid(xs, ys)
    d = np.stack([X, Y, -np.ones_like(X)], axis=-1).reshape(-1, 3)
    # distance along a unit ray at which it crosses the near plane
    near_t = params.near * np.linalg.norm(d, axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.asarray(pos, dtype=float), rot.as_matrix(), d @ rot.as_matrix().T, near_t


def ray_capsule_interval(ro: np.ndarray, rd: np.ndarray, cap: Capsule) -> tuple[np.ndarray, np.ndarray]:
    """Entry and exit distances of unit rays ``ro + t rd`` through a capsule.

    The capsule is convex, so the ray meets it in one interval: the union of
    the intervals through its side and its two end spheres. Misses give
    ``(inf, -inf)``.
    """
    n = rd.shape[0]
    t_in = np.full(n, np.inf)
    t_out = np.full(n, -np.inf)
    ba = cap.b - cap.a
    oa = ro - cap.a
    r2 = cap.radius * cap.radius
    baba = float(ba @ ba)
    if baba > 0.0:
        bard = rd @ ba
        baoa = float(oa @ ba)
        rdoa = rd @ oa
        oaoa = float(oa @ oa)
        A = baba - bard * bard
        B = baba * rdoa - baoa * bard
        C = baba * oaoa - baoa * baoa - r2 * baba
        disc = B * B - A * C
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(disc)
            for root, sign in ((-B - sq, 1), (-B + sq, -1)):
                tc = root / A
                y = baoa + tc * bard
                ok = (disc >= 0.0) & (A > 0.0) & (y > 0.0) & (y < baba)
                if sign > 0:
                    t_in = np.where(ok, np.minimum(t_in, tc), t_in)
                else:
                    t_out = np.where(ok, np.maximum(t_out, tc), t_out)
    for center in (cap.a, cap.b):
        oc = ro - center
        b = rd @ oc
        h = b * b - (float(oc @ oc) - r2)
        hit = h >= 0.0
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(h)
        t_in = np.where(hit, np.minimum(t_in, -b - sq), t_in)
        t_out = np.where(hit, np.maximum(t_out, -b + sq), t_out)
    return t_in, t_out


def ray_capsule(ro: np.ndarray, rd: np.ndarray, cap: Capsule) -> np.ndarray:
    """Nearest hit distance in front of the ray origin; ``inf`` on a miss."""
    t_in, _ = ray_capsule_interval(ro, rd, cap)
    return np.where(t_in > 0.0, t_in, np.inf)


def _nearest_hit(ro, rd, caps: Sequence[Capsule]) -> np.ndarray:
    t = np.full(rd.shape[0], np.inf)
    for c in caps:
        t = np.minimum(t, ray_capsule(ro, rd, c))
    return t


def _nearest_interval(ro, rd, caps: Sequence[Capsule]) -> tuple[np.ndarray, np.ndarray]:
    """Entry of the nearest capsule along each ray and that capsule's exit."""
    t = np.full(rd.shape[0], np.inf)
    out = np.full(rd.shape[0], np.inf)
    for c in caps:
        ti, to = ray_capsule_interval(ro, rd, c)
        ti = np.where(ti > 0.0, ti, np.inf)
        closer = ti < t
        t = np.where(closer, ti, t)
        out = np.where(closer, to, out)
    return t, out


def _screen_bbox(caps: Sequence[Capsule], cam_pose, params: RenderParams):
    """Conservative pixel rectangle containing the projected capsules, or ``None``
    when some capsule reaches behind the camera."""
    pos, rot = cam_pose
    m = rot.as_matrix()
    ty = math.tan(0.5 * params.fov_y)
    tx = ty * params.width / params.height
    us, vs = [], []
    for c in caps:
        for p in (c.a, c.b):
            q = m.T @ (p - pos)
            depth = -q[2]
            if depth - c.radius <= params.near:
                return None
            # sphere silhouette bound, widened for the off-axis stretch
            pad = c.radius / (depth - c.radius)
            x, y = q[0] / depth, q[1] / depth
            for sx in (-1, 1):
                us.append((x + sx * pad * (1 + abs(x))) / tx)
                vs.append((y + sx * pad * (1 + abs(y))) / ty)
    w, h = params.width, params.height
    j0 = int(math.floor((min(us) + 1) * 0.5 * w)) - 2
    j1 = int(math.ceil((max(us) + 1) * 0.5 * w)) + 2
    i0 = int(math.floor((1 - max(vs)) * 0.5 * h)) - 2
    i1 = int(math.ceil((1 - min(vs)) * 0.5 * h)) + 2
    j0, i0 = max(j0, 0), max(i0, 0)
    j1, i1 = min(j1, w), min(i1, h)
    if j0 >= j1 or i0 >= i1:
        return slice(0, 0), slice(0, 0)
    return slice(i0, i1), slice(j0, j1)


def classify_pixels(robot: Sequence[Capsule], human: Sequence[Capsule], cam_pose,
                    params: RenderParams = RenderParams()):
    """Full-image masks ``(robot_visible, covered)``; useful for inspection."""
    ro, _, rd, near_t = _camera_rays(cam_pose, params, slice(None), slice(None))
    tr, tr_out = _nearest_interval(ro, rd, robot)
    th = _nearest_hit(ro, rd, human)
    vis = np.isfinite(tr) & (tr >= near_t)
    cov = vis & (th >= near_t) & (th <= tr_out + params.depth_slack)
    shape = (params.height, params.width)
    return vis.reshape(shape), cov.reshape(shape)


def overlay_ratio(robot: Sequence[Capsule], human: Sequence[Capsule], cam_pose,
                  params: RenderParams = RenderParams()) -> float:
    """Covered robot pixels over visible robot pixels; ``nan`` when no robot pixel is visible.

    A robot pixel is covered when the nearest human surface along the ray lies
    in front of, or inside, the robot link it hits (up to ``depth_slack``
    beyond the link's far side). Human geometry entirely behind the link does
    not count.
    """
    if not robot:
        raise ValueError("need at least one robot capsule")
    pos, rot = cam_pose
    if not isinstance(rot, Rotation):
        rot = Rotation.from_quat(rot)
    cam_pose = (np.asarray(pos, dtype=float), rot)
    box = _screen_bbox(robot, cam_pose, params)
    rows, cols = box if box is not None else (slice(None), slice(None))
    ro, _, rd, near_t = _camera_rays(cam_pose, params, rows, cols)
    if rd.shape[0] == 0:
        return math.nan
    tr, tr_out = _nearest_interval(ro, rd, robot)
    vis = np.isfinite(tr) & (tr >= near_t)
    n_vis = int(vis.sum())
    if n_vis == 0:
        return math.nan
    rd_v = rd[vis]
    th = _nearest_hit(ro, rd_v, human) if human else np.full(n_vis, np.inf)
    cov = (th >= near_t[vis]) & (th <= tr_out[vis] + params.depth_slack)
    return int(cov.sum()) / n_vis


# -- records and CSV ---------------------------------------------------------

CSV_VERSION = "armalign-metrics v1"


@dataclass
class MetricsRecord:
    solver: str
    frame: int
    t: float
    side: str
    overlay: float
    dx_e: float
    dx_w: float
    su_dev: float
    sf_dev: float
    solve_time_us: float
    flags: str = ""


RECORD_COLUMNS = [f.name for f in fields(MetricsRecord)]
METRIC_COLUMNS = ("overlay", "dx_e", "dx_w", "su_dev", "sf_dev", "solve_time_us")
TIMING_COLUMNS = ("solve_time_us",)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_records_csv(records: Iterable[MetricsRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# {CSV_VERSION} frames\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])


def aggregate(records: Iterable[MetricsRecord]) -> dict[str, dict[str, tuple[float, float, float]]]:
    """Per solver and metric: ``(median, min, max)`` ignoring undefined values."""
    by_solver: dict[str, list[MetricsRecord]] = {}
    for r in records:
        by_solver.setdefault(r.solver, []).append(r)
    out = {}
    for name, recs in by_solver.items():
        out[name] = {}
        for col in METRIC_COLUMNS:
            v = np.array([getattr(r, col) for r in recs], dtype=float)
            v = v[np.isfinite(v)]
            out[name][col] = ((float(np.median(v)), float(v.min()), float(v.max()))
                              if v.size else (math.nan, math.nan, math.nan))
    return out


def summary_columns() -> list[str]:
    return ["solver", "n"] + [f"{c}_{s}" for c in METRIC_COLUMNS for s in ("median", "min", "max")]


def write_summary_csv(records: Sequence[MetricsRecord], path) -> None:
    agg = aggregate(records)
    counts: dict[str, int] = {}
    for r in records:
        counts[r.solver] = counts.get(r.solver, 0) + 1
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# {CSV_VERSION} summary\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(summary_columns())
        for name, stats in agg.items():
            row = [name, counts[name]]
            for c in METRIC_COLUMNS:
                row += [_fmt(x) for x in stats[c]]
            w.writerow(row)
