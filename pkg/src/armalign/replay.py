"""Replay a frame sequence through one or more solvers and collect metrics.

Every solver sees the identical world-frame sequence. Stateful solvers keep
one instance per arm and are fed frames in order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .armmodel import align_body
from .config import Config
from .fabrik import FabrikSolver
from .jacobian import JacobianSolver
from .metrics import (MetricsRecord, deviations, human_capsules, overlay_ratio, robot_capsules,
                      stretch_metrics, timed)
from .onia import OniaSolver
from .session import SessionFrame, to_world

SOLVERS = ("onia", "jacobian", "fabrik")
SIDES = ("left", "right")


def make_solver(name: str, cfg: Config, side: str):
    model = cfg.model(side)
    if name == "onia":
        return OniaSolver(model, cfg.onia())
    if name == "jacobian":
        return JacobianSolver(model, **cfg.jacobian())
    if name == "fabrik":
        return FabrikSolver(model, **cfg.fabrik())
    raise ValueError(f"unknown solver {name!r}; expected one of {', '.join(SOLVERS)}")


def solver_names(selection: str) -> tuple[str, ...]:
    if selection == "all":
        return SOLVERS
    if selection not in SOLVERS:
        raise ValueError(f"unknown solver {selection!r}; expected one of {', '.join(SOLVERS)} or all")
    return (selection,)


@dataclass
class ReplayOptions:
    overlay: bool = True
    overlay_stride: int = 1

    def __post_init__(self):
        if self.overlay_stride < 1:
            raise ValueError("overlay_stride must be at least 1")


def replay(frames: Sequence[SessionFrame], solvers: Sequence[str], cfg: Config | None = None,
           opts: ReplayOptions | None = None) -> list[MetricsRecord]:
    """Rows ordered by solver, then frame, then side (left before right)."""
    cfg = cfg or Config()
    opts = opts or ReplayOptions()
    render = cfg.render()
    base = {side: cfg.model(side) for side in SIDES}
    world = [to_world(fr) for fr in frames]
    # the body pre-alignment depends only on the frame, not on the solver
    models = []
    aligned = {}
    for fr in world:
        key = tuple(tuple(p.tolist()) for p in fr.shoulder_refs)
        if key not in aligned:
            al = align_body((base["left"].x_s_h, base["right"].x_s_h), fr.shoulder_refs)
            aligned[key] = {side: base[side].transformed(al) for side in SIDES}
        models.append(aligned[key])

    records = []
    for name in solvers:
        inst = {side: make_solver(name, cfg, side) for side in SIDES}
        for i, fr in enumerate(world):
            for side in SIDES:
                model = models[i][side]
                refs = fr.arm(side)
                pose, dt = timed(inst[side].solve, refs, model)
                dx_e, dx_w = deviations(model, pose, refs)
                su, sf = stretch_metrics(pose)
                overlay = math.nan
                if opts.overlay and i % opts.overlay_stride == 0:
                    overlay = overlay_ratio(robot_capsules(fr.shoulder(side), refs),
                                            human_capsules(model, pose), fr.cam_pose, render)
                records.append(MetricsRecord(name, i, fr.t, side, overlay, dx_e, dx_w, su, sf,
                                             dt * 1e6, ";".join(sorted(pose.flags))))
    return records
