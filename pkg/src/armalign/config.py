"""Plain-text ``key = value`` configuration.

Lines starting with ``#`` are comments. Lengths are in meters, angles in
radians, rates in Hz. Recognised keys and their defaults are in ``DEFAULTS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .armmodel import ANGLE_CLOSED, ANGLE_OPEN, HumanArmModel, JointConstraints, default_model
from .metrics import RenderParams
from .onia import OniaParams

DEFAULTS: dict[str, float] = {
    "model.shoulder_half_width": 0.18,
    "model.shoulder_height": 1.10,
    "model.upper_arm_length": 0.25,
    "model.forearm_length": 0.24,
    "constraints.swing_max": math.radians(85.0),
    "constraints.twist_min": math.radians(-75.0),
    "constraints.twist_max": math.radians(75.0),
    "constraints.hinge_min": 0.0,
    "constraints.hinge_max": math.radians(150.0),
    "constraints.stretch_min": 0.8,
    "constraints.stretch_max": 1.3,
    "gesture.angle_closed": ANGLE_CLOSED,
    "gesture.angle_open": ANGLE_OPEN,
    "onia.alpha_e": 0.4,
    "jacobian.lambda": 0.2,
    "jacobian.w_e": 0.1,
    "jacobian.step_cap": 0.5,
    "jacobian.max_iters": 100,
    "jacobian.tol": 1e-3,
    "fabrik.eps_w": 0.005,
    "fabrik.eps_max": 0.30,
    "fabrik.d_eps": 0.002,
    "fabrik.n_init": 8,
    "fabrik.n_refine": 5,
    "render.width": 512,
    "render.height": 512,
    "render.fov_y": math.radians(60.0),
    "render.near": 0.05,
    "render.depth_slack": 0.01,
    "filter.beta": 0.2,
}

_INT_KEYS = {"jacobian.max_iters", "fabrik.n_init", "fabrik.n_refine", "render.width", "render.height"}


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            self.values[key] = int(raw) if key in _INT_KEYS else float(raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}") from None

    def constraints(self) -> JointConstraints:
        v = self.values
        return JointConstraints(
            swing_max=v["constraints.swing_max"],
            twist_min=v["constraints.twist_min"], twist_max=v["constraints.twist_max"],
            hinge_min=v["constraints.hinge_min"], hinge_max=v["constraints.hinge_max"],
            stretch_min=v["constraints.stretch_min"], stretch_max=v["constraints.stretch_max"],
        )

    def model(self, side: str) -> HumanArmModel:
        v = self.values
        return default_model(
            side,
            shoulder_half_width=v["model.shoulder_half_width"],
            shoulder_height=v["model.shoulder_height"],
            upper_len=v["model.upper_arm_length"],
            fore_len=v["model.forearm_length"],
            constraints=self.constraints(),
        )

    def onia(self) -> OniaParams:
        return OniaParams(self.values["onia.alpha_e"])

    def jacobian(self) -> dict:
        v = self.values
        return dict(lam=v["jacobian.lambda"], w_e=v["jacobian.w_e"], step_cap=v["jacobian.step_cap"],
                    max_iters=v["jacobian.max_iters"], tol=v["jacobian.tol"])

    def fabrik(self) -> dict:
        v = self.values
        return dict(eps_w=v["fabrik.eps_w"], eps_max=v["fabrik.eps_max"], d_eps=v["fabrik.d_eps"],
                    n_init=v["fabrik.n_init"], n_refine=v["fabrik.n_refine"])

    def render(self) -> RenderParams:
        v = self.values
        return RenderParams(width=v["render.width"], height=v["render.height"], fov_y=v["render.fov_y"],
                            near=v["render.near"], depth_slack=v["render.depth_slack"])


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = base or Config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        try:
            cfg.set(key, val)
        except ConfigError as e:
            raise ConfigError(f"line {lineno}: {e}") from None
    return cfg


def load_config(path) -> Config:
    return parse_config(Path(path).read_text(encoding="utf-8"))
