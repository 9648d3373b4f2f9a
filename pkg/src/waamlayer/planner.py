"""Angled-layer slicing of a bent tube.

The tube is reduced to a 1-D radial profile: N segment centres spread evenly
across the tube diameter, each at distance ``r_k`` from the bend axis.  A tilted
layer rotates the top surface by ``theta`` about the bend axis, which asks for
``r_k * theta`` of material at segment k.  Straight base layers of uniform
height come first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .controller import VelocityProfile
from .errors import DomainError, GeometryInfeasibleError, PlanInfeasibleError
from .model import ModelCoefficients, ProcessBounds, invert

# Slack for floating point round-off in bound checks.
_EPS = 1e-12


@dataclass(frozen=True)
class PartSpec:
    tube_diameter: float = 50.0
    bend_radius: float = 224.0
    final_angle: float = math.pi / 4
    base_height: float = 5.0

    def __post_init__(self):
        if not self.tube_diameter > 0.0:
            raise DomainError(f"tube_diameter must be > 0, got {self.tube_diameter}")
        if not self.bend_radius > self.tube_diameter / 2:
            raise DomainError("bend_radius must exceed half the tube diameter")
        if not (0.0 < self.final_angle <= math.pi / 2 + _EPS):
            raise DomainError(f"final_angle must lie in (0, pi/2], got {self.final_angle}")
        if self.base_height < 0.0:
            raise DomainError(f"base_height must be >= 0, got {self.base_height}")


@dataclass(frozen=True)
class SliceGeometry:
    p_rot: float
    l: float
    segment_positions: np.ndarray
    r_of_segment: np.ndarray

    @property
    def n_segments(self) -> int:
        return len(self.r_of_segment)


@dataclass(frozen=True)
class LayerPlan:
    layer_index: int
    segment_positions: np.ndarray
    h_d: np.ndarray
    dh_nom: np.ndarray
    tilt: float = 0.0
    kind: str = "tilted"


@dataclass(frozen=True)
class PlanSummary:
    theta_max: float
    theta_min: float
    theta: float
    n_base: int
    n_tilted: int
    dh_min_planned: float
    dh_max_planned: float
    bounds: ProcessBounds
    plans: list = field(repr=False, default_factory=list)

    @property
    def n_layers(self) -> int:
        return self.n_base + self.n_tilted

    @property
    def lower_margin(self) -> float:
        return self.dh_min_planned - self.bounds.dh_min

    @property
    def upper_margin(self) -> float:
        return self.bounds.dh_max - self.dh_max_planned


def compute_slice_geometry(part: PartSpec, n_segments: int = 50) -> SliceGeometry:
    """Place segment centres across the diameter; positions are relative to the tube axis."""
    if n_segments < 2:
        raise DomainError(f"n_segments must be >= 2, got {n_segments}")
    half = part.tube_diameter / 2
    positions = np.linspace(-half, half, n_segments)
    p_rot = -part.bend_radius
    return SliceGeometry(
        p_rot=p_rot,
        l=part.tube_diameter,
        segment_positions=positions,
        r_of_segment=positions - p_rot,
    )


def feasible_theta_range(geom: SliceGeometry, bounds: ProcessBounds) -> tuple[float, float]:
    """Interval of angle increments whose deposits all fit inside the height bounds."""
    r = geom.r_of_segment
    return bounds.dh_min / float(r.min()), bounds.dh_max / float(r.max())


def max_angle_increment(geom: SliceGeometry, bounds: ProcessBounds) -> float:
    lo, hi = feasible_theta_range(geom, bounds)
    if lo > hi * (1 + _EPS):
        r = geom.r_of_segment
        raise GeometryInfeasibleError(
            f"no angle increment fits the process envelope: need "
            f"dh_min/dh_max = {bounds.dh_min / bounds.dh_max:.4f} <= "
            f"r_min/r_max = {r.min() / r.max():.4f}"
        )
    return hi


def _base_layer_heights(base_height: float, bounds: ProcessBounds) -> list[float]:
    if base_height == 0.0:
        return []
    n = max(1, math.ceil(base_height / bounds.dh_max - _EPS))
    dh = base_height / n
    if dh < bounds.dh_min - _EPS:
        raise GeometryInfeasibleError(
            f"base height {base_height} mm cannot be split into layers within "
            f"[{bounds.dh_min:.4f}, {bounds.dh_max:.4f}] mm"
        )
    return [dh] * n


def generate_layer_plans(part: PartSpec, geom: SliceGeometry, bounds: ProcessBounds,
                         theta: float | None = None) -> list[LayerPlan]:
    """Base layers followed by tilted layers that sweep ``part.final_angle``.

    The sweep uses ``ceil(final_angle / theta)`` equal increments, so the last
    layer never overshoots and every deposit stays inside the height bounds.
    """
    return plan_part(part, geom, bounds, theta).plans


def plan_part(part: PartSpec, geom: SliceGeometry, bounds: ProcessBounds,
              theta: float | None = None) -> PlanSummary:
    theta_max = max_angle_increment(geom, bounds)
    theta_min, _ = feasible_theta_range(geom, bounds)
    if theta is None:
        theta = theta_max
    if not theta > 0.0:
        raise DomainError(f"theta must be > 0, got {theta}")
    if theta > theta_max * (1 + _EPS):
        raise GeometryInfeasibleError(
            f"theta = {theta:.6g} rad exceeds the maximum increment {theta_max:.6g} rad"
        )
    n_tilted = math.ceil(part.final_angle / theta - 1e-12)
    step = part.final_angle / n_tilted
    if step < theta_min * (1 - _EPS):
        raise GeometryInfeasibleError(
            f"angle increment {step:.6g} rad is below the minimum {theta_min:.6g} rad "
            f"(innermost deposit would fall under dh_min)"
        )

    r = geom.r_of_segment
    pos = geom.segment_positions
    n = len(r)
    h_d = np.zeros(n)
    plans = []
    for dh in _base_layer_heights(part.base_height, bounds):
        dh_nom = np.full(n, dh)
        h_d = h_d + dh_nom
        plans.append(LayerPlan(len(plans) + 1, pos, h_d, dh_nom, 0.0, "base"))
    tilted_dh = r * step
    for j in range(1, n_tilted + 1):
        h_d = h_d + tilted_dh
        plans.append(LayerPlan(len(plans) + 1, pos, h_d, tilted_dh, j * step, "tilted"))

    all_dh = np.concatenate([p.dh_nom for p in plans])
    return PlanSummary(
        theta_max=theta_max,
        theta_min=theta_min,
        theta=step,
        n_base=len(plans) - n_tilted,
        n_tilted=n_tilted,
        dh_min_planned=float(all_dh.min()),
        dh_max_planned=float(all_dh.max()),
        bounds=bounds,
        plans=plans,
    )


def nominal_velocity_plan(plans: Sequence[LayerPlan], model: ModelCoefficients,
                          bounds: ProcessBounds) -> list[VelocityProfile]:
    """Open-loop speeds: the model inverse of each nominal deposition."""
    profiles = []
    for plan in plans:
        v = invert(model, plan.dh_nom)
        tol = 1e-9 * bounds.v_t_max
        if v.min() < bounds.v_t_min - tol or v.max() > bounds.v_t_max + tol:
            raise PlanInfeasibleError(
                f"layer {plan.layer_index}: nominal speeds [{v.min():.4f}, {v.max():.4f}] "
                f"mm/s leave [{bounds.v_t_min}, {bounds.v_t_max}] under model "
                f"{model.label or (model.a, model.b)}"
            )
        profiles.append(VelocityProfile(plan.layer_index, np.clip(v, bounds.v_t_min, bounds.v_t_max)))
    return profiles


def plans_to_dict(summary: PlanSummary, geom: SliceGeometry) -> dict:
    b = summary.bounds
    return {
        "theta": summary.theta,
        "theta_max": summary.theta_max,
        "theta_min": summary.theta_min,
        "n_base_layers": summary.n_base,
        "n_tilted_layers": summary.n_tilted,
        "p_rot": geom.p_rot,
        "l": geom.l,
        "r_of_segment": geom.r_of_segment.tolist(),
        "bounds": {"v_t_min": b.v_t_min, "v_t_max": b.v_t_max,
                   "dh_min": b.dh_min, "dh_max": b.dh_max},
        "layers": [
            {
                "layer": p.layer_index,
                "kind": p.kind,
                "tilt": p.tilt,
                "segment_positions": p.segment_positions.tolist(),
                "h_d": p.h_d.tolist(),
                "dh_nom": p.dh_nom.tolist(),
            }
            for p in summary.plans
        ],
    }


def write_plans(path, summary: PlanSummary, geom: SliceGeometry) -> None:
    Path(path).write_text(json.dumps(plans_to_dict(summary, geom), indent=1) + "\n")
