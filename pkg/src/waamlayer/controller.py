"""Layer-to-layer height correction.

After each layer the measured height error is subtracted from the next
layer's nominal deposition, and the torch speeds for that corrected target
are found by minimising the height residual plus a penalty on speed jumps
between adjacent segments, inside the torch speed box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError
from .model import ModelCoefficients, ProcessBounds, invert


@dataclass(frozen=True)
class VelocityProfile:
    layer_index: int
    v_t: np.ndarray

    def __post_init__(self):
        if np.asarray(self.v_t).ndim != 1 or len(self.v_t) == 0:
            raise ShapeError("velocity profile must be a non-empty vector")


@dataclass(frozen=True)
class LayerError:
    layer_index: int
    e: np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    dv_t_max: float = 2.0
    beta: float | None = None
    tolerance: float = 1e-8
    max_iterations: int = 200

    def __post_init__(self):
        if not self.dv_t_max > 0.0:
            raise DomainError(f"dv_t_max must be > 0, got {self.dv_t_max}")
        if self.beta is not None and not self.beta >= 0.0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if not self.tolerance > 0.0:
            raise DomainError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")

    @property
    def effective_beta(self) -> float:
        return default_beta(self.dv_t_max) if self.beta is None else self.beta


@dataclass(frozen=True)
class SolveDiagnostics:
    objective: float
    initial_objective: float
    iterations: int
    converged: bool
    projected_gradient: float
    active_lower: np.ndarray
    active_upper: np.ndarray
    history: tuple = ()

    @property
    def n_active(self) -> int:
        return int(self.active_lower.sum() + self.active_upper.sum())


def layer_error(measured, desired, layer_index: int = 0) -> LayerError:
    measured = np.asarray(measured, dtype=float)
    desired = np.asarray(desired, dtype=float)
    if measured.shape != desired.shape:
        raise ShapeError(f"shape mismatch: measured {measured.shape} vs desired {desired.shape}")
    return LayerError(layer_index, measured - desired)


def corrected_target(dh_nom, prev_error: LayerError):
    dh_nom = np.asarray(dh_nom, dtype=float)
    if dh_nom.shape != prev_error.e.shape:
        raise ShapeError(f"shape mismatch: dh_nom {dh_nom.shape} vs error {prev_error.e.shape}")
    return dh_nom - prev_error.e


def default_beta(dv_t_max: float) -> float:
    if not dv_t_max > 0.0:
        raise DomainError(f"dv_t_max must be > 0, got {dv_t_max}")
    return 1.0 / dv_t_max ** 2


def objective(v, dh_d, model: ModelCoefficients, beta: float) -> float:
    return kernels.objective(np.asarray(v, float), np.asarray(dh_d, float),
                             model.c, model.a, beta)


def objective_gradient(v, dh_d, model: ModelCoefficients, beta: float) -> np.ndarray:
    return kernels.gradient(np.asarray(v, float), np.asarray(dh_d, float),
                            model.c, model.a, beta)


def initial_profile(dh_d, model: ModelCoefficients, bounds: ProcessBounds) -> np.ndarray:
    """Separable warm start: per-segment inverse of the clamped target, clamped to the box."""
    h = np.clip(np.asarray(dh_d, dtype=float), bounds.dh_min, bounds.dh_max)
    v = np.clip(invert(model, h), bounds.v_t_min, bounds.v_t_max)
    # Snap saturated targets onto the box so round-off in invert() cannot leave them a hair inside.
    v[h >= bounds.dh_max] = bounds.v_t_min
    v[h <= bounds.dh_min] = bounds.v_t_max
    return v


def solve_velocity_profile(dh_d, model: ModelCoefficients, bounds: ProcessBounds,
                           cfg: SolverConfig = SolverConfig(), v_init=None,
                           layer_index: int = 0, backend=None):
    """Box-constrained smoothed inverse of the deposition model.

    Returns ``(VelocityProfile, SolveDiagnostics)``.  Non-convergence is
    reported through ``diagnostics.converged`` rather than raised.
    """
    dh_d = np.asarray(dh_d, dtype=float)
    if dh_d.ndim != 1 or len(dh_d) == 0:
        raise ShapeError("target deposition must be a non-empty vector")
    if not np.all(np.isfinite(dh_d)):
        raise DomainError("target deposition contains non-finite values")
    if not model.a < 0.0:
        raise DomainError(f"deposition model must be decreasing in speed (a < 0), got a={model.a}")
    if v_init is None:
        v0 = initial_profile(dh_d, model, bounds)
    else:
        v0 = np.asarray(getattr(v_init, "v_t", v_init), dtype=float)
        if v0.shape != dh_d.shape:
            raise ShapeError(f"v_init shape {v0.shape} does not match target {dh_d.shape}")
    impl = kernels if backend is None else backend
    beta = cfg.effective_beta
    lo, hi = bounds.v_t_min, bounds.v_t_max
    v, F, iters, converged, history = impl.solve(
        dh_d, model.c, model.a, beta, lo, hi, v0, cfg.tolerance, cfg.max_iterations
    )
    v = np.clip(np.asarray(v, dtype=float), lo, hi)
    g = impl.gradient(v, dh_d, model.c, model.a, beta)
    pg = float(np.max(np.abs(v - np.clip(v - g, lo, hi))))
    diag = SolveDiagnostics(
        objective=float(F),
        initial_objective=float(history[0]),
        iterations=int(iters),
        converged=bool(converged),
        projected_gradient=pg,
        active_lower=(v == lo) & (g > 0.0),
        active_upper=(v == hi) & (g < 0.0),
        history=tuple(history),
    )
    return VelocityProfile(layer_index, v), diag


def max_adjacent_jump(v) -> float:
    v = np.asarray(getattr(v, "v_t", v), dtype=float)
    return float(np.max(np.abs(np.diff(v)))) if len(v) > 1 else 0.0


__all__ = [
    "VelocityProfile", "LayerError", "SolverConfig", "SolveDiagnostics",
    "layer_error", "corrected_target", "default_beta", "objective",
    "objective_gradient", "initial_profile", "solve_velocity_profile",
    "max_adjacent_jump",
]
