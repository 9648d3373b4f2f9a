"""Simulated deposition cell.

The true process follows the same power law as the planning model, but its
coefficients slide from the cold fit to the hot fit as heat builds up in the
part.  Heat is tracked by a normalised temperature ``lambda`` in [0, 1] with a
first-order lag per layer.  A Gaussian height sensor stands in for the
camera-based measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .model import COLD, HOT, ModelCoefficients, ProcessBounds, predict


@dataclass(frozen=True)
class ThermalConfig:
    tau_layers: float = 10.0
    lambda_init: float = 0.0
    interlayer_cooling: float = 0.0

    def __post_init__(self):
        if not self.tau_layers > 0.0:
            raise DomainError(f"tau_layers must be > 0, got {self.tau_layers}")
        if not 0.0 <= self.lambda_init <= 1.0:
            raise DomainError(f"lambda_init must lie in [0, 1], got {self.lambda_init}")
        if not 0.0 <= self.interlayer_cooling < 1.0:
            raise DomainError(
                f"interlayer_cooling must lie in [0, 1), got {self.interlayer_cooling}"
            )

    @classmethod
    def pinned(cls, lam: float) -> ThermalConfig:
        """Temperature frozen at ``lam`` for the whole build."""
        return cls(tau_layers=math.inf, lambda_init=lam)


@dataclass(frozen=True)
class SensorConfig:
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.noise_sigma >= 0.0:
            raise DomainError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class PlantState:
    lam: float
    h_true: np.ndarray
    layer_count: int = 0

    @classmethod
    def initial(cls, n_segments: int, thermal: ThermalConfig) -> PlantState:
        return cls(thermal.lambda_init, np.zeros(n_segments), 0)


def effective_coefficients(lam: float, cold: ModelCoefficients = COLD,
                           hot: ModelCoefficients = HOT) -> ModelCoefficients:
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    return ModelCoefficients(
        (1.0 - lam) * cold.a + lam * hot.a,
        (1.0 - lam) * cold.b + lam * hot.b,
        f"lambda={lam:.6g}",
    )


def thermal_step(state: PlantState, cfg: ThermalConfig) -> float:
    lam = state.lam * (1.0 - cfg.interlayer_cooling)
    # -expm1(-x) keeps the pinned case (tau = inf) at exactly zero heating.
    lam = lam + (1.0 - lam) * -math.expm1(-1.0 / cfg.tau_layers)
    return min(max(lam, 0.0), 1.0)


def deposit_layer(state: PlantState, v_t, cold: ModelCoefficients = COLD,
                  hot: ModelCoefficients = HOT, cfg: ThermalConfig = ThermalConfig(),
                  bounds: ProcessBounds | None = None):
    """Weld one layer at the layer-start temperature; returns ``(new_state, dh)``."""
    v = np.asarray(getattr(v_t, "v_t", v_t), dtype=float)
    if v.shape != state.h_true.shape:
        raise ShapeError(f"speed vector {v.shape} does not match plant {state.h_true.shape}")
    if bounds is not None:
        tol = 1e-9 * bounds.v_t_max
        if v.min() < bounds.v_t_min - tol or v.max() > bounds.v_t_max + tol:
            raise DomainError(
                f"torch speeds [{v.min():.4f}, {v.max():.4f}] mm/s outside process "
                f"limits [{bounds.v_t_min}, {bounds.v_t_max}]"
            )
    dh = predict(effective_coefficients(state.lam, cold, hot), v)
    new_state = PlantState(
        lam=thermal_step(state, cfg),
        h_true=state.h_true + dh,
        layer_count=state.layer_count + 1,
    )
    return new_state, dh


@dataclass
class HeightSensor:
    """Additive Gaussian noise on the true heights, from a private seeded stream."""

    cfg: SensorConfig = field(default_factory=SensorConfig)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.cfg.seed)

    def measure(self, state: PlantState) -> np.ndarray:
        if self.cfg.noise_sigma == 0.0:
            return state.h_true.copy()
        return state.h_true + self._rng.normal(0.0, self.cfg.noise_sigma, state.h_true.shape)


def measure_layer(state: PlantState, sensor: HeightSensor) -> np.ndarray:
    return sensor.measure(state)


__all__ = [
    "ThermalConfig", "SensorConfig", "PlantState", "HeightSensor",
    "effective_coefficients", "thermal_step", "deposit_layer", "measure_layer",
]
