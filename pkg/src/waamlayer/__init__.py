"""Variable-height layer planning and closed-loop height control for wire-arc AM."""

__version__ = "0.1.0"

from .controller import (
    LayerError, SolverConfig, VelocityProfile, corrected_target, default_beta,
    layer_error, solve_velocity_profile,
)
from .harness import (
    RunTrace, ScenarioSpec, compare_scenarios, export_results, layer_rmse,
    run_comparison, run_scenario,
)
from .kernels import BACKEND
from .model import (
    COLD, HOT, CalibrationSample, ModelCoefficients, ProcessBounds, calibrate,
    invert, predict,
)
from .plant import (
    HeightSensor, PlantState, SensorConfig, ThermalConfig, deposit_layer,
    effective_coefficients, measure_layer, thermal_step,
)
from .planner import (
    LayerPlan, PartSpec, SliceGeometry, compute_slice_geometry, generate_layer_plans,
    max_angle_increment, nominal_velocity_plan,
)
