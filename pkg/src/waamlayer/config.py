"""Run configuration: one INI file with a section per sub-config.

Sections and keys (every key optional; defaults below)::

    [part]       tube_diameter, bend_radius, final_angle_deg, base_height,
                 n_segments, theta, theta_scale
    [bounds]     v_t_min, v_t_max, envelope (both | cold | hot | planning)
    [model.cold] a, b
    [model.hot]  a, b
    [solver]     dv_t_max, beta, tolerance, max_iterations
    [thermal]    tau_layers, lambda_init, interlayer_cooling
    [sensor]     noise_sigma, seed
    [scenario]   feedback, planning_model, standoff_limit, strict_solver

``envelope`` picks which model(s) turn the speed box into height bounds;
``both`` keeps the plan feasible for the cold and the hot model alike.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path
from typing import Iterable

from .controller import SolverConfig
from .errors import ConfigError, WaamError
from .harness import ScenarioSpec
from .model import ModelCoefficients, ProcessBounds
from .plant import SensorConfig, ThermalConfig
from .planner import PartSpec

DEFAULTS = {
    "part": {
        "tube_diameter": "50.0",
        "bend_radius": "224.0",
        "final_angle_deg": "45.0",
        "base_height": "5.0",
        "n_segments": "50",
        "theta": "",
        "theta_scale": "0.9",
    },
    "bounds": {"v_t_min": "3.0", "v_t_max": "17.0", "envelope": "both"},
    "model.cold": {"a": "-0.4619", "b": "1.647"},
    "model.hot": {"a": "-0.3700", "b": "1.215"},
    "solver": {"dv_t_max": "2.0", "beta": "", "tolerance": "1e-8", "max_iterations": "200"},
    "thermal": {"tau_layers": "10.0", "lambda_init": "0.0", "interlayer_cooling": "0.0"},
    "sensor": {"noise_sigma": "0.1", "seed": "0"},
    "scenario": {
        "feedback": "closed-loop",
        "planning_model": "cold",
        "standoff_limit": "10.0",
        "strict_solver": "false",
    },
}

ENVELOPES = ("both", "cold", "hot", "planning")


def load_config(path=None, overrides: Iterable[str] = ()) -> configparser.ConfigParser:
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                cp.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        apply_override(cp, item)
    _check_keys(cp)
    return cp


def apply_override(cp: configparser.ConfigParser, item: str) -> None:
    key, sep, value = item.partition("=")
    section, dot, option = key.strip().rpartition(".")
    if not sep or not dot or not section or not option:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    if section not in DEFAULTS:
        raise ConfigError(f"unknown config section {section!r} in override {item!r}")
    cp.set(section, option, value.strip())


def _check_keys(cp: configparser.ConfigParser) -> None:
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - set(DEFAULTS[section])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _float(cp, section, key, optional=False):
    raw = cp.get(section, key).strip()
    if optional and raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _int(cp, section, key):
    raw = cp.get(section, key).strip()
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def build_bounds(cp, cold: ModelCoefficients, hot: ModelCoefficients,
                 planning_model: str) -> ProcessBounds:
    envelope = cp.get("bounds", "envelope").strip()
    if envelope not in ENVELOPES:
        raise ConfigError(f"[bounds] envelope must be one of {ENVELOPES}, got {envelope!r}")
    if envelope == "planning":
        envelope = planning_model
    models = {"both": [cold, hot], "cold": [cold], "hot": [hot]}[envelope]
    return ProcessBounds.common(models, _float(cp, "bounds", "v_t_min"),
                                _float(cp, "bounds", "v_t_max"))


def scenario_from_config(cp: configparser.ConfigParser) -> ScenarioSpec:
    """Build the scenario described by ``cp``; validation errors become ConfigError."""
    try:
        cold = ModelCoefficients(_float(cp, "model.cold", "a"), _float(cp, "model.cold", "b"), "cold")
        hot = ModelCoefficients(_float(cp, "model.hot", "a"), _float(cp, "model.hot", "b"), "hot")
        planning = cp.get("scenario", "planning_model").strip()
        part = PartSpec(
            tube_diameter=_float(cp, "part", "tube_diameter"),
            bend_radius=_float(cp, "part", "bend_radius"),
            final_angle=math.radians(_float(cp, "part", "final_angle_deg")),
            base_height=_float(cp, "part", "base_height"),
        )
        strict = cp.get("scenario", "strict_solver").strip().lower()
        if strict not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"[scenario] strict_solver: expected a boolean, got {strict!r}")
        return ScenarioSpec(
            feedback=cp.get("scenario", "feedback").strip(),
            planning_model=planning,
            part=part,
            bounds=build_bounds(cp, cold, hot, planning),
            solver=SolverConfig(
                dv_t_max=_float(cp, "solver", "dv_t_max"),
                beta=_float(cp, "solver", "beta", optional=True),
                tolerance=_float(cp, "solver", "tolerance"),
                max_iterations=_int(cp, "solver", "max_iterations"),
            ),
            thermal=ThermalConfig(
                tau_layers=_float(cp, "thermal", "tau_layers"),
                lambda_init=_float(cp, "thermal", "lambda_init"),
                interlayer_cooling=_float(cp, "thermal", "interlayer_cooling"),
            ),
            sensor=SensorConfig(
                noise_sigma=_float(cp, "sensor", "noise_sigma"),
                seed=_int(cp, "sensor", "seed"),
            ),
            cold=cold,
            hot=hot,
            n_segments=_int(cp, "part", "n_segments"),
            theta=_float(cp, "part", "theta", optional=True),
            theta_scale=_float(cp, "part", "theta_scale"),
            standoff_limit=_float(cp, "scenario", "standoff_limit"),
            strict_solver=strict in ("true", "1", "yes"),
        )
    except ConfigError:
        raise
    except WaamError as exc:
        if isinstance(exc, ValueError):
            raise ConfigError(str(exc)) from None
        raise
