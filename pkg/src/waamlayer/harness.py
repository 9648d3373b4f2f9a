"""Open/closed-loop builds against the simulated plant, and their comparison.

Four scenarios share one nominal plan and one sensor seed: open-loop with the
cold model (OC), open-loop with the hot model (OH), and their closed-loop
counterparts (CC, CH).  Quality is the per-layer RMSE of the height error.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .controller import (
    LayerError, SolverConfig, corrected_target, layer_error, solve_velocity_profile,
)
from .errors import ComparisonError, ConfigError, ShapeError, SolverError, WaamError
from .model import COLD, HOT, ModelCoefficients, ProcessBounds
from .plant import HeightSensor, PlantState, SensorConfig, ThermalConfig, deposit_layer
from .planner import (
    PartSpec, compute_slice_geometry, max_angle_increment, nominal_velocity_plan, plan_part,
)

log = logging.getLogger(__name__)

FEEDBACK_MODES = ("open-loop", "closed-loop")
PLANNING_MODELS = ("cold", "hot")

# Layer RMSE (mm) from the physical builds, kept as reference metadata only.
REFERENCE_RMSE = {
    "OC": {"max_rmse": 47.73, "final_rmse": 47.73},
    "OH": {"max_rmse": 10.55, "final_rmse": 10.55},
    "CC": {"max_rmse": 1.41, "final_rmse": 1.18},
    "CH": {"max_rmse": 1.99, "final_rmse": 0.57},
}


@dataclass(frozen=True)
class ScenarioSpec:
    feedback: str = "closed-loop"
    planning_model: str = "cold"
    part: PartSpec = field(default_factory=PartSpec)
    bounds: ProcessBounds = field(
        default_factory=lambda: ProcessBounds.common([COLD, HOT], 3.0, 17.0)
    )
    solver: SolverConfig = field(default_factory=SolverConfig)
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    cold: ModelCoefficients = COLD
    hot: ModelCoefficients = HOT
    n_segments: int = 50
    theta: float | None = None
    theta_scale: float = 0.9
    standoff_limit: float = 10.0
    strict_solver: bool = False

    def __post_init__(self):
        if self.feedback not in FEEDBACK_MODES:
            raise ConfigError(f"feedback must be one of {FEEDBACK_MODES}, got {self.feedback!r}")
        if self.planning_model not in PLANNING_MODELS:
            raise ConfigError(
                f"planning_model must be one of {PLANNING_MODELS}, got {self.planning_model!r}"
            )
        if not 0.0 < self.theta_scale <= 1.0:
            raise ConfigError(f"theta_scale must lie in (0, 1], got {self.theta_scale}")

    @property
    def name(self) -> str:
        return ("O" if self.feedback == "open-loop" else "C") + self.planning_model[0].upper()

    @property
    def model(self) -> ModelCoefficients:
        return self.cold if self.planning_model == "cold" else self.hot

    def to_dict(self) -> dict:
        d = asdict(self)
        d["name"] = self.name
        return d


@dataclass(frozen=True)
class LayerRecord:
    layer: int
    kind: str
    lam: float
    dh_nom: np.ndarray
    dh_target: np.ndarray
    v_t_applied: np.ndarray
    h_desired: np.ndarray
    h_true: np.ndarray
    h_measured: np.ndarray
    e: np.ndarray
    rmse: float
    rmse_true: float
    objective: float | None = None
    iterations: int | None = None
    converged: bool | None = None
    n_active_lower: int = 0
    n_active_upper: int = 0

    @property
    def max_abs_e(self) -> float:
        return float(np.max(np.abs(self.e)))


@dataclass
class RunTrace:
    scenario: str
    spec: dict
    seed: int
    n_segments: int
    records: list = field(default_factory=list)
    standoff_exceeded_at: int | None = None

    @property
    def n_layers(self) -> int:
        return len(self.records)

    @property
    def rmse(self) -> np.ndarray:
        return np.array([r.rmse for r in self.records])

    @property
    def unconverged_layers(self) -> list:
        return [r.layer for r in self.records if r.converged is False]

    def to_dict(self) -> dict:
        layers = []
        for r in self.records:
            d = {}
            for k, v in asdict(r).items():
                d[k] = v.tolist() if isinstance(v, np.ndarray) else v
            layers.append(d)
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "n_segments": self.n_segments,
            "standoff_exceeded_at": self.standoff_exceeded_at,
            "spec": self.spec,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunTrace:
        records = []
        for d in data["layers"]:
            d = {k: np.asarray(v, dtype=float) if isinstance(v, list) else v for k, v in d.items()}
            records.append(LayerRecord(**d))
        return cls(data["scenario"], data["spec"], data["seed"], data["n_segments"],
                   records, data.get("standoff_exceeded_at"))


def layer_rmse(e) -> float:
    """Root-mean-square of one layer's height errors, ``||e|| / sqrt(N)``."""
    e = np.asarray(getattr(e, "e", e), dtype=float)
    if e.size == 0:
        raise ShapeError("layer error vector is empty")
    return float(np.linalg.norm(e) / math.sqrt(e.size))


def plan_scenario(spec: ScenarioSpec):
    """Geometry and nominal plan for ``spec``; an explicit theta wins over theta_scale."""
    geom = compute_slice_geometry(spec.part, spec.n_segments)
    theta = spec.theta
    if theta is None and spec.theta_scale != 1.0:
        theta = spec.theta_scale * max_angle_increment(geom, spec.bounds)
    return geom, plan_part(spec.part, geom, spec.bounds, theta)


def run_scenario(spec: ScenarioSpec) -> RunTrace:
    model = spec.model
    _, summary = plan_scenario(spec)
    nominal = nominal_velocity_plan(summary.plans, model, spec.bounds)

    trace = RunTrace(spec.name, spec.to_dict(), spec.sensor.seed, spec.n_segments)
    state = PlantState.initial(spec.n_segments, spec.thermal)
    sensor = HeightSensor(spec.sensor)
    prev_error = LayerError(0, np.zeros(spec.n_segments))

    for plan, v_nom in zip(summary.plans, nominal):
        diag = None
        if spec.feedback == "open-loop":
            target = plan.dh_nom
            v = v_nom.v_t
        else:
            target = corrected_target(plan.dh_nom, prev_error)
            try:
                profile, diag = solve_velocity_profile(
                    target, model, spec.bounds, spec.solver, layer_index=plan.layer_index
                )
            except WaamError as exc:
                raise SolverError(f"layer {plan.layer_index}: {exc}", trace) from exc
            if not diag.converged:
                msg = (f"{spec.name} layer {plan.layer_index}: solver stopped after "
                       f"{diag.iterations} iterations, projected gradient "
                       f"{diag.projected_gradient:.3g}")
                if spec.strict_solver:
                    raise SolverError(msg, trace)
                log.warning(msg)
            v = profile.v_t

        lam = state.lam
        state, _ = deposit_layer(state, v, spec.cold, spec.hot, spec.thermal, spec.bounds)
        measured = sensor.measure(state)
        err = layer_error(measured, plan.h_d, plan.layer_index)
        record = LayerRecord(
            layer=plan.layer_index,
            kind=plan.kind,
            lam=lam,
            dh_nom=plan.dh_nom,
            dh_target=np.asarray(target, dtype=float),
            v_t_applied=np.asarray(v, dtype=float),
            h_desired=plan.h_d,
            h_true=state.h_true,
            h_measured=measured,
            e=err.e,
            rmse=layer_rmse(err),
            rmse_true=layer_rmse(state.h_true - plan.h_d),
            objective=None if diag is None else diag.objective,
            iterations=None if diag is None else diag.iterations,
            converged=None if diag is None else diag.converged,
            n_active_lower=0 if diag is None else int(diag.active_lower.sum()),
            n_active_upper=0 if diag is None else int(diag.active_upper.sum()),
        )
        trace.records.append(record)
        if trace.standoff_exceeded_at is None and record.max_abs_e > spec.standoff_limit:
            trace.standoff_exceeded_at = plan.layer_index
            log.info("%s: height error exceeds standoff limit %.3g mm at layer %d",
                     spec.name, spec.standoff_limit, plan.layer_index)
        prev_error = err
    return trace


def scenario_variants(base: ScenarioSpec) -> list[ScenarioSpec]:
    """The four feedback/model combinations in table order: OC, OH, CC, CH."""
    return [replace(base, feedback=fb, planning_model=pm)
            for fb in FEEDBACK_MODES for pm in PLANNING_MODELS]


def run_comparison(base: ScenarioSpec, jobs: int = 1) -> list[RunTrace]:
    specs = scenario_variants(base)
    if jobs <= 1:
        return [run_scenario(s) for s in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_scenario, specs))


@dataclass(frozen=True)
class ComparisonReport:
    scenarios: list
    max_rmse: list
    final_rmse: list
    final_diff: list
    rmse_by_layer: np.ndarray
    n_segments: int
    seed: int
    reference: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.scenarios, self.max_rmse, self.final_rmse, self.final_diff))

    def to_dict(self) -> dict:
        return {
            "scenarios": self.scenarios,
            "max_rmse": self.max_rmse,
            "final_rmse": self.final_rmse,
            "final_rmse_minus_first": self.final_diff,
            "rmse_by_layer": self.rmse_by_layer.tolist(),
            "n_segments": self.n_segments,
            "seed": self.seed,
            "reference_physical_build": self.reference,
        }

    def format_table(self) -> str:
        lines = [f"{'Scenario':<9}{'Maximum RMSE (mm)':>19}{'Final Layer RMSE (mm)':>24}"]
        for name, mx, fin, _ in self.rows():
            lines.append(f"{name:<9}{mx:>19.4f}{fin:>24.4f}")
        lines.append(f"N = {self.n_segments} segments, {self.rmse_by_layer.shape[1]} layers, "
                     f"seed {self.seed}")
        return "\n".join(lines)


def compare_scenarios(traces: Sequence[RunTrace]) -> ComparisonReport:
    if not traces:
        raise ComparisonError("no traces to compare")
    n_layers = {t.n_layers for t in traces}
    if len(n_layers) != 1:
        raise ComparisonError(f"traces have different layer counts: {sorted(n_layers)}")
    seeds = {t.seed for t in traces}
    if len(seeds) != 1:
        raise ComparisonError(f"traces use different seeds: {sorted(seeds)}")
    if n_layers == {0}:
        raise ComparisonError("traces contain no layers")
    matrix = np.vstack([t.rmse for t in traces])
    final = [float(row[-1]) for row in matrix]
    return ComparisonReport(
        scenarios=[t.scenario for t in traces],
        max_rmse=[float(row.max()) for row in matrix],
        final_rmse=final,
        final_diff=[f - final[0] for f in final],
        rmse_by_layer=matrix,
        n_segments=traces[0].n_segments,
        seed=traces[0].seed,
        reference={t.scenario: REFERENCE_RMSE[t.scenario]
                   for t in traces if t.scenario in REFERENCE_RMSE},
    )


LAYER_CSV_COLUMNS = ("layer", "rmse", "max_abs_e", "lambda")


def write_layer_csv(path, trace: RunTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LAYER_CSV_COLUMNS)
        for r in trace.records:
            w.writerow([r.layer, repr(r.rmse), repr(r.max_abs_e), repr(r.lam)])


def read_layer_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "layer": [int(r["layer"]) for r in rows],
        "rmse": [float(r["rmse"]) for r in rows],
        "max_abs_e": [float(r["max_abs_e"]) for r in rows],
        "lambda": [float(r["lambda"]) for r in rows],
    }


def plot_rmse(path, traces: Sequence[RunTrace]) -> list[str]:
    """Log-scale RMSE-vs-layer plot, one series per trace; returns the legend labels."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for t in traces:
        ax.plot([r.layer for r in t.records], t.rmse, label=t.scenario)
    ax.set_xlabel("layer")
    ax.set_ylabel("layer RMSE (mm)")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    labels = ax.get_legend_handles_labels()[1]
    plt.close(fig)
    return labels


def export_results(traces, out_dir, report: ComparisonReport | None = None,
                   manifest_extra: dict | None = None) -> list[Path]:
    """Write layer CSVs, full trace documents, the RMSE plot and a manifest.

    Returns the paths written, manifest last.
    """
    if isinstance(traces, RunTrace):
        traces = [traces]
    if not traces or any(t.n_layers == 0 for t in traces):
        raise ValueError("refusing to export an empty trace")
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for t in traces:
            p = out / f"{t.scenario}_layers.csv"
            write_layer_csv(p, t)
            written.append(p)
            p = out / f"{t.scenario}_trace.json"
            p.write_text(json.dumps(t.to_dict()) + "\n")
            written.append(p)
        if report is not None:
            p = out / "summary.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["scenario", "max_rmse", "final_rmse", "final_rmse_minus_first"])
                for name, mx, fin, diff in report.rows():
                    w.writerow([name, repr(mx), repr(fin), repr(diff)])
            written.append(p)
            p = out / "rmse_by_layer.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["layer", *report.scenarios])
                for i, col in enumerate(report.rmse_by_layer.T, start=1):
                    w.writerow([i, *map(repr, col.tolist())])
            written.append(p)
            p = out / "report.json"
            p.write_text(json.dumps(report.to_dict(), indent=1) + "\n")
            written.append(p)
        p = out / "rmse.png"
        plot_rmse(p, traces)
        written.append(p)
        manifest = {
            "seed": traces[0].seed,
            "scenarios": [t.scenario for t in traces],
            "n_layers": traces[0].n_layers,
            "n_segments": traces[0].n_segments,
            "artifacts": [q.name for q in written],
        }
        manifest.update(manifest_extra or {})
        p = out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2) + "\n")
        written.append(p)
    except OSError as exc:
        raise OSError(f"failed writing results to {out}: {exc}") from exc
    return written
