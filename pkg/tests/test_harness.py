import json
import math
from dataclasses import replace

import numpy as np
import pytest

from waamlayer.controller import SolverConfig
from waamlayer.errors import ComparisonError, ConfigError, ShapeError, SolverError
from waamlayer.harness import (
    REFERENCE_RMSE, RunTrace, ScenarioSpec, compare_scenarios, export_results, layer_rmse,
    plot_rmse, read_layer_csv, run_comparison, run_scenario, scenario_variants,
)
from waamlayer.plant import SensorConfig, ThermalConfig


def quiet(spec, lam=0.0):
    return replace(spec, thermal=ThermalConfig.pinned(lam), sensor=SensorConfig(0.0, 0))


SMALL = ScenarioSpec(n_segments=20)


@pytest.fixture(scope="module")
def drifting_traces():
    return run_comparison(replace(SMALL, sensor=SensorConfig(0.1, 11)))


class TestLayerRmse:
    def test_zero(self):
        assert layer_rmse(np.zeros(5)) == 0.0

    def test_three_four(self):
        assert layer_rmse([3.0, 4.0]) == pytest.approx(5 / math.sqrt(2), rel=1e-15)
        assert layer_rmse([3.0, 4.0]) == 3.5355339059327373

    def test_scale_equivariance(self, rng):
        e = rng.normal(size=13)
        for c in (-3.0, 0.5, 7.0):
            assert layer_rmse(c * e) == pytest.approx(abs(c) * layer_rmse(e), rel=1e-14)

    def test_empty(self):
        with pytest.raises(ShapeError):
            layer_rmse([])


class TestScenario:
    def test_names_and_order(self):
        assert [s.name for s in scenario_variants(SMALL)] == ["OC", "OH", "CC", "CH"]

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            ScenarioSpec(feedback="sometimes")
        with pytest.raises(ConfigError):
            ScenarioSpec(planning_model="warm")
        with pytest.raises(ConfigError):
            ScenarioSpec(theta_scale=0.0)

    @pytest.mark.parametrize("feedback", ["open-loop", "closed-loop"])
    def test_perfect_model_has_no_error(self, feedback):
        spec = replace(quiet(SMALL), feedback=feedback, solver=SolverConfig(beta=0.0))
        trace = run_scenario(spec)
        assert trace.n_layers == 100
        assert trace.rmse.max() < 1e-6

    def test_trace_invariants(self, drifting_traces):
        for t in drifting_traces:
            layers = [r.layer for r in t.records]
            assert layers == sorted(set(layers)) and len(layers) == 100
            for r in t.records:
                assert abs(layer_rmse(r.e) - r.rmse) <= 1e-12
                np.testing.assert_array_equal(r.e, r.h_measured - r.h_desired)

    def test_closed_loop_beats_open_loop(self, drifting_traces):
        final = {t.scenario: t.rmse[-1] for t in drifting_traces}
        assert final["OC"] > final["CC"]
        assert final["OH"] > final["CH"]

    def test_all_solves_converged(self, drifting_traces):
        for t in drifting_traces:
            assert t.unconverged_layers == []

    def test_open_loop_applies_nominal_speeds(self, drifting_traces):
        oc = drifting_traces[0]
        for r in oc.records:
            np.testing.assert_array_equal(r.dh_target, r.dh_nom)

    def test_strict_solver_raises_with_partial_trace(self):
        spec = replace(SMALL, solver=SolverConfig(max_iterations=1), strict_solver=True,
                       thermal=ThermalConfig(tau_layers=3.0))
        with pytest.raises(SolverError) as info:
            run_scenario(spec)
        assert info.value.partial_trace is not None
        assert info.value.partial_trace.n_layers < 100

    def test_standoff_flag(self, drifting_traces):
        oc = drifting_traces[0]
        assert oc.standoff_exceeded_at is not None
        assert drifting_traces[2].standoff_exceeded_at is None

    def test_reproducible(self):
        spec = replace(SMALL, sensor=SensorConfig(0.1, 5))
        a, b = run_scenario(spec), run_scenario(spec)
        np.testing.assert_array_equal(a.rmse, b.rmse)

    def test_parallel_matches_serial(self):
        spec = replace(SMALL, n_segments=8, sensor=SensorConfig(0.1, 2))
        serial = run_comparison(spec, jobs=1)
        parallel = run_comparison(spec, jobs=4)
        for s, p in zip(serial, parallel):
            assert s.scenario == p.scenario
            np.testing.assert_array_equal(s.rmse, p.rmse)

    def test_trace_json_roundtrip(self, drifting_traces):
        t = drifting_traces[3]
        back = RunTrace.from_dict(json.loads(json.dumps(t.to_dict())))
        np.testing.assert_array_equal(back.rmse, t.rmse)
        assert back.scenario == t.scenario and back.seed == t.seed


class TestCompare:
    def test_single_trace_echo(self, drifting_traces):
        t = drifting_traces[2]
        rep = compare_scenarios([t])
        assert rep.max_rmse == [t.rmse.max()]
        assert rep.final_rmse == [t.rmse[-1]]

    def test_identical_traces_zero_diff(self, drifting_traces):
        t = drifting_traces[2]
        assert compare_scenarios([t, t]).final_diff == [0.0, 0.0]

    def test_rows_in_given_order_with_reference(self, drifting_traces):
        rep = compare_scenarios(drifting_traces[::-1])
        assert rep.scenarios == ["CH", "CC", "OH", "OC"]
        assert rep.reference["OC"] == REFERENCE_RMSE["OC"]
        assert rep.rmse_by_layer.shape == (4, 100)
        assert "Maximum RMSE" in rep.format_table()

    def test_closed_loop_bounded(self, drifting_traces):
        rep = compare_scenarios(drifting_traces)
        for name in ("CC", "CH"):
            i = rep.scenarios.index(name)
            assert np.isfinite(rep.max_rmse[i]) and rep.max_rmse[i] < 2.0

    def test_mismatched_layers(self, drifting_traces):
        short = RunTrace("X", {}, drifting_traces[0].seed, 20, drifting_traces[0].records[:5])
        with pytest.raises(ComparisonError):
            compare_scenarios([drifting_traces[0], short])

    def test_mismatched_seed(self, drifting_traces):
        t = drifting_traces[0]
        other = RunTrace("X", {}, t.seed + 1, t.n_segments, t.records)
        with pytest.raises(ComparisonError):
            compare_scenarios([t, other])

    def test_empty(self):
        with pytest.raises(ComparisonError):
            compare_scenarios([])


class TestExport:
    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_results([RunTrace("OC", {}, 0, 5)], tmp_path)

    def test_csv_roundtrip_bit_exact(self, drifting_traces, tmp_path):
        export_results(drifting_traces, tmp_path, compare_scenarios(drifting_traces))
        for t in drifting_traces:
            back = read_layer_csv(tmp_path / f"{t.scenario}_layers.csv")
            assert back["rmse"] == t.rmse.tolist()
            assert back["lambda"] == [r.lam for r in t.records]

    def test_artifacts_and_manifest(self, drifting_traces, tmp_path):
        paths = export_results(drifting_traces, tmp_path, compare_scenarios(drifting_traces))
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["scenarios"] == ["OC", "OH", "CC", "CH"]
        assert set(manifest["artifacts"]) == {p.name for p in paths[:-1]}
        assert all(p.exists() for p in paths)

    def test_plot_has_four_series(self, drifting_traces, tmp_path):
        labels = plot_rmse(tmp_path / "rmse.png", drifting_traces)
        assert labels == ["OC", "OH", "CC", "CH"]
        assert (tmp_path / "rmse.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unwritable_destination(self, drifting_traces, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            export_results(drifting_traces, blocker / "sub")
