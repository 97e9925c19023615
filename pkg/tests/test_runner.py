import json
import math

import numpy as np
import pytest

from smms.config import load_config
from smms.runner import (Report, ScenarioError, emit_report, exit_code,
                         run_scenario)
from smms.spheres import sphere_area


def cfg(document, **kw):
    return load_config(json.dumps(document), **kw)


def euclid_willmore(radius=1.0, **numerics):
    return cfg({
        "scenario": "willmore-check",
        "model": {"name": "euclidean", "params": {"n": 3}},
        "surface": {"type": "sphere", "radius": radius},
        "numerics": {"r_max": 2.0, **numerics},
    })


class TestWillmoreCheck:
    def setup_method(self):
        self.report = run_scenario(euclid_willmore())

    def test_flat_unit_sphere_gap_vanishes(self):
        gap = self.report.results["gap"]["value"]
        assert abs(gap) <= 1e-6
        v = self.report.verdicts[0]
        assert v["name"] == "willmore_gap_nonnegative" and v["passed"]
        assert exit_code(self.report) == 0

    def test_lhs_reported_in_all_three_modes(self):
        modes = self.report.results["lhs_modes"]
        assert set(modes) == {"absolute", "positive_part", "plain_power"}
        for entry in modes.values():
            # H_f > 0 everywhere, so every integrand agrees
            assert entry["value"] == pytest.approx(4.0 * math.pi, rel=1e-9)
            assert entry["quadrature_error"] < 1e-9

    def test_rhs_carries_its_ingredients(self):
        rhs = self.report.results["rhs"]
        avr = self.report.results["avr"]
        assert rhs["sphere_area_k"] == pytest.approx(4.0 * math.pi)
        assert rhs["value"] == pytest.approx(
            avr["value"] * rhs["sphere_area_k"])
        assert avr["method"] == "ball_growth"
        assert avr["value"] == pytest.approx(1.0, abs=1e-6)

    def test_certification_attached_and_clean(self):
        cert = self.report.certification
        assert cert["passed"]
        names = {c["name"] for c in cert["checks"]}
        assert "bakry_emery_min_eigenvalue" in names
        assert "H_f_min" in names

    def test_schema_and_digest(self):
        assert self.report.schema == "smms-report/1"
        assert len(self.report.config_digest) == 64
        int(self.report.config_digest, 16)

    def test_gap_verdict_tolerance_tracks_resolution(self):
        v = self.report.verdicts[0]
        avr = self.report.results["avr"]
        lhs = self.report.results["lhs"]
        expected = (1e-7 * max(1.0, lhs["value"])
                    + 4.0 * 4.0 * math.pi * avr["fit_error"]
                    + 4.0 * lhs["quadrature_error"])
        assert v["tolerance"] == pytest.approx(expected, rel=1e-12)


class TestWillmoreVariants:
    def test_configured_mode_wins(self):
        report = run_scenario(euclid_willmore(mode="positive_part"))
        assert report.results["lhs"]["mode"] == "positive_part"

    def test_negative_weighted_curvature_warns_and_fails_certification(self):
        config = cfg({
            "scenario": "willmore-check",
            "model": {"name": "gaussian_soliton",
                      "params": {"n": 2, "lambda": 1.0}},
            "surface": {"type": "sphere", "radius": 2.0},
            "numerics": {"r_max": 2.0, "schedule": [0.5, 1.0, 2.0, 4.0]},
        })
        report = run_scenario(config)
        assert any(w.startswith("HypothesisWarning:")
                   for w in report.warnings)
        assert not report.certification["passed"]
        assert exit_code(report) == 3

    def test_cone_equality_passes_verdict_but_not_certification(self):
        # the finite-weight equality geometry has negative transverse
        # Bakry-Emery eigenvalues, so the sampled certificate must say no
        # while the gap verdict itself holds
        config = cfg({
            "scenario": "willmore-check",
            "model": {"name": "cone_power_density",
                      "params": {"n": 3, "N": 2}},
            "surface": {"type": "canonical"},
            "numerics": {"r_max": 2.0},
        })
        report = run_scenario(config)
        assert report.verdicts[0]["passed"]
        assert not report.certification["passed"]
        assert exit_code(report) == 3


class TestAvr:
    def test_gaussian_flags_finite_volume(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "gaussian_soliton",
                      "params": {"n": 2, "lambda": 1.0}},
        })
        report = run_scenario(config)
        assert report.results["avr"]["value"] < 1e-3
        assert any("finite total weighted volume" in w
                   for w in report.warnings)
        assert exit_code(report) == 0

    def test_euclidean_theta_constant_one(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "euclidean", "params": {"n": 2}},
        })
        report = run_scenario(config)
        theta = report.results["avr"]["theta"]
        assert max(abs(t - 1.0) for t in theta) < 1e-7
        assert report.verdicts[0]["name"] == "theta_nonincreasing"
        assert report.verdicts[0]["passed"]

    def test_no_center_and_no_surface_is_an_error(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "twisted_exterior",
                      "params": {"n": 2, "H": 1.5}},
        })
        with pytest.raises(ScenarioError, match="no center"):
            run_scenario(config)

    def test_tube_growth_fallback_with_surface(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "twisted_exterior",
                      "params": {"n": 3, "H": 2.0, "r_max": 80.0}},
            "surface": {"type": "canonical"},
            "numerics": {"schedule": [8.0, 16.0, 32.0, 64.0]},
        })
        report = run_scenario(config)
        avr = report.results["avr"]
        assert avr["method"] == "tube_growth"
        # H a^(n-1)/(n-1)^(n-1) = 2/4 for H=2, a=1, n=3
        assert avr["value"] == pytest.approx(0.5, abs=0.01)
        assert report.verdicts == []

    def test_bounded_chart_gets_clamped_schedule(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "sphere_ambient", "params": {"n": 3}},
        })
        report = run_scenario(config)
        assert any("schedule" in w for w in report.warnings)
        assert max(report.results["avr"]["schedule"]) < math.pi


class TestComparison:
    def test_geodesic_sphere_in_round_ambient(self):
        config = cfg({
            "scenario": "comparison",
            "model": {"name": "sphere_ambient", "params": {"n": 3}},
            "surface": {"type": "canonical"},
            "numerics": {"r_max": 2.0, "r_samples": 400,
                         "comparison_points": 4},
        })
        report = run_scenario(config)
        for v in report.verdicts:
            assert v["passed"], v
        assert {v["name"] for v in report.verdicts} == {
            "mean_curvature_comparison", "theta_monotone",
            "volume_element_bound"}
        series = report.results["series"]
        assert series["columns"] == ["r", "m_f", "m0", "theta", "A_f",
                                     "A_f_bound"]
        cols = {name: [row[i] for row in series["rows"]]
                for i, name in enumerate(series["columns"])}
        assert all(mf <= m0 + 1e-12
                   for mf, m0 in zip(cols["m_f"], cols["m0"]))
        assert exit_code(report) == 0

    def test_flat_sphere_attains_equality(self):
        report = run_scenario(cfg({
            "scenario": "comparison",
            "model": {"name": "euclidean", "params": {"n": 3}},
            "surface": {"type": "sphere", "radius": 1.0},
            "numerics": {"r_max": 4.0, "r_samples": 200,
                         "comparison_points": 3},
        }))
        assert report.results["mean_curvature_max_abs_deviation"] <= 1e-9

    def test_negative_curvature_fails_the_lemma(self):
        config = cfg({
            "scenario": "comparison",
            "model": {"name": "warped_custom",
                      "params": {"n": 3, "w": "sinh(r)", "r_max": 5.0}},
            "surface": {"type": "geodesic_sphere", "r0": 1.0},
            "numerics": {"r_max": 2.0, "r_samples": 100,
                         "comparison_points": 2},
        })
        report = run_scenario(config)
        failed = {v["name"] for v in report.verdicts if not v["passed"]}
        assert "mean_curvature_comparison" in failed
        assert exit_code(report) == 2

    def test_per_point_records(self):
        report = run_scenario(cfg({
            "scenario": "comparison",
            "model": {"name": "euclidean", "params": {"n": 2}},
            "surface": {"type": "sphere", "radius": 1.0},
            "numerics": {"r_max": 1.0, "r_samples": 50,
                         "comparison_points": 5},
        }))
        pts = report.results["per_point"]
        assert len(pts) == report.results["points_checked"] == 5
        for p in pts:
            assert len(p["checks"]) == 3
            assert p["H_f"] == pytest.approx(1.0, rel=1e-9)


class TestCertifyScenario:
    def test_soliton_certifies_with_unit_eigenvalue(self):
        config = cfg({
            "scenario": "certify",
            "model": {"name": "gaussian_soliton",
                      "params": {"n": 2, "lambda": 1.0}},
            "numerics": {"r_max": 4.0},
        })
        report = run_scenario(config)
        cert = report.certification
        assert cert["passed"]
        curv = next(c for c in cert["checks"]
                    if c["name"] == "bakry_emery_min_eigenvalue")
        assert curv["value"] == pytest.approx(1.0, abs=1e-8)
        assert exit_code(report) == 0

    def test_hyperbolic_fails_with_exit_three(self):
        config = cfg({
            "scenario": "certify",
            "model": {"name": "warped_custom",
                      "params": {"n": 3, "w": "sinh(r)", "r_max": 4.0}},
            "numerics": {"r_max": 2.0},
        })
        report = run_scenario(config)
        assert not report.certification["passed"]
        assert not report.verdicts[0]["passed"]
        assert exit_code(report) == 3


class TestRigidityScenario:
    def test_cone_matches_closed_forms(self):
        config = cfg({
            "scenario": "rigidity-model",
            "model": {"name": "cone_power_density",
                      "params": {"n": 3, "N": 2}},
            "numerics": {"r_max": 6.0,
                         "schedule": [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]},
        })
        report = run_scenario(config)
        lhs = report.results["lhs"]["value"]
        rhs = report.results["rhs"]["value"]
        assert lhs == pytest.approx(4.0 * math.pi, abs=1e-7)
        assert rhs == pytest.approx(4.0 * math.pi, abs=1e-4)
        assert report.results["closed_form_lhs"] == pytest.approx(
            4.0 * math.pi, rel=1e-12)
        for v in report.verdicts:
            assert v["passed"], v
        assert exit_code(report) == 0

    def test_flat_space_is_rigid(self):
        config = cfg({
            "scenario": "rigidity-model",
            "model": {"name": "euclidean", "params": {"n": 3}},
            "numerics": {"r_max": 4.0},
        })
        report = run_scenario(config)
        assert abs(report.results["gap"]["value"]) < 1e-6
        assert report.results["theta_drift"]["value"] < 1e-7
        assert exit_code(report) == 0

    def test_twisted_exterior_is_rigid(self):
        config = cfg({
            "scenario": "rigidity-model",
            "model": {"name": "twisted_exterior",
                      "params": {"n": 2, "H": 1.5, "r_max": 150.0}},
            "numerics": {"r_max": 4.0,
                         "schedule": [16.0, 32.0, 64.0, 128.0]},
        })
        report = run_scenario(config)
        assert report.results["avr"]["method"] == "tube_growth"
        assert report.results["theta_drift"]["value"] <= 1e-8
        for v in report.verdicts:
            assert v["passed"], v

    def test_gaussian_is_not_rigid(self):
        # f-AVR = 0 puts the right side far from the positive left side
        config = cfg({
            "scenario": "rigidity-model",
            "model": {"name": "gaussian_soliton",
                      "params": {"n": 2, "lambda": 1.0, "radius": 0.5}},
            "numerics": {"r_max": 2.0, "schedule": [1.0, 2.0, 4.0, 8.0]},
        })
        report = run_scenario(config)
        gap = next(v for v in report.verdicts
                   if v["name"] == "gap_matches_equality")
        assert not gap["passed"]
        assert exit_code(report) == 2


class TestTubeScenario:
    def test_soliton_sphere_tube(self):
        config = cfg({
            "scenario": "tube-volume",
            "model": {"name": "gaussian_soliton",
                      "params": {"n": 2, "lambda": 1.0}},
            "surface": {"type": "sphere", "radius": 0.5},
            "numerics": {"schedule": [0.5, 1.0, 2.0, 4.0]},
        })
        report = run_scenario(config)
        assert report.verdicts[0]["name"] == "tube_below_model_bound"
        assert report.verdicts[0]["passed"]
        series = report.results["series"]
        assert series["columns"] == ["R", "tube_volume", "leading_term",
                                     "ratio", "model_bound"]
        vol = {row[0]: row[1] for row in series["rows"]}
        # tube of width R around the circle fills the ball of radius R + 1/2
        for R in (0.5, 1.0, 2.0, 4.0):
            exact = 2.0 * math.pi * (1.0 - math.exp(-(R + 0.5) ** 2 / 2.0))
            assert vol[R] == pytest.approx(exact, rel=1e-5)
        assert exit_code(report) == 0

    def test_flat_tube_equals_enlarged_ball(self):
        config = cfg({
            "scenario": "tube-volume",
            "model": {"name": "euclidean", "params": {"n": 3}},
            "surface": {"type": "sphere", "radius": 1.0},
            "numerics": {"schedule": [1.0, 2.0, 3.0, 4.0]},
        })
        report = run_scenario(config)
        rows = {row[0]: row for row in report.results["series"]["rows"]}
        for R in (1.0, 2.0, 3.0, 4.0):
            expected = 4.0 / 3.0 * math.pi * (1.0 + R) ** 3
            assert rows[R][1] == pytest.approx(expected, rel=1e-7)

    def test_offcenter_surface_needs_explicit_interior(self):
        config = cfg({
            "scenario": "tube-volume",
            "model": {"name": "euclidean", "params": {"n": 3}},
            "surface": {"type": "ellipsoid", "semi_axes": [1.0, 1.0, 2.0]},
            "numerics": {"schedule": [1.0, 2.0, 3.0, 4.0]},
        })
        with pytest.raises(ScenarioError, match="interior_volume"):
            run_scenario(config)


class TestDeterminism:
    def test_reports_agree_up_to_timing(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "euclidean", "params": {"n": 2}},
        })
        a, b = run_scenario(config), run_scenario(config)
        da, db = a.as_dict(), b.as_dict()
        da.pop("timing"), db.pop("timing")
        assert da == db
        assert a.config_digest == b.config_digest

    def test_emitted_json_is_byte_stable(self):
        config = cfg({
            "scenario": "avr",
            "model": {"name": "euclidean", "params": {"n": 2}},
        })
        report = run_scenario(config)
        assert emit_report(report, "json") == emit_report(report, "json")


class TestEmitters:
    def setup_method(self):
        self.avr_report = run_scenario(cfg({
            "scenario": "avr",
            "model": {"name": "euclidean", "params": {"n": 2}},
        }))

    def test_json_round_trips(self):
        blob = emit_report(self.avr_report, "json")
        doc = json.loads(blob)
        assert doc["scenario"] == "avr"
        assert doc["schema"] == "smms-report/1"
        # infinite weight is carried as a string, not a bare inf
        assert doc["inputs"]["space"]["weight"] == "infinite"
        assert json.loads(json.dumps(doc)) == doc

    def test_csv_theta_column_is_one(self):
        lines = emit_report(self.avr_report, "csv").decode().splitlines()
        assert lines[0] == "r,theta_f"
        assert len(lines) == 6
        for line in lines[1:]:
            r, theta = (float(v) for v in line.split(","))
            assert theta == pytest.approx(1.0, abs=1e-7)

    def test_csv_without_series_lists_verdicts(self):
        report = Report(
            scenario="certify", config_digest="0" * 64, inputs={},
            results={}, verdicts=[
                {"name": "hypotheses_certified", "passed": True,
                 "value": 1.0, "tolerance": 1e-8}],
            warnings=[])
        lines = emit_report(report, "csv").decode().splitlines()
        assert lines[0] == "name,value,tolerance,passed"
        assert lines[1].startswith("hypotheses_certified,1.0,")

    def test_plotdata_blocks(self):
        text = emit_report(self.avr_report, "plotdata").decode()
        assert "# scenario: avr" in text
        assert "# curve: theta_f vs r" in text
        assert "# verdicts" in text
        data_lines = [l for l in text.splitlines()
                      if l and not l.startswith("#")]
        assert len(data_lines) == 5
        for line in data_lines:
            x, y = (float(v) for v in line.split())
            assert y == pytest.approx(1.0, abs=1e-7)

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="unknown report format"):
            emit_report(self.avr_report, "yaml")


class TestExitCode:
    def mk(self, verdicts=(), warnings=(), certification=None):
        return Report(
            scenario="avr", config_digest="0" * 64, inputs={}, results={},
            verdicts=list(verdicts), warnings=list(warnings),
            certification=certification)

    def ok(self, name="v"):
        return {"name": name, "passed": True, "value": 0.0,
                "tolerance": 1e-7}

    def bad(self, name="v"):
        return {"name": name, "passed": False, "value": 1.0,
                "tolerance": 1e-7}

    def test_all_verdicts_hold(self):
        assert exit_code(self.mk([self.ok()])) == 0

    def test_verdict_failure(self):
        assert exit_code(self.mk([self.ok(), self.bad()])) == 2

    def test_certification_failure_wins(self):
        report = self.mk([self.bad()], certification={"passed": False})
        assert exit_code(report) == 3

    def test_strict_escalates_hypothesis_warning(self):
        report = self.mk([self.ok()],
                         warnings=["HypothesisWarning: H_f < 0 somewhere"])
        assert exit_code(report) == 0
        assert exit_code(report, strict=True) == 3

    def test_strict_escalates_resolution_warning(self):
        report = self.mk([self.ok()],
                         warnings=["ResolutionWarning: Theta increased"])
        assert exit_code(report, strict=True) == 2


class TestRunnerContract:
    def test_takes_only_configs(self):
        with pytest.raises(TypeError):
            run_scenario({"scenario": "avr"})

    def test_downstream_errors_carry_scenario(self):
        config = cfg({
            "scenario": "willmore-check",
            "model": {"name": "warped_custom",
                      "params": {"n": 3, "w": "sinh(r)", "r_max": 4.0}},
            "surface": {"type": "canonical"},
            "numerics": {"r_max": 2.0},
        })
        with pytest.raises(ScenarioError, match="willmore-check"):
            run_scenario(config)

    def test_permissive_notes_surface_in_report(self):
        config = load_config(json.dumps({
            "scenario": "avr",
            "model": {"name": "euclidean", "params": {"n": 2}},
            "mystery": True,
        }), strict=False)
        report = run_scenario(config)
        assert any("mystery" in w for w in report.warnings)
