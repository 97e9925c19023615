import math

import numpy as np
import pytest

from smms.certify import (
    CHECKS, CURVATURE, NORMAL_SLOPE, RADIAL_SLOPE, SURFACE_HF,
    CertificationReport, SampleSpec, certify_hypotheses,
)
from smms.fields import INFINITE, DensityField, MetricField, Smms
from smms.surfaces import Embedding

SMALL = (8, 16)


def euclidean_smms(n=3):
    return Smms(metric=MetricField.flat(n), density=DensityField.zero(n),
                weight=INFINITE)


def soliton_smms(lam=1.0):
    density = DensityField.radial_cartesian(
        3, phi=lambda r: 0.5 * lam * r ** 2,
        dphi=lambda r: lam * r, d2phi=lambda r: lam + 0.0 * r)
    return Smms(metric=MetricField.flat(3), density=density, weight=INFINITE)


def cone_smms(N=2.0, r0=1.0):
    return Smms(
        metric=MetricField.flat(3),
        density=DensityField.radial_cartesian(
            3, phi=lambda r: -N * np.log(r / r0),
            dphi=lambda r: -N / r, d2phi=lambda r: N / r ** 2),
        weight=N)


def spec_small(**kw):
    kw.setdefault("orders", SMALL)
    kw.setdefault("r_samples", 24)
    return SampleSpec(**kw)


class TestCleanModels:
    def test_euclidean_everything_zero(self):
        report = certify_hypotheses(
            euclidean_smms(), surface=Embedding.sphere(1.0, orders=SMALL),
            sample_spec=spec_small())
        assert report.passed
        assert report.check(CURVATURE).value == pytest.approx(0.0, abs=1e-10)
        assert report.check(NORMAL_SLOPE).value == pytest.approx(0.0,
                                                                 abs=1e-12)
        assert report.check(RADIAL_SLOPE).value == pytest.approx(0.0,
                                                                 abs=1e-12)
        # unit sphere in flat space: H_f = H = 2
        assert report.check(SURFACE_HF).value == pytest.approx(2.0,
                                                               abs=1e-10)
        names = [c.name for c in report.checks]
        assert set(names) == set(CHECKS)

    def test_gaussian_soliton_eigenvalue_is_lambda(self):
        report = certify_hypotheses(soliton_smms(lam=1.0),
                                    sample_spec=spec_small(r_max=4.0))
        cur = report.check(CURVATURE)
        assert cur.value == pytest.approx(1.0, abs=1e-8)
        assert cur.passed
        rad = report.check(RADIAL_SLOPE)
        # df/drho = rho, minimized at the base point
        assert rad.value == pytest.approx(0.0, abs=1e-12)
        assert rad.detail["r"] == 0.0
        assert report.passed

    def test_soliton_small_sphere_passes(self):
        report = certify_hypotheses(
            soliton_smms(), surface=Embedding.sphere(1.0, orders=SMALL),
            sample_spec=spec_small(r_max=4.0))
        assert report.passed
        assert report.check(SURFACE_HF).value == pytest.approx(1.0,
                                                               abs=1e-10)
        # <nu, grad f> grows along the ray, so the minimum sits at r = 0
        assert report.check(NORMAL_SLOPE).value == pytest.approx(1.0,
                                                                 abs=1e-10)
        assert report.check(NORMAL_SLOPE).detail["r"] == 0.0

    def test_round_sphere_ambient(self):
        metric = MetricField.polar_warped(3, np.sin, np.cos,
                                          lambda r: -np.sin(r),
                                          r_max=math.pi)
        smms = Smms(metric=metric, density=DensityField.zero(3),
                    weight=INFINITE, chart="radial")
        report = certify_hypotheses(smms,
                                    sample_spec=spec_small(r_max=2.5))
        # Ric = 2 g on the unit round 3-sphere
        assert report.check(CURVATURE).value == pytest.approx(2.0, abs=1e-8)
        assert report.check(RADIAL_SLOPE).value == pytest.approx(0.0,
                                                                 abs=1e-12)
        assert report.passed


class TestViolations:
    def test_cone_transverse_eigenvalue_negative(self):
        """Power-law density fails the curvature bound transversally."""
        N, r0 = 2.0, 1.0
        report = certify_hypotheses(
            cone_smms(N=N, r0=r0),
            surface=Embedding.sphere(r0, orders=SMALL),
            sample_spec=spec_small(r_max=4.0,
                                   checks=(CURVATURE, NORMAL_SLOPE,
                                           SURFACE_HF)))
        cur = report.check(CURVATURE)
        assert not cur.passed
        assert not report.passed
        # transverse eigenvalue -N/rho^2 is worst at the smallest rho
        rho = float(np.linalg.norm(cur.witness))
        assert rho == pytest.approx(r0, abs=1e-6)
        assert cur.value == pytest.approx(-N / r0 ** 2, abs=1e-8)
        # H_f = (n+N-1)/r0 and df/dr = -N/rho stay as expected
        assert report.check(SURFACE_HF).value == pytest.approx(4.0,
                                                               abs=1e-9)
        assert report.check(NORMAL_SLOPE).value == pytest.approx(
            -N / r0, abs=1e-9)
        assert not report.check(NORMAL_SLOPE).passed

    def test_large_soliton_sphere_fails_H_f(self):
        report = certify_hypotheses(
            soliton_smms(), surface=Embedding.sphere(2.0, orders=SMALL),
            sample_spec=spec_small(r_max=2.0))
        hf = report.check(SURFACE_HF)
        # H_f = 2/rho - rho = -1 on the rho = 2 sphere
        assert hf.value == pytest.approx(-1.0, abs=1e-10)
        assert not hf.passed
        assert not report.passed
        assert float(np.linalg.norm(hf.witness)) == pytest.approx(2.0,
                                                                  abs=1e-9)


class TestPlanValidation:
    def test_surface_checks_need_surface(self):
        with pytest.raises(ValueError, match="without a surface"):
            certify_hypotheses(euclidean_smms(),
                               sample_spec=SampleSpec(checks=(SURFACE_HF,)))

    def test_radial_check_needs_center(self):
        metric = MetricField.polar_warped(3, np.sinh, np.cosh, np.sinh,
                                          r_max=10.0, r_min=1.0)
        smms = Smms(metric=metric, density=DensityField.zero(3),
                    weight=INFINITE, chart="radial")
        with pytest.raises(ValueError, match="base point"):
            certify_hypotheses(smms,
                               sample_spec=SampleSpec(checks=(RADIAL_SLOPE,)))

    def test_empty_plan_rejected(self):
        metric = MetricField.polar_warped(3, np.sinh, np.cosh, np.sinh,
                                          r_max=10.0, r_min=1.0)
        smms = Smms(metric=metric, density=DensityField.zero(3),
                    weight=INFINITE, chart="radial")
        with pytest.raises(ValueError, match="empty"):
            certify_hypotheses(smms)

    def test_no_checks_rejected(self):
        with pytest.raises(ValueError, match="no checks"):
            certify_hypotheses(euclidean_smms(),
                               sample_spec=SampleSpec(checks=()))

    def test_unknown_check_rejected(self):
        with pytest.raises(ValueError, match="unknown checks"):
            SampleSpec(checks=("willmore",))

    def test_bad_spec_fields(self):
        with pytest.raises(ValueError):
            SampleSpec(r_max=0.0)
        with pytest.raises(ValueError):
            SampleSpec(r_samples=1)
        with pytest.raises(ValueError):
            SampleSpec(tolerance=-1.0)

    def test_explicit_points_dimension_checked(self):
        with pytest.raises(ValueError, match="dimension"):
            certify_hypotheses(euclidean_smms(),
                               sample_spec=spec_small(
                                   checks=(CURVATURE,),
                                   points=[[0.0, 0.0]]))


class TestReportShape:
    def test_explicit_points_only(self):
        pts = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]
        report = certify_hypotheses(
            soliton_smms(), sample_spec=SampleSpec(checks=(CURVATURE,),
                                                   points=pts))
        assert report.curvature_samples >= 2
        assert report.check(CURVATURE).value == pytest.approx(1.0, abs=1e-10)

    def test_disclaimer_and_dict(self):
        report = certify_hypotheses(soliton_smms(),
                                    sample_spec=spec_small(r_max=2.0))
        assert "not a proof" in report.disclaimer
        d = report.as_dict()
        assert d["passed"] is True
        assert "disclaimer" in d and "not a proof" in d["disclaimer"]
        assert {c["name"] for c in d["checks"]} == {CURVATURE, RADIAL_SLOPE}
        for c in d["checks"]:
            assert isinstance(c["witness"], list)

    def test_real_weight_flagged(self):
        smms = Smms(metric=MetricField.flat(3),
                    density=DensityField.zero(3), weight=1.5)
        report = certify_hypotheses(smms, sample_spec=spec_small(r_max=2.0))
        assert "real_weight_extension" in report.flags
        report2 = certify_hypotheses(euclidean_smms(),
                                     sample_spec=spec_small(r_max=2.0))
        assert "infinite_weight" in report2.flags

    def test_unknown_check_lookup(self):
        report = certify_hypotheses(euclidean_smms(),
                                    sample_spec=spec_small(r_max=2.0))
        with pytest.raises(KeyError):
            report.check("nope")

    def test_sample_cap_respected(self):
        report = certify_hypotheses(
            soliton_smms(),
            sample_spec=spec_small(r_max=4.0, max_curvature_samples=100))
        assert report.curvature_samples <= 100
        assert report.check(CURVATURE).value == pytest.approx(1.0, abs=1e-8)
