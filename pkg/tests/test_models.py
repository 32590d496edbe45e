import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergobound import models
from ergobound.models import (
    ModelError, Observable, StateInterval, obs_constant, obs_exponential,
    obs_indicator, pi_integral, scale_density, speed_density,
    stationary_density,
)


class TestScaleDensity:
    def test_maoclass_is_one(self, mao3):
        assert scale_density(mao3, 5.0) == 1.0
        assert scale_density(mao3, 5.0, use_closed_form=False) == pytest.approx(1.0)

    def test_reference_point_value(self, jacobi_uniform, tanou_half, mao3):
        for spec in (jacobi_uniform, tanou_half, mao3):
            assert scale_density(spec, spec.reference_point) == pytest.approx(1.0)

    def test_tanou_analytic(self, tanou_half):
        # antiderivative of tan gives cos(x)^{-2 rho} with the x0 = 0 anchoring
        assert scale_density(tanou_half, math.pi / 3) == pytest.approx(2.0, rel=1e-12)
        assert scale_density(tanou_half, math.pi / 3,
                             use_closed_form=False) == pytest.approx(2.0, rel=1e-8)

    def test_outside_interval_rejected(self, jacobi_uniform):
        with pytest.raises(ModelError):
            scale_density(jacobi_uniform, 1.5)


class TestSpeedDensity:
    def test_maoclass_power_law(self, mao3):
        for x in (0.5, 1.0, 7.0):
            assert speed_density(mao3, x) == pytest.approx((1 + x) ** -3, rel=1e-12)

    def test_tanou_value(self, tanou_half):
        assert speed_density(tanou_half, 0.0) == pytest.approx(2.0, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.02, max_value=0.98))
    def test_identity_sigma2_s_m(self, x):
        spec = models.jacobi(1.0, 2.0, 2.0)
        prod = (spec.diffusion_sq(x) * scale_density(spec, x)
                * speed_density(spec, x))
        assert prod == pytest.approx(2.0, rel=1e-12)

    def test_identity_quadrature_path(self, tanou_half):
        for x in np.linspace(-1.4, 1.4, 9):
            prod = (tanou_half.diffusion_sq(x)
                    * scale_density(tanou_half, x, use_closed_form=False)
                    * speed_density(tanou_half, x, use_closed_form=False))
            assert prod == pytest.approx(2.0, rel=1e-9)


class TestClosedFormVsQuadrature:
    @pytest.mark.parametrize("factory", [
        lambda: models.jacobi(1.0, 2.0, 2.0),
        lambda: models.jacobi(0.8, 2.5, 1.5),
        lambda: models.tanou(0.5),
        lambda: models.tanou(1.25),
        lambda: models.maoclass(3.0),
    ])
    def test_agreement_on_grid(self, factory):
        spec = factory()
        for x in spec.interval.interior_grid(9):
            x = float(x)
            s_cf = scale_density(spec, x)
            s_q = scale_density(spec, x, use_closed_form=False)
            assert s_q == pytest.approx(s_cf, rel=1e-8)
            m_cf = speed_density(spec, x)
            m_q = speed_density(spec, x, use_closed_form=False)
            assert m_q == pytest.approx(m_cf, rel=1e-8)


class TestStationaryDensity:
    def test_jacobi_uniform(self, jacobi_uniform):
        for x in (0.1, 0.5, 0.9):
            assert stationary_density(jacobi_uniform, x) == pytest.approx(1.0, rel=1e-12)

    def test_tanou_cos_half(self, tanou_half):
        assert stationary_density(tanou_half, 0.0) == pytest.approx(0.5, rel=1e-12)
        assert stationary_density(tanou_half, 1.0) == pytest.approx(
            math.cos(1.0) / 2, rel=1e-12)

    @pytest.mark.parametrize("factory", [
        lambda: models.jacobi(1.0, 2.0, 2.0),
        lambda: models.jacobi(0.8, 2.5, 1.5),
        lambda: models.tanou(0.5),
        lambda: models.tanou(2.0),
        lambda: models.maoclass(3.0),
        lambda: models.maoclass(4.0),
    ])
    def test_normalization(self, factory):
        spec = factory()
        total = pi_integral(spec, obs_constant(1.0))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_generic_path_matches_closed_form(self, tanou_half):
        generic = models.DiffusionSpec(
            interval=tanou_half.interval,
            drift=tanou_half.drift,
            diffusion_sq=tanou_half.diffusion_sq,
            reference_point=0.0,
        )
        for x in (-1.0, 0.0, 0.7):
            assert stationary_density(generic, x) == pytest.approx(
                stationary_density(tanou_half, x), rel=1e-8)


class TestPiIntegral:
    def test_constant_is_one(self, jacobi_uniform, tanou_half, mao3):
        for spec in (jacobi_uniform, tanou_half, mao3):
            assert pi_integral(spec, obs_constant(1.0)) == pytest.approx(1.0, abs=1e-8)

    def test_tanou_exponential(self, tanou_half):
        f = obs_exponential(1.0, tanou_half.interval)
        want = math.cosh(math.pi / 2) / 2  # (1/2) int e^x cos x over the interval
        assert pi_integral(tanou_half, f) == pytest.approx(want, rel=1e-10)

    def test_jacobi_indicator_half(self, jacobi_uniform):
        f = obs_indicator(0.0, 0.5)
        assert pi_integral(jacobi_uniform, f) == pytest.approx(0.5, abs=1e-8)

    def test_indicator_complement(self, tanou_half):
        a = pi_integral(tanou_half, obs_indicator(-math.pi / 2, 0.3))
        b = pi_integral(tanou_half, obs_indicator(0.3, math.pi / 2))
        assert a + b == pytest.approx(1.0, abs=1e-8)


class TestReferencePointInvariance:
    def _variants(self):
        base = models.tanou(0.5)
        out = []
        for x0 in (0.0, 0.7):
            out.append(models.DiffusionSpec(
                interval=base.interval, drift=base.drift,
                diffusion_sq=base.diffusion_sq, reference_point=x0))
        return out

    def test_scale_rescales_by_constant(self):
        a, b = self._variants()
        k = scale_density(a, 1.1) / scale_density(b, 1.1)
        for x in (-1.0, 0.2, 1.3):
            assert scale_density(a, x) / scale_density(b, x) == pytest.approx(k, rel=1e-9)
            assert speed_density(a, x) / speed_density(b, x) == pytest.approx(1 / k,
                                                                              rel=1e-9)

    def test_stationary_invariant(self):
        a, b = self._variants()
        for x in (-1.0, 0.2, 1.3):
            assert stationary_density(a, x) == pytest.approx(
                stationary_density(b, x), rel=1e-9)

    def test_pi_integral_invariant(self):
        a, b = self._variants()
        f = Observable(fn=math.cos, sup_norm=1.0, name="cos")
        assert pi_integral(a, f) == pytest.approx(pi_integral(b, f), rel=1e-9)


class TestObservable:
    def test_sup_norm_spot_check(self, tanou_half):
        bad = Observable(fn=math.sin, sup_norm=0.5, name="underdeclared")
        with pytest.raises(ModelError):
            bad.validate(tanou_half.interval)

    def test_negative_sup_rejected(self):
        with pytest.raises(ModelError):
            Observable(fn=lambda x: x, sup_norm=-1.0)


class TestConstruction:
    def test_jacobi_parameter_domain(self):
        with pytest.raises(ModelError):
            models.jacobi(2.0, 1.0)  # needs b > a
        with pytest.raises(ModelError):
            models.jacobi(-1.0, 2.0)

    def test_tanou_rho_domain(self):
        with pytest.raises(ModelError):
            models.tanou(0.4)

    def test_maoclass_gamma_domain(self):
        with pytest.raises(ModelError):
            models.maoclass(2.0)

    def test_interval_invariants(self):
        with pytest.raises(ModelError):
            StateInterval(1.0, 0.0)
        with pytest.raises(ModelError):
            StateInterval(0.0, 1.0, lower_boundary="sticky")


class TestModelFiles:
    def test_builtin_roundtrip(self, tmp_path):
        p = tmp_path / "model.json"
        p.write_text(json.dumps({"model": "jacobi",
                                 "params": {"a": 1, "b": 2, "sigma2": 2}}))
        spec = models.load_spec(str(p))
        assert spec.closed_form == "jacobi"
        assert stationary_density(spec, 0.5) == pytest.approx(1.0)

    def test_custom_expressions(self, tmp_path):
        doc = {"model": "custom", "params": {
            "interval": {"lower": -math.pi / 2, "upper": math.pi / 2},
            "drift": {"kind": "scaled_tan", "scale": -0.5},
            "diffusion_sq": {"kind": "polynomial", "coeffs": [1.0]},
        }}
        p = tmp_path / "custom.json"
        p.write_text(json.dumps(doc))
        spec = models.load_spec(str(p))
        ref = models.tanou(0.5)
        for x in (-1.0, 0.3):
            assert spec.drift(x) == pytest.approx(ref.drift(x))
            assert spec.diffusion_sq(x) == 1.0
        assert stationary_density(spec, 0.0) == pytest.approx(0.5, rel=1e-8)

    def test_no_code_evaluation(self):
        with pytest.raises(ModelError):
            models.spec_from_dict({"model": "custom", "params": {
                "interval": {"lower": 0, "upper": 1},
                "drift": {"kind": "__import__('os')"},
                "diffusion_sq": {"kind": "polynomial", "coeffs": [1.0]},
            }})

    def test_unknown_model(self):
        with pytest.raises(ModelError):
            models.spec_from_dict({"model": "heston"})
