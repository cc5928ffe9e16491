import math

import numpy as np
import pytest

from rattlesim.core import (
    BasinSpec,
    ExitTimeDistribution,
    ParamSchedule,
    PotentialModel,
    SamplePath,
    ensure_valid,
    validate_model,
)
from rattlesim.models import allee_model, cubic_model


def test_schedule_kinds():
    assert ParamSchedule.constant(3.0)(17.0) == 3.0
    assert ParamSchedule.inverse_linear(4, 0.01)(100) == 2.0
    assert ParamSchedule.power_law(1, -2)(2.0) == 0.25
    assert ParamSchedule.linear(1, 2)(3.0) == 7.0


def test_schedule_clamp_and_pole():
    s = ParamSchedule.linear(1, -1, clamp_min=0.5)
    assert s(10.0) == 0.5
    # t^-2 at t = 0 is a pole, not an exception
    assert ParamSchedule.power_law(1, -2)(0.0) == math.inf


def test_schedule_array_matches_scalar():
    s = ParamSchedule.inverse_linear(4, 0.01, clamp_min=1e-6)
    ts = np.linspace(0, 2000, 101)
    assert np.array_equal(s(ts), np.array([s(float(t)) for t in ts]))


def test_schedule_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ParamSchedule("quadratic", 1.0)


def test_validate_allee_ok():
    assert validate_model(allee_model(1, 1.5, 2.5, 4.0, 0.22), 100) == []


def test_validate_allee_ordering():
    errors = validate_model(allee_model(1, 2.5, 1.5, 4.0, 0.22), 100)
    assert "C > A violated" in errors


def test_validate_cubic_scheduled_beta_ok():
    m = cubic_model(1.0, 1.0, 0.1, beta_schedule=ParamSchedule.inverse_linear(4, 0.01))
    assert validate_model(m, 1000) == []
    assert m.param("beta", 1000) == pytest.approx(4 / 11)


def test_validate_reports_every_violation():
    m = PotentialModel("cubic", {"alpha": -1.0, "beta": 0.0}, noise_amplitude=-1.0)
    errors = validate_model(m, 10)
    assert "alpha >= 0 violated" in errors
    assert "beta > 0 violated" in errors
    assert any("noise_amplitude" in e for e in errors)
    with pytest.raises(ValueError):
        ensure_valid(m, 10)


def test_validate_missing_parameter():
    errors = validate_model(PotentialModel("ou", {}, 1.0), 10)
    assert errors == ["missing parameters: b"]


def test_validate_t0_offset():
    # t^-2 is infinite at 0 but fine from t0 = 1 on
    m = cubic_model(1.0, 1.0, 0.1, alpha_schedule=ParamSchedule.power_law(1, -2))
    assert validate_model(m, 5, t0=1.0) == []
    assert validate_model(m, 5, t0=0.0) != []


def test_model_is_immutable_and_hashable():
    m = allee_model()
    with pytest.raises(TypeError):
        m.params["r"] = 2.0
    assert m == allee_model()
    assert hash(m) == hash(allee_model())
    assert m != allee_model(r=2.0)


def test_basin_bounds():
    b = BasinSpec(lower=lambda t: 2 * t)
    assert b.lower_at(3.0) == 6.0
    assert b.upper_at(3.0) == math.inf
    assert not b.is_static
    assert BasinSpec(-1.0, 1.0).is_static


def test_sample_path_times_and_readonly():
    p = SamplePath(1.0, 0.5, [1.0, 2.0, 3.0], None, 7)
    assert np.allclose(p.times, [1.0, 1.5, 2.0])
    assert len(p) == 3
    with pytest.raises(ValueError):
        p.states[0] = 5.0
    with pytest.raises(ValueError):
        SamplePath(0.0, 0.1, [], None, 0)


def test_exit_cdf_examples():
    d = ExitTimeDistribution(np.array([1.0, 2.0, 3.0]), 3, 10.0)
    assert d.cdf(2.5) == pytest.approx(2 / 3)
    assert d.cdf(0.5) == 0.0
    assert d.cdf(3.0) == 1.0
    assert d.quantile(0.5) == 2.0


def test_exit_cdf_no_exits_and_censoring():
    d = ExitTimeDistribution(np.array([]), 5, 10.0)
    assert np.all(d.cdf(np.array([0.0, 5.0, 100.0])) == 0.0)
    assert d.quantile(0.5) == math.inf
    d = ExitTimeDistribution(np.array([1.0]), 4, 10.0)
    assert d.cdf(100.0) == 0.25
