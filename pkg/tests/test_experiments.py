import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from siglasso.experiments import (
    ExperimentConfig,
    cis_overlap,
    consistency_rate,
    mean_reversion_sweep,
    oos_mse,
    structural_sweeps,
    sweep,
    with_confidence,
)

SMALL = dict(reps=8, batches=4, n_samples=40, n_steps=20, K=3)


def test_confidence_constant_values():
    mean, half, means = with_confidence(np.ones(20), 4)
    assert mean == 1.0 and half == 0.0
    np.testing.assert_array_equal(means, np.ones(4))


def test_confidence_known_case():
    vals = np.repeat([0.0, 1.0], 5)
    mean, half, means = with_confidence(vals, 2)
    # batch means 0 and 1, sd sqrt(1/2), z(0.95) = 1.6449
    assert mean == 0.5
    assert half == pytest.approx(1.6448536269514722 * math.sqrt(0.5) / math.sqrt(2))


@given(st.lists(st.floats(-10, 10), min_size=10, max_size=60))
def test_confidence_covers_mean_of_batches(vals):
    mean, half, means = with_confidence(vals, 5)
    assert half >= 0
    assert min(means) - 1e-9 <= np.mean(means) <= max(means) + 1e-9


def test_confidence_errors():
    with pytest.raises(ValueError):
        with_confidence([1.0, 2.0], 1)
    with pytest.raises(ValueError):
        with_confidence([1.0, 2.0], 5)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(process="levy")
    with pytest.raises(ValueError):
        ExperimentConfig(conventions=("ito", "skorokhod"))
    with pytest.raises(ValueError):
        ExperimentConfig(K=1, d=2, q=10)
    with pytest.raises(ValueError):
        ExperimentConfig(kappa=-1.0)


def test_rate_in_unit_interval_and_deterministic():
    cfg = ExperimentConfig(**SMALL, seed=3)
    a = consistency_rate(cfg)
    b = consistency_rate(cfg)
    assert a.rows == b.rows
    for r in a.rows:
        assert 0 <= r["estimate"] <= 1


def test_thread_count_does_not_change_results():
    cfg = ExperimentConfig(**SMALL, process="ou", kappa=1.0, seed=1)
    one = consistency_rate(cfg)
    three = consistency_rate(ExperimentConfig(**SMALL, process="ou", kappa=1.0, seed=1, threads=3))
    assert one.rows == three.rows


def test_q_zero_always_consistent():
    res = consistency_rate(ExperimentConfig(**{**SMALL, "q": 0}))
    assert all(r["estimate"] == 1.0 for r in res.rows)


def test_mse_positive():
    res = oos_mse(ExperimentConfig(**SMALL, noise=0.1))
    for r in res.rows:
        assert r["estimate"] > 0


def test_sweep_rows_and_csv():
    res = sweep(ExperimentConfig(**SMALL), "rho", [0.0, 0.5])
    assert [(r["axis_value"], r["convention"]) for r in res.rows] == [
        (0.0, "ito"), (0.0, "stratonovich"), (0.5, "ito"), (0.5, "stratonovich")]
    header = res.to_csv().splitlines()[0]
    assert header.startswith("axis,axis_value,convention,metric,estimate")
    assert res.value("ito", 0.5)["axis_value"] == 0.5
    assert res.to_json()["axis"] == "rho"


def test_unknown_axis():
    with pytest.raises(ValueError):
        sweep(ExperimentConfig(**SMALL), "temperature", [1])


def test_mean_reversion_uses_wishart():
    res = mean_reversion_sweep(ExperimentConfig(**SMALL, process="ou"), grid=[0.0, 2.0])
    assert res.config["mixing"] == "wishart"
    assert len(res.rows) == 4
    with pytest.raises(ValueError):
        mean_reversion_sweep(ExperimentConfig(**SMALL))


def test_structural_arima():
    res = structural_sweeps(ExperimentConfig(**SMALL), "arima", [(1, 1, 1)])
    assert res.rows[0]["axis_value"] == [1, 1, 1]


def test_cis_overlap():
    a = {"ci_low": 0.1, "ci_high": 0.3}
    assert cis_overlap(a, {"ci_low": 0.25, "ci_high": 0.4})
    assert not cis_overlap(a, {"ci_low": 0.35, "ci_high": 0.4})
