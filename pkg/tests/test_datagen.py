import math

import numpy as np
import pytest

from debiasreg import INTRO, DimensionMismatch, ScenarioSpec, generate, signal, signal_matrix


def test_nonlinear2_at_half():
    assert signal("nonlinear2", [0.5] * 10) == pytest.approx(14.5710678, abs=1e-7)


def test_nonlinear1_at_zero():
    assert signal("nonlinear1", [0.0] * 10) == pytest.approx(0.1001815, abs=1e-7)
    assert signal("nonlinear1", [0.0] * 10) == pytest.approx(0.1 + 4 / (1 + math.e**10))


def test_nonlinear1_linear_terms():
    x = [0, 0, 1, 1, 1, 0, 0, 0, 0, 0]
    assert signal("nonlinear1", x) == pytest.approx(6.1001815, abs=1e-7)


def test_linear_unit_vector():
    assert signal("linear", [1.0, 0, 0], beta=[1.0, 0, 0]) == 1.0


def test_signal_errors():
    with pytest.raises(DimensionMismatch):
        signal("linear", [1.0, 2.0], beta=[1.0])
    with pytest.raises(DimensionMismatch):
        signal("nonlinear1", [0.1] * 4)
    with pytest.raises(ValueError):
        signal("linear", [1.0])


def test_linear_zero_beta_variance_matches_noise():
    spec = ScenarioSpec("linear", n=10000, p=3, beta=(0, 0, 0), noise_sd=2.0, seed=5)
    y = generate(spec).response
    se = 4.0 * math.sqrt(2 / (y.size - 1))  # sd of the sample variance under normality
    assert abs(y.var(ddof=1) - 4.0) <= 3 * se


@pytest.mark.parametrize("kind", ["linear", "nonlinear1", "nonlinear2"])
def test_generate_reproducible(kind):
    a = generate(ScenarioSpec(kind, n=30, seed=9))
    b = generate(ScenarioSpec(kind, n=30, seed=9))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.response.tobytes() == b.response.tobytes()
    c = generate(ScenarioSpec(kind, n=30, seed=10))
    assert not np.array_equal(a.response, c.response)


@pytest.mark.parametrize("kind", ["linear", "nonlinear1", "nonlinear2"])
def test_noise_independent_of_inputs(kind):
    spec = ScenarioSpec(kind, n=10000, seed=1)
    ds = generate(spec)
    eps = ds.response - signal_matrix(kind, ds.features, spec.beta)
    assert abs(eps.std() - 1.0) < 0.05
    for j in range(ds.p):
        assert abs(np.corrcoef(eps, ds.features[:, j])[0, 1]) <= 0.05


def test_input_distributions():
    lin = generate(ScenarioSpec("linear", n=5000, p=4, seed=2)).features
    assert abs(lin.mean()) < 0.05 and abs(lin.std() - 1) < 0.05
    nl = generate(ScenarioSpec("nonlinear2", n=5000, seed=2)).features
    assert nl.shape[1] == 10 and nl.min() >= 0 and nl.max() <= 1


def test_inert_predictors(rng):
    X = rng.uniform(size=(20, 10))
    Z = X.copy()
    Z[:, 5:] = rng.uniform(size=(20, 5))
    np.testing.assert_array_equal(signal_matrix("nonlinear1", X),
                                  signal_matrix("nonlinear1", Z))


def test_default_linear_beta():
    spec = ScenarioSpec("linear", p=10)
    assert spec.beta == (0.5,) * 10
    r2 = np.sum(np.square(spec.beta)) / (np.sum(np.square(spec.beta)) + spec.noise_sd**2)
    assert r2 == pytest.approx(5 / 7)


@pytest.mark.parametrize("kwargs", [dict(kind="cubic"), dict(n=0), dict(noise_sd=0.0),
                                    dict(kind="nonlinear1", p=5), dict(p=3, beta=(1, 2))])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ScenarioSpec(**kwargs)


def test_intro_preset():
    assert (INTRO.n, INTRO.p, INTRO.noise_sd) == (1000, 200, 1.0)
    assert set(INTRO.beta) == {0.1}
    assert generate(INTRO.with_n(50)).features.shape == (50, 200)
