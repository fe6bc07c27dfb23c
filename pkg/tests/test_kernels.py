import math

import numpy as np
import pytest

from selfexcite.kernels import (AncestorSpec, HawkesModel, KernelSpec, Mark,
                                MarkDistribution, classify_criticality,
                                eval_kernel, kernel_first_moment,
                                mean_children_matrix,
                                mean_immigration_masses, mean_kernel)


# ---------------------------------------------------------------- marks

def test_constant_mark_moments():
    md = MarkDistribution("constant", {"amplitude": [2.0, 0.5]}, d=2)
    assert np.allclose(md.mean_amplitude(), [2.0, 0.5])
    assert np.allclose(md.second_moment(), [4.0, 0.25])
    rng = np.random.default_rng(0)
    amps = md.sample_amplitudes(rng, 5)
    assert amps.shape == (5, 2)
    assert np.all(amps == [2.0, 0.5])


def test_exponential_mark_moments():
    md = MarkDistribution("exponential", {"mean": 1.5}, d=1)
    assert np.allclose(md.mean_amplitude(), [1.5])
    assert np.allclose(md.second_moment(), [2 * 1.5**2])
    rng = np.random.default_rng(1)
    amps = md.sample_amplitudes(rng, 200_000)
    assert abs(amps.mean() - 1.5) < 0.02
    assert abs((amps**2).mean() - 4.5) < 0.1


def test_lognormal_mark_moments():
    mu, sig = 0.2, 0.5
    md = MarkDistribution("lognormal", {"mu": mu, "sigma": sig}, d=1)
    assert np.allclose(md.mean_amplitude(), math.exp(mu + sig**2 / 2))
    assert np.allclose(md.second_moment(), math.exp(2 * mu + 2 * sig**2))


def test_discrete_mark_moments_and_validation():
    md = MarkDistribution("discrete", {"atoms": [[1.0], [3.0]],
                                       "probs": [0.75, 0.25]}, d=1)
    assert np.allclose(md.mean_amplitude(), [1.5])
    assert np.allclose(md.second_moment(), [0.75 + 0.25 * 9])
    with pytest.raises(ValueError):
        MarkDistribution("discrete", {"atoms": [[1.0]], "probs": [0.7]}, d=1)
    with pytest.raises(ValueError):
        MarkDistribution("discrete", {"atoms": [[-1.0]], "probs": [1.0]}, d=1)
    with pytest.raises(ValueError):
        MarkDistribution("weibull", {}, d=1)


def test_mark_nonnegative():
    with pytest.raises(ValueError):
        Mark(amplitude=np.array([-0.5]))


# ---------------------------------------------------------------- kernels

@pytest.mark.parametrize("spec, tail_fn", [
    (KernelSpec("exponential", 1.0, {"rate": 2.0}),
     lambda t: math.exp(-2 * t)),
    (KernelSpec("erlang", 1.0, {"shape": 2, "rate": 3.0}),
     lambda t: math.exp(-3 * t) * (1 + 3 * t)),
    (KernelSpec("erlang", 1.0, {"shape": 3, "rate": 1.0}),
     lambda t: math.exp(-t) * (1 + t + t**2 / 2)),
])
def test_parametric_shape_mass_and_tail(spec, tail_fn):
    # unit mass and analytic tails
    t = np.linspace(0, 40, 200_001)
    assert abs(np.trapezoid(spec.shape(t), t) - 1.0) < 1e-6
    for s in (0.0, 0.3, 1.7):
        assert abs(spec.shape_tail_mass(s) - tail_fn(s)) < 1e-12
        assert abs(spec.shape_cdf(s) - (1.0 - tail_fn(s))) < 1e-12


def test_shape_cdf_matches_quadrature():
    spec = KernelSpec("erlang", 1.0, {"shape": 2, "rate": 1.5})
    t = np.linspace(0, 3, 30_001)
    quad = np.trapezoid(spec.shape(t), t)
    assert abs(spec.shape_cdf(3.0) - quad) < 1e-7


def test_first_moments():
    assert KernelSpec("exponential", 2.0, {"rate": 4.0}).first_moment() == \
        pytest.approx(0.5)
    assert KernelSpec("erlang", 1.0, {"shape": 3, "rate": 2.0}).first_moment() == \
        pytest.approx(1.5)


def test_table_kernel():
    spec = KernelSpec("table", 1.0, {"dt": 0.5, "values": [2.0, 1.0, 0.0]})
    assert spec.shape_mass() == pytest.approx(1.5)
    assert spec.mass() == pytest.approx(1.5)
    # step interpolation is left-closed right-open
    assert spec.shape(0.49) == 2.0
    assert spec.shape(0.5) == 1.0
    assert spec.shape(5.0) == 0.0
    assert spec.shape(-1.0) == 0.0
    assert spec.shape_tail_mass(0.25) == pytest.approx(2.0 * 0.25 + 0.5)
    assert spec.shape_sup_on(0.0, 1.0) == 2.0
    assert spec.shape_total_variation() == pytest.approx(2.0 + 1.0 + 1.0)


def test_kernel_validation():
    with pytest.raises(ValueError):
        KernelSpec("exponential", 1.0, {"rate": 0.0})
    with pytest.raises(ValueError):
        KernelSpec("erlang", 1.0, {"shape": 4, "rate": 1.0})
    with pytest.raises(ValueError):
        KernelSpec("exponential", -1.0, {"rate": 1.0})
    with pytest.raises(ValueError):
        KernelSpec("table", 1.0, {"dt": 0.5, "values": [-1.0]})


def test_eval_kernel_negative_time_raises():
    spec = KernelSpec("exponential", 1.0, {"rate": 1.0})
    mark = Mark(amplitude=np.array([2.0]))
    assert eval_kernel(spec, 0.0, mark, 0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        eval_kernel(spec, -0.1, mark, 0)


# ---------------------------------------------------------------- model

def _two_type_model():
    k = lambda m, r: KernelSpec("exponential", m, {"rate": r})
    kernels = [[k(0.5, 1.0), k(0.1, 2.0), k(0.3, 1.0)],
               [k(0.2, 1.0), k(0.5, 1.0), k(0.2, 1.0)]]
    marks = [MarkDistribution("constant", {"amplitude": 1.0}, d=2)] * 3
    return HawkesModel(d=2, kernels=kernels, mark_dists=marks)


def test_mean_children_and_immigration():
    model = _two_type_model()
    assert np.allclose(mean_children_matrix(model), [[0.5, 0.1], [0.2, 0.5]])
    assert np.allclose(mean_immigration_masses(model), [0.3, 0.2])
    assert kernel_first_moment(model, 0) == pytest.approx(0.5)
    t = np.array([0.0, 1.0])
    assert np.allclose(mean_kernel(model, 0, 0, t), 0.5 * np.exp(-t))


def test_model_shape_validation():
    k = KernelSpec("exponential", 0.5, {"rate": 1.0})
    marks = [MarkDistribution("constant", {"amplitude": 1.0})] * 2
    with pytest.raises(ValueError):
        HawkesModel(d=1, kernels=[[k]], mark_dists=marks)  # needs d+1 columns
    with pytest.raises(ValueError):
        HawkesModel(d=1, kernels=[[k, k]], mark_dists=marks[:1])


def test_ancestor_spec_validation():
    with pytest.raises(ValueError):
        AncestorSpec("weird")
    with pytest.raises(ValueError):
        AncestorSpec("excess", lambda0=[-1.0])


# ---------------------------------------------------------------- criticality

def test_classify_two_type_oracle():
    # dominant eigenvalue of [[.5,.1],[.2,.5]] is .5 + sqrt(.02)
    rep = classify_criticality(np.array([[0.5, 0.1], [0.2, 0.5]]))
    assert rep.spectral_radius == pytest.approx(0.5 + math.sqrt(0.02), abs=1e-9)
    assert rep.classification == "Subcritical"


def test_classify_trichotomy():
    assert classify_criticality(np.zeros((2, 2))).classification == "Subcritical"
    assert classify_criticality(np.eye(3)).classification == "Critical"
    assert classify_criticality(np.array([[1.5]])).classification == "Supercritical"
    # inside the tolerance band counts as critical
    rep = classify_criticality(np.array([[1.0 + 5e-10]]), tol=1e-9)
    assert rep.classification == "Critical"


def test_classify_rotation_like_matrix_uses_fallback():
    # complex dominant pair: power iteration cannot settle, char-poly can
    m = np.array([[0.0, 0.9], [0.9, 0.0]])
    rep = classify_criticality(m)
    assert rep.spectral_radius == pytest.approx(0.9, abs=1e-9)


def test_classify_validation():
    with pytest.raises(ValueError):
        classify_criticality(np.array([[-0.1]]))
    with pytest.raises(ValueError):
        classify_criticality(np.ones((2, 3)))
    with pytest.raises(ValueError):
        classify_criticality(np.eye(2), tol=0.0)
