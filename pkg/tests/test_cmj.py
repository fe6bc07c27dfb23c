import math

import numpy as np
import pytest
from scipy import integrate, stats

from selfexcite.cmj import (BirthRateLaw, CMJLimitData, CMJModel, LifeLaw,
                            OffspringLaw, characteristic_path,
                            cmj_limit_params, compensator_residual,
                            excess_life_distribution, population_structure,
                            simulate_cmj, size_biased_distribution,
                            total_birth_rate_path)


# ---------------------------------------------------------------- life laws

@pytest.mark.parametrize("family,param,mean,m2", [
    ("exponential", 2.0, 0.5, 0.5),
    ("uniform", 2.0, 1.0, 4.0 / 3.0),
    ("deterministic", 1.5, 1.5, 2.25),
    ("gamma2", 2.0, 1.0, 1.5),
])
def test_life_law_moments(family, param, mean, m2):
    law = LifeLaw(family, param)
    assert law.mean() == pytest.approx(mean)
    assert law.second_moment() == pytest.approx(m2)
    # sf + cdf = 1 and sampled moments agree
    ys = np.array([0.1, 0.5, 1.2])
    assert np.allclose(law.sf(ys) + law.cdf(ys), 1.0)
    rng = np.random.default_rng(0)
    draws = np.array([law.sample(rng) for _ in range(20_000)])
    assert abs(draws.mean() - mean) < 0.05 * max(mean, 1)


def test_life_law_validation():
    with pytest.raises(ValueError):
        LifeLaw("weibull", 1.0)
    with pytest.raises(ValueError):
        LifeLaw("uniform", 0.0)


# ------------------------------------------------- excess / size-biased

@pytest.mark.parametrize("family,param", [
    ("exponential", 1.3), ("uniform", 2.0), ("deterministic", 1.5),
    ("gamma2", 2.0),
])
def test_transform_pdfs_normalized(family, param):
    law = LifeLaw(family, param)
    for dist in (excess_life_distribution(law), size_biased_distribution(law)):
        if family == "deterministic" and dist.name.startswith("sizebiased"):
            continue  # point mass: no density
        total, _ = integrate.quad(lambda y: float(dist.pdf(y)), 0, 60,
                                  limit=200)
        assert total == pytest.approx(1.0, abs=1e-4)


def test_transform_closed_forms():
    # exponential life: excess is the same exponential (memorylessness),
    # size-biased is Gamma(2)
    law = LifeLaw("exponential", 2.0)
    exc, sb = excess_life_distribution(law), size_biased_distribution(law)
    assert exc.mean() == pytest.approx(0.5)
    assert sb.mean() == pytest.approx(1.0)
    y = np.array([0.3, 1.0])
    assert np.allclose(exc.pdf(y), 2.0 * np.exp(-2.0 * y))
    assert np.allclose(sb.pdf(y), 4.0 * y * np.exp(-2.0 * y))
    # uniform(0,c): excess density 2(1-y/c)/c, size-biased 2y/c^2
    law = LifeLaw("uniform", 2.0)
    exc, sb = excess_life_distribution(law), size_biased_distribution(law)
    assert np.allclose(exc.pdf(y), (1.0 - y / 2.0))
    assert np.allclose(sb.pdf(y), y / 2.0)
    assert exc.cdf(2.0) == pytest.approx(1.0)


@pytest.mark.parametrize("family,param", [
    ("exponential", 1.0), ("uniform", 2.0), ("gamma2", 1.5),
])
def test_transform_samplers_match_cdf(family, param):
    law = LifeLaw(family, param)
    rng = np.random.default_rng(3)
    for dist in (excess_life_distribution(law), size_biased_distribution(law)):
        draws = dist.sample(rng, 20_000)
        stat = stats.kstest(draws, lambda y: np.asarray(dist.cdf(y))).pvalue
        assert stat > 0.01, dist.name


# ---------------------------------------------------------------- birth law

def test_birth_rate_const():
    law = BirthRateLaw(beta=0.7)
    life = LifeLaw("uniform", 2.0)
    assert law.norm_L1(life) == pytest.approx(0.7 * 1.0)
    assert law.v_B(life) == pytest.approx(0.49 * 4.0 / 3.0)
    assert law.d_B(life) == pytest.approx(0.7 * (4.0 / 3.0) / 2.0)


def test_birth_rate_expdecay_against_quadrature():
    law = BirthRateLaw(beta=1.0, g="expdecay", kappa=2.0)
    life = LifeLaw("exponential", 1.0)
    target, _ = integrate.quad(
        lambda y: ((1 - math.exp(-2 * y)) / 2.0) * math.exp(-y), 0, 60)
    assert law.norm_L1(life) == pytest.approx(target, rel=1e-6)


def test_birth_rate_g_integral_consistency():
    for g, kappa in (("const", 1.0), ("expdecay", 1.7), ("hump", 0.8)):
        law = BirthRateLaw(beta=1.0, g=g, kappa=kappa)
        ts = np.linspace(0, 5, 50_001)
        quad = integrate.cumulative_trapezoid(law.g(ts), ts, initial=0.0)
        assert np.max(np.abs(law.g_integral(ts) - quad)) < 1e-6
        quad_t = integrate.cumulative_trapezoid(ts * law.g(ts), ts, initial=0.0)
        assert np.max(np.abs(law.g_first_moment_integral(ts) - quad_t)) < 1e-6


def test_birth_rate_random_beta():
    law = BirthRateLaw(beta_atoms=[0.5, 1.5], beta_probs=[0.5, 0.5])
    assert law.beta_mean() == pytest.approx(1.0)
    assert law.beta_second_moment() == pytest.approx(0.5 * 0.25 + 0.5 * 2.25)
    with pytest.raises(ValueError):
        BirthRateLaw(beta_atoms=[1.0], beta_probs=[0.7])


# ---------------------------------------------------------------- offspring

def test_offspring_law():
    law = OffspringLaw([[0], [2]], [0.5, 0.5])
    assert np.allclose(law.mean(), [1.0])
    assert np.allclose(law.second_moment(), [2.0])
    det = OffspringLaw.deterministic([1, 2])
    assert np.allclose(det.mean(), [1.0, 2.0])
    with pytest.raises(ValueError):
        OffspringLaw([[1]], [0.5])


# ---------------------------------------------------------------- simulation

def small_model(beta=0.5):
    return CMJModel(d=1, life_laws=[LifeLaw("uniform", 2.0)],
                    birth_laws=[BirthRateLaw(beta=beta)],
                    offspring_laws=[OffspringLaw.deterministic([1])],
                    immigration_law=OffspringLaw.deterministic([1]),
                    immigration_rate=1.0)


def test_mean_children_matrix():
    assert small_model(0.5).mean_children_matrix()[0, 0] == pytest.approx(0.5)


def test_simulate_determinism():
    model = small_model()
    log1 = simulate_cmj(model, [2], 10.0, seed=5)
    log2 = simulate_cmj(model, [2], 10.0, seed=5)
    assert np.array_equal(log1.repro_times, log2.repro_times)
    assert len(log1.individuals) == len(log2.individuals)


def test_simulate_compensator_residual():
    model = small_model()
    grid = np.array([5.0, 10.0])
    res = np.array([compensator_residual(simulate_cmj(model, [2], 10.0, s),
                                         0, grid) for s in range(300)])
    z = res.mean(axis=0) / (res.std(axis=0, ddof=1) / math.sqrt(300))
    assert np.all(np.abs(z) < 3.5)


def test_total_birth_rate_at_zero():
    model = small_model(beta=0.5)
    log = simulate_cmj(model, [50], 0.5, seed=1)
    B0 = total_birth_rate_path(log, [0.0])[0, 0]
    alive0 = sum(1 for ind in log.individuals
                 if ind.birth_time <= 0.0 < ind.death_time)
    assert B0 == pytest.approx(0.5 * alive0)


def test_population_structure_consistency():
    model = small_model()
    log = simulate_cmj(model, [30], 5.0, seed=2)
    m = population_structure(log, 0, 3.0)
    assert m.atoms.shape[1] == 2
    # age + residual = total life, and both positive for alive individuals
    assert np.all(m.atoms[:, 0] >= 0)
    assert np.all(m.atoms[:, 1] > 0)
    lives = population_structure(log, 0, 3.0, variant="life")
    assert np.allclose(np.sort(m.atoms.sum(axis=1)), np.sort(lives.atoms))
    assert m.total_mass == lives.total_mass


def test_characteristic_presets_consistency():
    model = small_model()
    log = simulate_cmj(model, [20], 6.0, seed=4)
    grid = np.array([2.0, 5.0])
    alive = characteristic_path(log, "alive", grid)
    young = characteristic_path(log, "young", grid, eta=0.7)
    old = characteristic_path(log, "old", grid, eta=0.7)
    assert np.allclose(alive, young + old)
    progeny = characteristic_path(log, "total_progeny", grid)
    assert np.all(progeny >= alive)
    with pytest.raises(ValueError):
        characteristic_path(log, "nonsense", grid)


def test_fresh_vs_excess_ancestors_origin():
    model = small_model()
    log = simulate_cmj(model, [10], 1.0, seed=6, ancestor_init="fresh")
    anc = [ind for ind in log.individuals if ind.origin == "ancestor"]
    assert len(anc) == 10
    assert all(ind.birth_time == 0.0 for ind in anc)
    log2 = simulate_cmj(model, [10], 1.0, seed=6, ancestor_init="excess")
    anc2 = [ind for ind in log2.individuals if ind.origin == "ancestor"]
    assert all(ind.birth_time <= 0.0 for ind in anc2)
    with pytest.raises(ValueError):
        simulate_cmj(model, [1], 1.0, seed=0, ancestor_init="weird")


def test_population_cap():
    model = CMJModel(d=1, life_laws=[LifeLaw("exponential", 0.2)],
                     birth_laws=[BirthRateLaw(beta=2.0)],
                     offspring_laws=[OffspringLaw.deterministic([2])],
                     immigration_law=OffspringLaw.deterministic([1]),
                     immigration_rate=1.0)
    with pytest.raises(RuntimeError):
        simulate_cmj(model, [50], 60.0, seed=0, pop_cap=3000)


# ---------------------------------------------------------------- limit map

def test_cmj_limit_params_uniform_life():
    # uniform(0,2) life, unit offspring, b=1, x0=1, unit immigration:
    # a=1, b=1, sigma=2/3, c=2/3, z0=1
    life = LifeLaw("uniform", 2.0)
    bl = BirthRateLaw(beta=1.0 / (life.mean() * 1.0))
    data = CMJLimitData(
        d=1, X0_star=np.array([1.0]), m_L=np.array([life.mean()]),
        m_children=np.array([[1.0]]), v_children=np.array([1.0]),
        m_imm=np.array([1.0]), b_star=np.array([[-1.0]]),
        v_B=np.array([bl.v_B(life)]), d_B=np.array([bl.d_B(life)]))
    p = cmj_limit_params(data)
    assert p.a[0] == pytest.approx(1.0)
    assert p.b[0, 0] == pytest.approx(1.0)
    assert p.sigma[0] == pytest.approx(2.0 / 3.0)
    assert p.c[0] == pytest.approx(2.0 / 3.0)
    assert p.z0[0] == pytest.approx(1.0)
