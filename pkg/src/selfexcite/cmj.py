"""Crump-Mode-Jagers branching population simulator.

Individuals carry a life length from a parametric law, an age-dependent birth
rate B(t, y) = beta * g(t) * 1_{t < y}, and reproduce at the dates of an
inhomogeneous Poisson process on (0, life); offspring counts come from a small
pmf, immigrants arrive in Poisson batches.  The reproduction-date point
process is a marked Hawkes process (its intensity is the total birth rate),
which is what the limit theorems and the compensator diagnostics exploit.

Ancestors alive at time 0 are initialized from the inspection-paradox joint
age/residual-life law: total life from the size-biased law, age uniform on it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .cbi import CBIParams
from .shotnoise import ResponseFunction

__all__ = [
    "LifeLaw",
    "BirthRateLaw",
    "OffspringLaw",
    "CMJModel",
    "Individual",
    "PopulationLog",
    "EmpiricalMeasure",
    "CMJLimitData",
    "simulate_cmj",
    "init_ancestors_excess",
    "excess_life_distribution",
    "size_biased_distribution",
    "characteristic_path",
    "total_birth_rate_path",
    "birth_rate_integral",
    "population_structure",
    "cmj_limit_params",
]

DEFAULT_POP_CAP = 10_000_000


class LifeLaw:
    """Life-length law: exponential(rate), uniform(0,c), deterministic(c),
    gamma2(rate) (Erlang shape 2)."""

    FAMILIES = ("exponential", "uniform", "deterministic", "gamma2")

    def __init__(self, family: str, param: float):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown life-length family {family!r}")
        if param <= 0:
            raise ValueError("life-length parameter must be positive")
        self.family = family
        self.param = float(param)

    def mean(self) -> float:
        p = self.param
        return {"exponential": 1.0 / p, "uniform": p / 2.0,
                "deterministic": p, "gamma2": 2.0 / p}[self.family]

    def second_moment(self) -> float:
        p = self.param
        return {"exponential": 2.0 / p**2, "uniform": p**2 / 3.0,
                "deterministic": p**2, "gamma2": 6.0 / p**2}[self.family]

    def sf(self, y):
        """P(life > y), vectorized."""
        y = np.asarray(y, dtype=float)
        p = self.param
        if self.family == "exponential":
            out = np.exp(-p * np.maximum(y, 0.0))
        elif self.family == "uniform":
            out = np.clip(1.0 - y / p, 0.0, 1.0)
        elif self.family == "deterministic":
            out = (y < p).astype(float)
        else:
            yp = np.maximum(y, 0.0)
            out = np.exp(-p * yp) * (1.0 + p * yp)
        return np.where(y < 0, 1.0, out)

    def cdf(self, y):
        return 1.0 - self.sf(y)

    def sample(self, rng: np.random.Generator, size=None):
        p = self.param
        if self.family == "exponential":
            return rng.exponential(1.0 / p, size)
        if self.family == "uniform":
            return rng.uniform(0.0, p, size)
        if self.family == "deterministic":
            return np.full(size, p) if size is not None else p
        return rng.gamma(2.0, 1.0 / p, size)


class _Distribution:
    """Small closed-form distribution wrapper (pdf/cdf/mean/sampler)."""

    def __init__(self, name, pdf, cdf, mean, sampler):
        self.name = name
        self._pdf, self._cdf, self._mean, self._sampler = pdf, cdf, mean, sampler

    def pdf(self, y):
        return self._pdf(np.asarray(y, dtype=float))

    def cdf(self, y):
        return self._cdf(np.asarray(y, dtype=float))

    def mean(self):
        return self._mean

    def sample(self, rng: np.random.Generator, size=None):
        return self._sampler(rng, size)


def excess_life_distribution(law: LifeLaw) -> _Distribution:
    """Forward-recurrence law: density P(life >= y) / mean."""
    p, m = law.param, law.mean()
    if law.family == "exponential":
        return _Distribution(
            f"excess-exp({p})",
            lambda y: np.where(y >= 0, p * np.exp(-p * np.maximum(y, 0)), 0.0),
            lambda y: np.where(y >= 0, 1 - np.exp(-p * np.maximum(y, 0)), 0.0),
            1.0 / p,
            lambda rng, size: rng.exponential(1.0 / p, size))
    if law.family == "uniform":
        c = p
        return _Distribution(
            f"excess-uniform(0,{c})",
            lambda y: np.where((y >= 0) & (y <= c), (2.0 / c) * (1 - y / c), 0.0),
            lambda y: np.clip(2 * y / c - (y / c) ** 2, 0.0, 1.0),
            c / 3.0,
            lambda rng, size: c * (1.0 - np.sqrt(rng.uniform(size=size))))
    if law.family == "deterministic":
        c = p
        return _Distribution(
            f"excess-det({c})",
            lambda y: np.where((y >= 0) & (y < c), 1.0 / c, 0.0),
            lambda y: np.clip(y / c, 0.0, 1.0),
            c / 2.0,
            lambda rng, size: rng.uniform(0.0, c, size))
    # gamma2: excess density lam*exp(-lam y)(1 + lam y)/2 -- equal mixture of
    # Exponential(lam) and Gamma(2, lam)
    lam = p
    return _Distribution(
        f"excess-gamma2({lam})",
        lambda y: np.where(y >= 0, lam * np.exp(-lam * np.maximum(y, 0))
                           * (1 + lam * np.maximum(y, 0)) / 2.0, 0.0),
        lambda y: np.where(y >= 0, 1 - np.exp(-lam * np.maximum(y, 0))
                           * (2 + lam * np.maximum(y, 0)) / 2.0, 0.0),
        1.5 / lam,
        lambda rng, size: np.where(rng.uniform(size=size) < 0.5,
                                   rng.exponential(1 / lam, size),
                                   rng.gamma(2.0, 1 / lam, size)))


def size_biased_distribution(law: LifeLaw) -> _Distribution:
    """Length-biased law: density y P_L(dy) / mean (life of someone observed
    alive)."""
    p = law.param
    if law.family == "exponential":
        return _Distribution(
            f"sizebiased-exp({p})",
            lambda y: np.where(y >= 0, p**2 * np.maximum(y, 0) * np.exp(-p * np.maximum(y, 0)), 0.0),
            lambda y: np.where(y >= 0, 1 - np.exp(-p * np.maximum(y, 0)) * (1 + p * np.maximum(y, 0)), 0.0),
            2.0 / p,
            lambda rng, size: rng.gamma(2.0, 1.0 / p, size))
    if law.family == "uniform":
        c = p
        return _Distribution(
            f"sizebiased-uniform(0,{c})",
            lambda y: np.where((y >= 0) & (y <= c), 2 * y / c**2, 0.0),
            lambda y: np.clip((y / c) ** 2, 0.0, 1.0),
            2.0 * c / 3.0,
            lambda rng, size: c * np.sqrt(rng.uniform(size=size)))
    if law.family == "deterministic":
        c = p
        return _Distribution(
            f"sizebiased-det({c})",
            lambda y: np.where(y == c, np.inf, 0.0),
            lambda y: (y >= c).astype(float),
            c,
            lambda rng, size: np.full(size, c) if size is not None else c)
    lam = p
    return _Distribution(
        f"sizebiased-gamma2({lam})",
        lambda y: np.where(y >= 0, lam**3 * np.maximum(y, 0) ** 2 * np.exp(-lam * np.maximum(y, 0)) / 2.0, 0.0),
        lambda y: np.where(y >= 0, 1 - np.exp(-lam * np.maximum(y, 0))
                           * (1 + lam * np.maximum(y, 0) + (lam * np.maximum(y, 0)) ** 2 / 2.0), 0.0),
        3.0 / lam,
        lambda rng, size: rng.gamma(3.0, 1.0 / lam, size))


class BirthRateLaw:
    """B(t, y) = beta * g(t) * 1_{t<y}; g in {const, expdecay, hump}.

    g families (t is the individual's age):
      const:    g = 1
      expdecay: g(t) = exp(-kappa t)
      hump:     g(t) = kappa e t exp(-kappa t)   (normalized to sup 1)
    beta may be randomized over a finite set of atoms (drawn per individual).
    """

    G_FAMILIES = ("const", "expdecay", "hump")

    def __init__(self, beta: float = None, g: str = "const", kappa: float = 1.0,
                 beta_atoms: Sequence[float] = None, beta_probs: Sequence[float] = None):
        if g not in self.G_FAMILIES:
            raise ValueError(f"unknown birth-rate modulation {g!r}")
        self.g_family = g
        self.kappa = float(kappa)
        if beta_atoms is not None:
            atoms = np.asarray(beta_atoms, dtype=float)
            probs = np.asarray(beta_probs, dtype=float)
            if np.any(atoms < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("beta atoms must be nonnegative with pmf weights")
            self.beta_atoms, self.beta_probs = atoms, probs
        else:
            if beta is None or beta < 0:
                raise ValueError("need a nonnegative beta")
            self.beta_atoms = np.array([float(beta)])
            self.beta_probs = np.array([1.0])

    def beta_mean(self) -> float:
        return float(self.beta_probs @ self.beta_atoms)

    def beta_second_moment(self) -> float:
        return float(self.beta_probs @ self.beta_atoms**2)

    def sample_beta(self, rng: np.random.Generator) -> float:
        if len(self.beta_atoms) == 1:
            return float(self.beta_atoms[0])
        return float(rng.choice(self.beta_atoms, p=self.beta_probs))

    def g(self, t):
        t = np.asarray(t, dtype=float)
        if self.g_family == "const":
            return np.ones_like(t)
        if self.g_family == "expdecay":
            return np.exp(-self.kappa * t)
        return self.kappa * math.e * t * np.exp(-self.kappa * t)

    def g_integral(self, t):
        """G(t) = int_0^t g(s) ds, vectorized, analytic."""
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        k = self.kappa
        if self.g_family == "const":
            return t
        if self.g_family == "expdecay":
            return (1.0 - np.exp(-k * t)) / k
        return (math.e / k) * (1.0 - np.exp(-k * t) * (1.0 + k * t))

    def g_first_moment_integral(self, t):
        """int_0^t s g(s) ds, analytic (for d_B)."""
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        k = self.kappa
        if self.g_family == "const":
            return t**2 / 2.0
        if self.g_family == "expdecay":
            return (1.0 - np.exp(-k * t) * (1.0 + k * t)) / k**2
        return (math.e / k**2) * (2.0 - np.exp(-k * t)
                                  * (2.0 + 2.0 * k * t + (k * t) ** 2))

    def g_sup(self, a0: float, a1: float) -> float:
        """sup of g over [a0, a1)."""
        if a1 <= a0:
            return 0.0
        if self.g_family == "const":
            return 1.0
        if self.g_family == "expdecay":
            return float(self.g(max(a0, 0.0)))
        peak = 1.0 / self.kappa
        cand = [float(self.g(max(a0, 0.0))), float(self.g(a1))]
        if a0 <= peak < a1:
            cand.append(1.0)
        return max(cand)

    # moment integrals against a life law ------------------------------

    def mass_given_life(self, y):
        """||B(., y)||_{L1} / beta = G(y)."""
        return self.g_integral(y)

    def norm_L1(self, life: LifeLaw) -> float:
        """E[beta] E[G(life)] = ||B||_{L1} (beta independent of life)."""
        return self.beta_mean() * self._expect_g_integral(life)

    def v_B(self, life: LifeLaw) -> float:
        """E[(beta G(life))^2]."""
        return self.beta_second_moment() * self._expect_g_integral_sq(life)

    def d_B(self, life: LifeLaw) -> float:
        """E[beta int_0^life t g(t) dt]."""
        return self.beta_mean() * self._expect_tg_integral(life)

    def _quad(self, f, life: LifeLaw) -> float:
        # expectation of f(life) by dense quadrature against the life pdf;
        # exact-enough (1e-10-ish) for the smooth parametric families
        if life.family == "deterministic":
            return float(f(life.param))
        if life.family == "uniform":
            ys = np.linspace(0.0, life.param, 20001)
            return float(np.trapezoid(f(ys) / life.param, ys))
        hi = 40.0 / life.param
        ys = np.linspace(0.0, hi, 40001)
        if life.family == "exponential":
            pdf = life.param * np.exp(-life.param * ys)
        else:
            pdf = life.param**2 * ys * np.exp(-life.param * ys)
        return float(np.trapezoid(f(ys) * pdf, ys))

    def _expect_g_integral(self, life: LifeLaw) -> float:
        if self.g_family == "const":
            return life.mean()
        return self._quad(self.g_integral, life)

    def _expect_g_integral_sq(self, life: LifeLaw) -> float:
        if self.g_family == "const":
            return life.second_moment()
        return self._quad(lambda y: self.g_integral(y) ** 2, life)

    def _expect_tg_integral(self, life: LifeLaw) -> float:
        if self.g_family == "const":
            return life.second_moment() / 2.0
        return self._quad(self.g_first_moment_integral, life)


class OffspringLaw:
    """pmf on small-support N^d count vectors."""

    def __init__(self, atoms: Sequence[Sequence[int]], probs: Sequence[float]):
        self.atoms = np.atleast_2d(np.asarray(atoms, dtype=int))
        self.probs = np.asarray(probs, dtype=float)
        if np.any(self.atoms < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("offspring law must be a pmf on nonnegative counts")

    @classmethod
    def deterministic(cls, counts) -> "OffspringLaw":
        return cls([counts], [1.0])

    def mean(self) -> np.ndarray:
        return self.probs @ self.atoms

    def second_moment(self) -> np.ndarray:
        """E[k_i^2] per component."""
        return self.probs @ self.atoms.astype(float) ** 2

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.probs), p=self.probs)
        return self.atoms[idx]


@dataclass
class CMJModel:
    d: int
    life_laws: Sequence[LifeLaw]
    birth_laws: Sequence[BirthRateLaw]
    offspring_laws: Sequence[OffspringLaw]   # per parent type
    immigration_law: Optional[OffspringLaw] = None
    immigration_rate: float = 1.0
    characteristic: Optional[ResponseFunction] = None

    def __post_init__(self):
        for seq, name in ((self.life_laws, "life_laws"),
                          (self.birth_laws, "birth_laws"),
                          (self.offspring_laws, "offspring_laws")):
            if len(seq) != self.d:
                raise ValueError(f"{name} must have one entry per type")

    def mean_children_matrix(self) -> np.ndarray:
        """m[i, j] * ||B_j||: mean type-i children of a type-j individual."""
        m = np.zeros((self.d, self.d))
        for j in range(self.d):
            m[:, j] = self.offspring_laws[j].mean() * \
                self.birth_laws[j].norm_L1(self.life_laws[j])
        return m


@dataclass
class Individual:
    type: int
    birth_time: float    # tau_x; negative for ancestors (age at 0 = -tau_x)
    life: float          # total life length (age counts from birth_time)
    beta: float
    parent: int = -1     # index into the log, -1 for ancestor/immigrant
    origin: str = "birth"  # ancestor | immigrant | birth

    @property
    def death_time(self) -> float:
        return self.birth_time + self.life


@dataclass
class PopulationLog:
    horizon: float
    individuals: List[Individual]
    repro_times: np.ndarray   # times of reproduction dates (all types merged)
    repro_types: np.ndarray   # type of the reproducing parent
    model: CMJModel
    seed: object = None

    def reproduction_count(self, i: int, grid) -> np.ndarray:
        times = np.sort(self.repro_times[self.repro_types == i])
        return np.searchsorted(times, np.asarray(grid, dtype=float),
                               side="right").astype(float)


@dataclass
class EmpiricalMeasure:
    atoms: np.ndarray     # (k,) or (k, 2)
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.atoms)):
            raise ValueError("weights must be nonnegative, atoms finite")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def marginal(self, axis: int) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.atoms[:, axis], self.weights)


def init_ancestors_excess(model: CMJModel, X0, rng: np.random.Generator) -> List[Individual]:
    """Ancestors at time 0 from the joint age/residual-life inspection law:
    total life from the size-biased law, age uniform on the life."""
    X0 = np.atleast_1d(np.asarray(X0, dtype=int))
    out = []
    for i in range(model.d):
        sb = size_biased_distribution(model.life_laws[i])
        for _ in range(int(X0[i])):
            life = float(sb.sample(rng))
            age = rng.uniform(0.0, life)
            out.append(Individual(type=i, birth_time=-age, life=life,
                                  beta=model.birth_laws[i].sample_beta(rng),
                                  origin="ancestor"))
    return out


def _init_ancestors_fresh(model: CMJModel, X0, rng: np.random.Generator) -> List[Individual]:
    """Age-0 ancestors with unbiased lives: deliberately violates the
    inspection-paradox initialization (negative-control experiments)."""
    X0 = np.atleast_1d(np.asarray(X0, dtype=int))
    out = []
    for i in range(model.d):
        for _ in range(int(X0[i])):
            out.append(Individual(type=i, birth_time=0.0,
                                  life=float(model.life_laws[i].sample(rng)),
                                  beta=model.birth_laws[i].sample_beta(rng),
                                  origin="ancestor"))
    return out


def _reproduction_ages(ind: Individual, law: BirthRateLaw, age0: float,
                       age_max: float, rng: np.random.Generator) -> np.ndarray:
    """Ages (in (age0, age_max)) of the individual's reproduction dates, by
    thinning a homogeneous bound."""
    if age_max <= age0:
        return np.empty(0)
    bound = ind.beta * law.g_sup(age0, age_max)
    if bound <= 0.0:
        return np.empty(0)
    count = rng.poisson(bound * (age_max - age0))
    if count == 0:
        return np.empty(0)
    ages = rng.uniform(age0, age_max, count)
    keep = rng.uniform(0.0, bound, count) < ind.beta * law.g(ages)
    return np.sort(ages[keep])


def simulate_cmj(model: CMJModel, X0, T: float, seed,
                 pop_cap: int = DEFAULT_POP_CAP,
                 ancestor_init: str = "excess") -> PopulationLog:
    """Event-driven simulation on (0, T].

    Reproduction dates per individual are pre-sampled by thinning at creation
    (they depend only on the individual); a priority queue processes dates in
    chronological order, drawing offspring counts and creating children.
    Deterministic in (model, X0, T, seed).
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    if ancestor_init == "excess":
        individuals = init_ancestors_excess(model, X0, rng)
    elif ancestor_init == "fresh":
        individuals = _init_ancestors_fresh(model, X0, rng)
    else:
        raise ValueError(f"unknown ancestor_init {ancestor_init!r}")

    heap: list = []
    seq = 0

    def push_dates(idx: int):
        nonlocal seq
        ind = individuals[idx]
        age0 = max(0.0, -ind.birth_time)  # elapsed age at entry (ancestors)
        age_max = min(ind.life, T - ind.birth_time)
        for age in _reproduction_ages(ind, model.birth_laws[ind.type],
                                      age0, age_max, rng):
            t = ind.birth_time + age
            if 0.0 < t <= T:
                heapq.heappush(heap, (t, ind.type, seq, idx))
                seq += 1

    for idx in range(len(individuals)):
        push_dates(idx)

    # immigration arrivals on (0, T]
    if model.immigration_law is not None and model.immigration_rate > 0:
        t = 0.0
        while True:
            t += rng.exponential(1.0 / model.immigration_rate)
            if t > T:
                break
            heapq.heappush(heap, (t, model.d, seq, -1))  # type d = immigration
            seq += 1

    repro_times: List[float] = []
    repro_types: List[int] = []
    while heap:
        t, typ, _, idx = heapq.heappop(heap)
        if typ == model.d:
            counts = model.immigration_law.sample(rng)
        else:
            repro_times.append(t)
            repro_types.append(typ)
            counts = model.offspring_laws[typ].sample(rng)
        for i in range(model.d):
            for _ in range(int(counts[i])):
                child = Individual(
                    type=i, birth_time=t,
                    life=float(model.life_laws[i].sample(rng)),
                    beta=model.birth_laws[i].sample_beta(rng),
                    parent=idx,
                    origin="immigrant" if typ == model.d else "birth")
                individuals.append(child)
                if len(individuals) > pop_cap:
                    raise RuntimeError(
                        f"population cap {pop_cap} exceeded at t={t:.4g}")
                push_dates(len(individuals) - 1)

    return PopulationLog(horizon=T, individuals=individuals,
                         repro_times=np.asarray(repro_times),
                         repro_types=np.asarray(repro_types, dtype=int),
                         model=model, seed=seed)


_PRESETS = ("alive", "young", "old", "short_residual", "total_progeny", "integrated")


def characteristic_path(log: PopulationLog, preset, grid, eta: float = 1.0) -> np.ndarray:
    """T_i(t) = sum over type-i individuals of T_x(t - tau_x, ell_x).

    preset is one of the named characteristics or a shotnoise ResponseFunction
    (applied to the individual's age).  Returns (len(grid), d).
    """
    grid = np.asarray(grid, dtype=float)
    d = log.model.d
    out = np.zeros((len(grid), d))
    for ind in log.individuals:
        age = grid - ind.birth_time
        y = ind.life
        if isinstance(preset, ResponseFunction):
            vals = np.where(age >= 0, preset.value(np.maximum(age, 0.0)), 0.0)
        elif preset == "alive":
            vals = ((age >= 0) & (age < y)).astype(float)
        elif preset == "young":
            vals = ((age >= 0) & (age < min(eta, y))).astype(float)
        elif preset == "old":
            vals = ((age >= eta) & (age < y)).astype(float)
        elif preset == "short_residual":
            res = y - age
            vals = ((age >= 0) & (res > 0) & (res <= eta)).astype(float)
        elif preset == "total_progeny":
            vals = (age >= 0).astype(float)
        elif preset == "integrated":
            vals = np.minimum(np.maximum(age, 0.0), y)
        else:
            raise ValueError(f"unknown characteristic preset {preset!r}")
        out[:, ind.type] += vals
    return out


def total_birth_rate_path(log: PopulationLog, grid) -> np.ndarray:
    """B_i(t) = sum over type-i individuals of beta g(age) 1_{age < life}."""
    grid = np.asarray(grid, dtype=float)
    d = log.model.d
    out = np.zeros((len(grid), d))
    for ind in log.individuals:
        law = log.model.birth_laws[ind.type]
        age = grid - ind.birth_time
        active = (age >= 0) & (age < ind.life)
        if np.any(active):
            out[active, ind.type] += ind.beta * law.g(age[active])
    return out


def birth_rate_integral(log: PopulationLog, i: int, grid) -> np.ndarray:
    """int_0^{t_k} B_i(s) ds, exact per individual via the analytic G.

    Each individual contributes beta (G(min(age_t, life)) - G(age_at_entry))
    once t has passed its entry; this is the compensator of the type-i
    reproduction-date counting process.
    """
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(len(grid))
    law_cache = log.model.birth_laws
    for ind in log.individuals:
        if ind.type != i:
            continue
        law = law_cache[i]
        age0 = max(0.0, -ind.birth_time)
        age_t = np.minimum(grid - ind.birth_time, ind.life)
        contrib = law.g_integral(np.maximum(age_t, age0)) - law.g_integral(age0)
        out += ind.beta * contrib
    return out


def compensator_residual(log: PopulationLog, i: int, grid) -> np.ndarray:
    """Reproduction-date count minus integrated total birth rate."""
    return log.reproduction_count(i, grid) - birth_rate_integral(log, i, grid)


def population_structure(log: PopulationLog, i: int, t: float,
                         variant: str = "age_residual") -> EmpiricalMeasure:
    """Empirical measure over alive type-i individuals at time t.

    variant "age_residual": atoms (age, residual life); "life": atoms ell_x.
    """
    if t > log.horizon:
        raise ValueError("t beyond the log horizon")
    ages, residuals, lives = [], [], []
    for ind in log.individuals:
        if ind.type != i:
            continue
        age = t - ind.birth_time
        if 0 <= age < ind.life:
            ages.append(age)
            residuals.append(ind.life - age)
            lives.append(ind.life)
    if variant == "age_residual":
        atoms = np.column_stack([ages, residuals]) if ages else np.empty((0, 2))
    elif variant == "life":
        atoms = np.asarray(lives)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return EmpiricalMeasure(atoms=atoms, weights=np.ones(len(ages)))


@dataclass(frozen=True)
class CMJLimitData:
    """Limit data of a CMJ model sequence (single or
    multi type); all analytic for the parametric families.

    b_star follows the CMJ sign convention: diagonal from
    n(||B^{(n)}_i|| m^{(n)}_{ii} - 1) -> b*_ii (negative on the subcritical
    side), off-diagonal from n m^{(n)}_{ij} -> b*_ij (nonnegative).
    """

    d: int
    X0_star: np.ndarray     # lim X^{(n)}(0)/n
    m_L: np.ndarray         # mean life per type
    m_children: np.ndarray  # d x d limit offspring means m*_ij (diag m*_ii)
    v_children: np.ndarray  # per type second moment v*_ii
    m_imm: np.ndarray       # m*_iI mean immigrants per arrival
    b_star: np.ndarray      # d x d, see above
    v_B: np.ndarray         # lim v_{B,i}
    d_B: np.ndarray         # lim d_{B,i}


def cmj_limit_params(data: CMJLimitData) -> CBIParams:
    """Map the CMJ limit data to the CBI limit parameters.

    b is stored in the Hawkes rescaling convention (b = lim n(I - ||phi||)),
    i.e. b_ij = -b*_ij / m*_ii.  The diffusion parameter uses the
    c^{(n)} -> 2c normalization of the limit SDE, so the raw second-moment
    expression v*_B m*_ii + (v*_ii - m*_ii)/m*_ii^2 (which is the limit of
    c^{(n)}) is halved.
    """
    d = data.d
    m_ii = np.diag(np.atleast_2d(data.m_children)).astype(float)
    m_L = np.atleast_1d(np.asarray(data.m_L, float))
    if np.any(m_ii <= 0) or np.any(m_L <= 0):
        raise ValueError("need positive limit mean children and mean life")
    z0 = np.atleast_1d(np.asarray(data.X0_star, float)) / (m_L * m_ii)
    a = np.atleast_1d(np.asarray(data.m_imm, float)) / m_ii
    b = -np.atleast_2d(np.asarray(data.b_star, float)) / m_ii[:, None]
    sigma = np.atleast_1d(np.asarray(data.d_B, float)) * m_ii
    c_raw = np.atleast_1d(np.asarray(data.v_B, float)) * m_ii \
        + (np.atleast_1d(np.asarray(data.v_children, float)) - m_ii) / m_ii**2
    return CBIParams(d=d, a=a, b=b, sigma=sigma, c=c_raw / 2.0, z0=z0)
