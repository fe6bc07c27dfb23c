"""Scaling schedules, Monte Carlo ensembles and limit-theorem verification.

A ScalingSchedule encodes the asymptotically critical model sequence: self
kernel masses 1 - b_ii/n, cross masses -b_ij/n, immigration masses a_i, fixed
shapes pinning sigma and the c-limit.  Experiments run a ladder of n values,
compare moments and Laplace transforms of the rescaled paths against the CBI
oracles, and apply a monotone-decay-with-slack rule to the gap sequences.

All randomness flows from one master seed through SeedSequence; ensembles are
sequential over paths with per-path counter-derived streams, so every report
regenerates byte-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engines
from .cbi import CBIParams, laplace_transform, moment_odes
from .cmj import (BirthRateLaw, CMJLimitData, CMJModel, LifeLaw, OffspringLaw,
                  cmj_limit_params, excess_life_distribution)
from .kernels import AncestorSpec, HawkesModel, KernelSpec, MarkDistribution

__all__ = [
    "HawkesScalingSchedule",
    "CMJScalingSchedule",
    "EnsembleSummary",
    "ConvergenceReport",
    "monte_carlo",
    "build_scaled_model",
    "compare_moments",
    "distribution_distance",
    "convergence_report",
    "scaling_experiment",
    "shotnoise_experiment",
    "collapse_experiment",
    "resolvent_error_experiment",
]

SLACK = 1.5
DEFAULT_N_LADDER = (25, 100, 400)


# ----------------------------------------------------------------------
# schedules
# ----------------------------------------------------------------------

@dataclass
class HawkesScalingSchedule:
    """Near-critical Hawkes model sequence with exponential shapes.

    b: d x d (off-diagonal <= 0); a, sigma, z0: length-d.  Kernel shapes are
    Exponential(rate 1/sigma_i), so the n-th self mass is exactly 1 - b_ii/n
    and int t phi_ii^{(n)} = (1 - b_ii/n) sigma_i -> sigma_i.  mark_kind
    "constant" gives the c-limit 1/2 per type, "exponential" (mean 1) gives 1.
    """

    b: np.ndarray
    a: np.ndarray
    sigma: np.ndarray
    z0: np.ndarray
    mark_kind: str = "constant"
    lambda_I: float = 1.0
    beta: float = 0.0
    d: int = 1

    def __post_init__(self):
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.d = self.b.shape[0]
        for name in ("a", "sigma", "z0"):
            v = np.broadcast_to(np.atleast_1d(np.asarray(getattr(self, name), float)),
                                (self.d,)).copy()
            setattr(self, name, v)
        if self.mark_kind not in ("constant", "exponential"):
            raise ValueError("mark_kind must be constant or exponential")
        if self.beta < 0 or self.beta <= self.lambda_b:
            raise ValueError(f"beta must be >= 0 and exceed lambda_b = {self.lambda_b}")

    @property
    def lambda_b(self) -> float:
        return float(-np.min(np.diag(self.b) / self.sigma))

    @property
    def c_limit(self) -> np.ndarray:
        # c^{(n)} = E[amp^2] ||phi_ii^{(n)}||^2 -> E[amp^2] = 2c
        e2 = 1.0 if self.mark_kind == "constant" else 2.0
        return np.full(self.d, e2 / 2.0)

    def limit_cbi_params(self) -> CBIParams:
        return CBIParams(d=self.d, a=self.a, b=self.b, sigma=self.sigma,
                         c=self.c_limit, z0=self.z0)

    def masses(self, n: int) -> np.ndarray:
        m = -self.b / n
        np.fill_diagonal(m, 1.0 - np.diag(self.b) / n)
        return m

    def build_scaled_model(self, n: int) -> HawkesModel:
        if n < 1:
            raise ValueError("n must be >= 1")
        masses = self.masses(n)
        if np.any(masses < 0):
            raise ValueError(f"n={n} too small for the requested b (negative mass)")
        d = self.d
        kernels = []
        for i in range(d):
            rate = 1.0 / self.sigma[i]
            row = [KernelSpec("exponential", float(masses[i, j]), {"rate": rate})
                   for j in range(d)]
            row.append(KernelSpec("exponential", float(self.a[i]), {"rate": rate}))
            kernels.append(row)
        if self.mark_kind == "constant":
            mark = MarkDistribution("constant", {"amplitude": 1.0}, d=d)
        else:
            mark = MarkDistribution("exponential", {"mean": 1.0}, d=d)
        anc = AncestorSpec("excess", lambda0=n * self.z0)
        return HawkesModel(d=d, kernels=kernels, mark_dists=[mark] * (d + 1),
                           immigration_rate=self.lambda_I, ancestors=anc)


@dataclass
class CMJScalingSchedule:
    """Single-type CMJ sequence: constant birth rate beta_n while alive,
    beta_n = (1 - b/n)/(m_L m_11), so the reproduction-date Hawkes kernel has
    mass exactly 1 - b/n."""

    b: float
    x0: float
    life_family: str = "uniform"
    life_param: float = 2.0
    offspring_atoms: Sequence[int] = (1,)
    offspring_probs: Sequence[float] = (1.0,)
    imm_atoms: Sequence[int] = (1,)
    imm_probs: Sequence[float] = (1.0,)
    lambda_I: float = 1.0

    def __post_init__(self):
        self._life = LifeLaw(self.life_family, self.life_param)
        self._off = OffspringLaw([[k] for k in self.offspring_atoms],
                                 list(self.offspring_probs))
        self._imm = OffspringLaw([[k] for k in self.imm_atoms],
                                 list(self.imm_probs))

    @property
    def life_law(self) -> LifeLaw:
        return self._life

    def m_children(self) -> float:
        return float(self._off.mean()[0])

    def v_children(self) -> float:
        return float(self._off.second_moment()[0])

    def beta_n(self, n: int) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        m = self.m_children()
        val = (1.0 - self.b / n) / (self._life.mean() * m)
        if val < 0:
            raise ValueError(f"n={n} too small for the requested b (negative rate)")
        return val

    def n_ancestors(self, n: int) -> int:
        return int(round(n * self.x0))

    def build_scaled_model(self, n: int) -> CMJModel:
        return CMJModel(
            d=1,
            life_laws=[self._life],
            birth_laws=[BirthRateLaw(beta=self.beta_n(n))],
            offspring_laws=[self._off],
            immigration_law=self._imm,
            immigration_rate=self.lambda_I,
        )

    def limit_data(self) -> CMJLimitData:
        life, m = self._life, self.m_children()
        beta_star = 1.0 / (life.mean() * m)
        bl = BirthRateLaw(beta=beta_star)
        return CMJLimitData(
            d=1,
            X0_star=np.array([self.x0]),
            m_L=np.array([life.mean()]),
            m_children=np.array([[m]]),
            v_children=np.array([self.v_children()]),
            m_imm=np.array([float(self._imm.mean()[0]) * self.lambda_I]),
            b_star=np.array([[-self.b]]),
            v_B=np.array([bl.v_B(life)]),
            d_B=np.array([bl.d_B(life)]),
        )

    def limit_cbi_params(self) -> CBIParams:
        return cmj_limit_params(self.limit_data())


def build_scaled_model(schedule, n: int):
    """Dispatch helper: the n-th concrete model of a schedule."""
    return schedule.build_scaled_model(n)


# ----------------------------------------------------------------------
# ensembles
# ----------------------------------------------------------------------

@dataclass
class EnsembleSummary:
    n: int
    n_paths: int
    times: np.ndarray
    mean: np.ndarray          # (nt,)
    sem: np.ndarray
    m2: np.ndarray            # raw second moments
    m2_sem: np.ndarray
    laplace_z: np.ndarray = field(default_factory=lambda: np.empty(0))
    laplace_mean: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    laplace_sem: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    extra: dict = field(default_factory=dict)


def _summarize(values: np.ndarray, n: int, times, z_values=None) -> EnsembleSummary:
    """values: (n_paths, nt) observable paths."""
    n_paths = values.shape[0]
    root = math.sqrt(n_paths)
    mean = values.mean(axis=0)
    sem = values.std(axis=0, ddof=1) / root
    sq = values**2
    m2 = sq.mean(axis=0)
    m2_sem = sq.std(axis=0, ddof=1) / root
    summ = EnsembleSummary(n=n, n_paths=n_paths, times=np.asarray(times, float),
                           mean=mean, sem=sem, m2=m2, m2_sem=m2_sem)
    if z_values is not None:
        z_values = np.asarray(z_values, dtype=float)
        lm = np.empty((len(z_values), values.shape[1]))
        ls = np.empty_like(lm)
        for k, z in enumerate(z_values):
            e = np.exp(-z * values)
            lm[k] = e.mean(axis=0)
            ls[k] = e.std(axis=0, ddof=1) / root
        summ.laplace_z = z_values
        summ.laplace_mean = lm
        summ.laplace_sem = ls
    return summ


def monte_carlo(runner, n_paths: int, master_seed, times=None) -> EnsembleSummary:
    """Generic ensemble: runner(seed) -> 1-D stat vector.  Per-path seeds are
    counter-derived children of the master seed."""
    if n_paths < 2:
        raise ValueError("need n_paths >= 2")
    children = np.random.SeedSequence(master_seed).spawn(n_paths)
    rows = [np.atleast_1d(np.asarray(runner(s), dtype=float)) for s in children]
    values = np.vstack(rows)
    if times is None:
        times = np.arange(values.shape[1], dtype=float)
    return _summarize(values, n=0, times=times)


def _hawkes_summary(schedule: HawkesScalingSchedule, n: int, n_paths: int,
                    master_seed, times, z_values=None, T=None,
                    shot_spec: Optional[dict] = None) -> EnsembleSummary:
    """Rescaled-density ensemble via the jitted engine (single type only)."""
    if schedule.d != 1:
        raise NotImplementedError("fast ensembles cover single-type schedules")
    times = np.asarray(times, dtype=float)
    if T is None:
        T = float(times.max())
    mass = schedule.masses(n)[0, 0]
    kw = dict(A_self=mass, a_imm=float(schedule.a[0]),
              rate=1.0 / float(schedule.sigma[0]), lam_I=schedule.lambda_I,
              z0=float(schedule.z0[0]),
              mark_kind=0 if schedule.mark_kind == "constant" else 1)
    if shot_spec:
        kw.update(shot_spec)
    out = engines.hawkes_ensemble(master_seed, n_paths, n, T, times, **kw)
    summ = _summarize(out["Z"], n, times, z_values)
    if shot_spec:
        summ.extra["SI"] = out["SI"]
        summ.extra["SC"] = out["SC"]
    summ.extra["events"] = out["events"]
    return summ


def _cmj_summary(schedule: CMJScalingSchedule, n: int, n_paths: int,
                 master_seed, times, z_values=None, snap_time=None,
                 fresh_ancestors=False) -> EnsembleSummary:
    """Rescaled total-birth-rate ensemble B^{(n)}(n t)/n via the jitted engine."""
    times = np.asarray(times, dtype=float)
    beta_n = schedule.beta_n(n)
    out = engines.cmj_ensemble(
        master_seed, n_paths, float(n * times.max()), n * times,
        beta=beta_n, lam_I=schedule.lambda_I,
        life_family=schedule.life_family, life_param=schedule.life_param,
        n_ancestors=schedule.n_ancestors(n),
        offspring_atoms=list(schedule.offspring_atoms),
        offspring_probs=list(schedule.offspring_probs),
        imm_atoms=list(schedule.imm_atoms),
        imm_probs=list(schedule.imm_probs),
        fresh_ancestors=fresh_ancestors,
        snap_time=-1.0 if snap_time is None else float(n * snap_time))
    B = beta_n * out["alive"] / n
    summ = _summarize(B, n, times, z_values)
    summ.extra["residual"] = out["nrep"] - out["cint"]
    summ.extra["total"] = out["total"]
    if snap_time is not None:
        summ.extra["ages"] = out.get("ages", np.empty(0)) / n
        summ.extra["residuals"] = out.get("residuals", np.empty(0)) / n
    return summ


# ----------------------------------------------------------------------
# comparisons
# ----------------------------------------------------------------------

def _oracle_moments(params: CBIParams, times, dt=1e-3):
    tg, m, M2 = moment_odes(params, float(np.max(times)), dt)
    idx = [int(round(t / dt)) for t in times]
    return m[idx, 0], M2[idx, 0, 0]


def compare_moments(summary: EnsembleSummary, oracle_mean, oracle_m2=None,
                    z_threshold: float = 3.0, pass_fraction: float = 0.95) -> dict:
    """Per-(time, moment) z-scores of ensemble vs oracle.

    Pass iff |z| <= z_threshold for at least pass_fraction of the cells.
    """
    oracle_mean = np.asarray(oracle_mean, dtype=float)
    z1 = (summary.mean - oracle_mean) / summary.sem
    zs = [z1]
    if oracle_m2 is not None:
        zs.append((summary.m2 - np.asarray(oracle_m2, float)) / summary.m2_sem)
    z = np.concatenate(zs)
    frac = float(np.mean(np.abs(z) <= z_threshold))
    return {
        "z_mean": z1,
        "z_m2": zs[1] if oracle_m2 is not None else None,
        "pass_fraction": frac,
        "passed": bool(frac >= pass_fraction),
    }


def _ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample KS statistic between empirical samples."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("zero-mass input to KS distance")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def _w1_distance(a, wa, b, wb) -> float:
    """1-Wasserstein between normalized discrete measures."""
    wa = wa / wa.sum()
    wb = wb / wb.sum()
    pts = np.union1d(a, b)
    ia = np.searchsorted(np.sort(a), pts, side="right")
    Fa = np.concatenate([[0.0], np.cumsum(wa[np.argsort(a)])])[ia]
    ib = np.searchsorted(np.sort(b), pts, side="right")
    Fb = np.concatenate([[0.0], np.cumsum(wb[np.argsort(b)])])[ib]
    return float(np.sum(np.abs(Fa - Fb)[:-1] * np.diff(pts)))


def distribution_distance(A, B, metric: str = "KS") -> float:
    """KS on normalized CDFs or discrete 1-Wasserstein.

    A, B: 1-D sample arrays or objects with .atoms/.weights (1-D atoms).
    """
    def unpack(x):
        if hasattr(x, "atoms"):
            return np.asarray(x.atoms, float).ravel(), np.asarray(x.weights, float)
        x = np.asarray(x, dtype=float)
        return x, np.ones(len(x))

    a, wa = unpack(A)
    b, wb = unpack(B)
    if len(a) == 0 or len(b) == 0 or wa.sum() == 0 or wb.sum() == 0:
        raise ValueError("zero-mass input")
    if metric.upper() == "KS":
        if np.all(wa == 1.0) and np.all(wb == 1.0):
            return _ks_statistic(a, b)
        # weighted KS via CDFs on merged support
        pts = np.union1d(a, b)
        oa, ob = np.argsort(a), np.argsort(b)
        Fa = np.concatenate([[0.0], np.cumsum(wa[oa] / wa.sum())])[
            np.searchsorted(a[oa], pts, side="right")]
        Fb = np.concatenate([[0.0], np.cumsum(wb[ob] / wb.sum())])[
            np.searchsorted(b[ob], pts, side="right")]
        return float(np.max(np.abs(Fa - Fb)))
    if metric.upper() == "W1":
        return _w1_distance(a, wa, b, wb)
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class ConvergenceReport:
    experiment: str
    n_values: Sequence[int]
    metrics: np.ndarray
    threshold: float
    slack: float = SLACK
    passed: bool = False
    details: dict = field(default_factory=dict)

    def check(self):
        m = np.asarray(self.metrics, dtype=float)
        decay_ok = bool(np.all(m[1:] <= self.slack * m[:-1]))
        final_ok = bool(m[-1] < self.threshold)
        self.passed = decay_ok and final_ok
        self.details.setdefault("decay_ok", decay_ok)
        self.details.setdefault("final_ok", final_ok)
        return self


# ----------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------

def _seed_for(master_seed, tag: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(tag,))


def _engine_seed(master_seed, tag: int) -> int:
    return int(_seed_for(master_seed, tag).generate_state(1)[0])


def scaling_experiment(schedule, n_values=DEFAULT_N_LADDER, n_paths=10_000,
                       master_seed=0, times=(0.5, 1.0, 2.0),
                       z_values=(0.25, 0.5, 1.0), laplace_threshold=0.02,
                       oracle_overrides: Optional[dict] = None,
                       fresh_ancestors: bool = False,
                       moment_times: Optional[Sequence[float]] = None) -> dict:
    """Rescaled Hawkes density (or CMJ total birth rate) against the CBI limit.

    Gates: moment z-scores (first and second moments, all time points) at the
    final n, and the max-absolute Laplace gap over the (z, t) grid following
    the monotone-decay-with-slack rule with a final-threshold.
    oracle_overrides may scale 'sigma' or 'c' of the oracle parameters
    (negative controls).  Returns a report dict with a top-level 'passed'.
    """
    times = np.asarray(times, dtype=float)
    moment_times = times if moment_times is None else np.asarray(moment_times, float)
    all_times = np.union1d(times, moment_times)
    if isinstance(n_paths, int):
        n_paths = [n_paths] * len(n_values)
    params = schedule.limit_cbi_params()
    if oracle_overrides:
        params = CBIParams(
            d=params.d,
            a=params.a * oracle_overrides.get("a_scale", 1.0),
            b=params.b * oracle_overrides.get("b_scale", 1.0),
            sigma=params.sigma * oracle_overrides.get("sigma_scale", 1.0),
            c=params.c * oracle_overrides.get("c_scale", 1.0),
            z0=params.z0)
    om, om2 = _oracle_moments(params, all_times)
    lap_oracle = np.array([[laplace_transform(params, params.z0, z, t)
                            for t in all_times] for z in z_values])
    is_cmj = isinstance(schedule, CMJScalingSchedule)
    summaries = []
    lap_gaps = []
    for k, n in enumerate(n_values):
        seed = _engine_seed(master_seed, k)
        if is_cmj:
            summ = _cmj_summary(schedule, n, n_paths[k], seed, all_times,
                                z_values, fresh_ancestors=fresh_ancestors)
        else:
            summ = _hawkes_summary(schedule, n, n_paths[k], seed, all_times,
                                   z_values)
        summaries.append(summ)
        lap_gaps.append(float(np.max(np.abs(summ.laplace_mean - lap_oracle))))
    mom_idx = [int(np.argmin(np.abs(all_times - t))) for t in moment_times]
    final = summaries[-1]
    sub = EnsembleSummary(
        n=final.n, n_paths=final.n_paths, times=all_times[mom_idx],
        mean=final.mean[mom_idx], sem=final.sem[mom_idx],
        m2=final.m2[mom_idx], m2_sem=final.m2_sem[mom_idx])
    moments = compare_moments(sub, om[mom_idx], om2[mom_idx])
    lap_report = ConvergenceReport("laplace-gap", list(n_values),
                                   np.asarray(lap_gaps), laplace_threshold).check()
    return {
        "kind": "cmj-scaling" if is_cmj else "hawkes-scaling",
        "n_values": list(n_values),
        "times": all_times,
        "summaries": summaries,
        "oracle_mean": om,
        "oracle_m2": om2,
        "moments": moments,
        "laplace": lap_report,
        "laplace_gaps": lap_gaps,
        "passed": bool(moments["passed"] and lap_report.passed),
    }


def shotnoise_experiment(schedule: HawkesScalingSchedule, n=400, n_paths=10_000,
                         master_seed=0, times=(0.25, 0.5, 1.0, 2.0),
                         zi_rate=0.01, zi_mass=1.0, zc_rate=1.0, zc_mass=1.0,
                         cumulative_times=(1.0, 2.0),
                         cumulative_rel_threshold=0.05) -> dict:
    """Instantaneous and cumulative shot-noise limits at a single n.

    Gates: corrected instantaneous mean within 3 SE of b_I * m(t) at every
    time point; the uncorrected gap at the earliest time exceeds 3 SE when
    Z(0) > 0 (the delta = 0 failure mode); cumulative mean within the relative
    threshold of b_C int_0^t m.
    """
    times = np.asarray(times, dtype=float)
    params = schedule.limit_cbi_params()
    dt = 1e-3
    tg, m_path, _ = moment_odes(params, float(times.max()), dt)
    idx = [int(round(t / dt)) for t in times]
    m_at = m_path[idx, 0]
    m_int = np.concatenate([[0.0], np.cumsum(0.5 * dt * (m_path[1:, 0] + m_path[:-1, 0]))])
    shot_spec = dict(zi_rate=zi_rate, zi_mass=zi_mass, zc_rate=zc_rate, zc_mass=zc_mass)
    summ = _hawkes_summary(schedule, n, n_paths, _engine_seed(master_seed, 0),
                           times, shot_spec=shot_spec)
    b_I = zi_mass  # exponential response of unit-normalized shape: L1 mass
    b_C = zc_mass
    SI = summ.extra["SI"] / n
    SC = summ.extra["SC"] / n**2
    # ancestor tail correction psi_hat(t) = Z(0) * b_I * exp(-zi_rate * n t)
    z0 = float(schedule.z0[0])
    psi = z0 * zi_mass * np.exp(-zi_rate * n * times)
    si_mean = SI.mean(axis=0)
    si_sem = SI.std(axis=0, ddof=1) / math.sqrt(n_paths)
    corrected_z = (si_mean + psi - b_I * m_at) / si_sem
    uncorrected_z = (si_mean - b_I * m_at) / si_sem
    sc_mean = SC.mean(axis=0)
    cum_rel = []
    for t in cumulative_times:
        j = int(np.argmin(np.abs(times - t)))
        target = b_C * m_int[int(round(t / dt))]
        cum_rel.append(abs(sc_mean[j] - target) / target)
    corrected_ok = bool(np.all(np.abs(corrected_z) <= 3.0))
    failure_shown = bool(abs(uncorrected_z[0]) > 3.0) if z0 > 0 else True
    cumulative_ok = bool(np.all(np.asarray(cum_rel) < cumulative_rel_threshold))
    return {
        "kind": "shot-noise",
        "n": n,
        "times": times,
        "b_I": b_I,
        "b_C": b_C,
        "corrected_z": corrected_z,
        "uncorrected_z": uncorrected_z,
        "cumulative_rel_gaps": np.asarray(cum_rel),
        "si_mean": si_mean,
        "sc_mean": sc_mean,
        "oracle_mean": b_I * m_at,
        "corrected_ok": corrected_ok,
        "failure_shown": failure_shown,
        "cumulative_ok": cumulative_ok,
        "passed": corrected_ok and failure_shown and cumulative_ok,
    }


def collapse_experiment(schedule: CMJScalingSchedule, n_values=DEFAULT_N_LADDER,
                        n_paths=(2000, 800, 400), master_seed=0, t_snap=1.0,
                        ks_threshold=0.05, excess_threshold=0.07) -> dict:
    """State-space collapse: pooled age and residual-life CDFs at t_snap.

    The per-n metric is KS(ages, residuals); it must decay within slack and
    end below ks_threshold, and at the final n both CDFs must be within
    excess_threshold (KS) of the excess life-length CDF.
    """
    if isinstance(n_paths, int):
        n_paths = [n_paths] * len(n_values)
    excess = excess_life_distribution(schedule.life_law)
    ks_seq = []
    pooled = None
    for k, n in enumerate(n_values):
        summ = _cmj_summary(schedule, n, n_paths[k],
                            _engine_seed(master_seed, 100 + k),
                            np.array([t_snap]), snap_time=t_snap)
        ages = summ.extra["ages"] * n      # back to unrescaled age units
        residuals = summ.extra["residuals"] * n
        ks_seq.append(_ks_statistic(ages, residuals))
        pooled = (ages, residuals)
    ages, residuals = pooled
    grid = np.sort(np.concatenate([ages, residuals]))
    age_cdf = np.searchsorted(np.sort(ages), grid, side="right") / len(ages)
    res_cdf = np.searchsorted(np.sort(residuals), grid, side="right") / len(residuals)
    exc_cdf = excess.cdf(grid)
    ks_age_excess = float(np.max(np.abs(age_cdf - exc_cdf)))
    ks_res_excess = float(np.max(np.abs(res_cdf - exc_cdf)))
    report = ConvergenceReport("state-space-collapse", list(n_values),
                               np.asarray(ks_seq), ks_threshold).check()
    excess_ok = ks_age_excess < excess_threshold and ks_res_excess < excess_threshold
    return {
        "kind": "collapse",
        "n_values": list(n_values),
        "ks_sequence": np.asarray(ks_seq),
        "ks_age_excess": ks_age_excess,
        "ks_residual_excess": ks_res_excess,
        "report": report,
        "excess_ok": bool(excess_ok),
        "passed": bool(report.passed and excess_ok),
    }


def resolvent_error_experiment(schedule: HawkesScalingSchedule,
                               n_values=(10, 40, 160), beta=None,
                               threshold=np.inf) -> dict:
    """Deterministic rescaled-resolvent L2 error ladder (strictly decreasing
    for the exponential-shape schedules)."""
    from .volterra import rescaled_resolvent_error

    beta = schedule.beta if beta is None else beta
    errs = [rescaled_resolvent_error(schedule, n, beta) for n in n_values]
    report = ConvergenceReport("rescaled-resolvent-error", list(n_values),
                               np.asarray(errs), threshold, slack=1.0).check()
    return {
        "kind": "resolvent-error",
        "n_values": list(n_values),
        "errors": np.asarray(errs),
        "report": report,
        "passed": report.passed,
    }


def convergence_report(schedule, experiment: str, n_values, master_seed=0,
                       **kwargs) -> dict:
    """Dispatch by experiment kind; see the individual experiment functions."""
    if len(n_values) < 3:
        raise ValueError("need at least 3 values of n")
    if experiment == "scaling":
        return scaling_experiment(schedule, n_values, master_seed=master_seed, **kwargs)
    if experiment == "collapse":
        return collapse_experiment(schedule, n_values, master_seed=master_seed, **kwargs)
    if experiment == "resolvent-error":
        return resolvent_error_experiment(schedule, n_values, **kwargs)
    raise ValueError(f"unknown experiment {experiment!r}")
