"""Acceptance suite: one test per acceptance criterion.

Each test prints a single PASS/FAIL line on the real stdout (bypassing
pytest capture) and then asserts.  All expected values are closed forms or
independently verified gate outcomes; Monte Carlo seeds are fixed so the
suite is deterministic.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from selfexcite.cbi import CBIParams, laplace_transform, simulate_cbi_ensemble
from selfexcite.cli import parse_config, run_experiment
from selfexcite.cmj import (LifeLaw, excess_life_distribution,
                            size_biased_distribution)
from selfexcite.engines import cmj_ensemble
from selfexcite.harness import (CMJScalingSchedule, HawkesScalingSchedule,
                                collapse_experiment, scaling_experiment,
                                shotnoise_experiment)
from selfexcite.volterra import resolvent_solve

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

POSITIVE_CONFIGS = [
    "cbi_two_type.json",
    "cmj_compensator.json",
    "collapse.json",
    "hawkes_two_type.json",
    "resolvent_ladder.json",
    "riccati_two_type.json",
    "scaling_cmj.json",
    "scaling_hawkes.json",
    "shotnoise.json",
]

NEGATIVE_CONFIGS = [
    "neg_scaling_wrong_sigma.json",      # wrong diffusion coefficient
    "neg_scaling_cmj_wrong_c.json",      # wrong branching coefficient
    "neg_scaling_fresh_ancestors.json",  # non-excess ancestor initialization
]


_REPORTER = None


@pytest.fixture(autouse=True)
def _grab_reporter(request):
    global _REPORTER
    _REPORTER = request.config.pluginmanager.get_plugin("terminalreporter")


def _line(num: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    msg = f"[criterion {num:02d}] {status} — {detail}"
    if _REPORTER is not None:
        _REPORTER.write_line("\n" + msg)
    else:
        print(msg, file=sys.__stdout__, flush=True)


# ------------------------------------------------------------ criteria 1-2

def test_criterion_01_resolvent_closed_form():
    alpha, beta = 0.5, 1.0
    phi = lambda t: alpha * np.exp(-beta * t)
    t0 = time.time()
    grid = resolvent_solve(phi, dt=1e-3, T=20.0)
    elapsed = time.time() - t0
    exact = alpha * np.exp(-(beta - alpha) * grid.tgrid)
    err = float(np.max(np.abs(grid.values - exact)))
    half = resolvent_solve(phi, dt=5e-4, T=20.0)
    exact_h = alpha * np.exp(-(beta - alpha) * half.tgrid)
    err_h = float(np.max(np.abs(half.values - exact_h)))
    # first-order scheme: halving dt halves the error up to O(dt^2) terms
    halved = err_h <= 0.5 * err * 1.01
    ok = err < 1e-3 and halved and elapsed < 1.0
    _line(1, ok, f"sup error {err:.2e} (dt/2: {err_h:.2e}), {elapsed:.2f}s")
    assert err < 1e-3
    assert halved
    assert elapsed < 1.0


def test_criterion_02_resolvent_mass_identity():
    rels = []
    for mass, T in ((0.5, 30.0), (0.9, 80.0)):
        grid = resolvent_solve(lambda t: mass * np.exp(-t), dt=1e-3, T=T)
        target = mass / (1.0 - mass)
        rels.append(abs(grid.discrete_mass() - target) / target)
    ok = max(rels) < 0.01
    _line(2, ok, "relative mass errors "
          + ", ".join(f"{r:.2e}" for r in rels))
    assert ok


# ------------------------------------------------------------ criterion 3

def test_criterion_03_riccati_vs_monte_carlo():
    cases = [
        ("one-type a=0 b=0",
         CBIParams(d=1, a=[0.0], b=[[0.0]], sigma=[1.0], c=[1.0], z0=[1.0]),
         271828),
        ("one-type a=1 b=1",
         CBIParams(d=1, a=[1.0], b=[[1.0]], sigma=[1.0], c=[1.0], z0=[1.0]),
         271828),
        ("two-type",
         CBIParams(d=2, a=[0.5, 0.5], b=[[1.0, -0.25], [-0.25, 1.0]],
                   sigma=[1.0, 1.0], c=[0.5, 0.5], z0=[1.0, 0.5]),
         2),
    ]
    times, zs = [0.5, 1.0, 2.0], [0.25, 0.5, 1.0]
    t0 = time.time()
    worst = {}
    for name, p, seed in cases:
        samples = simulate_cbi_ensemble(p, times, 1e-3, 100_000, seed=seed)
        zmax = 0.0
        for z in zs:
            zvec = np.full(p.d, z)
            for j, t in enumerate(times):
                v = np.exp(-samples[:, j, :] @ zvec)
                mc, se = v.mean(), v.std(ddof=1) / np.sqrt(len(v))
                oracle = laplace_transform(p, p.z0, zvec, t, 1e-4)
                zmax = max(zmax, abs(mc - oracle) / se)
        worst[name] = zmax
    elapsed = time.time() - t0
    ok = max(worst.values()) <= 3.0 and elapsed < 120.0
    _line(3, ok, "worst |z| "
          + ", ".join(f"{k}: {v:.2f}" for k, v in worst.items())
          + f"; {elapsed:.0f}s")
    assert max(worst.values()) <= 3.0
    assert elapsed < 120.0


# ------------------------------------------------------------ criterion 4

def test_criterion_04_hawkes_scaling_limit():
    sched = HawkesScalingSchedule(b=[[1.0]], a=0.5, sigma=1.0, z0=1.0,
                                  mark_kind="constant")
    t0 = time.time()
    rep = scaling_experiment(sched, (25, 100, 400), n_paths=10_000,
                             master_seed=20260823)
    elapsed = time.time() - t0
    gaps = rep["laplace"].metrics
    frac = rep["moments"]["pass_fraction"]
    ok = rep["passed"] and elapsed < 600.0
    _line(4, ok, f"moment pass rate {frac:.2f}, Laplace gaps "
          + "/".join(f"{g:.4f}" for g in gaps) + f", {elapsed:.0f}s")
    assert frac >= 0.95
    assert rep["laplace"].passed
    assert rep["passed"]
    assert elapsed < 600.0


# ------------------------------------------------------- criteria 5-6

@pytest.fixture(scope="module")
def shotnoise_report():
    sched = HawkesScalingSchedule(b=[[1.0]], a=1.0, sigma=1.0, z0=1.0)
    return shotnoise_experiment(sched, n=400, n_paths=10_000, master_seed=2718)


def test_criterion_05_instantaneous_shot_noise(shotnoise_report):
    rep = shotnoise_report
    corr = np.max(np.abs(rep["corrected_z"]))
    uncorr0 = abs(rep["uncorrected_z"][0])
    ok = corr <= 3.0 and uncorr0 > 3.0
    _line(5, ok, f"corrected max |z| {corr:.2f}; uncorrected |z| at "
          f"t=0.25 is {uncorr0:.1f} (failure mode shown)")
    assert corr <= 3.0
    assert uncorr0 > 3.0


def test_criterion_06_cumulative_shot_noise(shotnoise_report):
    gaps = shotnoise_report["cumulative_rel_gaps"]
    ok = np.max(gaps) < 0.05
    _line(6, ok, "relative gaps at t=1,2: "
          + ", ".join(f"{g:.3f}" for g in gaps))
    assert ok


# ------------------------------------------------------------ criterion 7

def test_criterion_07_cmj_compensator():
    cfg = json.loads((CONFIG_DIR / "cmj_compensator.json").read_text())
    mc, num = cfg["model"], cfg["numerics"]
    T = num["T"]
    grid = np.linspace(T / num["grid_points"], T, num["grid_points"])
    res = cmj_ensemble(cfg["seed"], num["paths"], T, grid, beta=mc["beta"],
                       lam_I=mc["immigration_rate"],
                       life_family=mc["life"]["family"],
                       life_param=mc["life"]["param"], n_ancestors=mc["x0"],
                       offspring_atoms=mc["offspring"]["atoms"],
                       offspring_probs=mc["offspring"]["probs"],
                       imm_atoms=mc["immigration"]["atoms"],
                       imm_probs=mc["immigration"]["probs"],
                       fresh_ancestors=True)
    resid = res["nrep"][:, -1] - res["cint"][:, -1]
    z = resid.mean() / (resid.std(ddof=1) / np.sqrt(len(resid)))
    ok = abs(z) <= 2.576  # two-sided 99% confidence
    _line(7, ok, f"residual z at T={T}: {z:.2f} (bound 2.576)")
    assert ok


# ------------------------------------------------------------ criterion 8

def test_criterion_08_cmj_scaling_limit():
    sched = CMJScalingSchedule(b=1.0, x0=1.0)
    rep = scaling_experiment(sched, (25, 100, 400),
                             n_paths=[4000, 2000, 1500], master_seed=11)
    gaps = rep["laplace"].metrics
    frac = rep["moments"]["pass_fraction"]
    _line(8, rep["passed"], f"moment pass rate {frac:.2f}, Laplace gaps "
          + "/".join(f"{g:.4f}" for g in gaps))
    assert frac >= 0.95
    assert rep["laplace"].passed
    assert rep["passed"]


# ------------------------------------------------------------ criterion 9

def test_criterion_09_state_space_collapse():
    sched = CMJScalingSchedule(b=1.0, x0=1.0)
    t0 = time.time()
    rep = collapse_experiment(sched, (25, 100, 400),
                              n_paths=(2000, 800, 300), master_seed=5)
    elapsed = time.time() - t0
    ks = rep["ks_sequence"]
    ok = rep["passed"] and elapsed < 600.0
    _line(9, ok, "KS(age, residual) " + "/".join(f"{k:.3f}" for k in ks)
          + f"; vs excess CDF: age {rep['ks_age_excess']:.3f}, "
            f"residual {rep['ks_residual_excess']:.3f}; {elapsed:.0f}s")
    assert rep["passed"]
    assert elapsed < 600.0


# ------------------------------------------------------------ criterion 10

def test_criterion_10_distribution_transforms():
    rng = np.random.default_rng(1234)
    N = 100_000
    exp1 = LifeLaw("exponential", 1.0)
    uni1 = LifeLaw("uniform", 1.0)
    pairs = [
        ("excess exp", excess_life_distribution(exp1).sample(rng, N),
         rng.exponential(1.0, N)),
        ("size-biased exp", size_biased_distribution(exp1).sample(rng, N),
         rng.gamma(2.0, 1.0, N)),
        ("excess uniform", excess_life_distribution(uni1).sample(rng, N),
         rng.beta(1.0, 2.0, N)),
        ("size-biased uniform", size_biased_distribution(uni1).sample(rng, N),
         rng.beta(2.0, 1.0, N)),
    ]
    pvals = {name: ks_2samp(a, b).pvalue for name, a, b in pairs}
    ok = min(pvals.values()) > 0.01
    _line(10, ok, "KS p-values "
          + ", ".join(f"{k}: {v:.3f}" for k, v in pvals.items()))
    assert ok


# ------------------------------------------------------------ criterion 11

def test_criterion_11_determinism(tmp_path):
    mismatched = []
    for name in POSITIVE_CONFIGS:
        cfg = parse_config((CONFIG_DIR / name).read_text())
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name[:-5]}_{tag}"
            code = run_experiment(cfg, out, quiet=True)
            assert code == 0, f"{name} exited {code}"
            outs.append({p.name: p.read_bytes()
                         for p in sorted(out.glob("*.csv"))})
        assert outs[0].keys() == outs[1].keys()
        for fname in outs[0]:
            if outs[0][fname] != outs[1][fname]:
                mismatched.append(f"{name}:{fname}")
    ok = not mismatched
    _line(11, ok, f"{len(POSITIVE_CONFIGS)} experiments rerun byte-identical"
          if ok else "mismatches: " + ", ".join(mismatched))
    assert ok, mismatched


# ------------------------------------------------------------ criterion 12

def test_criterion_12_negative_controls(tmp_path):
    codes = {}
    for name in NEGATIVE_CONFIGS:
        cfg = parse_config((CONFIG_DIR / name).read_text())
        codes[name] = run_experiment(cfg, tmp_path / name[:-5], quiet=True)
    ok = all(c == 1 for c in codes.values())
    _line(12, ok, "exit codes "
          + ", ".join(f"{k}: {v}" for k, v in codes.items()))
    for name, code in codes.items():
        assert code == 1, f"{name} should fail its report (exit 1), got {code}"
