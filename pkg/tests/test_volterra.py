import math

import numpy as np
import pytest

from selfexcite.harness import HawkesScalingSchedule
from selfexcite.volterra import (ResolventGrid, exp_resolvent, neumann_oracle,
                                 rescaled_resolvent_curves,
                                 rescaled_resolvent_error, resolvent_solve,
                                 two_param_resolvent)


def test_exponential_closed_form():
    dt, T = 1e-3, 20.0
    grid = resolvent_solve(lambda t: 0.5 * np.exp(-t), dt, T)
    exact = exp_resolvent(0.5, 1.0, grid.tgrid)
    assert np.max(np.abs(grid.values - exact)) < 1e-3


def test_halving_dt_halves_error():
    def err(dt):
        grid = resolvent_solve(lambda t: 0.5 * np.exp(-t), dt, 20.0)
        return np.max(np.abs(grid.values - exp_resolvent(0.5, 1.0, grid.tgrid)))
    assert err(5e-4) <= 0.55 * err(1e-3)  # first-order scheme


@pytest.mark.parametrize("mass", [0.5, 0.9])
def test_mass_identity(mass):
    dt = 1e-3
    # R decays at rate 1 - mass; T = 60 leaves a truncated tail below 0.3%
    # of the total even at mass 0.9
    grid = resolvent_solve(lambda t: mass * np.exp(-t), dt, 60.0)
    target = mass / (1.0 - mass)
    assert abs(grid.discrete_mass() - target) / target < 0.01


def test_neumann_oracle_agreement():
    dt, T = 1e-3, 10.0
    phi = lambda t: 0.4 * 2.0 * np.exp(-2.0 * t)
    grid = resolvent_solve(phi, dt, T)
    series = neumann_oracle(phi, 40, dt, T)
    assert np.max(np.abs(grid.values - series)) < 1e-8


def test_neumann_oracle_validation():
    with pytest.raises(ValueError):
        neumann_oracle(lambda t: np.exp(-t), 0, 1e-2, 1.0)


def test_two_param_resolvent_scales_with_mark():
    # separable kernel: phi(t, u) = u * phi(t); R(t, u) = u * R-driven combo
    dt, T = 1e-3, 15.0
    phi = lambda t: 0.5 * np.exp(-t)
    R = resolvent_solve(phi, dt, T)
    t = R.tgrid
    for u in (0.5, 2.0):
        R_u = two_param_resolvent(R, u * phi(t))
        # R(t,u) = u(phi + R*phi) = u * R(t) since here phi_u = u*phi
        assert np.max(np.abs(R_u - u * R.values)) < 1e-9


def test_supercritical_mass_warning():
    grid = resolvent_solve(lambda t: 1.5 * np.exp(-t), 1e-2, 80.0)
    assert grid.mass_warning


def test_input_validation():
    with pytest.raises(ValueError):
        resolvent_solve(lambda t: np.exp(-t), -1e-3, 1.0)
    with pytest.raises(ValueError):
        resolvent_solve(lambda t: -np.exp(-t), 1e-3, 1.0)
    with pytest.raises(ValueError):
        resolvent_solve(np.zeros(3), 1e-3, 1.0)  # grid too short


def test_resolvent_grid_accessors():
    g = ResolventGrid(dt=0.5, T=1.0, values=np.array([2.0, 1.0, 0.5]))
    assert np.allclose(g.tgrid, [0.0, 0.5, 1.0])
    assert g.discrete_mass() == pytest.approx(1.75)


# ------------------------------------------------- rescaled limit curves

def test_rescaled_resolvent_error_decreases():
    sched = HawkesScalingSchedule(b=[[1.0]], a=0.5, sigma=1.0, z0=1.0)
    errs = [rescaled_resolvent_error(sched, n, beta=0.0) for n in (10, 40, 160)]
    assert errs[0] > errs[1] > errs[2]
    # exponential shapes: error is O(1/n); 4x in n gives ~4x in error
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_rescaled_curves_limit_is_exponential():
    sched = HawkesScalingSchedule(b=[[1.0]], a=0.5, sigma=1.0, z0=1.0)
    t, rescaled, limit = rescaled_resolvent_curves(sched, 200, beta=0.5)
    assert np.allclose(limit, np.exp(-1.5 * t))
    assert np.max(np.abs(rescaled - limit)) < 0.02


def test_rescaled_error_requires_integrability():
    sched = HawkesScalingSchedule(b=[[1.0]], a=0.5, sigma=1.0, z0=1.0)
    with pytest.raises(ValueError):
        # beta + b/sigma = -0.5 < 0: no L2 error on the half-line
        rescaled_resolvent_curves(
            type("S", (), {"b": [[-0.5]], "sigma": [1.0], "lambda_b": 0.5,
                           "build_scaled_model": sched.build_scaled_model})(),
            10, beta=0.0)
