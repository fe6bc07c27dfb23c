"""Resolvent (renewal-type Volterra) equation solver and diagnostics.

The resolvent of a kernel phi is the solution of R = phi + R * phi
(convolution on [0, t]); it recounts the total mean impact, direct plus all
cascades, of one event.  We discretize with the left-rectangle rule

    R(t_k) = phi(t_k) + dt * sum_{m<k} R(t_m) phi(t_k - t_m),

an explicit first-order scheme that preserves nonnegativity unconditionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numba import njit

__all__ = [
    "ResolventGrid",
    "resolvent_solve",
    "neumann_oracle",
    "two_param_resolvent",
    "exp_resolvent",
    "rescaled_resolvent_error",
    "rescaled_resolvent_curves",
]

MASS_WARN_THRESHOLD = 1e6


@dataclass
class ResolventGrid:
    dt: float
    T: float
    values: np.ndarray
    kernel_descriptor: str = ""
    mass_warning: bool = False

    @property
    def tgrid(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    def discrete_mass(self) -> float:
        return float(self.values.sum() * self.dt)


@njit(cache=True)
def _resolvent_loop(phi: np.ndarray, dt: float) -> np.ndarray:
    n = phi.shape[0]
    R = np.empty(n)
    R[0] = phi[0]
    phir = phi[::-1].copy()  # phir[n-1-j] = phi[j]
    for k in range(1, n):
        # sum_{m=0}^{k-1} R[m] * phi[k-m] = dot(R[:k], phir[n-1-k : n-1])
        R[k] = phi[k] + dt * np.dot(R[:k], phir[n - 1 - k : n - 1])
    return R


def _grid_function(phi: Union[np.ndarray, Callable], dt: float, T: float) -> np.ndarray:
    npts = int(math.floor(T / dt)) + 1
    if callable(phi):
        return np.asarray(phi(np.arange(npts) * dt), dtype=float)
    phi = np.asarray(phi, dtype=float)
    if len(phi) < npts:
        raise ValueError(f"grid function too short: need {npts} points, got {len(phi)}")
    return phi[:npts]


def resolvent_solve(phi: Union[np.ndarray, Callable], dt: float, T: float,
                    descriptor: str = "") -> ResolventGrid:
    """Solve R = phi + R * phi on t_k = k*dt, k = 0..floor(T/dt).

    phi may be an array on that grid or a callable.  Supercritical masses are
    permitted (R grows); a warning flag is set when the discrete mass of R
    exceeds MASS_WARN_THRESHOLD.
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    phi_grid = _grid_function(phi, dt, T)
    if np.any(phi_grid < 0):
        raise ValueError("kernel grid must be nonnegative")
    values = _resolvent_loop(phi_grid, dt)
    grid = ResolventGrid(dt=dt, T=T, values=values, kernel_descriptor=descriptor)
    if grid.discrete_mass() > MASS_WARN_THRESHOLD:
        grid.mass_warning = True
    return grid


def neumann_oracle(phi: Union[np.ndarray, Callable], K: int, dt: float, T: float) -> np.ndarray:
    """Partial Neumann sum sum_{k=1}^{K} phi^{(*k)} with the same discrete
    convolution as the solver; an independent oracle for resolvent_solve."""
    if K < 1:
        raise ValueError("need K >= 1")
    phi_grid = _grid_function(phi, dt, T)
    n = len(phi_grid)
    term = phi_grid.copy()
    total = phi_grid.copy()
    for _ in range(1, K):
        conv = np.convolve(term, phi_grid)[:n] * dt
        conv -= term * phi_grid[0] * dt  # drop the m = k diagonal term
        term = conv
        total += term
    return total


def two_param_resolvent(R_ii: ResolventGrid, phi_u: np.ndarray) -> np.ndarray:
    """R_i(t, u) = phi_i(t, u) + (R_ii * phi_i(., u))(t) on R_ii's grid."""
    phi_u = np.asarray(phi_u, dtype=float)
    n = len(R_ii.values)
    if len(phi_u) != n:
        raise ValueError("grid mismatch between R_ii and phi(., u)")
    conv = np.convolve(R_ii.values, phi_u)[:n] * R_ii.dt
    conv -= R_ii.values * phi_u[0] * R_ii.dt
    return phi_u + conv


def exp_resolvent(mass: float, rate: float, t) -> np.ndarray:
    """Closed-form resolvent of phi(t) = mass * rate * exp(-rate t):
    R(t) = mass*rate * exp(-(rate - mass*rate) t).  Test oracle and fast path."""
    t = np.asarray(t, dtype=float)
    a = mass * rate
    return a * np.exp(-(rate - a) * t)


def _limit_curve(sigma: float, b: float, beta: float, t: np.ndarray) -> np.ndarray:
    return np.exp(-(beta + b / sigma) * t) / sigma


def rescaled_resolvent_curves(schedule, n: int, beta: float, i: int = 0,
                              dt: float = None, T_err: float = None):
    """(tgrid, R_beta^{(n)}(n t), limit curve) on the rescaled time axis.

    The adjusted kernel is phi_beta^{(n)}(t) = exp(-beta t / n) phi^{(n)}(t);
    for exponential-family self kernels its resolvent is closed-form, otherwise
    the grid solver runs on the unrescaled axis.
    """
    b = float(np.atleast_2d(schedule.b)[i, i])
    sigma = float(np.atleast_1d(schedule.sigma)[i])
    lam_b = getattr(schedule, "lambda_b", -math.inf)
    if beta <= lam_b:
        raise ValueError(f"beta must exceed lambda_b = {lam_b}")
    decay = beta + b / sigma
    if decay <= 0:
        raise ValueError("beta + b/sigma must be positive for an L2 error")
    if T_err is None:
        T_err = 20.0 / decay
    if dt is None:
        dt = T_err / 4000.0
    tgrid = np.arange(int(math.floor(T_err / dt)) + 1) * dt
    model = schedule.build_scaled_model(n)
    ker = model.kernel(i, i)
    mean_amp = model.mark_dists[i].mean_amplitude()[i]
    mass_n = mean_amp * ker.mass()
    if mass_n == 0.0:
        rescaled = np.zeros_like(tgrid)
    elif ker.family == "exponential":
        rate = ker.params["rate"]
        adj_rate = rate + beta / n
        adj_mass = mass_n * rate / adj_rate
        rescaled = exp_resolvent(adj_mass, adj_rate, n * tgrid)
    else:
        # numeric fallback on the unrescaled axis
        raw_t = n * tgrid
        phi_n = mean_amp * ker.base_amplitude * ker.shape(raw_t) * np.exp(-beta * raw_t / n)
        dt_raw = n * dt
        rescaled = _resolvent_loop(phi_n, dt_raw)
    limit = _limit_curve(sigma, b, beta, tgrid)
    return tgrid, rescaled, limit


def rescaled_resolvent_error(schedule, n: int, beta: float, i: int = 0,
                             dt: float = None, T_err: float = None) -> float:
    """Trapezoidal L2 norm on [0, T_err] of
    R_beta^{(n)}(n t) - sigma^{-1} exp(-(beta + b/sigma) t)."""
    tgrid, rescaled, limit = rescaled_resolvent_curves(schedule, n, beta, i, dt, T_err)
    err = rescaled - limit
    return float(math.sqrt(np.trapezoid(err * err, tgrid)))
