"""Shot-noise functionals of event logs.

S_i(t) = sum_{tau_{i,k} <= t} zeta_i(t - tau_{i,k}, xi_{i,k}) with an
instantaneous (integrable rate-of-impact) or cumulative (nondecreasing to a
finite total) response function, plus the ancestor tail correction and the
n- and n^2-rescalings of the limit theorems.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .kernels import KernelSpec
from .hawkes import EventLog

__all__ = [
    "ResponseFunction",
    "shot_noise_path",
    "ancestor_impact_path",
    "rescale_instantaneous",
    "rescale_cumulative",
]


class ResponseFunction:
    """Response zeta(t) = base_amplitude * shape-or-cdf(t).

    kind "instantaneous": shape is a unit-mass density from the KernelSpec
        families (exponential, erlang, table); L1 mass = base_amplitude.
    kind "cumulative": the normalized CDF of the same family, increasing from
        0 to base_amplitude = zeta(inf); family "indicator" jumps to the full
        value at t = 0 (then S is base_amplitude * N(t)).

    mark_component: optional index into the event mark's amplitude vector by
    which the response is multiplied (separable mark modulation); None means
    no mark modulation.
    """

    KINDS = ("instantaneous", "cumulative")

    def __init__(self, kind: str, family: str, base_amplitude: float,
                 params: Optional[dict] = None, mark_component: Optional[int] = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown response kind {kind!r}")
        if base_amplitude < 0:
            raise ValueError("base_amplitude must be nonnegative")
        self.kind = kind
        self.family = family
        self.base_amplitude = float(base_amplitude)
        self.mark_component = mark_component
        if family == "indicator":
            if kind != "cumulative":
                raise ValueError("indicator responses are cumulative (not integrable)")
            self._spec = None
        else:
            self._spec = KernelSpec(family, 1.0, params or {})

    def value(self, t):
        """zeta(t), vectorized; zero for t < 0."""
        t = np.asarray(t, dtype=float)
        if self.family == "indicator":
            return self.base_amplitude * (t >= 0).astype(float)
        if self.kind == "instantaneous":
            return self.base_amplitude * self._spec.shape(t)
        scalar = t.ndim == 0
        ts = np.atleast_1d(t)
        out = self.base_amplitude * self._spec.shape_cdf(np.maximum(ts, 0.0)) \
            / self._spec.shape_mass()
        return float(out[0]) if scalar else out

    def mass(self) -> float:
        """L1 norm (instantaneous only): the b_I constant of the family."""
        if self.kind != "instantaneous":
            raise ValueError("mass is defined for instantaneous responses")
        return self.base_amplitude * self._spec.shape_mass()

    def total(self) -> float:
        """zeta(inf) (cumulative only): the b_C constant of the family."""
        if self.kind != "cumulative":
            raise ValueError("total is defined for cumulative responses")
        return self.base_amplitude

    def tail_mass(self, t: float) -> float:
        """int_t^inf zeta(s) ds for instantaneous responses (analytic)."""
        if self.kind != "instantaneous":
            raise ValueError("tail_mass is defined for instantaneous responses")
        return self.base_amplitude * self._spec.shape_tail_mass(t)


def shot_noise_path(log: EventLog, responses: Sequence[ResponseFunction], grid) -> np.ndarray:
    """S_i(t_k) for each type i; responses has one entry per endogenous type.

    Immigration events (source d) are not counted: S accumulates impacts of
    type-i events through zeta_i.
    """
    grid = np.asarray(grid, dtype=float)
    d = log.model.d
    if len(responses) != d:
        raise ValueError("need one response function per endogenous type")
    S = np.zeros((len(grid), d))
    for ev in log.events:
        if ev.source >= d:
            continue
        zeta = responses[ev.source]
        lag = grid - ev.time
        mask = lag >= 0
        if not np.any(mask):
            continue
        amp = 1.0
        if zeta.mark_component is not None:
            amp = float(ev.mark.amplitude[zeta.mark_component])
        S[mask, ev.source] += amp * zeta.value(lag[mask])
    return S


def ancestor_impact_path(Z0, zeta: ResponseFunction, n: int, grid) -> np.ndarray:
    """Ancestor correction psi_hat_I(t) = Z^{(n)}(0) * int_{n t}^inf zeta(s) ds.

    Z0 is the rescaled initial density Z^{(n)}(0) (scalar, single type).
    Analytic tails; rejects cumulative responses.
    """
    if zeta.kind != "instantaneous":
        raise ValueError("ancestor correction applies to instantaneous responses")
    grid = np.asarray(grid, dtype=float)
    z0 = float(Z0)
    if z0 == 0.0:
        return np.zeros_like(grid)
    return z0 * np.array([zeta.tail_mass(n * t) for t in grid])


def rescale_instantaneous(path: np.ndarray, n: int) -> np.ndarray:
    """S_I^{(n)}: values of S sampled at times n*t, divided by n."""
    return np.asarray(path, dtype=float) / float(n)


def rescale_cumulative(path: np.ndarray, n: int) -> np.ndarray:
    """S_C^{(n)}: values of S sampled at times n*t, divided by n^2."""
    return np.asarray(path, dtype=float) / float(n) ** 2
