"""Mark spaces, impact kernels and their deterministic summaries.

Kernels are restricted to the separable form

    phi_i(t, u) = amplitude_i(u) * base_amplitude * base_shape(t)

with base_shape a unit-mass parametric density (Exponential, Erlang k<=3) or a
step table.  Under this restriction every quantity the limit theory needs --
L1 masses, first moments, mark-moment integrals -- is analytic, which is what
the scaling schedules and the thinning simulator rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Mark",
    "MarkDistribution",
    "KernelSpec",
    "AncestorSpec",
    "HawkesModel",
    "CriticalityReport",
    "eval_kernel",
    "mean_kernel",
    "mean_children_matrix",
    "kernel_first_moment",
    "classify_criticality",
]

_MOMENT_PROBE_SAMPLES = 10_000


@dataclass(frozen=True)
class Mark:
    """One sampled mark: per-target amplitude vector plus optional extras."""

    amplitude: np.ndarray
    shape_params: dict = field(default_factory=dict)
    payload: object = None

    def __post_init__(self):
        amp = np.atleast_1d(np.asarray(self.amplitude, dtype=float))
        if np.any(amp < 0) or not np.all(np.isfinite(amp)):
            raise ValueError("mark amplitudes must be finite and nonnegative")
        object.__setattr__(self, "amplitude", amp)


class MarkDistribution:
    """Seedable law of the mark amplitude vector.

    families:
      constant     params: {"amplitude": scalar or length-d vector}
      exponential  params: {"mean": scalar or vector}  (independent components)
      lognormal    params: {"mu": ..., "sigma": ...}   (of log, per component)
      discrete     params: {"atoms": [vec, ...], "probs": [...]}

    Non-constant families get an empirical moment probe at construction
    (10^4 samples, moments up to order 2*alpha) standing in for the theoretical
    domination hypothesis; alpha defaults to 2.
    """

    FAMILIES = ("constant", "exponential", "lognormal", "discrete")

    def __init__(self, family: str, params: dict, d: int = 1, alpha: int = 2):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown mark family {family!r}")
        self.family = family
        self.params = dict(params)
        self.d = int(d)
        self.alpha = int(alpha)
        if family == "discrete":
            probs = np.asarray(self.params["probs"], dtype=float)
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("discrete mark probabilities must be a pmf")
            atoms = np.atleast_2d(np.asarray(self.params["atoms"], dtype=float))
            if np.any(atoms < 0):
                raise ValueError("discrete mark atoms must be nonnegative")
            self.params["probs"] = probs
            self.params["atoms"] = atoms
        if family != "constant":
            self._moment_probe()

    def _vec(self, key: str) -> np.ndarray:
        v = np.asarray(self.params[key], dtype=float)
        return np.broadcast_to(np.atleast_1d(v), (self.d,)).astype(float)

    def mean_amplitude(self) -> np.ndarray:
        if self.family == "constant":
            return self._vec("amplitude")
        if self.family == "exponential":
            return self._vec("mean")
        if self.family == "lognormal":
            mu, sig = self._vec("mu"), self._vec("sigma")
            return np.exp(mu + 0.5 * sig**2)
        atoms, probs = self.params["atoms"], self.params["probs"]
        return probs @ atoms

    def second_moment(self) -> np.ndarray:
        if self.family == "constant":
            return self._vec("amplitude") ** 2
        if self.family == "exponential":
            return 2.0 * self._vec("mean") ** 2
        if self.family == "lognormal":
            mu, sig = self._vec("mu"), self._vec("sigma")
            return np.exp(2 * mu + 2 * sig**2)
        atoms, probs = self.params["atoms"], self.params["probs"]
        return probs @ atoms**2

    def sample_amplitudes(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, d) array of amplitude vectors."""
        if self.family == "constant":
            return np.tile(self._vec("amplitude"), (size, 1))
        if self.family == "exponential":
            return rng.exponential(1.0, size=(size, self.d)) * self._vec("mean")
        if self.family == "lognormal":
            mu, sig = self._vec("mu"), self._vec("sigma")
            return np.exp(mu + sig * rng.standard_normal((size, self.d)))
        idx = rng.choice(len(self.params["probs"]), size=size, p=self.params["probs"])
        atoms = self.params["atoms"]
        if atoms.shape[1] == self.d:
            return atoms[idx]
        return np.broadcast_to(atoms[idx], (size, self.d)).copy()

    def sample(self, rng: np.random.Generator) -> Mark:
        return Mark(amplitude=self.sample_amplitudes(rng, 1)[0])

    def _moment_probe(self):
        rng = np.random.default_rng(0)
        amps = self.sample_amplitudes(rng, _MOMENT_PROBE_SAMPLES)
        for order in range(1, 2 * self.alpha + 1):
            m = np.mean(amps**order, axis=0)
            if not np.all(np.isfinite(m)):
                raise ValueError(
                    f"mark family {self.family} failed the order-{order} moment probe"
                )


class KernelSpec:
    """Separable impact kernel: base_amplitude * unit-mass shape(t).

    families:
      exponential  params: {"rate": beta}
      erlang       params: {"shape": k in {1,2,3}, "rate": beta}
      table        params: {"dt": step, "values": nonneg array}
                   (left-closed right-open step interpolation, compact support)

    For exponential/erlang the shape integrates to one, so ``base_amplitude``
    is the kernel's L1 mass.  Table shapes carry their own mass.
    """

    FAMILIES = ("exponential", "erlang", "table")

    def __init__(self, family: str, base_amplitude: float, params: dict):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown kernel family {family!r}")
        if base_amplitude < 0:
            raise ValueError("base_amplitude must be nonnegative")
        self.family = family
        self.base_amplitude = float(base_amplitude)
        self.params = dict(params)
        if family == "exponential":
            if self.params["rate"] <= 0:
                raise ValueError("exponential rate must be positive")
        elif family == "erlang":
            k = self.params["shape"]
            if k not in (1, 2, 3):
                raise ValueError("erlang shape must be 1, 2 or 3")
            if self.params["rate"] <= 0:
                raise ValueError("erlang rate must be positive")
        else:
            vals = np.asarray(self.params["values"], dtype=float)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise ValueError("table values must be finite and nonnegative")
            if self.params["dt"] <= 0:
                raise ValueError("table dt must be positive")
            self.params["values"] = vals

    # -- shape machinery (unit mass for parametric families) ------------

    def shape(self, t):
        """base_shape(t), vectorized; 0 for t < 0 and past table support."""
        t_in = np.asarray(t, dtype=float)
        scalar = t_in.ndim == 0
        t = np.atleast_1d(t_in)
        out = np.zeros_like(t)
        pos = t >= 0
        if self.family == "exponential":
            b = self.params["rate"]
            out[pos] = b * np.exp(-b * t[pos])
        elif self.family == "erlang":
            k, b = self.params["shape"], self.params["rate"]
            tp = t[pos]
            out[pos] = b**k * tp ** (k - 1) * np.exp(-b * tp) / math.factorial(k - 1)
        else:
            dt, vals = self.params["dt"], self.params["values"]
            idx = np.floor(t[pos] / dt).astype(int)
            ok = idx < len(vals)
            res = np.zeros(pos.sum())
            res[ok] = vals[idx[ok]]
            out[pos] = res
        return float(out[0]) if scalar else out

    def shape_mass(self) -> float:
        if self.family == "table":
            return float(self.params["dt"] * self.params["values"].sum())
        return 1.0

    def shape_first_moment(self) -> float:
        """integral of t * base_shape(t)."""
        if self.family == "exponential":
            return 1.0 / self.params["rate"]
        if self.family == "erlang":
            return self.params["shape"] / self.params["rate"]
        dt, vals = self.params["dt"], self.params["values"]
        mid = (np.arange(len(vals)) + 0.5) * dt
        return float(np.sum(mid * vals) * dt)

    def shape_tail_mass(self, t: float) -> float:
        """integral of base_shape over [t, inf); analytic per family."""
        if t <= 0:
            return self.shape_mass()
        if self.family == "exponential":
            return math.exp(-self.params["rate"] * t)
        if self.family == "erlang":
            k, b = self.params["shape"], self.params["rate"]
            # Erlang survival function
            return math.exp(-b * t) * sum((b * t) ** j / math.factorial(j) for j in range(k))
        dt, vals = self.params["dt"], self.params["values"]
        idx = int(math.floor(t / dt))
        if idx >= len(vals):
            return 0.0
        frac = (idx + 1) * dt - t
        return float(vals[idx] * frac + vals[idx + 1 :].sum() * dt)

    def shape_cdf(self, t):
        """integral of base_shape over [0, t]; vectorized."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.array([self.shape_mass() - self.shape_tail_mass(ti) if ti > 0 else 0.0
                        for ti in t])
        return float(out[0]) if scalar else out

    def shape_sup_on(self, t0: float, t1: float) -> float:
        """sup of base_shape over [t0, t1); a true upper bound for thinning."""
        t0, t1 = max(t0, 0.0), max(t1, 0.0)
        if t1 <= t0:
            return 0.0
        if self.family == "exponential":
            return float(self.shape(t0))
        if self.family == "erlang":
            k, b = self.params["shape"], self.params["rate"]
            cand = [float(self.shape(t0)), float(self.shape(t1))]
            mode = (k - 1) / b
            if t0 <= mode < t1:
                cand.append(float(self.shape(mode)))
            return max(cand)
        dt, vals = self.params["dt"], self.params["values"]
        i0 = int(math.floor(t0 / dt))
        i1 = min(int(math.ceil(t1 / dt)), len(vals))
        if i0 >= len(vals):
            return 0.0
        return float(vals[i0:max(i1, i0 + 1)].max())

    def shape_total_variation(self) -> float:
        if self.family == "exponential":
            return float(self.shape(0.0))
        if self.family == "erlang":
            k, b = self.params["shape"], self.params["rate"]
            peak = float(self.shape((k - 1) / b))
            return peak if k == 1 else 2.0 * peak
        vals = self.params["values"]
        padded = np.concatenate([[0.0], vals, [0.0]])
        return float(np.abs(np.diff(padded)).sum())

    def mass(self) -> float:
        """L1 norm of base_amplitude * shape."""
        return self.base_amplitude * self.shape_mass()

    def first_moment(self) -> float:
        return self.base_amplitude * self.shape_first_moment()

    def __repr__(self):
        return f"KernelSpec({self.family}, A={self.base_amplitude}, {self.params})"


@dataclass(frozen=True)
class AncestorSpec:
    """Baseline term mu_i(t) encoding pre-time-0 impacts.

    kind "none":     mu == 0.
    kind "excess":   mu_hat_i(t) = lambda0[i] * tail_ii(t) / mass_ii, the
                     excess-impact approximation; lambda0 is Lambda_H(0).
    kind "explicit": user-supplied callables mu[i](t).
    """

    kind: str = "none"
    lambda0: Optional[np.ndarray] = None
    functions: Optional[Sequence[Callable]] = None

    def __post_init__(self):
        if self.kind not in ("none", "excess", "explicit"):
            raise ValueError(f"unknown ancestor kind {self.kind!r}")
        if self.kind == "excess":
            lam = np.atleast_1d(np.asarray(self.lambda0, dtype=float))
            if np.any(lam < 0):
                raise ValueError("Lambda(0) must be nonnegative")
            object.__setattr__(self, "lambda0", lam)
        if self.kind == "explicit" and not self.functions:
            raise ValueError("explicit ancestors need functions")


@dataclass
class HawkesModel:
    """d endogenous types plus one immigration source.

    kernels[i][j]: impact of a source-j event on type-i intensity, j in
    0..d-1 endogenous, j = d immigration.  mark_dists[j] is the mark law of
    source j (length d+1).
    """

    d: int
    kernels: Sequence[Sequence[KernelSpec]]
    mark_dists: Sequence[MarkDistribution]
    immigration_rate: float = 1.0
    ancestors: AncestorSpec = field(default_factory=AncestorSpec)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if len(self.kernels) != self.d or any(len(row) != self.d + 1 for row in self.kernels):
            raise ValueError("kernels must be a d x (d+1) table")
        if len(self.mark_dists) != self.d + 1:
            raise ValueError("need one mark law per source (d+1 of them)")
        if self.immigration_rate < 0:
            raise ValueError("immigration_rate must be nonnegative")

    def kernel(self, i: int, j: int) -> KernelSpec:
        return self.kernels[i][j]

    def ancestor_mu(self, i: int, t):
        """Evaluate mu_i(t) (vectorized in t)."""
        t = np.asarray(t, dtype=float)
        if self.ancestors.kind == "none":
            return np.zeros_like(t) if t.ndim else 0.0
        if self.ancestors.kind == "explicit":
            f = self.ancestors.functions[i]
            return f(t) if t.ndim else float(f(t))
        lam0 = self.ancestors.lambda0[i]
        ker = self.kernel(i, i)
        mass = ker.mass()
        if lam0 > 0 and mass <= 0:
            raise ValueError("excess ancestors need a positive-mass self kernel")
        if lam0 == 0:
            return np.zeros_like(t) if t.ndim else 0.0
        tail = np.vectorize(ker.shape_tail_mass)(np.atleast_1d(t))
        out = lam0 * ker.base_amplitude * tail / mass
        return out if t.ndim else float(out[0])


@dataclass(frozen=True)
class CriticalityReport:
    mean_children_matrix: np.ndarray
    spectral_radius: float
    classification: str  # Subcritical | Critical | Supercritical
    tolerance: float


def eval_kernel(k: KernelSpec, t, u: Mark, target: int):
    """phi_target(t, u) = amplitude_target(u) * base_amplitude * shape(t)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("kernel evaluation requires t >= 0")
    return u.amplitude[target] * k.base_amplitude * k.shape(t)


def mean_kernel(model: HawkesModel, i: int, j: int, tgrid: np.ndarray) -> np.ndarray:
    """phi_ij(t) = E_{nu_j}[amplitude_i] * base_amplitude * shape(t) on tgrid."""
    ker = model.kernel(i, j)
    mean_amp = model.mark_dists[j].mean_amplitude()[i]
    return mean_amp * ker.base_amplitude * ker.shape(np.asarray(tgrid, dtype=float))


def mean_children_matrix(model: HawkesModel) -> np.ndarray:
    m = np.zeros((model.d, model.d))
    for i in range(model.d):
        for j in range(model.d):
            m[i, j] = model.mark_dists[j].mean_amplitude()[i] * model.kernel(i, j).mass()
    return m


def mean_immigration_masses(model: HawkesModel) -> np.ndarray:
    """Vector of ||phi_iI||_{L1} (the a_i candidates)."""
    j = model.d
    return np.array(
        [model.mark_dists[j].mean_amplitude()[i] * model.kernel(i, j).mass()
         for i in range(model.d)]
    )


def kernel_first_moment(model: HawkesModel, i: int) -> float:
    """integral of t * phi_ii(t) dt (the sigma_i candidate)."""
    ker = model.kernel(i, i)
    mean_amp = model.mark_dists[i].mean_amplitude()[i]
    return mean_amp * ker.first_moment()


def _charpoly_spectral_radius(m: np.ndarray) -> float:
    """Characteristic-polynomial root of largest modulus, d <= 3 only."""
    d = m.shape[0]
    if d == 1:
        return abs(m[0, 0])
    tr = np.trace(m)
    if d == 2:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        coeffs = [1.0, -tr, det]
    elif d == 3:
        det = (
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )
        # sum of principal 2x2 minors
        s2 = (
            m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
            + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
            + m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        )
        coeffs = [1.0, -tr, s2, -det]
    else:
        raise ValueError("characteristic-polynomial fallback only for d <= 3")
    return float(np.max(np.abs(np.roots(coeffs))))


def classify_criticality(m: np.ndarray, tol: float = 1e-9,
                         max_iter: int = 10_000) -> CriticalityReport:
    """Spectral radius by power iteration (all-ones start), trichotomy with a
    tolerance band.  Falls back to the characteristic polynomial for d <= 3
    when power iteration does not settle (e.g. complex dominant pair)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("mean children matrix must be square")
    if np.any(m < 0):
        raise ValueError("mean children matrix must be nonnegative")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    d = m.shape[0]
    x = np.ones(d)
    rho = None
    if not np.any(m):
        rho = 0.0
    else:
        prev = -1.0
        for _ in range(max_iter):
            y = m @ x
            ny = np.linalg.norm(y)
            if ny == 0.0:
                rho = 0.0
                break
            est = ny / np.linalg.norm(x)
            x = y / ny
            if abs(est - prev) <= 1e-13 * max(1.0, est):
                rho = est
                break
            prev = est
    if rho is None:
        if d <= 3:
            rho = _charpoly_spectral_radius(m)
        else:
            raise RuntimeError(
                f"power iteration did not converge for matrix {m!r}"
            )
    if rho < 1.0 - tol:
        cls = "Subcritical"
    elif rho > 1.0 + tol:
        cls = "Supercritical"
    else:
        cls = "Critical"
    return CriticalityReport(m, float(rho), cls, tol)
