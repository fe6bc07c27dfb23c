"""Jitted single-type ensemble engines for the large scaling-limit runs.

The readable simulators in :mod:`selfexcite.hawkes` and :mod:`selfexcite.cmj`
are the contract implementations; the acceptance ladders need ~10^9 events,
which is only feasible with compiled event loops.  These engines cover
exactly the shipped experiment shape -- single endogenous type, exponential
kernels, constant birth-rate modulation -- and are validated against the
reference simulators in the test suite.

Determinism: one legacy-numpy seed per path, derived from the master seed via
SeedSequence.generate_state; paths run sequentially, so results are
byte-identical across reruns regardless of machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["hawkes_ensemble", "cmj_ensemble"]


# ----------------------------------------------------------------------
# single-type exponential-kernel Hawkes with shot-noise tracking
# ----------------------------------------------------------------------

@njit(cache=True)
def _hawkes_path(seed, n, T, A_self, a_imm, rate, lam_I, z0, mark_kind,
                 grid_raw, zi_rate, zi_jump, zc_rate, event_cap):
    """One path on raw horizon n*T.

    State: E = total excitation (ancestors n*z0 plus event impacts), decaying
    at `rate`; s1 = instantaneous shot noise (jump zi_jump per type-1 event,
    decay zi_rate); s2 = exponential part of the cumulative response.
    Records (Z, S_inst, N1 - s2, N1) at the raw grid times.
    """
    np.random.seed(seed)
    m = grid_raw.shape[0]
    Z = np.empty(m)
    SI = np.empty(m)
    SC = np.empty(m)
    NN = np.empty(m)
    E = n * z0
    s1 = 0.0
    s2 = 0.0
    n1 = 0.0
    t = 0.0
    gi = 0
    horizon = n * T
    nev = 0
    while True:
        ub = E + lam_I
        w = np.random.exponential(1.0 / ub)
        t2 = t + w
        # record grid points passed in (t, t2)
        while gi < m and grid_raw[gi] < t2:
            dtg = grid_raw[gi] - t
            Z[gi] = E * np.exp(-rate * dtg) / n
            SI[gi] = s1 * np.exp(-zi_rate * dtg)
            SC[gi] = n1 - s2 * np.exp(-zc_rate * dtg)
            NN[gi] = n1
            gi += 1
        if t2 >= horizon:
            break
        w_eff = t2 - t
        E *= np.exp(-rate * w_eff)
        s1 *= np.exp(-zi_rate * w_eff)
        s2 *= np.exp(-zc_rate * w_eff)
        lam = E  # type-1 intensity at t2
        u = np.random.uniform(0.0, ub)
        if u < lam + lam_I:
            if mark_kind == 1:
                amp = np.random.exponential(1.0)
            else:
                amp = 1.0
            if u < lam_I:
                # immigrant arrival: excites, not counted in N1/S
                E += a_imm * rate * amp
            else:
                E += A_self * rate * amp
                s1 += zi_jump
                s2 += 1.0
                n1 += 1.0
            nev += 1
            if nev > event_cap:
                raise RuntimeError("event cap exceeded in hawkes engine")
        t = t2
    while gi < m:
        dtg = grid_raw[gi] - t
        Z[gi] = E * np.exp(-rate * dtg) / n
        SI[gi] = s1 * np.exp(-zi_rate * dtg)
        SC[gi] = n1 - s2 * np.exp(-zc_rate * dtg)
        NN[gi] = n1
        gi += 1
    return Z, SI, SC, NN, nev


def hawkes_ensemble(master_seed, n_paths, n, T, grid, *, A_self, a_imm, rate,
                    lam_I=1.0, z0=0.0, mark_kind=0, zi_rate=1.0, zi_mass=0.0,
                    zc_rate=1.0, zc_mass=0.0, event_cap=2 * 10**8):
    """Ensemble of single-type paths; returns a dict of per-path arrays.

    grid is in rescaled time; Z is already divided by n, shot-noise outputs
    are the raw S(n t) values (rescaling left to the caller), N is the type-1
    event count.  mark_kind: 0 constant amplitude 1, 1 Exponential(mean 1).
    """
    grid = np.asarray(grid, dtype=float)
    grid_raw = n * grid
    seeds = np.random.SeedSequence(master_seed).generate_state(n_paths)
    m = len(grid)
    out = {k: np.empty((n_paths, m)) for k in ("Z", "SI", "SC", "N")}
    events = np.empty(n_paths, dtype=np.int64)
    zi_jump = zi_mass * zi_rate
    for p in range(n_paths):
        Z, SI, SC, NN, nev = _hawkes_path(
            seeds[p], float(n), float(T), A_self, a_imm, rate, lam_I, z0,
            mark_kind, grid_raw, zi_rate, zi_jump, zc_rate, event_cap)
        out["Z"][p] = Z
        out["SI"][p] = SI
        out["SC"][p] = zc_mass * SC
        out["N"][p] = NN
        events[p] = nev
    out["events"] = events
    return out


# ----------------------------------------------------------------------
# single-type CMJ with constant birth-rate modulation
# ----------------------------------------------------------------------

@njit(cache=True)
def _sample_life(fam, par):
    if fam == 0:    # exponential(rate)
        return np.random.exponential(1.0 / par)
    if fam == 1:    # uniform(0, c)
        return np.random.uniform(0.0, par)
    if fam == 2:    # deterministic(c)
        return par
    # gamma2(rate)
    return np.random.exponential(1.0 / par) + np.random.exponential(1.0 / par)


@njit(cache=True)
def _sample_sizebiased_life(fam, par):
    if fam == 0:
        return np.random.exponential(1.0 / par) + np.random.exponential(1.0 / par)
    if fam == 1:
        return par * np.sqrt(np.random.uniform(0.0, 1.0))
    if fam == 2:
        return par
    # gamma2 size-biased = Gamma(3, rate)
    return (np.random.exponential(1.0 / par) + np.random.exponential(1.0 / par)
            + np.random.exponential(1.0 / par))


@njit(cache=True)
def _sample_pmf(cum, atoms):
    u = np.random.uniform(0.0, 1.0)
    for i in range(cum.shape[0]):
        if u < cum[i]:
            return atoms[i]
    return atoms[cum.shape[0] - 1]


@njit(cache=True)
def _cmj_path(seed, T, beta, lam_I, life_fam, life_par, n_anc, fresh_anc,
              off_atoms, off_cum, imm_atoms, imm_cum, grid, snap_time,
              age_buf, res_buf, pop_cap):
    """One population path; constant-in-age birth rate beta while alive.

    Individuals are processed breadth-first off a growing stack; order is
    irrelevant because reproduction dates depend only on the parent.  Returns
    grid paths of (alive count, reproduction-date count, integrated birth
    rate) plus the number of (age, residual) snapshot atoms written.
    """
    np.random.seed(seed)
    cap = 4096
    tau = np.empty(cap)
    life = np.empty(cap)
    count = 0

    # ancestors: tau = -age so age-at-t = t - tau
    for _ in range(n_anc):
        if fresh_anc:
            a = 0.0
            l = _sample_life(life_fam, life_par)
        else:
            l = _sample_sizebiased_life(life_fam, life_par)
            a = np.random.uniform(0.0, l)
        tau[count] = -a
        life[count] = l
        count += 1

    # immigrant arrivals
    n_imm = np.random.poisson(lam_I * T)
    for _ in range(n_imm):
        t = np.random.uniform(0.0, T)
        batch = _sample_pmf(imm_cum, imm_atoms)
        for _ in range(batch):
            if count >= cap:
                cap *= 2
                tau2 = np.empty(cap); tau2[:count] = tau[:count]; tau = tau2
                life2 = np.empty(cap); life2[:count] = life[:count]; life = life2
            tau[count] = t
            life[count] = _sample_life(life_fam, life_par)
            count += 1

    m = grid.shape[0]
    nrep = np.zeros(m)
    i = 0
    while i < count:
        ti = tau[i]
        a0 = 0.0 if ti >= 0.0 else -ti
        a_max = min(life[i], T - ti)
        if a_max > a0:
            k = np.random.poisson(beta * (a_max - a0))
            for _ in range(k):
                date = ti + a0 + (a_max - a0) * np.random.uniform(0.0, 1.0)
                for g in range(m):
                    if date <= grid[g]:
                        nrep[g] += 1.0
                nkids = _sample_pmf(off_cum, off_atoms)
                for _ in range(nkids):
                    if count >= cap:
                        cap *= 2
                        tau2 = np.empty(cap); tau2[:count] = tau[:count]; tau = tau2
                        life2 = np.empty(cap); life2[:count] = life[:count]; life = life2
                    if count >= pop_cap:
                        raise RuntimeError("population cap exceeded in cmj engine")
                    tau[count] = date
                    life[count] = _sample_life(life_fam, life_par)
                    count += 1
        i += 1

    alive = np.zeros(m)
    cint = np.zeros(m)
    n_snap = 0
    for x in range(count):
        tx = tau[x]
        dx = tx + life[x]
        start = tx if tx > 0.0 else 0.0
        for g in range(m):
            tg = grid[g]
            if tx <= tg < dx:
                alive[g] += 1.0
            hi = tg if tg < dx else dx
            if hi > start:
                cint[g] += hi - start
        if snap_time >= 0.0 and tx <= snap_time < dx:
            if n_snap < age_buf.shape[0]:
                age_buf[n_snap] = snap_time - tx
                res_buf[n_snap] = dx - snap_time
                n_snap += 1
    for g in range(m):
        cint[g] *= beta
    return alive, nrep, cint, n_snap, count


def cmj_ensemble(master_seed, n_paths, T, grid, *, beta, lam_I, life_family,
                 life_param, n_ancestors, offspring_atoms, offspring_probs,
                 imm_atoms, imm_probs, fresh_ancestors=False, snap_time=-1.0,
                 snap_buffer=200_000, pop_cap=10_000_000):
    """Ensemble of single-type CMJ paths (constant birth-rate modulation).

    Returns dict with per-path arrays 'alive', 'nrep', 'cint' (each
    (n_paths, len(grid))), 'total' individual counts, and pooled snapshot
    'ages'/'residuals' (concatenated over paths) when snap_time >= 0.
    """
    fam_codes = {"exponential": 0, "uniform": 1, "deterministic": 2, "gamma2": 3}
    fam = fam_codes[life_family]
    grid = np.asarray(grid, dtype=float)
    off_atoms = np.asarray(offspring_atoms, dtype=np.int64)
    off_cum = np.cumsum(np.asarray(offspring_probs, dtype=float))
    imm_atoms_a = np.asarray(imm_atoms, dtype=np.int64)
    imm_cum = np.cumsum(np.asarray(imm_probs, dtype=float))
    seeds = np.random.SeedSequence(master_seed).generate_state(n_paths)
    m = len(grid)
    out = {
        "alive": np.empty((n_paths, m)),
        "nrep": np.empty((n_paths, m)),
        "cint": np.empty((n_paths, m)),
        "total": np.empty(n_paths, dtype=np.int64),
    }
    ages_all, res_all = [], []
    age_buf = np.empty(snap_buffer)
    res_buf = np.empty(snap_buffer)
    for p in range(n_paths):
        alive, nrep, cint, n_snap, total = _cmj_path(
            seeds[p], float(T), float(beta), float(lam_I), fam,
            float(life_param), int(n_ancestors), fresh_ancestors,
            off_atoms, off_cum, imm_atoms_a, imm_cum, grid, float(snap_time),
            age_buf, res_buf, int(pop_cap))
        out["alive"][p] = alive
        out["nrep"][p] = nrep
        out["cint"][p] = cint
        out["total"][p] = total
        if snap_time >= 0.0 and n_snap > 0:
            ages_all.append(age_buf[:n_snap].copy())
            res_all.append(res_buf[:n_snap].copy())
    if snap_time >= 0.0:
        out["ages"] = np.concatenate(ages_all) if ages_all else np.empty(0)
        out["residuals"] = np.concatenate(res_all) if res_all else np.empty(0)
    return out
