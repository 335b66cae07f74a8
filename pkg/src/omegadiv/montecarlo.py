"""Monte Carlo estimates of (c1, c2) strategy values under Omega killing.

Jump times are exact (exponential inter-arrivals); the diffusive part is
advanced by Euler steps of size ``dt`` between jumps.  Each block of
``PATHS_PER_STREAM`` paths draws from its own stream spawned from the master
seed, so results do not depend on how blocks are scheduled across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .errors import DomainError, SimulationFault

PATHS_PER_STREAM = 256
KILLING_CLOCK = "killing_clock"
DISCOUNT_WEIGHT = "discount_weight"
MODES = (KILLING_CLOCK, DISCOUNT_WEIGHT)


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    t_max: float | None = None
    seed: int = 12345
    mode: str = KILLING_CLOCK
    weight_floor: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if self.dt <= 0:
            raise DomainError("dt must be > 0")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")

    def horizon(self, q):
        """t_max, defaulting to the smallest horizon with exp(-q t_max) < 1e-6."""
        if self.t_max is not None:
            if q > 0 and math.exp(-q * self.t_max) >= 1e-6:
                raise DomainError("t_max too short: exp(-q t_max) must be < 1e-6")
            return self.t_max
        return math.log(1e6) / q * (1 + 1e-9)


@dataclass
class SimResult:
    estimate: float
    stderr: float
    n_paths: int
    dt: float
    mode: str
    seed: int
    truncation_bound: float
    x0: float = float("nan")

    def to_dict(self):
        return asdict(self)


@njit(cache=True)
def _omega(u, a, phi, s0, s1, sv, ss):
    if u >= 0.0:
        return 0.0
    if u < a:
        return phi
    for k in range(s0.shape[0]):
        if s0[k] <= u < s1[k]:
            return sv[k] + ss[k] * (u - s0[k])
    return 0.0


@njit(cache=True, nogil=True)
def _simulate_block(rng, n, x0, mu, sigma, lam, cum_w, rates, a, phi, s0, s1, sv, ss,
                    q, c1, c2, beta, dt, t_max, kill_mode, cutoff, out):
    # out columns: value, death time (inf if alive), ruined flag,
    # occupation below 0, first payment time, first net payment, elapsed time
    sq = math.sqrt(dt)
    for p in range(n):
        u = x0
        t = 0.0
        hazard = 0.0
        value = 0.0
        e1 = rng.standard_exponential() if kill_mode else np.inf
        first_t = np.inf
        first_amt = np.nan
        occ = 0.0
        death = np.inf
        if u >= c2:
            value += u - c1 - beta
            first_t = 0.0
            first_amt = u - c1 - beta
            u = c1
        next_jump = t + rng.standard_exponential() / lam if lam > 0 else np.inf
        while t < t_max:
            step = dt
            jump = False
            if next_jump - t <= dt:
                step = next_jump - t
                jump = True
            om0 = _omega(u, a, phi, s0, s1, sv, ss)
            below0 = u < 0.0
            if step == dt:
                u += mu * dt + sigma * sq * rng.standard_normal()
            else:
                u += mu * step + sigma * math.sqrt(step) * rng.standard_normal()
            om1 = _omega(u, a, phi, s0, s1, sv, ss)
            hazard += 0.5 * (om0 + om1) * step
            if below0 or u < 0.0:
                occ += step if (below0 and u < 0.0) else 0.5 * step
            t += step
            if kill_mode and hazard > e1:
                death = t
                break
            if jump:
                v = rng.random()
                j = 0
                while j < cum_w.shape[0] - 1 and v > cum_w[j]:
                    j += 1
                u -= rng.standard_exponential() / rates[j]
                next_jump = t + rng.standard_exponential() / lam
            if u >= c2:
                amt = u - c1 - beta
                if kill_mode:
                    value += math.exp(-q * t) * amt
                else:
                    value += math.exp(-q * t - hazard) * amt
                if first_t == np.inf:
                    first_t = t
                    first_amt = amt
                u = c1
            if not kill_mode and q * t + hazard > cutoff:
                break
            if not math.isfinite(u):
                break
        out[p, 0] = value
        out[p, 1] = death
        out[p, 2] = 1.0 if death < np.inf else 0.0
        out[p, 3] = occ
        out[p, 4] = first_t
        out[p, 5] = first_amt
        out[p, 6] = t


def _omega_arrays(omega):
    segs = omega.segments
    return (
        float(omega.a),
        float(omega.phi),
        np.array([s.start for s in segs], dtype=float),
        np.array([s.end for s in segs], dtype=float),
        np.array([s.value for s in segs], dtype=float),
        np.array([s.slope for s in segs], dtype=float),
    )


def _run(model, omega, q, c1, c2, beta, x0, config, kill_mode, t_max):
    if model.has_jumps:
        cum_w = np.cumsum(model.weights)
        rates = model.rates
    else:
        cum_w = np.ones(1)
        rates = np.ones(1)
    om = _omega_arrays(omega)
    cutoff = -math.log(config.weight_floor)
    n_blocks = -(-config.n_paths // PATHS_PER_STREAM)
    out = np.empty((config.n_paths, 7))
    root = np.random.SeedSequence(config.seed)

    def block(b):
        lo = b * PATHS_PER_STREAM
        hi = min(lo + PATHS_PER_STREAM, config.n_paths)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(root.entropy, spawn_key=(b,))))
        _simulate_block(rng, hi - lo, float(x0), model.mu, model.sigma, model.jump_intensity,
                        cum_w, rates, *om, float(q), float(c1), float(c2), float(beta),
                        float(config.dt), float(t_max), kill_mode, cutoff, out[lo:hi])

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            list(ex.map(block, range(n_blocks)))
    else:
        for b in range(n_blocks):
            block(b)
    bad = ~np.isfinite(out[:, 0])
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SimulationFault(f"non-finite value on path {i}", path_dump=out[i].tolist())
    return out


def simulate_value(model, omega, q, barriers, x0, config):
    """Estimate v_{c1,c2}(x0) and its standard error."""
    t_max = config.horizon(q)
    kill = config.mode == KILLING_CLOCK
    out = _run(model, omega, q, barriers.c1, barriers.c2, barriers.beta, x0, config, kill, t_max)
    vals = out[:, 0]
    n = len(vals)
    # np.sum is pairwise, so the estimate does not depend on block order
    est = float(np.sum(vals) / n)
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    floor = math.exp(-q * t_max) if kill else min(config.weight_floor, math.exp(-q * t_max))
    bound = floor * (max(x0, barriers.c2) + (abs(model.mu) + model.sigma) / q)
    return SimResult(est, se, n, config.dt, config.mode, config.seed, float(bound), float(x0))


def simulate_ruin_stats(model, omega, barriers, x0, config, q=0.0):
    """Killing-clock diagnostics: ruin frequency, ruin times, occupation below 0."""
    t_max = config.t_max if config.t_max is not None else (config.horizon(q) if q > 0 else 100.0)
    out = _run(model, omega, q, barriers.c1, barriers.c2, barriers.beta, x0, config, True, t_max)
    ruined = out[:, 2] > 0
    return {
        "n_paths": len(out),
        "t_max": t_max,
        "ruin_probability": float(np.mean(ruined)),
        "mean_time_to_ruin": float(np.mean(out[ruined, 1])) if np.any(ruined) else float("nan"),
        "mean_occupation_below_0": float(np.mean(out[:, 3])),
        "first_payment_time_max": float(np.max(out[:, 4])),
        "first_payment_amounts": out[:, 5],
    }
