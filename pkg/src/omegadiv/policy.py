"""Value of a (c1, c2) strategy and numerical verification of optimality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .omega import omega_q, write_csv
from .optimizer import BarrierPair


def _factor(table, b):
    return (b.c2 - b.c1 - b.beta) / (table.H(b.c2) - table.H(b.c1))


def value(table, barriers, x):
    """Performance function v_{c1,c2}(x) for any real x."""
    if not isinstance(barriers, BarrierPair):
        barriers = BarrierPair(*barriers)
    k = _factor(table, barriers)
    x = np.asarray(x, dtype=float)
    low = k * table.H(np.minimum(x, barriers.c2))
    high = x - barriers.c1 - barriers.beta + k * table.H(barriers.c1)
    out = np.where(x <= barriers.c2, low, high)
    return float(out) if out.ndim == 0 else out


def value_prime(table, barriers, x):
    """v'(x); at x = c2 the left derivative is returned."""
    k = _factor(table, barriers)
    x = np.asarray(x, dtype=float)
    out = np.where(x <= barriers.c2, k * table.dH(np.minimum(x, barriers.c2)), 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class ValueTable:
    x: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    barriers: BarrierPair
    q: float
    table: object = field(repr=False)
    checks: dict = field(default_factory=dict)

    def __call__(self, x):
        return value(self.table, self.barriers, x)

    def to_csv(self, path, extra_meta=None):
        b = self.barriers
        meta = {"c1": b.c1, "c2": b.c2, "beta": b.beta, "q": self.q, **(extra_meta or {})}
        write_csv(path, ["x", "v", "vprime"], np.column_stack([self.x, self.v, self.v_prime]), meta)


def value_table(table, barriers, q, x_hi=None):
    x = table.grid
    if x_hi is not None and x_hi > x[-1]:
        x = np.concatenate([x, np.arange(x[-1] + table.h, x_hi + 0.5 * table.h, table.h)])
    return ValueTable(x, value(table, barriers, x), value_prime(table, barriers, x), barriers, q, table)


def check_c1_fit(vt):
    """|v'(c2-) - 1|; vanishes at the optimum by the first-order condition."""
    return float(abs(value_prime(vt.table, vt.barriers, vt.barriers.c2) - 1.0))


def check_transaction_bound(vt, num_pairs=100_000, seed=0):
    """Worst value of v(x) - v(y) - (x - y - beta) over random grid pairs x >= y >= 0."""
    nodes = vt.x[vt.x >= 0]
    vals = vt.v[vt.x >= 0]
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(nodes), num_pairs)
    j = rng.integers(0, len(nodes), num_pairs)
    hi, lo = np.maximum(i, j), np.minimum(i, j)
    gap = vals[hi] - vals[lo] - (nodes[hi] - nodes[lo] - vt.barriers.beta)
    return float(np.min(gap))


def generator_residual(model, omega, q, vt, x, exclusion=5.0):
    """Signed residual (Gamma - omega_q) v at x.

    v' uses a centred 3-point stencil, v'' a 5-point stencil with the table
    step.  The jump integral is done by adaptive quadrature down to a and in
    closed form below a, where v is proportional to exp(Phi(phi+q)(x - a)).
    """
    table, b = vt.table, vt.barriers
    h = table.h
    near = [p for p in list(omega.breakpoints) + [b.c2] if abs(x - p) <= exclusion * h]
    if near:
        raise DomainError(f"x={x} within {exclusion} grid steps of a kink at {near[0]}")
    if min(x, b.c2) + 2 * h > table.x_max:
        raise DomainError("x too close to the end of the table")
    v = lambda y: value(table, b, y)
    vx = v(x)
    d1 = (v(x + h) - v(x - h)) / (2 * h)
    d2 = (-v(x + 2 * h) + 16 * v(x + h) - 30 * vx + 16 * v(x - h) - v(x - 2 * h)) / (12 * h * h)
    gen = model.mu * d1 + 0.5 * model.sigma**2 * d2
    if model.has_jumps:
        k = _factor(table, b)
        split = max(x - table.a, 0.0)
        pts = [x - p for p in list(omega.breakpoints) + [b.c2] if 0 < x - p < split]
        jump = 0.0
        for p, al in model.jump_mixture:
            dens = lambda z: al * np.exp(-al * z)
            body = 0.0
            if split > 0:
                body = quad(lambda z: v(x - z) * dens(z), 0.0, split, points=pts or None,
                            limit=400, epsabs=1e-12, epsrel=1e-11)[0]
            tail = k * np.exp(table.phi_s * (x - table.a)) * al * np.exp(-(al + table.phi_s) * split) / (al + table.phi_s)
            jump += p * (body + tail)
        gen += model.jump_intensity * (jump - vx)
    return float(gen - omega_q(omega, q, x) * vx)


def generator_summary(model, omega, q, vt, n_below=200, n_above=50):
    """Sample the generator residual below and above c2, avoiding kinks."""
    b, table = vt.barriers, vt.table
    h = table.h
    kinks = list(omega.breakpoints) + [b.c2]
    ok = lambda y: all(abs(y - p) > 5 * h for p in kinks)
    below = [y for y in np.linspace(table.a - 2.0, b.c2 - 6 * h, n_below) if ok(y)]
    top = min(b.c2 + 3.0, table.x_max - 3 * h)
    above = [y for y in np.linspace(b.c2 + 6 * h, top, n_above) if ok(y)]
    rb = [abs(generator_residual(model, omega, q, vt, y)) / (1 + abs(value(table, b, y))) for y in below]
    ra = [generator_residual(model, omega, q, vt, y) for y in above]
    return {
        "below_c2_max_scaled_abs": float(max(rb)),
        "above_c2_max": float(max(ra)) if ra else float("nan"),
        "n_below": len(below),
        "n_above": len(above),
    }


def verify(model, omega, q, vt, num_pairs=100_000, seed=0):
    """Run all checks and store them on the value table."""
    checks = {
        "c1_fit_residual": check_c1_fit(vt),
        "transaction_bound_worst": check_transaction_bound(vt, num_pairs, seed),
        "generator": generator_summary(model, omega, q, vt),
    }
    checks["passed"] = bool(
        checks["c1_fit_residual"] < 1e-3
        and checks["transaction_bound_worst"] >= -1e-9
        and checks["generator"]["below_c2_max_scaled_abs"] < 1e-3
        and checks["generator"]["above_c2_max"] <= 1e-4
    )
    vt.checks = checks
    return checks
