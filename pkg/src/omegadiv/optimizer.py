"""Optimal (c1, c2) barriers from the omega_q-scale table.

g(c1, c2) = (H(c2) - H(c1)) / (c2 - c1 - beta) is minimised through two
one-dimensional problems: g1 along the curve c2 = zeta(c1) (interior case)
and g0 along c1 = 0 (corner case).  All searches run on the cubic Hermite
interpolant of (H, H') so that g and H' are mutually consistent.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, OptimizationError, UnimodalityError, XMaxTooSmallError

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2
N_SHAPE_SAMPLES = 64


@dataclass(frozen=True)
class BarrierPair:
    c1: float
    c2: float
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise DomainError("beta must be > 0")
        if self.c1 < 0:
            raise DomainError("c1 must be >= 0")
        if not self.c2 > self.c1 + self.beta:
            raise DomainError("need c2 > c1 + beta")


@dataclass
class OptimizerDiagnostics:
    a_star: float
    beta_max: float | None
    c1_max: float
    case: str
    g_value: float
    c1_star: float = float("nan")
    c2_star: float = float("nan")
    residuals: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def golden_section(f, lo, hi, tol=1e-12, max_iter=200):
    """Minimise a unimodal f on [lo, hi]; returns the abscissa."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return c if fc < fd else d


def g(table, c1, c2, beta):
    if c1 < 0 or not c2 > c1 + beta:
        raise DomainError(f"({c1}, {c2}) outside dom(g) for beta={beta}")
    return (table.H(c2) - table.H(c1)) / (c2 - c1 - beta)


def _positive_nodes(table):
    i0 = table.zero_index
    return table.grid[i0:], table.h_prime[i0:]


def a_star(table):
    """Minimiser of H' on [0, x_max]; 0 when H' is nondecreasing from 0."""
    x, dh = _positive_nodes(table)
    i = int(np.argmin(dh))
    if i == len(x) - 1:
        raise XMaxTooSmallError("H' still decreasing at x_max")
    if i == 0:
        return 0.0
    lo, hi = x[i - 1], x[i + 1]
    xs = golden_section(table.dH, lo, hi)
    return float(xs)


def zeta(table, c1, ast=None):
    """Point on (a*, x_max) with the same H' as c1 in [0, a*)."""
    ast = a_star(table) if ast is None else ast
    if not 0 <= c1 < ast:
        raise DomainError(f"zeta needs 0 <= c1 < a* = {ast}")
    target = table.dH0() if c1 == 0 else float(table.dH(c1))
    if target > table.h_prime[-1]:
        raise XMaxTooSmallError("H'(c1) exceeds H'(x_max)")
    f = lambda y: float(table.dH(y)) - target
    return brentq(f, ast, table.x_max, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def beta_max(table, ast=None):
    """Cost threshold above which the optimal lower barrier is 0 (None if a* = 0)."""
    ast = a_star(table) if ast is None else ast
    if ast <= 0:
        return None
    z0 = zeta(table, 0.0, ast)
    return float(z0 - (table.H(z0) - table.H(0.0)) / table.dH0())


def c1_max(table, beta, ast=None):
    ast = a_star(table) if ast is None else ast
    if ast <= 0:
        return 0.0
    f = lambda c: zeta(table, c, ast) - c - beta
    if f(0.0) <= 0:
        return 0.0
    hi = ast * (1 - 1e-12)
    if f(hi) > 0:
        return float(hi)
    return float(brentq(f, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def g1(table, c1, beta, ast=None):
    z = zeta(table, c1, ast)
    return (table.H(z) - table.H(c1)) / (z - c1 - beta)


def g0(table, c2, beta):
    return (table.H(c2) - table.H(0.0)) / (c2 - beta)


def _check_unimodal(values, name):
    v = np.asarray(values)
    i = int(np.argmin(v))
    scale = np.max(np.abs(v)) * 1e-12
    if np.any(np.diff(v[: i + 1]) > scale) or np.any(np.diff(v[i:]) < -scale):
        raise UnimodalityError(f"{name} is not decrease-then-increase on the sampled grid", samples=v.tolist())


def minimize_g1(table, beta, ast=None):
    """Interior minimiser c-bar of g1 on (0, c1_max)."""
    ast = a_star(table) if ast is None else ast
    bmax = beta_max(table, ast)
    if bmax is None or beta >= bmax:
        raise DomainError("minimize_g1 needs a* > 0 and beta < beta_max")
    cmax = c1_max(table, beta, ast)
    f = lambda c: g1(table, c, beta, ast)
    eps = cmax * 1e-9
    grid = np.linspace(eps, cmax - eps, N_SHAPE_SAMPLES)
    vals = [f(c) for c in grid]
    _check_unimodal(vals, "g1")
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    cbar = golden_section(f, lo, hi)
    if ast - cbar < 10 * table.h:
        warnings.warn("g1 minimiser sits at the edge a* of zeta's domain")
    return float(cbar)


def minimize_g0(table, beta):
    """Minimiser c-hat of g0 on (beta, x_max)."""
    x, dh = _positive_nodes(table)
    mask = x > beta
    xs = x[mask]
    diff = dh[mask] - np.array([g0(table, c, beta) for c in xs])
    # g0 - H' changes sign from + to - exactly once, at the minimiser
    idx = np.nonzero(diff >= 0)[0]
    if len(idx) == 0:
        raise XMaxTooSmallError("no sign change of H' - g0 below x_max")
    j = int(idx[0])
    lo = xs[j - 1] if j > 0 else beta + 1e-9 * max(beta, 1.0)
    hi = xs[min(j + 1, len(xs) - 1)]
    samples = np.linspace(beta + (xs[j] - beta) * 1e-3, min(2 * xs[j], table.x_max), N_SHAPE_SAMPLES)
    _check_unimodal([g0(table, c, beta) for c in samples], "g0")
    return float(golden_section(lambda c: g0(table, c, beta), lo, hi))


def optimize(table, beta):
    """Optimal barriers and diagnostics for the transaction cost beta."""
    if beta <= 0:
        raise DomainError("beta must be > 0")
    ast = a_star(table)
    bmax = beta_max(table, ast)
    cmax = c1_max(table, beta, ast)
    if ast > 0 and bmax is not None and beta < bmax:
        case = "interior"
        c1 = minimize_g1(table, beta, ast)
        c2 = zeta(table, c1, ast)
    else:
        case = "corner_astar" if ast == 0 else "corner_beta"
        c1 = 0.0
        c2 = minimize_g0(table, beta)
    pair = BarrierPair(c1, c2, beta)
    gv = float(g(table, c1, c2, beta))
    d2 = float(table.dH(c2))
    residuals = {"foc_c2": abs(d2 - gv)}
    if case == "interior":
        d1 = float(table.dH(c1))
        residuals["foc_equal_slopes"] = abs(d1 - d2) / abs(d2)
    diag = OptimizerDiagnostics(ast, bmax, cmax, case, gv, c1, c2, residuals)
    if not gv > 0:
        raise OptimizationError("g at the optimum must be positive")
    if residuals["foc_c2"] > 1e-4:
        raise OptimizationError(f"first-order condition at c2 off by {residuals['foc_c2']:.3g}")
    if residuals.get("foc_equal_slopes", 0.0) > 1e-8:
        raise OptimizationError("H'(c1*) != H'(c2*)")
    return pair, diag


def sweep_beta(table, betas):
    rows = []
    for b in betas:
        pair, diag = optimize(table, float(b))
        rows.append((float(b), pair.c1, pair.c2, diag.case))
    c2s = [r[2] for r in rows]
    if any(np.diff(c2s) < -table.h):
        log.info("c2*(beta) is not monotone on the sampled sweep")
    return rows
