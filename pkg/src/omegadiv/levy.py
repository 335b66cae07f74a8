"""Spectrally negative Levy surplus with hyperexponential downward jumps.

The surplus is ``X_t = x + mu t + sigma B_t - sum_{i <= N_t} Y_i`` where
``N`` is Poisson with rate ``jump_intensity`` and the ``Y_i`` have density
``sum_j p_j alpha_j exp(-alpha_j z)``.  Its Laplace exponent is rational,
which makes every scale function a finite exponential sum.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .errors import DegenerateSpectrumError, DomainError

ROOT_GAP_TOL = 1e-9


@dataclass(frozen=True)
class LevyModel:
    mu: float
    sigma: float
    jump_intensity: float = 0.0
    jump_mixture: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        mix = tuple((float(p), float(al)) for p, al in self.jump_mixture)
        object.__setattr__(self, "jump_mixture", mix)
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.jump_intensity < 0:
            raise DomainError("jump_intensity must be >= 0")
        if self.jump_intensity > 0:
            if not mix:
                raise DomainError("jump_intensity > 0 requires a jump mixture")
            if any(not (0 < p <= 1) for p, _ in mix):
                raise DomainError("mixture weights must lie in (0, 1]")
            if any(al <= 0 for _, al in mix):
                raise DomainError("mixture rates must be > 0")
            if abs(sum(p for p, _ in mix) - 1.0) > 1e-12:
                raise DomainError("mixture weights must sum to 1")
        if self.sigma == 0 and self.mu <= 0:
            raise DomainError("bounded-variation model needs mu > 0")

    @property
    def has_jumps(self):
        return self.jump_intensity > 0

    @property
    def weights(self):
        return np.array([p for p, _ in self.jump_mixture]) if self.has_jumps else np.zeros(0)

    @property
    def rates(self):
        return np.array([al for _, al in self.jump_mixture]) if self.has_jumps else np.zeros(0)

    def jump_tail(self, x):
        """Tail of the Levy measure, nu(x, inf); log-convex by construction."""
        x = np.asarray(x, dtype=float)
        if not self.has_jumps:
            return np.zeros_like(x)
        return self.jump_intensity * np.sum(
            self.weights * np.exp(-np.multiply.outer(x, self.rates)), axis=-1
        )

    def to_dict(self):
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "jump_intensity": self.jump_intensity,
            "jump_mixture": [list(c) for c in self.jump_mixture],
        }

    def model_id(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _psi(model, theta):
    # rational continuation, valid away from the poles -alpha_j
    theta = np.asarray(theta, dtype=float)
    val = model.mu * theta + 0.5 * model.sigma**2 * theta**2
    if model.has_jumps:
        p, al = model.weights, model.rates
        frac = np.sum(p * al / (al + theta[..., None]), axis=-1)
        val = val + model.jump_intensity * (frac - 1.0)
    return val


def _psi_prime(model, theta):
    theta = np.asarray(theta, dtype=float)
    val = model.mu + model.sigma**2 * theta
    if model.has_jumps:
        p, al = model.weights, model.rates
        val = val - model.jump_intensity * np.sum(p * al / (al + theta[..., None]) ** 2, axis=-1)
    return val


def laplace_exponent(model, theta):
    """psi(theta) = log E[exp(theta X_1)] for theta >= 0."""
    if np.any(np.asarray(theta) < 0):
        raise DomainError("laplace_exponent is defined for theta >= 0")
    out = _psi(model, theta)
    return float(out) if np.ndim(out) == 0 else out


def laplace_exponent_prime(model, theta):
    if np.any(np.asarray(theta) < 0):
        raise DomainError("laplace_exponent_prime is defined for theta >= 0")
    out = _psi_prime(model, theta)
    return float(out) if np.ndim(out) == 0 else out


def _newton_polish(model, q, theta, steps=3):
    for _ in range(steps):
        f = float(_psi(model, theta)) - q
        d = float(_psi_prime(model, theta))
        if d == 0:
            break
        cand = theta - f / d
        if abs(float(_psi(model, cand)) - q) >= abs(f):
            break
        theta = cand
    return theta


def phi_right_inverse(model, q):
    """Largest nonnegative root of psi(theta) = q.

    Computed by bracketing: the upper end is doubled until psi exceeds q,
    the lower end is the minimiser of the convex psi on [0, inf).
    """
    if q < 0:
        raise DomainError("q must be >= 0")
    lo = 0.0
    if float(_psi_prime(model, 0.0)) < 0:
        hi = 1.0
        while float(_psi_prime(model, hi)) <= 0:
            hi *= 2.0
        lo = brentq(lambda t: float(_psi_prime(model, t)), 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    elif q == 0:
        return 0.0
    hi = max(1.0, 2 * lo)
    while float(_psi(model, hi)) <= q:
        hi *= 2.0
    root = brentq(lambda t: float(_psi(model, t)) - q, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return _newton_polish(model, q, root)


def _characteristic_polynomial(model, q):
    # (psi(s) - q) * prod_j (alpha_j + s), expanded
    base = Polynomial([-model.jump_intensity - q, model.mu, 0.5 * model.sigma**2])
    if not model.has_jumps:
        return base
    poles = [Polynomial([al, 1.0]) for al in model.rates]
    prod = Polynomial([1.0])
    for f in poles:
        prod = prod * f
    poly = base * prod
    for j, (p, al) in enumerate(model.jump_mixture):
        rest = Polynomial([1.0])
        for k, f in enumerate(poles):
            if k != j:
                rest = rest * f
        poly = poly + model.jump_intensity * p * al * rest
    return poly


def psi_roots(model, q):
    """All real roots of psi(s) = q, sorted in decreasing order.

    The first root is Phi(q) > 0, all others are negative.  Raises
    DegenerateSpectrumError when two roots coincide within ROOT_GAP_TOL,
    since the partial-fraction scale function needs simple roots.
    """
    if q <= 0:
        raise DomainError("psi_roots requires q > 0")
    poly = _characteristic_polynomial(model, q)
    raw = poly.roots()
    scale = max(1.0, float(np.max(np.abs(raw))))
    if np.any(np.abs(raw.imag) > 1e-7 * scale):
        raise DegenerateSpectrumError(f"non-real roots found for q={q}; perturb q")
    roots = np.array(sorted((_newton_polish(model, q, float(r)) for r in raw.real), reverse=True))
    if len(roots) > 1 and np.min(-np.diff(roots)) < ROOT_GAP_TOL:
        raise DegenerateSpectrumError(f"repeated root of psi(s) = {q}; perturb q")
    if roots[0] <= 0 or (len(roots) > 1 and roots[1] >= 0):
        raise DegenerateSpectrumError("expected exactly one positive root")
    return roots
