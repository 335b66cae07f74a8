"""Closed-form scale functions for rational Laplace exponents.

With simple roots theta_i of psi(s) = q the q-scale function is the
exponential sum ``W_q(x) = sum_i D_i exp(theta_i x)``, ``D_i = 1/psi'(theta_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError
from .levy import LevyModel, _psi_prime, phi_right_inverse, psi_roots


def _expsum(coeffs, roots, x):
    # sum_i c_i exp(theta_i x), factoring out the dominant growth so that
    # overflow only happens when the sum itself overflows
    x = np.asarray(x, dtype=float)
    lead = roots[0]
    with np.errstate(over="ignore", under="ignore"):
        inner = np.sum(coeffs * np.exp(np.multiply.outer(x, roots - lead)), axis=-1)
        return np.exp(lead * x) * inner


@dataclass(frozen=True)
class ScaleBasis:
    model: LevyModel
    q: float
    roots: np.ndarray
    residues: np.ndarray

    @classmethod
    def from_model(cls, model, q):
        if q <= 0:
            raise DomainError("scale basis requires q > 0")
        roots = psi_roots(model, q)
        residues = 1.0 / _psi_prime(model, roots)
        return cls(model, float(q), roots, residues)

    @property
    def phi_q(self):
        return float(self.roots[0])

    @cached_property
    def w_at_zero(self):
        # exact value: 0 if sigma > 0, 1/mu otherwise
        return 0.0 if self.model.sigma > 0 else 1.0 / self.model.mu

    @cached_property
    def w_prime_at_zero(self):
        if self.model.sigma > 0:
            return 2.0 / self.model.sigma**2
        return float(np.sum(self.residues * self.roots))

    def phi(self, s):
        return phi_right_inverse(self.model, s)


def w_q(basis, x):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, _expsum(basis.residues, basis.roots, np.maximum(x, 0.0)), 0.0)
    if basis.model.sigma > 0:
        out = np.where(x == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def w_q_prime(basis, x, right_limit=False):
    """Derivative of W_q on (0, inf).

    ``x == 0`` is accepted only with ``right_limit=True`` and returns W_q'(0+).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or (not right_limit and np.any(x == 0)):
        raise DomainError("w_q_prime needs x > 0 (pass right_limit=True for x = 0)")
    out = _expsum(basis.residues * basis.roots, basis.roots, x)
    out = np.where(x == 0, basis.w_prime_at_zero, out)
    return float(out) if out.ndim == 0 else out


def _z_parts(basis, s):
    if s <= basis.q:
        raise DomainError("z_q requires s > q")
    phi_s = basis.phi(s)
    return phi_s, (s - basis.q) * basis.residues / (phi_s - basis.roots)


def z_q(basis, s, x):
    """Z_q(x; Phi(s)) for s > q.

    For x > 0 this uses the integrated form
    ``(s - q) sum_i D_i exp(theta_i x) / (Phi(s) - theta_i)``, which avoids
    the cancellation between ``exp(Phi(s) x)`` and the running integral.
    """
    phi_s, coeffs = _z_parts(basis, s)
    x = np.asarray(x, dtype=float)
    neg = np.exp(phi_s * np.minimum(x, 0.0))
    pos = _expsum(coeffs, basis.roots, np.maximum(x, 0.0))
    out = np.where(x <= 0, neg, pos)
    return float(out) if out.ndim == 0 else out


def z_q_prime(basis, s, x):
    phi_s, coeffs = _z_parts(basis, s)
    x = np.asarray(x, dtype=float)
    neg = phi_s * np.exp(phi_s * np.minimum(x, 0.0))
    pos = _expsum(coeffs * basis.roots, basis.roots, np.maximum(x, 0.0))
    out = np.where(x <= 0, neg, pos)
    return float(out) if out.ndim == 0 else out
