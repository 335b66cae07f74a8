"""Optimal double-barrier dividend strategies under an Omega bankruptcy model."""

from .levy import LevyModel, laplace_exponent, phi_right_inverse, psi_roots
from .omega import BankruptcyRate, OmegaScaleTable, Segment, build_table, h_prime_table, omega_q, solve_h
from .scale import ScaleBasis, w_q, w_q_prime, z_q, z_q_prime

__version__ = "0.1.0"
