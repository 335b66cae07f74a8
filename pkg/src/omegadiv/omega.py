"""Bankruptcy rate functions and the omega_q-scale function H.

H solves the second-kind Volterra equation

    H(x) = Z_q(x - a; Phi(phi + q)) + int_a^{min(x, 0)} W_q(x - y) omega(y) H(y) dy,

which is the ``W_{phi+q}`` form of the defining functional equation
re-expressed against the q-scale function.  Both forms have the same
solution; this one has no ``exp(Phi(phi + q) x)`` forcing to cancel, so it
stays accurate for large x.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, GridTooCoarseError, XMaxTooSmallError
from .scale import ScaleBasis, _expsum, w_q, w_q_prime, z_q, z_q_prime

_BREAK_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """Linear piece ``value + slope * (x - start)`` on ``[start, end)``."""

    start: float
    end: float
    value: float
    slope: float = 0.0

    def at(self, x):
        return self.value + self.slope * (np.asarray(x, dtype=float) - self.start)


@dataclass(frozen=True)
class BankruptcyRate:
    a: float
    phi: float
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(**s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if self.a > 0:
            raise DomainError("a must be <= 0")
        if self.phi <= 0:
            raise DomainError("phi must be > 0")
        if self.a == 0:
            if segs:
                raise DomainError("a = 0 leaves no room for segments")
            return
        if not segs:
            raise DomainError("segments must cover [a, 0)")
        if not math.isclose(segs[0].start, self.a, abs_tol=_BREAK_TOL) or not math.isclose(
            segs[-1].end, 0.0, abs_tol=_BREAK_TOL
        ):
            raise DomainError("segments must start at a and end at 0")
        prev = self.phi
        for i, seg in enumerate(segs):
            if seg.end <= seg.start:
                raise DomainError(f"segment {i} is empty")
            if i and not math.isclose(seg.start, segs[i - 1].end, abs_tol=_BREAK_TOL):
                raise DomainError(f"segment {i} is not contiguous")
            if seg.slope > 0:
                raise DomainError("omega must be non-increasing (slope <= 0)")
            left, right = float(seg.at(seg.start)), float(seg.at(seg.end))
            if left > prev + 1e-12:
                raise DomainError(f"omega jumps upward at {seg.start}")
            if right < 0:
                raise DomainError("omega must be nonnegative")
            prev = right

    @classmethod
    def linear(cls, a, phi, slope):
        """phi below a, then ``phi + slope (x - a)`` on (a, 0), zero on [0, inf)."""
        if a == 0:
            return cls(0.0, phi)
        return cls(a, phi, (Segment(a, 0.0, phi, slope),))

    @classmethod
    def parisian(cls, phi, a=-1.0):
        """Exponential Parisian ruin: omega = phi on (-inf, 0)."""
        return cls.linear(a, phi, 0.0)

    @property
    def rho(self):
        return 0.0

    @property
    def breakpoints(self):
        return [self.a] + [s.start for s in self.segments[1:]] + [0.0]

    def __call__(self, x):
        # right-continuous version
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.a, self.phi, 0.0)
        for seg in self.segments:
            mask = (x >= seg.start) & (x < seg.end)
            out = np.where(mask, seg.at(x), out)
        return float(out) if out.ndim == 0 else out

    def left_limit(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.a, self.phi, 0.0)
        for seg in self.segments:
            mask = (x > seg.start) & (x <= seg.end)
            out = np.where(mask, seg.at(x), out)
        return float(out) if out.ndim == 0 else out

    def snapped(self, h):
        """Copy with interior breakpoints moved onto the grid a + k h."""
        if not self.segments:
            return self
        snap = lambda t: self.a + round((t - self.a) / h) * h
        segs = []
        for seg in self.segments:
            start, end = snap(seg.start), snap(seg.end)
            if end <= start:
                raise GridTooCoarseError(f"segment [{seg.start}, {seg.end}) vanishes on grid h={h}", h / 2)
            segs.append(Segment(start, end, float(seg.at(start)), seg.slope))
        segs[0] = replace(segs[0], start=self.a)
        segs[-1] = replace(segs[-1], end=0.0)
        moved = max(abs(s.start - t.start) for s, t in zip(segs, self.segments))
        if moved > _BREAK_TOL:
            warnings.warn(f"omega breakpoints snapped to the grid (moved by up to {moved:.3g})")
        return BankruptcyRate(self.a, self.phi, tuple(segs))

    def to_dict(self):
        return {
            "a": self.a,
            "phi": self.phi,
            "segments": [
                {"start": s.start, "end": s.end, "value": s.value, "slope": s.slope} for s in self.segments
            ],
        }


def omega_q(omega, q, x):
    return q + omega(x)


@dataclass(frozen=True)
class OmegaScaleTable:
    grid: np.ndarray
    h_values: np.ndarray
    h_prime: np.ndarray | None
    q: float
    phi: float
    h: float
    a: float
    phi_s: float
    residual_sup: float = float("nan")
    model_id: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def x_max(self):
        return float(self.grid[-1])

    @property
    def zero_index(self):
        return int(np.argmin(np.abs(self.grid)))

    @cached_property
    def _spline(self):
        if self.h_prime is None:
            raise ValueError("derivative table missing; run h_prime_table first")
        return CubicHermiteSpline(self.grid, self.h_values, self.h_prime)

    @cached_property
    def _dspline(self):
        return self._spline.derivative()

    def _check_range(self, x):
        if np.any(x > self.x_max * (1 + 1e-12)):
            raise XMaxTooSmallError(f"x={np.max(x):.6g} beyond table x_max={self.x_max:.6g}")

    def H(self, x):
        """H at arbitrary x <= x_max (closed-form exponential below a)."""
        x = np.asarray(x, dtype=float)
        self._check_range(x)
        below = np.exp(self.phi_s * np.minimum(x - self.a, 0.0))
        out = np.where(x < self.a, below, self._spline(np.clip(x, self.a, self.x_max)))
        return float(out) if out.ndim == 0 else out

    def dH(self, x):
        x = np.asarray(x, dtype=float)
        self._check_range(x)
        below = self.phi_s * np.exp(self.phi_s * np.minimum(x - self.a, 0.0))
        out = np.where(x < self.a, below, self._dspline(np.clip(x, self.a, self.x_max)))
        return float(out) if out.ndim == 0 else out

    def dH0(self):
        """H'(0+), read from the stored node."""
        return float(self.h_prime[self.zero_index])

    def scaled(self, c):
        hp = None if self.h_prime is None else c * self.h_prime
        return replace(self, h_values=c * self.h_values, h_prime=hp)

    def metadata(self):
        return {
            "q": self.q,
            "phi": self.phi,
            "h": self.h,
            "a": self.a,
            "phi_s": self.phi_s,
            "residual_sup": self.residual_sup,
            "model_hash": self.model_id,
            **self.extra,
        }

    def to_csv(self, path):
        hp = self.h_prime if self.h_prime is not None else np.full_like(self.h_values, np.nan)
        rows = np.column_stack([self.grid, self.h_values, hp])
        write_csv(path, ["x", "H", "Hprime"], rows, self.metadata())

    @classmethod
    def from_csv(cls, path):
        meta, cols, data = read_csv(path)
        hp = data[:, 2]
        known = {"q", "phi", "h", "a", "phi_s", "residual_sup", "model_hash"}
        return cls(
            grid=data[:, 0],
            h_values=data[:, 1],
            h_prime=None if np.all(np.isnan(hp)) else hp,
            q=float(meta["q"]),
            phi=float(meta["phi"]),
            h=float(meta["h"]),
            a=float(meta["a"]),
            phi_s=float(meta["phi_s"]),
            residual_sup=float(meta["residual_sup"]),
            model_id=meta.get("model_hash", ""),
            extra={k: v for k, v in meta.items() if k not in known},
        )


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path, columns, rows, meta):
    lines = [f"# {k}={_fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(columns))
    lines.extend(",".join("%.17g" % v for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    meta = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    cols = body[0].split(",")
    data = np.array([[float(t) for t in row.split(",")] for row in body[1:]], dtype=float)
    return meta, cols, data.reshape(-1, len(cols))


def newton_cotes_weights(n):
    """Composite weights (in units of h) over n panels, fourth order for n >= 2.

    Simpson on pairs of panels, with a 3/8 block closing an odd count.
    """
    if n < 1:
        return np.zeros(1)
    if n == 1:
        return np.array([0.5, 0.5])
    w = np.zeros(n + 1)
    m = n if n % 2 == 0 else n - 3
    if m:
        w[0:m + 1:2] += 2.0 / 3.0
        w[1:m:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[m] -= 1.0 / 3.0
    if n % 2:
        w[m:m + 4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def _piece_weights(om_left, om_right, break_idx, k):
    """omega-weighted quadrature weights over nodes 0..k, split at breakpoints."""
    cuts = [0] + [b for b in break_idx if 0 < b < k] + [k]
    w = np.zeros(k + 1)
    for p0, p1 in zip(cuts[:-1], cuts[1:]):
        nc = newton_cotes_weights(p1 - p0)
        om = om_right[p0:p1 + 1].copy()
        om[-1] = om_left[p1]
        w[p0:p1 + 1] += nc * om
    return w


class _Grid:
    def __init__(self, a, h, x_max):
        self.a = a
        if a < 0:
            self.n_neg = max(1, round(-a / h))
            self.h = -a / self.n_neg
        else:
            self.n_neg = 0
            self.h = h
        self.n_pos = max(1, math.ceil(x_max / self.h - 1e-9))
        self.x = a + self.h * np.arange(self.n_neg + self.n_pos + 1)
        self.x[self.n_neg] = 0.0


def _march(basis, omega, s, g):
    """Trapezoid marching on g; exploits the exponential-sum kernel (O(N m))."""
    h, n = g.h, g.n_neg
    x = g.x
    theta, D = basis.roots, basis.residues
    Z = z_q(basis, s, x - g.a)
    H = np.empty_like(x)
    H[0] = 1.0
    xn = x[: n + 1]
    wl, wr = omega.left_limit(xn), omega(xn)
    cw = 0.5 * (np.atleast_1d(wl) + np.atleast_1d(wr))
    cw[0] = 0.5 * np.atleast_1d(wr)[0]
    decay = np.exp(theta * h)
    T = np.zeros_like(theta)
    w0 = basis.w_at_zero
    wl = np.atleast_1d(wl)
    for k in range(1, n + 1):
        T = decay * (T + cw[k - 1] * H[k - 1])
        H[k] = (Z[k] + h * float(D @ T)) / (1.0 - 0.5 * h * w0 * wl[k])
    # tail sums re-accumulated exactly: the recursion drifts by O(N eps)
    S = np.array([math.fsum(cw * H[: n + 1] * np.exp(-th * x[: n + 1])) for th in theta])
    H[n + 1:] = Z[n + 1:] + h * _expsum(D * S, theta, x[n + 1:])
    return H


def _residual(basis, omega, s, g, H, chunk=512):
    """sup |H - rhs| with the integral recomputed by composite Simpson."""
    n, h, x = g.n_neg, g.h, g.x
    Z = z_q(basis, s, x - g.a)
    xn = x[: n + 1]
    wl, wr = np.atleast_1d(omega.left_limit(xn)), np.atleast_1d(omega(xn))
    brk = [round((b - g.a) / h) for b in omega.breakpoints[1:-1]]
    res = np.zeros_like(x)
    for k in range(2, n + 1):
        w = _piece_weights(wl, wr, brk, k)
        kern = w_q(basis, x[k] - xn[: k + 1])
        res[k] = H[k] - Z[k] - h * float(np.dot(kern * w, H[: k + 1]))
    if n:
        c = _piece_weights(wl, wr, brk + [n], n) * H[: n + 1]
        for i0 in range(n + 1, len(x), chunk):
            xs = x[i0:i0 + chunk]
            kern = w_q(basis, np.subtract.outer(xs, xn))
            res[i0:i0 + chunk] = H[i0:i0 + chunk] - Z[i0:i0 + chunk] - h * (kern @ c)
    else:
        res = H - Z
    return float(np.max(np.abs(res)))


def solve_h(model, q, omega, x_max=10.0, h=1e-3, check=True):
    """Solve for H on the uniform grid a, a + h, ..., x_max.

    Two trapezoid marches (steps h and h/2) are combined by Richardson
    extrapolation.  ``h`` is nudged so that 0 is a grid node.  The returned
    table has ``h_prime=None``; see :func:`h_prime_table`.
    """
    if q <= 0:
        raise DomainError("q must be > 0")
    if x_max <= 0:
        raise DomainError("x_max must be > 0")
    if h > 1e-2:
        warnings.warn(f"grid step h={h} is coarse; results will fail the residual check")
    s = omega.phi + q
    basis = ScaleBasis.from_model(model, q)
    phi_s = basis.phi(s)
    coarse = _Grid(omega.a, h, x_max)
    fine = _Grid(omega.a, coarse.h / 2, coarse.x[-1])
    om = omega.snapped(coarse.h)
    Hc = _march(basis, om, s, coarse)
    Hf = _march(basis, om, s, fine)
    H = (4.0 * Hf[::2] - Hc) / 3.0
    H[0] = 1.0
    if not np.all(np.isfinite(H)) or np.any(H <= 0) or np.any(np.diff(H) <= 0):
        raise GridTooCoarseError(f"H not positive and increasing at h={coarse.h}; try h={coarse.h / 2}", coarse.h / 2)
    resid = _residual(basis, om, s, coarse, H) if check else float("nan")
    return OmegaScaleTable(
        grid=coarse.x,
        h_values=H,
        h_prime=None,
        q=float(q),
        phi=float(omega.phi),
        h=coarse.h,
        a=float(omega.a),
        phi_s=float(phi_s),
        residual_sup=resid,
        model_id=model.model_id(),
    )


def h_prime_table(table, model, omega):
    """Attach H' computed from the differentiated integral equation.

    With sigma > 0, ``H'(x) = Z_q'(x - a) + int_a^{min(x,0)} W_q'(x - y) omega(y) H(y) dy``;
    the integral is evaluated with composite Simpson weights.  For sigma = 0
    the boundary term makes H' jump at the breakpoints, so we fall back to
    finite differences.
    """
    x, H, h = table.grid, table.h_values, table.h
    if model.sigma == 0:
        warnings.warn("sigma = 0: H' taken from finite differences")
        return replace(table, h_prime=np.gradient(H, x, edge_order=2))
    basis = ScaleBasis.from_model(model, table.q)
    s = table.phi + table.q
    om = omega.snapped(h)
    n = table.zero_index
    xn = x[: n + 1]
    wl, wr = np.atleast_1d(om.left_limit(xn)), np.atleast_1d(om(xn))
    brk = [round((b - table.a) / h) for b in om.breakpoints[1:-1]]
    dH = np.asarray(z_q_prime(basis, s, x - table.a), dtype=float).copy()
    for k in range(1, n + 1):
        w = _piece_weights(wl, wr, brk, k)
        kern = w_q_prime(basis, x[k] - xn[: k + 1], right_limit=True)
        dH[k] += h * float(np.dot(kern * w, H[: k + 1]))
    if n:
        c = _piece_weights(wl, wr, brk + [n], n) * H[: n + 1]
        S = np.array([np.dot(c, np.exp(-th * xn)) for th in basis.roots])
        dH[n + 1:] += h * _expsum(basis.residues * basis.roots * S, basis.roots, x[n + 1:])
    return replace(table, h_prime=dH)


def build_table(model, q, omega, x_max=10.0, h=1e-3, check=True):
    return h_prime_table(solve_h(model, q, omega, x_max, h, check), model, omega)
