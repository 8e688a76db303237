"""Adaptive integration of u'' = q(v) u for complex q, and Frobenius startup data.

The stepper is the Dormand-Prince 5(4) pair with a PI step controller. It
works on Python complex scalars: the systems here have two components and
numpy per-call overhead would dominate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import AdmissibilityError, NumericalError

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)


class ResonanceError(AdmissibilityError):
    """Frobenius recurrence hit a vanishing bracket with a nonzero right side."""


@dataclass
class SolutionCurve:
    """Samples of a solution u and u' on an increasing grid.

    ``quad_pieces[k]`` optionally holds the integral of an auxiliary
    integrand over [grid[k], grid[k+1]], accumulated by the stepper.
    """
    grid: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    second: np.ndarray | None = None
    quad_pieces: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if len(self.grid) != len(self.value) or len(self.grid) != len(self.derivative):
            raise ValueError("grid, value and derivative must have the same length")
        if len(self.grid) > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __len__(self):
        return len(self.grid)

    def __call__(self, v):
        """Cubic Hermite interpolation of (u, u') at v."""
        v = np.asarray(v, dtype=float)
        g = self.grid
        k = np.clip(np.searchsorted(g, v, side="right") - 1, 0, len(g) - 2)
        h = g[k + 1] - g[k]
        t = (v - g[k]) / h
        u0, u1 = self.value[k], self.value[k + 1]
        d0, d1 = self.derivative[k], self.derivative[k + 1]
        val = _hermite(t, h, u0, u1, d0, d1)
        if self.second is None:
            der = (u1 - u0) / h
        else:
            der = _hermite(t, h, d0, d1, self.second[k], self.second[k + 1])
        return val, der

    def cumulative_left(self):
        """Running integral of the auxiliary integrand from grid[0]."""
        return np.concatenate(([0.0], np.cumsum(self.quad_pieces)))

    def cumulative_right(self):
        """Running integral of the auxiliary integrand up to grid[-1]."""
        return np.concatenate((np.cumsum(self.quad_pieces[::-1])[::-1], [0.0]))

    def restrict(self, points) -> "SolutionCurve":
        """Keep only the nodes at ``points`` (which must be nodes), merging quadrature pieces."""
        points = np.asarray(points, dtype=float)
        idx = np.searchsorted(self.grid, points)
        idx = np.clip(idx, 0, len(self.grid) - 1)
        if not np.allclose(self.grid[idx], points, rtol=0, atol=1e-12 * (1 + np.abs(points).max())):
            raise ValueError("restrict() needs points that are nodes of the curve")
        pieces = None
        if self.quad_pieces is not None:
            pieces = np.add.reduceat(self.quad_pieces[:idx[-1]], idx[:-1])
        second = None if self.second is None else self.second[idx]
        return SolutionCurve(self.grid[idx], self.value[idx], self.derivative[idx], second,
                             pieces, dict(self.meta))


def _hermite(t, h, u0, u1, d0, d1):
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * u0 + (t3 - 2 * t2 + t) * h * d0
            + (-2 * t3 + 3 * t2) * u1 + (t3 - t2) * h * d1)


def integrate(q: Callable[[float], complex], v_from: float, v_to: float, y0: complex,
              dy0: complex, tol: float = 1e-11, *, eval_points=None,
              quad: Callable[[float, complex, complex], complex] | None = None,
              max_step: float = math.inf, first_step: float | None = None) -> SolutionCurve:
    """Integrate u'' = q(v) u from v_from to v_to with u(v_from)=y0, u'(v_from)=dy0.

    Every point of ``eval_points`` is hit exactly by a step boundary. When
    ``quad`` is given, its integral along the path is accumulated per step with
    the same stage values.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    span = v_to - v_from
    direction = 1.0 if span >= 0 else -1.0
    if eval_points is None:
        stops = []
    else:
        stops = sorted({float(p) for p in np.atleast_1d(eval_points)
                        if direction * (p - v_from) > 0 and direction * (v_to - p) >= 0},
                       key=lambda p: direction * p)
    if not stops or stops[-1] != v_to:
        stops.append(float(v_to))

    v = float(v_from)
    y1, y2 = complex(y0), complex(dy0)
    qv = complex(q(v))
    k1a, k1b = y2, qv * y1
    grid, vals, ders, secs, pieces = [v], [y1], [y2], [qv * y1], []
    g1 = quad(v, y1, y2) if quad else 0j

    if first_step is None:
        d0 = abs(y1) + abs(y2)
        d1 = abs(k1a) + abs(k1b)
        h = 0.01 * d0 / d1 if d1 > 0 else 1e-3
        h = min(max(h, 1e-8), 0.1, abs(span) if span else 1.0)
    else:
        h = first_step
    h = min(h, max_step)
    steps = rejected = 0
    err_prev = 1e-4
    max_err = 0.0
    stop_i = 0
    while stop_i < len(stops):
        target = stops[stop_i]
        remaining = direction * (target - v)
        if remaining <= 0:
            stop_i += 1
            continue
        clipped = h >= remaining
        hs = direction * (remaining if clipped else h)
        if abs(hs) < 1e-13 * max(1.0, abs(v)):
            raise NumericalError(f"step size underflow at v={v:.6g}")
        # stages
        t2 = v + _C2 * hs
        a2 = y1 + hs * _A21 * k1a
        b2 = y2 + hs * _A21 * k1b
        k2a, k2b = b2, q(t2) * a2
        t3 = v + _C3 * hs
        a3 = y1 + hs * (_A31 * k1a + _A32 * k2a)
        b3 = y2 + hs * (_A31 * k1b + _A32 * k2b)
        k3a, k3b = b3, q(t3) * a3
        t4 = v + _C4 * hs
        a4 = y1 + hs * (_A41 * k1a + _A42 * k2a + _A43 * k3a)
        b4 = y2 + hs * (_A41 * k1b + _A42 * k2b + _A43 * k3b)
        k4a, k4b = b4, q(t4) * a4
        t5 = v + _C5 * hs
        a5 = y1 + hs * (_A51 * k1a + _A52 * k2a + _A53 * k3a + _A54 * k4a)
        b5 = y2 + hs * (_A51 * k1b + _A52 * k2b + _A53 * k3b + _A54 * k4b)
        k5a, k5b = b5, q(t5) * a5
        t6 = v + hs
        a6 = y1 + hs * (_A61 * k1a + _A62 * k2a + _A63 * k3a + _A64 * k4a + _A65 * k5a)
        b6 = y2 + hs * (_A61 * k1b + _A62 * k2b + _A63 * k3b + _A64 * k4b + _A65 * k5b)
        k6a, k6b = b6, q(t6) * a6
        n1 = y1 + hs * (_B1 * k1a + _B3 * k3a + _B4 * k4a + _B5 * k5a + _B6 * k6a)
        n2 = y2 + hs * (_B1 * k1b + _B3 * k3b + _B4 * k4b + _B5 * k5b + _B6 * k6b)
        q7 = q(t6)
        k7a, k7b = n2, q7 * n1
        e1 = hs * (_E1 * k1a + _E3 * k3a + _E4 * k4a + _E5 * k5a + _E6 * k6a + _E7 * k7a)
        e2 = hs * (_E1 * k1b + _E3 * k3b + _E4 * k4b + _E5 * k5b + _E6 * k6b + _E7 * k7b)
        s1 = tol * max(abs(y1), abs(n1), abs(hs * y2))
        s2 = tol * max(abs(y2), abs(n2), abs(hs * k1b))
        err = max(abs(e1) / s1 if s1 > 0 else 0.0, abs(e2) / s2 if s2 > 0 else 0.0)
        if err <= 1.0:
            if quad is not None:
                g3 = quad(t3, a3, b3)
                g4 = quad(t4, a4, b4)
                g5 = quad(t5, a5, b5)
                g6 = quad(t6, a6, b6)
                pieces.append(hs * (_B1 * g1 + _B3 * g3 + _B4 * g4 + _B5 * g5 + _B6 * g6))
                g1 = quad(t6, n1, n2)
            v = t6 if not clipped else target
            y1, y2 = n1, n2
            k1a, k1b = k7a, k7b
            grid.append(v)
            vals.append(y1)
            ders.append(y2)
            secs.append(k7b)
            steps += 1
            max_err = max(max_err, err)
            fac = 0.9 * max(err, 1e-10) ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            fac = min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            if not clipped:
                h = min(abs(hs) * fac, max_step)
            else:
                h = min(max(h, abs(hs) * fac), max_step)
                stop_i += 1
        else:
            rejected += 1
            h = abs(hs) * max(0.2, 0.9 * err ** (-0.2))
        if steps + rejected > 2_000_000:
            raise NumericalError(f"too many steps near v={v:.6g}")

    grid = np.array(grid)
    vals = np.array(vals, dtype=complex)
    ders = np.array(ders, dtype=complex)
    secs = np.array(secs, dtype=complex)
    pc = np.array(pieces, dtype=complex) if quad is not None else None
    if direction < 0:
        grid, vals, ders, secs = grid[::-1], vals[::-1], ders[::-1], secs[::-1]
        if pc is not None:
            pc = -pc[::-1]
    meta = {"steps": steps, "rejected": rejected, "max_local_error": max_err * tol,
            "tol": tol, "direction": int(direction)}
    return SolutionCurve(grid, vals, ders, secs, pc, meta)


def join_curves(left: SolutionCurve, right: SolutionCurve) -> SolutionCurve:
    """Concatenate two curves sharing their junction node."""
    if abs(left.grid[-1] - right.grid[0]) > 1e-12 * (1 + abs(right.grid[0])):
        raise ValueError("curves do not share a junction node")
    pieces = None
    if left.quad_pieces is not None and right.quad_pieces is not None:
        pieces = np.concatenate((left.quad_pieces, right.quad_pieces))
    second = None
    if left.second is not None and right.second is not None:
        second = np.concatenate((left.second, right.second[1:]))
    meta = {"steps": left.meta.get("steps", 0) + right.meta.get("steps", 0),
            "rejected": left.meta.get("rejected", 0) + right.meta.get("rejected", 0),
            "max_local_error": max(left.meta.get("max_local_error", 0),
                                   right.meta.get("max_local_error", 0))}
    return SolutionCurve(np.concatenate((left.grid, right.grid[1:])),
                         np.concatenate((left.value, right.value[1:])),
                         np.concatenate((left.derivative, right.derivative[1:])),
                         second, pieces, meta)


@dataclass(frozen=True)
class FrobeniusSeed:
    """Truncated series sum_k b_k s^(rho+k) for -u'' + (g(g+1)/s^2 + i s - lam) u = 0."""
    rho: float
    gamma: float
    lam: complex
    coeffs: np.ndarray
    s_start: float
    value: complex
    derivative: complex
    recurrence_residual: float
    truncation: float

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        k = np.arange(len(self.coeffs))
        powers = s[..., None] ** (self.rho + k)
        val = (self.coeffs * powers).sum(-1)
        der = (self.coeffs * (self.rho + k) * powers).sum(-1) / s
        return val, der


def frobenius_seed(rho: float, gamma: float, lam: complex = 0.0, s_start: float = 1e-2,
                   K: int = 24) -> FrobeniusSeed:
    if abs(rho * (rho - 1) - gamma * (gamma + 1)) > 1e-12 * (1 + gamma * gamma):
        raise ValueError(f"rho={rho} is not an indicial root for gamma={gamma}")
    b = np.zeros(K + 1, dtype=complex)
    b[0] = 1.0
    resid = 0.0
    for k in range(1, K + 1):
        rhs = (1j * b[k - 3] if k >= 3 else 0.0) - (lam * b[k - 2] if k >= 2 else 0.0)
        br = (rho + k) * (rho + k - 1) - gamma * (gamma + 1)
        if abs(br) < 1e-12:
            if abs(rhs) > 1e-14:
                raise ResonanceError(
                    f"resonant Frobenius recurrence at order k={k} (gamma={gamma}); "
                    "gamma=1 (beta=2) is the excluded logarithmic case")
            b[k] = 0.0
            continue
        b[k] = rhs / br
        resid = max(resid, abs(b[k] * br - rhs))
    k = np.arange(K + 1)
    terms = b * s_start ** k
    value = complex((terms * s_start ** rho).sum())
    derivative = complex((terms * (rho + k) * s_start ** (rho - 1)).sum())
    trunc = float(abs(terms[-1]) + abs(terms[-2]) + abs(terms[-3]))
    return FrobeniusSeed(rho, gamma, complex(lam), b, s_start, value, derivative, resid, trunc)


def wronskian(a: SolutionCurve, b: SolutionCurve) -> np.ndarray:
    if len(a.grid) != len(b.grid) or np.any(a.grid != b.grid):
        raise ValueError("curves must share a grid")
    return a.value * b.derivative - a.derivative * b.value


def wronskian_drift(a: SolutionCurve, b: SolutionCurve) -> float:
    """max |W - W_mid| / |W_mid|; absolute when W_mid vanishes."""
    w = wronskian(a, b)
    mid = w[len(w) // 2]
    scale = max(abs(a.value[len(w) // 2] * b.derivative[len(w) // 2]),
                abs(a.derivative[len(w) // 2] * b.value[len(w) // 2]))
    dev = np.abs(w - mid).max()
    if abs(mid) <= 1e-12 * scale or mid == 0:
        return float(dev)
    return float(dev / abs(mid))
