"""Admissible subquadratic potentials V(t, x) with exact derivatives.

A potential is subquadratic when every spatial derivative of order >= 2 is
uniformly bounded; the builtins below all satisfy that, and soft_branch
additionally has a decaying third derivative, which verify_subquadratic
estimates empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Potential", "SubquadraticReport", "builtin", "verify_subquadratic", "m2_bound"]


@dataclass(frozen=True)
class Potential:
    """Evaluable V(t, x) with first and second x-derivatives.

    v, dv, d2v accept a scalar time and scalar-or-array positions and
    broadcast over x.  Instances are immutable and evaluation is pure.
    """

    label: str
    v: Callable
    dv: Callable
    d2v: Callable
    time_dependent: bool = False
    params: tuple = ()
    declared_seminorms: tuple = ()  # ((k, M_k), ...)

    def seminorm(self, k: int):
        for kk, mk in self.declared_seminorms:
            if kk == k:
                return mk
        return None


def _check_finite(params: dict) -> None:
    for name, val in params.items():
        if not math.isfinite(val):
            raise ValueError(f"non-finite parameter {name}={val}")


def builtin(label: str, **params) -> Potential:
    """Construct a builtin potential by label.

    Labels: zero | linear(E) | harmonic(omega) | soft_branch | breathing(omega0, a).
    """
    _check_finite(params)
    if label == "zero":
        zero = lambda t, x: np.zeros_like(np.asarray(x, dtype=float))
        return Potential("zero", zero, zero, zero,
                         declared_seminorms=((2, 0.0), (3, 0.0)))
    if label == "linear":
        e_field = float(params.pop("E", params.pop("e", 1.0)) if params else 1.0)
        return Potential(
            "linear",
            lambda t, x: e_field * np.asarray(x, dtype=float),
            lambda t, x: np.full_like(np.asarray(x, dtype=float), e_field),
            lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
            params=(("E", e_field),),
            declared_seminorms=((2, 0.0), (3, 0.0)),
        )
    if label == "harmonic":
        omega = float(params.pop("omega", 1.0))
        w2 = omega * omega
        return Potential(
            "harmonic",
            lambda t, x: 0.5 * w2 * np.asarray(x, dtype=float) ** 2,
            lambda t, x: w2 * np.asarray(x, dtype=float),
            lambda t, x: np.full_like(np.asarray(x, dtype=float), w2),
            params=(("omega", omega),),
            declared_seminorms=((2, w2), (3, 0.0)),
        )
    if label == "soft_branch":
        # V = sqrt(1 + x^2): d2V = (1+x^2)^(-3/2) peaks at 1, d3V ~ <x>^-4.
        return Potential(
            "soft_branch",
            lambda t, x: np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2),
            lambda t, x: np.asarray(x, dtype=float) / np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2),
            lambda t, x: (1.0 + np.asarray(x, dtype=float) ** 2) ** -1.5,
            declared_seminorms=((2, 1.0), (3, 3.0 * 0.5 * 1.25**-2.5)),
        )
    if label == "breathing":
        omega0 = float(params.pop("omega0", 1.0))
        a = float(params.pop("a", 0.25))
        if not 0.0 <= a <= 0.5:
            raise ValueError(f"breathing amplitude must lie in [0, 0.5], got {a}")

        def w2(t):
            w = omega0 * (1.0 + a * math.sin(t))
            return w * w

        return Potential(
            "breathing",
            lambda t, x: 0.5 * w2(t) * np.asarray(x, dtype=float) ** 2,
            lambda t, x: w2(t) * np.asarray(x, dtype=float),
            lambda t, x: np.full_like(np.asarray(x, dtype=float), w2(t)),
            time_dependent=True,
            params=(("omega0", omega0), ("a", a)),
            declared_seminorms=((2, omega0**2 * (1.0 + a) ** 2), (3, 0.0)),
        )
    raise ValueError(f"unknown potential label {label!r}")


BUILTIN_LABELS = ("zero", "linear", "harmonic", "soft_branch", "breathing")


@dataclass(frozen=True)
class SubquadraticReport:
    seminorms: tuple           # ((k, estimated sup |d^k V|), ...)
    sup_v_near_origin: float   # sup |V| over |x| <= 1
    decay_epsilon: float       # best eps >= 0 with |d3 V| <~ <x>^(-1-eps); inf if d3 V ~ 0
    fit_points: tuple          # (log<x>, log|d3 V|) samples behind the epsilon fit


def _fd_derivative(p: Potential, k: int, t: float, x: np.ndarray) -> np.ndarray:
    """Order-k central finite difference of V in x, step 1e-2 * max(1,|x|)^(1/2)."""
    h = 1e-2 * np.maximum(1.0, np.abs(x)) ** 0.5
    if np.any(h**k < 1e-280):
        raise ValueError(f"step size underflow for derivative order {k}")
    acc = np.zeros_like(x, dtype=float)
    for j in range(k + 1):
        coeff = (-1.0) ** j * math.comb(k, j)
        acc += coeff * p.v(t, x + (k / 2.0 - j) * h)
    return acc / h**k


def verify_subquadratic(p: Potential, box, t_range, k_max: int,
                        n_x: int = 201, n_t: int = 5) -> SubquadraticReport:
    """Estimate sup |d^k V| for 2 <= k <= k_max on box x t_range, plus decay of d3 V.

    The third-derivative decay report fits log |d3 V| against log <x> on the
    outer part of the box; a fitted power <x>^(-1-eps) is returned as eps >= 0
    (0: no decay detected; inf: third derivative vanishes identically).
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    x_lo, x_hi = box
    if not (math.isfinite(x_lo) and math.isfinite(x_hi) and x_lo < x_hi):
        raise ValueError("box must be finite")
    xs = np.linspace(x_lo, x_hi, n_x)
    ts = np.linspace(t_range[0], t_range[1], n_t) if p.time_dependent else [t_range[0]]

    seminorms = []
    for k in range(2, k_max + 1):
        mk = max(float(np.abs(_fd_derivative(p, k, t, xs)).max()) for t in ts)
        seminorms.append((k, mk))
    xs_unit = np.linspace(-1.0, 1.0, 41)
    sup_v = max(float(np.abs(p.v(t, xs_unit)).max()) for t in ts)

    # Decay of d3 V, fitted where |x| is large enough for the tail to show.
    x_tail = xs[np.abs(xs) >= min(5.0, 0.5 * max(abs(x_lo), abs(x_hi)))]
    if len(x_tail) < 4:
        x_tail = xs
    d3 = np.abs(_fd_derivative(p, 3, ts[0], x_tail))
    for t in ts[1:]:
        d3 = np.maximum(d3, np.abs(_fd_derivative(p, 3, t, x_tail)))
    bracket = np.sqrt(1.0 + x_tail**2)
    if d3.max() < 1e-9:
        return SubquadraticReport(tuple(seminorms), sup_v, math.inf, ())
    good = d3 > 1e-12
    logx, logd = np.log(bracket[good]), np.log(d3[good])
    slope = np.polyfit(logx, logd, 1)[0] if len(logx) >= 2 else 0.0
    eps = max(0.0, -float(slope) - 1.0)
    return SubquadraticReport(tuple(seminorms), sup_v, eps,
                              tuple(zip(logx.tolist(), logd.tolist())))


def m2_bound(p: Potential) -> float:
    """sup |d2 V|: the declared value when available, else a finite-difference estimate."""
    declared = p.seminorm(2)
    if declared is not None:
        return declared
    report = verify_subquadratic(p, (-20.0, 20.0), (-1.0, 1.0), 2)
    return report.seminorms[0][1]
