"""Concave modulus families used by almost-invariance bounds.

A modulus is a nondecreasing concave function phi on [0, mass] with
phi(0) = 0. Three families cover every certificate in the toolkit:
linear c*t, power coef*(mult*t)^(1/p), and a user table interpolated
piecewise-linearly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PhiLinear", "PhiPower", "PhiTable", "AlmostInvarianceParams"]


@dataclass(frozen=True)
class PhiLinear:
    """phi(t) = coef * t."""

    coef: float

    def __post_init__(self):
        if self.coef < 0:
            raise ValueError("linear modulus needs coef >= 0")

    def __call__(self, t):
        return self.coef * np.asarray(t, dtype=float)

    def inverse(self, y: float) -> float:
        if self.coef <= 0:
            raise ValueError("phi(t) = 0 has no inverse")
        return float(y) / self.coef

    def scale(self, k: float) -> "PhiLinear":
        return PhiLinear(self.coef * float(k))

    def describe(self) -> dict:
        return {"family": "linear", "coef": float(self.coef)}


@dataclass(frozen=True)
class PhiPower:
    """phi(t) = coef * (mult * t)^(1/p) with p > 1. Strictly concave."""

    coef: float
    mult: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if self.coef <= 0 or self.mult <= 0:
            raise ValueError("power modulus needs coef > 0 and mult > 0")
        if self.p <= 1:
            raise ValueError("power modulus needs p > 1")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.coef * (self.mult * t) ** (1.0 / self.p)

    def inverse(self, y: float) -> float:
        if y < 0:
            raise ValueError("modulus values are nonnegative")
        return (float(y) / self.coef) ** self.p / self.mult

    def scale(self, k: float) -> "PhiPower":
        return PhiPower(self.coef * float(k), self.mult, self.p)

    def describe(self) -> dict:
        return {"family": "power", "coef": float(self.coef),
                "mult": float(self.mult), "p": float(self.p)}


@dataclass(frozen=True)
class PhiTable:
    """Piecewise-linear modulus through (knots_t, knots_y).

    The table must start at (0, 0), be nondecreasing, and have
    nonincreasing slopes (concavity). Beyond the last knot the final
    slope is extended.
    """

    knots_t: tuple
    knots_y: tuple

    def __init__(self, knots_t, knots_y):
        t = np.asarray(knots_t, dtype=float)
        y = np.asarray(knots_y, dtype=float)
        if t.shape != y.shape or t.ndim != 1 or len(t) < 2:
            raise ValueError("need matching 1-d knot arrays of length >= 2")
        if t[0] != 0.0 or y[0] != 0.0:
            raise ValueError("modulus table must start at (0, 0)")
        dt = np.diff(t)
        if (dt <= 0).any():
            raise ValueError("knot abscissae must be strictly increasing")
        if (np.diff(y) < -1e-15).any():
            raise ValueError("modulus table must be nondecreasing")
        slopes = np.diff(y) / dt
        if (np.diff(slopes) > 1e-12 * max(1.0, abs(slopes[0]))).any():
            raise ValueError("modulus table is not concave (slopes increase)")
        object.__setattr__(self, "knots_t", tuple(float(v) for v in t))
        object.__setattr__(self, "knots_y", tuple(float(v) for v in y))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        kt = np.asarray(self.knots_t)
        ky = np.asarray(self.knots_y)
        out = np.interp(t, kt, ky)
        # extend the final slope past the last knot
        last_slope = (ky[-1] - ky[-2]) / (kt[-1] - kt[-2])
        beyond = t > kt[-1]
        if np.any(beyond):
            out = np.where(beyond, ky[-1] + last_slope * (t - kt[-1]), out)
        return out if out.ndim else float(out)

    def inverse(self, y: float) -> float:
        ky = np.asarray(self.knots_y)
        kt = np.asarray(self.knots_t)
        if y > ky[-1]:
            last_slope = (ky[-1] - ky[-2]) / (kt[-1] - kt[-2])
            if last_slope <= 0:
                raise ValueError(f"value {y} above the modulus range")
            return float(kt[-1] + (y - ky[-1]) / last_slope)
        if (np.diff(ky) <= 0).any():
            raise ValueError("flat table segment: inverse is not unique")
        return float(np.interp(y, ky, kt))

    def scale(self, k: float) -> "PhiTable":
        return PhiTable(self.knots_t, tuple(v * float(k) for v in self.knots_y))

    def describe(self) -> dict:
        return {"family": "table", "knots_t": list(self.knots_t),
                "knots_y": list(self.knots_y)}


@dataclass(frozen=True)
class AlmostInvarianceParams:
    """Target constants for an almost-invariance bound.

    phi is the modulus on set masses, delta the leakage fraction of total
    mass, horizon the largest step count inspected, n0 where mean averages
    start counting.
    """

    phi: object
    delta: float
    horizon: int = 256
    n0: int = 1

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.horizon < 1 or self.n0 < 1:
            raise ValueError("horizon and n0 must be at least 1")
