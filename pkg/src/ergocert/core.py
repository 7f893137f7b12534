"""Finite state spaces, weighted measures, state functions, and kernel algebra.

Everything is dense float64 and immutable after construction. Row-major
kernels: ``rows[x, a]`` is the mass moved from state x to state a in one
step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ROWSUM_TOL",
    "SpaceMismatchError",
    "AbsoluteContinuityError",
    "StateSpace",
    "Measure",
    "StateFn",
    "StateSet",
    "Kernel",
    "identity",
    "matmul",
    "apply",
    "push",
    "power",
    "cesaro",
    "adjoint",
]

ROWSUM_TOL = 1e-12


class SpaceMismatchError(ValueError):
    """Operands are indexed by different state spaces."""


class AbsoluteContinuityError(ValueError):
    """Mass flows out of the support of the reference measure."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateSpace:
    """Ordered finite collection of state labels."""

    labels: tuple[str, ...]

    def __init__(self, labels: Iterable):
        object.__setattr__(self, "labels", tuple(str(x) for x in labels))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("state labels must be distinct")
        if not self.labels:
            raise ValueError("state space must be nonempty")

    @classmethod
    def range(cls, n: int, prefix: str = "s") -> "StateSpace":
        return cls(f"{prefix}{i}" for i in range(n))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(str(label))

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"StateSpace({self.size} states)"


def _check_same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError(
            f"operands on different spaces: {a.space!r} vs {b.space!r}"
        )


@dataclass(frozen=True)
class Measure:
    """Nonnegative weight vector over a state space (not necessarily normalized)."""

    space: StateSpace
    weights: np.ndarray

    def __init__(self, space: StateSpace, weights):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != (space.size,):
            raise ValueError(f"expected {space.size} weights, got {w.shape}")
        if np.isnan(w).any() or np.isinf(w).any():
            raise ValueError("measure weights must be finite")
        if (w < -ROWSUM_TOL).any():
            raise ValueError("measure weights must be nonnegative")
        w = np.where(w < 0.0, 0.0, w)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "weights", _frozen_array(w))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> np.ndarray:
        """Indices of atoms with strictly positive weight."""
        return np.flatnonzero(self.weights > 0.0)

    def of(self, where) -> float:
        """Mass of a StateSet, boolean mask, or index array."""
        if isinstance(where, StateSet):
            _check_same_space(self, where)
            where = where.mask
        where = np.asarray(where)
        if where.dtype == bool:
            return float(self.weights[where].sum())
        return float(self.weights[where].sum())

    def expect(self, f: "StateFn") -> float:
        """Integral of f against this measure; 0 * inf is treated as 0."""
        _check_same_space(self, f)
        v = f.values
        if f.extended and np.isinf(v).any():
            inf_hit = np.isinf(v) & (self.weights > 0.0)
            if inf_hit.any():
                return float("inf")
            v = np.where(np.isinf(v), 0.0, v)
        return float(self.weights @ v)

    def normalized(self) -> "Measure":
        m = self.mass
        if m <= 0.0:
            raise ValueError("cannot normalize the zero measure")
        return Measure(self.space, self.weights / m)

    def __repr__(self) -> str:
        return f"Measure(mass={self.mass:.6g}, support={len(self.support)}/{self.space.size})"


@dataclass(frozen=True)
class StateFn:
    """Real-valued function on a state space.

    Values must be finite unless ``extended`` is set, which admits +inf
    (drift functions on truncations). NaN is never allowed.
    """

    space: StateSpace
    values: np.ndarray
    extended: bool = False

    def __init__(self, space: StateSpace, values, extended: bool = False):
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.shape != (space.size,):
            raise ValueError(f"expected {space.size} values, got {v.shape}")
        if np.isnan(v).any():
            raise ValueError("state function values must not be NaN")
        if not extended and np.isinf(v).any():
            raise ValueError("non-finite values require extended=True")
        if extended and (v == -np.inf).any():
            raise ValueError("only +inf is admitted for extended functions")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "values", _frozen_array(v))
        object.__setattr__(self, "extended", bool(extended))

    @classmethod
    def constant(cls, space: StateSpace, value: float) -> "StateFn":
        return cls(space, np.full(space.size, float(value)))

    @classmethod
    def one(cls, space: StateSpace) -> "StateFn":
        return cls.constant(space, 1.0)

    def in_unit_interval(self, tol: float = 0.0) -> bool:
        v = self.values
        return bool((v >= -tol).all() and (v <= 1.0 + tol).all())

    def __repr__(self) -> str:
        lo, hi = float(self.values.min()), float(self.values.max())
        return f"StateFn(range=[{lo:.6g}, {hi:.6g}])"


@dataclass(frozen=True)
class StateSet:
    """Subset of a state space, kept as sorted indices."""

    space: StateSpace
    members: tuple[int, ...]

    def __init__(self, space: StateSpace, members: Iterable[int]):
        idx = sorted({int(i) for i in members})
        if idx and (idx[0] < 0 or idx[-1] >= space.size):
            raise ValueError("set member out of range")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "members", tuple(idx))

    @classmethod
    def from_mask(cls, space: StateSpace, mask) -> "StateSet":
        return cls(space, np.flatnonzero(np.asarray(mask, dtype=bool)))

    @classmethod
    def from_labels(cls, space: StateSpace, labels) -> "StateSet":
        return cls(space, (space.index(l) for l in labels))

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.space.size, dtype=bool)
        if self.members:
            m[list(self.members)] = True
        m.setflags(write=False)
        return m

    @property
    def size(self) -> int:
        return len(self.members)

    def indicator(self) -> StateFn:
        return StateFn(self.space, self.mask.astype(float))

    def complement(self) -> "StateSet":
        return StateSet.from_mask(self.space, ~self.mask)

    def __contains__(self, i: int) -> bool:
        return int(i) in self.members

    def __repr__(self) -> str:
        return f"StateSet({self.size}/{self.space.size})"


_KINDS = ("markovian", "sub-markovian", "general")


@dataclass(frozen=True)
class Kernel:
    """Dense transition kernel.

    kind:
        "markovian"      row sums equal 1 within ROWSUM_TOL
        "sub-markovian"  row sums at most 1 + ROWSUM_TOL
        "general"        nonnegative rows, sums unconstrained (adjoints)

    on_rowsum: "reject" raises when a markovian row sum misses 1 beyond
    tolerance; "renormalize" rescales offending rows instead.
    """

    space: StateSpace
    rows: np.ndarray
    kind: str = "markovian"

    def __init__(self, space: StateSpace, rows, kind: str = "markovian",
                 on_rowsum: str = "reject"):
        if kind not in _KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if on_rowsum not in ("reject", "renormalize"):
            raise ValueError("on_rowsum must be 'reject' or 'renormalize'")
        r = np.array(rows, dtype=float, order="C")
        n = space.size
        if r.shape != (n, n):
            raise ValueError(f"expected {(n, n)} matrix, got {r.shape}")
        if np.isnan(r).any() or np.isinf(r).any():
            raise ValueError("kernel entries must be finite")
        if (r < -ROWSUM_TOL).any():
            i, j = np.unravel_index(np.argmin(r), r.shape)
            raise ValueError(f"negative entry {r[i, j]:.3e} at ({i}, {j})")
        r = np.where(r < 0.0, 0.0, r)
        sums = r.sum(axis=1)
        if kind == "markovian":
            bad = np.abs(sums - 1.0) > ROWSUM_TOL
            if bad.any():
                if on_rowsum == "renormalize":
                    if (sums[bad] <= 0.0).any():
                        raise ValueError("cannot renormalize a zero row")
                    r = r / sums[:, None]
                else:
                    i = int(np.argmax(np.abs(sums - 1.0)))
                    raise ValueError(
                        f"markovian row {i} sums to {sums[i]!r}, off by "
                        f"{sums[i] - 1.0:.3e} (tolerance {ROWSUM_TOL})")
        elif kind == "sub-markovian":
            bad = sums > 1.0 + ROWSUM_TOL
            if bad.any():
                if on_rowsum == "renormalize":
                    scale = np.where(sums > 1.0, sums, 1.0)
                    r = r / scale[:, None]
                else:
                    i = int(np.argmax(sums))
                    raise ValueError(
                        f"sub-markovian row {i} sums to {sums[i]!r} > 1")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "rows", _frozen_array(r))
        object.__setattr__(self, "kind", kind)

    @property
    def size(self) -> int:
        return self.space.size

    def row_measure(self, x: int) -> Measure:
        return Measure(self.space, self.rows[int(x)])

    def __repr__(self) -> str:
        return f"Kernel({self.kind}, {self.size} states)"


def identity(space: StateSpace) -> Kernel:
    return Kernel(space, np.eye(space.size), kind="markovian")


def _combined_kind(a: str, b: str) -> str:
    if "general" in (a, b):
        return "general"
    if "sub-markovian" in (a, b):
        return "sub-markovian"
    return "markovian"


def matmul(K: Kernel, L: Kernel) -> Kernel:
    """Composition: one step of K followed by one step of L."""
    _check_same_space(K, L)
    return Kernel(K.space, K.rows @ L.rows, kind=_combined_kind(K.kind, L.kind),
                  on_rowsum="renormalize" if _combined_kind(K.kind, L.kind) == "markovian" else "reject")


def apply(K: Kernel, f: StateFn) -> StateFn:
    """Act on a state function: (Kf)(x) = sum_a K(x,a) f(a).

    Extended functions follow the 0 * inf = 0 convention: a state picks up
    +inf exactly when the kernel puts positive mass on an infinite atom.
    """
    _check_same_space(K, f)
    v = f.values
    if f.extended and np.isinf(v).any():
        inf_mask = np.isinf(v)
        finite = np.where(inf_mask, 0.0, v)
        out = K.rows @ finite
        hits = K.rows[:, inf_mask].sum(axis=1) > 0.0
        out = np.where(hits, np.inf, out)
        return StateFn(K.space, out, extended=True)
    out = K.rows @ v
    if np.isnan(out).any():
        raise ValueError("kernel application produced NaN")
    return StateFn(K.space, out, extended=f.extended)


def push(m: Measure, K: Kernel) -> Measure:
    """Push a measure forward: (m K)(a) = sum_x m(x) K(x,a)."""
    _check_same_space(m, K)
    return Measure(K.space, m.weights @ K.rows)


def power(K: Kernel, n: int) -> Kernel:
    """n-step kernel by binary exponentiation. power(K, 0) is the identity."""
    n = int(n)
    if n < 0:
        raise ValueError("power requires n >= 0")
    if n == 0:
        return Kernel(K.space, np.eye(K.size), kind=K.kind,
                      on_rowsum="renormalize")
    result = None
    base = K.rows
    while n:
        if n & 1:
            result = base.copy() if result is None else result @ base
        n >>= 1
        if n:
            base = base @ base
    return Kernel(K.space, result, kind=K.kind, on_rowsum="renormalize")


def _cesaro_and_power(rows: np.ndarray, n: int):
    """Return (S_n, P^n) as raw matrices, S_n = (1/n) sum_{k<n} P^k.

    Uses the splitting S_{a+b} = (a S_a + b P^a S_b) / (a+b) so the cost is
    O(log n) matrix products, which keeps huge horizons affordable.
    """
    if n == 1:
        return np.eye(rows.shape[0]), rows.copy()
    half, odd = divmod(n, 2)
    s_half, p_half = _cesaro_and_power(rows, half)
    s = 0.5 * (s_half + p_half @ s_half)
    p = p_half @ p_half
    if odd:
        # S_{2h+1} = (2h S_{2h} + P^{2h}) / (2h + 1)
        s = (2 * half * s + p) / (2 * half + 1)
        p = p @ rows
    return s, p


def cesaro(K: Kernel, n: int) -> Kernel:
    """Cesaro average (1/n)(I + K + ... + K^{n-1})."""
    n = int(n)
    if n < 1:
        raise ValueError("cesaro requires n >= 1")
    s, _ = _cesaro_and_power(K.rows, n)
    return Kernel(K.space, s, kind=K.kind, on_rowsum="renormalize")


def adjoint(K: Kernel, m: Measure, strict: bool = True) -> Kernel:
    """Adjoint of K w.r.t. m: rows a with m(a) > 0 carry m(x) K(x,a) / m(a),
    rows off the support are zero.

    Satisfies the duality m(f * adjoint(K,m) g) = m(g * K f). With strict=True
    (the default) the kernel must respect m-null sets: any flow of m-mass into
    an m-null atom raises AbsoluteContinuityError naming the atom. strict=False
    skips the gate; the returned kernel then silently drops that flow, which
    is what the constructive solver wants.
    """
    _check_same_space(K, m)
    w = m.weights
    flow = w @ K.rows  # m after one step of K
    null = w <= 0.0
    if strict and null.any():
        leaked = np.where(null, flow, 0.0)
        if (leaked > 0.0).any():
            a = int(np.argmax(leaked))
            raise AbsoluteContinuityError(
                f"mass {leaked[a]:.6g} flows into m-null atom "
                f"{K.space.labels[a]!r}; the pair violates the support "
                f"condition")
    n = K.size
    out = np.zeros((n, n))
    supp = ~null
    # out[a, x] = m(x) K(x, a) / m(a) on the support
    out[supp, :] = (K.rows[:, supp] * w[:, None]).T / w[supp][:, None]
    return Kernel(K.space, out, kind="general")
