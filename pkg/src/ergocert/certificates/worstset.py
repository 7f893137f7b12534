"""Exact search for worst sets and constrained worst sets.

Two problems recur in every almost-invariance bound:

* unconstrained: maximize row(A) - phi(base(A)) over all subsets A;
* mass-capped: maximize row(A) subject to base(A) <= eps.

For concave phi the unconstrained problem is solved exactly by scanning
prefixes of atoms sorted by the ratio row/base, zero-base atoms first.
Sketch: if A is optimal and a in A, b not in A, single-swap optimality
plus decreasing slopes of phi force ratio(b) <= ratio(a); within a tie
group the gain is convex in the included mass, so an endpoint (none or
all of the group) does as well as any subset. Some prefix therefore
attains the optimum. A brute-force subset scan cross-checks the claim
on small supports.

The capped problem is a 0/1 knapsack with real weights, solved exactly
by depth-first branch and bound under a greedy fractional bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Measure

__all__ = [
    "signed_excess",
    "WorstSet",
    "worst_set_search",
    "KnapsackResult",
    "knapsack_best",
    "fractional_knapsack",
]

_REL_TOL = 1e-9


def _as_weights(m, n=None):
    if isinstance(m, Measure):
        return m.weights
    w = np.asarray(m, dtype=float).reshape(-1)
    return w


def signed_excess(row, base, c: float) -> float:
    """sum over atoms of (row(a) - c * base(a))+ .

    Equals the worst-set value for the linear modulus phi(t) = c*t, and
    the sup over functions f in the unit ball of row(f) - c*base(f).
    """
    r = _as_weights(row)
    b = _as_weights(base)
    if r.shape != b.shape:
        raise ValueError("row and base must have equal length")
    d = r - float(c) * b
    return float(d[d > 0].sum())


@dataclass(frozen=True)
class WorstSet:
    """Outcome of an unconstrained worst-set search."""

    value: float
    members: tuple
    prefix_value: float
    dp_value: float | None  # None when the brute-force scan was skipped

    @property
    def cross_checked(self) -> bool:
        return self.dp_value is not None


def _brute_force_worst(r, b, phi, idx):
    """Enumerate all subsets of idx; returns (value, member_tuple)."""
    k = len(idx)
    rsums = np.zeros(1)
    bsums = np.zeros(1)
    for i in idx:
        rsums = np.concatenate([rsums, rsums + r[i]])
        bsums = np.concatenate([bsums, bsums + b[i]])
    vals = rsums - phi(bsums)
    best = int(np.argmax(vals))
    members = tuple(idx[j] for j in range(k) if best >> j & 1)
    return float(vals[best]), members


def worst_set_search(row, base, phi, dp_limit: int = 22) -> WorstSet:
    """Maximize row(A) - phi(base(A)) over subsets A of the atoms.

    phi must be one of the concave modulus families. The empty set scores
    phi(0) = 0, so the value is never negative. When the number of atoms
    with positive row mass is at most dp_limit, a full subset enumeration
    runs as well and the two answers are required to agree.
    """
    r = _as_weights(row)
    b = _as_weights(base)
    if r.shape != b.shape:
        raise ValueError("row and base must have equal length")
    if (r < 0).any() or (b < 0).any():
        raise ValueError("row and base must be nonnegative")

    cand = np.flatnonzero(r > 0.0)  # atoms with zero row mass never help
    free = cand[b[cand] <= 0.0]     # cost nothing, always worth taking
    paid = cand[b[cand] > 0.0]

    free_value = float(r[free].sum())
    best_value = free_value - float(phi(0.0))
    best_members = tuple(int(i) for i in free)

    if paid.size:
        order = paid[np.argsort(-(r[paid] / b[paid]), kind="stable")]
        csum_r = free_value + np.cumsum(r[order])
        csum_b = np.cumsum(b[order])
        vals = csum_r - phi(csum_b)
        k = int(np.argmax(vals))
        if vals[k] > best_value:
            best_value = float(vals[k])
            best_members = tuple(sorted(int(i) for i in
                                        np.concatenate([free, order[:k + 1]])))
    prefix_value = best_value

    dp_value = None
    if len(paid) <= dp_limit:
        scale = max(1.0, abs(prefix_value))
        dp_value, dp_members = _brute_force_worst(r, b, phi, list(paid))
        dp_value += free_value
        dp_members = tuple(sorted(set(dp_members) | {int(i) for i in free}))
        if dp_value > prefix_value + _REL_TOL * scale:
            raise AssertionError(
                f"prefix search missed the optimum: prefix {prefix_value!r} "
                f"vs enumeration {dp_value!r}; modulus not concave?")
        if prefix_value > dp_value + _REL_TOL * scale:
            raise AssertionError("prefix value exceeds exhaustive maximum")

    return WorstSet(value=best_value, members=best_members,
                    prefix_value=prefix_value, dp_value=dp_value)


@dataclass(frozen=True)
class KnapsackResult:
    value: float
    members: tuple
    exact: bool


def fractional_knapsack(values, weights, capacity: float) -> float:
    """Greedy relaxation: items divisible, always an upper bound."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = float(v[(v > 0) & (w <= 0)].sum())
    cand = np.flatnonzero((v > 0) & (w > 0))
    if cand.size == 0:
        return total
    order = cand[np.argsort(-(v[cand] / w[cand]), kind="stable")]
    room = float(capacity)
    for i in order:
        if room <= 0:
            break
        take = min(1.0, room / w[i])
        total += take * v[i]
        room -= take * w[i]
    return total


def knapsack_best(values, weights, capacity: float,
                  node_cap: int = 2_000_000) -> KnapsackResult:
    """Exact 0/1 knapsack with nonnegative real values and weights.

    Depth-first branch and bound, items in decreasing value/weight order,
    pruned with the greedy fractional bound. exact=False signals the node
    budget ran out, in which case value is the best solution found (a
    lower bound).
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape:
        raise ValueError("values and weights must have equal length")
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    slack = 1e-12 * max(1.0, capacity)

    idx = np.arange(len(v))
    free = idx[(v > 0) & (w <= 0)]
    base_value = float(v[free].sum())
    cand = idx[(v > 0) & (w > 0) & (w <= capacity + slack)]
    if cand.size == 0:
        return KnapsackResult(base_value, tuple(int(i) for i in free), True)

    order = cand[np.argsort(-(v[cand] / w[cand]), kind="stable")]
    vs = v[order]
    ws = w[order]
    n = len(order)

    best = base_value
    best_set: list = []
    chosen: list = []
    nodes = 0
    truncated = False

    def bound(i: int, room: float) -> float:
        total = 0.0
        while i < n and room > 0:
            if ws[i] <= room:
                total += vs[i]
                room -= ws[i]
            else:
                total += vs[i] * (room / ws[i])
                break
            i += 1
        return total

    def dfs(i: int, cur: float, room: float):
        nonlocal best, best_set, nodes, truncated
        if truncated:
            return
        nodes += 1
        if nodes > node_cap:
            truncated = True
            return
        if cur > best:
            best = cur
            best_set = chosen.copy()
        if i >= n or cur + bound(i, room) <= best * (1 + 1e-15) + 1e-15:
            return
        if ws[i] <= room + slack:
            chosen.append(order[i])
            dfs(i + 1, cur + vs[i], room - ws[i])
            chosen.pop()
        dfs(i + 1, cur, room)

    import sys
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, n * 2 + 100))
    try:
        dfs(0, base_value, float(capacity))
    finally:
        sys.setrecursionlimit(old_limit)

    members = tuple(sorted(int(i) for i in (set(best_set) | set(free))))
    return KnapsackResult(float(best), members, not truncated)
