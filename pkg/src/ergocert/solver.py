"""Invariant measures: exact eigen solves and the constructive averaging route.

The two paths answer different questions. solve_eigen enumerates every
invariant probability (one per closed communicating class), regardless
of any reference measure. solve_cesaro_adjoint starts from a reference
measure m and produces the largest invariant measure absolutely
continuous w.r.t. m, which is legitimately the zero measure when no
mass survives inside supp(m).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import Kernel, Measure, StateFn, StateSet, adjoint, push
from .semigroup import Generator, resolvent

__all__ = [
    "InvariantResult",
    "ErgodicDecomposition",
    "decompose",
    "cesaro_projector",
    "averaging_projector",
    "solve_eigen",
    "solve_cesaro_adjoint",
    "solve_continuous",
    "verify_count_bound",
]

EIGEN_RESIDUAL_TOL = 1e-12
CESARO_TOL = 1e-10
MAX_DOUBLINGS = 40


@dataclass(frozen=True)
class InvariantResult:
    """An invariant (or sub-invariant limit) measure with provenance."""

    nu: Measure
    density: StateFn | None
    residual: float
    method: str
    iterations: int
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return self.nu.mass <= 1e-300


@dataclass(frozen=True)
class ErgodicDecomposition:
    """Closed classes, their invariant probabilities, and absorption weights."""

    space: object
    classes: tuple          # tuple[StateSet]
    class_measures: tuple   # tuple[Measure], probabilities
    transient: StateSet
    absorption: np.ndarray  # (n_states, n_classes), rows sum to 1

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def projector(self) -> np.ndarray:
        """Limit of the running averages S_n as a dense matrix."""
        n = self.space.size
        out = np.zeros((n, n))
        for j, mj in enumerate(self.class_measures):
            out += self.absorption[:, [j]] * mj.weights[None, :]
        return out


def _stationary_row(rows: np.ndarray) -> np.ndarray:
    """Stationary probability of an irreducible stochastic block."""
    n = rows.shape[0]
    if n == 1:
        return np.ones(1)
    M = rows.T - np.eye(n)
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    x = np.linalg.solve(M, rhs)
    for _ in range(3):
        r = M @ x - rhs
        if np.abs(r).max() <= 1e-16:
            break
        x = x - np.linalg.solve(M, r)
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _stationary_of_generator(rates: np.ndarray) -> np.ndarray:
    n = rates.shape[0]
    if n == 1:
        return np.ones(1)
    M = rates.T.copy()
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    x = np.linalg.solve(M, rhs)
    for _ in range(3):
        r = M @ x - rhs
        if np.abs(r).max() <= 1e-16:
            break
        x = x - np.linalg.solve(M, r)
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _closed_components(adjacency: np.ndarray):
    """Strongly connected components split into closed and open ones."""
    graph = csr_matrix(adjacency)
    n_comp, labels = connected_components(graph, directed=True,
                                          connection="strong")
    closed = []
    for c in range(n_comp):
        mask = labels == c
        if not adjacency[np.ix_(mask, ~mask)].any():
            closed.append(c)
    return labels, closed


def decompose(K: Kernel, verify: bool = True) -> ErgodicDecomposition:
    """Split a markovian kernel into closed classes plus transient states.

    Each closed class gets its invariant probability by a direct linear
    solve; transient states get absorption weights from the first-step
    linear system. With verify=True the projector identities Pi P = Pi,
    P Pi = Pi, Pi^2 = Pi are asserted, plus a sampled running-average
    iteration against the predicted limit row.
    """
    if K.kind != "markovian":
        raise ValueError("decomposition needs a markovian kernel")
    n = K.size
    labels, closed = _closed_components(K.rows > 0.0)
    if not closed:
        raise AssertionError("a finite markovian kernel always has a "
                             "closed class")
    classes = []
    class_measures = []
    class_mask = np.zeros(n, dtype=bool)
    for c in closed:
        idx = np.flatnonzero(labels == c)
        class_mask[idx] = True
        block = K.rows[np.ix_(idx, idx)]
        pi_local = _stationary_row(block)
        w = np.zeros(n)
        w[idx] = pi_local
        residual = np.abs(w @ K.rows - w).sum()
        if residual > EIGEN_RESIDUAL_TOL:
            raise ArithmeticError(
                f"stationary solve residual {residual:.3e} exceeds "
                f"{EIGEN_RESIDUAL_TOL}")
        classes.append(StateSet(K.space, idx))
        class_measures.append(Measure(K.space, w))

    k = len(classes)
    absorption = np.zeros((n, k))
    for j, cls in enumerate(classes):
        absorption[list(cls.members), j] = 1.0
    t_idx = np.flatnonzero(~class_mask)
    if t_idx.size:
        ptt = K.rows[np.ix_(t_idx, t_idx)]
        rhs = np.stack(
            [K.rows[np.ix_(t_idx, list(cls.members))].sum(axis=1)
             for cls in classes], axis=1)
        H = np.linalg.solve(np.eye(t_idx.size) - ptt, rhs)
        absorption[t_idx, :] = H

    decomp = ErgodicDecomposition(
        space=K.space,
        classes=tuple(classes),
        class_measures=tuple(class_measures),
        transient=StateSet(K.space, t_idx),
        absorption=absorption,
    )

    if verify:
        pi = decomp.projector()
        for name, left, right in (
            ("Pi P = Pi", pi @ K.rows, pi),
            ("P Pi = Pi", K.rows @ pi, pi),
            ("Pi Pi = Pi", pi @ pi, pi),
        ):
            err = np.abs(left - right).max()
            if err > 1e-10:
                raise ArithmeticError(f"projector identity {name} off by {err:.3e}")
        # sampled running-average check, extrapolated to kill the 1/n term;
        # tolerance adapts to how far the iteration itself has settled
        sample = [int(t_idx[0])] if t_idx.size else []
        sample.append(int(classes[0].members[0]))
        steps = 4096 if n <= 200 else 1024
        for x in sample:
            v = np.zeros(n)
            v[x] = 1.0
            acc = np.zeros(n)
            half = None
            cur = v.copy()
            for i in range(steps):
                acc += cur
                if i + 1 == steps // 2:
                    half = acc / (steps // 2)
                cur = cur @ K.rows
            avg = acc / steps
            extrapolated = 2.0 * avg - half
            settle = 0.5 * np.abs(avg - half).sum()
            tv = 0.5 * np.abs(extrapolated - pi[x]).sum()
            if tv > max(5e-3, 10.0 * settle):
                raise ArithmeticError(
                    f"running average from state {x} disagrees with the "
                    f"predicted limit (TV {tv:.3e})")
    return decomp


def cesaro_projector(K: Kernel, decomp: ErgodicDecomposition | None = None) -> np.ndarray:
    if decomp is None:
        decomp = decompose(K, verify=False)
    return decomp.projector()


def averaging_projector(K: Kernel) -> np.ndarray:
    """Limit of the running averages S_n, markovian or sub-markovian.

    For markovian kernels this is the decomposition projector. For
    sub-markovian kernels only the conservative closed classes (internal
    row sums exactly one) survive; mass that never reaches one dies off,
    so rows of the result may sum to less than one, possibly to zero.
    """
    if K.kind == "markovian":
        return cesaro_projector(K)
    if K.kind != "sub-markovian":
        raise ValueError("averaging limits need (sub-)markovian rows, "
                         f"got kind {K.kind!r}")
    n = K.size
    labels, closed = _closed_components(K.rows > 0.0)
    class_idx = []
    class_rows = []
    class_mask = np.zeros(n, dtype=bool)
    for c in closed:
        idx = np.flatnonzero(labels == c)
        block = K.rows[np.ix_(idx, idx)]
        if np.abs(block.sum(axis=1) - 1.0).max() <= 1e-12:
            class_mask[idx] = True
            w = np.zeros(n)
            w[idx] = _stationary_row(block)
            class_idx.append(idx)
            class_rows.append(w)
    out = np.zeros((n, n))
    if not class_idx:
        return out
    k = len(class_idx)
    absorb = np.zeros((n, k))
    for j, idx in enumerate(class_idx):
        absorb[idx, j] = 1.0
    t_idx = np.flatnonzero(~class_mask)
    if t_idx.size:
        # spectral radius of the leaky block is < 1, so this is regular
        ptt = K.rows[np.ix_(t_idx, t_idx)]
        rhs = np.stack([K.rows[np.ix_(t_idx, idx)].sum(axis=1)
                        for idx in class_idx], axis=1)
        absorb[t_idx, :] = np.linalg.solve(np.eye(t_idx.size) - ptt, rhs)
    for j, w in enumerate(class_rows):
        out += absorb[:, [j]] * w[None, :]
    return out


def solve_eigen(K: Kernel) -> tuple[InvariantResult, ...]:
    """One invariant probability per closed class, by direct solves."""
    decomp = decompose(K, verify=False)
    out = []
    for cls, nu in zip(decomp.classes, decomp.class_measures):
        residual = float(np.abs(nu.weights @ K.rows - nu.weights).sum())
        out.append(InvariantResult(
            nu=nu, density=None, residual=residual, method="eigen",
            iterations=0, converged=True,
            diagnostics={"class_members": list(cls.members)}))
    return tuple(out)


def solve_cesaro_adjoint(K: Kernel, m: Measure, tol: float = CESARO_TOL,
                         max_doublings: int = MAX_DOUBLINGS) -> InvariantResult:
    """Constructive invariant density via averaged adjoint iterates.

    Runs f_n = (1/n) sum_{k<n} (P*)^k 1 on doubling horizons n = 2^j,
    with Richardson extrapolation 2 f_{2n} - f_n to absorb the O(1/n)
    term. The limit rho is a sub-invariant density; nu = rho . m is
    invariant. Mass that the dynamics push out of supp(m) dies in the
    averages, so the zero measure is a legitimate outcome and is
    reported with its decay diagnostics rather than an error.
    """
    A = adjoint(K, m, strict=False).rows
    n = K.size
    mw = m.weights
    mass_total = m.mass
    if mass_total <= 0:
        raise ValueError("reference measure must have positive mass")

    def l1m(vec):
        return float(np.abs(vec) @ mw)

    f = np.ones(n)          # horizon 1
    pow_rows = A.copy()     # A^(2^j)
    prev_extr = None
    mode = "exhausted"
    deltas = []
    masses = [l1m(f)]
    j = 0
    for j in range(1, max_doublings + 1):
        f_next = 0.5 * (f + pow_rows @ f)
        delta = l1m(f_next - f) / mass_total
        deltas.append(delta)
        extr = 2.0 * f_next - f
        masses.append(l1m(f_next))
        if delta <= tol:
            f = f_next
            mode = "plain"
            break
        if prev_extr is not None:
            edelta = l1m(extr - prev_extr) / mass_total
            if edelta <= 0.1 * tol:
                f = np.clip(extr, 0.0, None)
                mode = "extrapolated"
                break
        prev_extr = extr
        f = f_next
        if j < max_doublings:
            pow_rows = pow_rows @ pow_rows

    converged = mode != "exhausted"
    rho = np.clip(f, 0.0, None)
    nu = Measure(K.space, rho * mw)
    residual = float(np.abs(push(nu, K).weights - nu.weights).sum())

    if converged:
        # the two proof steps, numerically: sub-invariance of the density,
        # then mass conservation forcing equality
        slack = max(100.0 * tol, 100.0 * (deltas[-1] if deltas else 0.0))
        over = float(np.max((A @ rho - rho) / max(1.0, np.abs(rho).max())))
        if over > slack:
            raise ArithmeticError(
                f"limit density is not sub-invariant (excess {over:.3e})")
        gap = abs(l1m(A @ rho) - l1m(rho)) / mass_total
        if gap > slack:
            raise ArithmeticError(
                f"adjoint does not conserve the limit mass (gap {gap:.3e})")

    decay = None
    if len(masses) >= 3 and masses[-1] > 0 and masses[-3] > 0:
        decay = masses[-1] / masses[-3]
    return InvariantResult(
        nu=nu,
        density=StateFn(K.space, rho),
        residual=residual,
        method="cesaro-adjoint",
        iterations=j,
        converged=converged,
        diagnostics={
            "mode": mode,
            "horizon_log2": j,
            "deltas": deltas[-8:],
            "mass_trajectory": masses[-8:],
            "mass_decay_per_doubling": decay,
        },
    )


def solve_continuous(G: Generator) -> tuple[InvariantResult, ...]:
    """Invariant probabilities of a generator, one per closed rate class.

    Each candidate is verified to be fixed by alpha R_alpha for alpha in
    {1/2, 1, 2} within 1e-10.
    """
    off = G.rates.copy()
    np.fill_diagonal(off, 0.0)
    labels, closed = _closed_components(off > 0.0)
    if not closed:
        raise AssertionError("a conservative generator always has a closed class")
    kernels = [resolvent(G, a) for a in (0.5, 1.0, 2.0)]
    out = []
    n = G.size
    for c in closed:
        idx = np.flatnonzero(labels == c)
        block = G.rates[np.ix_(idx, idx)]
        local = _stationary_of_generator(block)
        w = np.zeros(n)
        w[idx] = local
        nu = Measure(G.space, w)
        residual = float(np.abs(w @ G.rates).sum())
        for Kk in kernels:
            drift = float(np.abs(push(nu, Kk).weights - w).sum())
            if drift > 1e-10:
                raise ArithmeticError(
                    f"candidate not fixed by the resolvent kernel "
                    f"(drift {drift:.3e})")
        out.append(InvariantResult(
            nu=nu, density=None, residual=residual, method="generator-eigen",
            iterations=0, converged=True,
            diagnostics={"class_members": [int(i) for i in idx]}))
    return tuple(out)


def verify_count_bound(K: Kernel, m: Measure, phi, delta: float) -> dict:
    """Check the class-count bound implied by a concentration certificate.

    Requires the one-step concentration inequality to hold at every state
    (C equal to the whole space). Returns the bound, the actual count,
    per-class masses, and whether the bound is attained (boundary case).
    """
    from .certificates.drift import check_concentration, invariant_count_bound
    from .certificates.phi import AlmostInvarianceParams

    everything = np.ones(K.size, dtype=bool)
    params = AlmostInvarianceParams(phi, delta, horizon=1)
    cert = check_concentration(K, m, params, everything)
    if not cert.holds:
        raise ValueError("concentration inequality fails at some state; "
                         "the count bound does not apply")
    bound = invariant_count_bound(m, phi, delta)
    decomp = decompose(K, verify=False)
    threshold = phi.inverse(1.0 - delta)
    masses = [m.of(cls) for cls in decomp.classes]
    count = decomp.n_classes
    if count > bound + 1e-9:
        raise AssertionError(
            f"class count {count} exceeds the certified bound {bound:.6g}")
    for cls, cm in zip(decomp.classes, masses):
        if cm < threshold - 1e-9 * max(1.0, threshold):
            raise AssertionError(
                f"closed class {tuple(cls.members)} has mass {cm:.6g} "
                f"below the certified floor {threshold:.6g}")
    return {
        "bound": float(bound),
        "count": int(count),
        "class_masses": [float(v) for v in masses],
        "mass_floor": float(threshold),
        "tight": bool(abs(count - bound) <= 1e-9),
        "unique": bool(float(phi(m.mass / 2.0)) < 1.0 - delta),
    }
