"""Rank/null-space/pseudo-inverse primitives and the two sparse solvers.

Both sparse solvers are paired with exhaustive oracles that are exact at desk
scale; inside the oracle bounds the solvers defer to the oracle on any
disagreement, which is what makes the detection results reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import KernelError, NoIndependentNullVectorError, OracleBoundError

RANK_TOL = 1e-8          # singular values below RANK_TOL * smax * max(m, n) are zero
SUPPORT_TOL = 1e-6       # |x_i| > SUPPORT_TOL * |x|_inf counts as support
ORACLE_ROW_BOUND = 22    # minimal_dependent_rowset_oracle refuses above this
SOLVER_ORACLE_ROWS = 20  # sparsest-null solver arbitrates below this row count
ORACLE_GROUP_BOUND = 16  # row_sparse_oracle refuses above this
IRLS_EPS = 1e-4
CONSISTENT_TOL = 1e-8


def _svd(m: np.ndarray):
    if m.size == 0:
        return None
    return np.linalg.svd(m, full_matrices=True)


def matrix_rank(m: np.ndarray, tol: float = RANK_TOL) -> int:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    cutoff = tol * s[0] * max(m.shape)
    return int(np.sum(s > cutoff))


def nullspace_basis(m: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the right null space of m (columns)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = m.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        cutoff = tol * s[0] * max(rows, cols)
        rank = int(np.sum(s > cutoff))
    return vt[rank:].T.copy()


def orthonormal_columns(m: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column space of m."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        return np.zeros((rows, 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((rows, 0))
    cutoff = tol * s[0] * max(rows, cols)
    rank = int(np.sum(s > cutoff))
    return u[:, :rank].copy()


def pseudoinverse(m: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with the package-wide rank cutoff."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return np.zeros((m.shape[1], m.shape[0]))
    return np.linalg.pinv(m, rcond=tol * max(m.shape))


# ---------------------------------------------------------------------------
# Sparsest independent null vector (row-dependency extraction)

@dataclass(frozen=True)
class SparseNullResult:
    """A sparse dependency vector among the rows of a matrix."""

    vector: np.ndarray
    support: Tuple[int, ...]
    certificate: float           # ||Gt @ x||, should be ~0

    def __post_init__(self):
        if len(self.support) == 0:
            raise KernelError("sparse null vector has empty support")


def _support_of(x: np.ndarray, tol: float = SUPPORT_TOL) -> Tuple[int, ...]:
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak == 0.0:
        return ()
    return tuple(int(i) for i in np.flatnonzero(np.abs(x) > tol * peak))


def _l1_min_in_span(
    z: np.ndarray, pivot_rows: Sequence[int], weights: Optional[np.ndarray] = None
) -> Iterable[np.ndarray]:
    """Sweep min ||diag(w) z a||_1 s.t. (z a)_k = 1 over candidate pivots k."""
    m, q = z.shape
    w = np.ones(m) if weights is None else weights
    a_ub = np.block([[z, -np.eye(m)], [-z, -np.eye(m)]])
    b_ub = np.zeros(2 * m)
    c = np.concatenate([np.zeros(q), w])
    bounds = [(None, None)] * q + [(0.0, None)] * m
    for k in pivot_rows:
        a_eq = np.concatenate([z[k], np.zeros(m)])[None, :]
        res = linprog(
            c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
            method="highs",
        )
        if res.status == 0:
            yield z @ res.x[:q]


def _independence_operator(z: np.ndarray, prior: Sequence[np.ndarray]) -> np.ndarray:
    """Orthonormal basis of the null-space directions independent of the priors."""
    if not prior:
        return z
    a = orthonormal_columns(np.column_stack(prior))
    residual = z - a @ (a.T @ z)
    return orthonormal_columns(residual)


def sparsest_independent_null_vector(
    gt: np.ndarray, prior: Sequence[np.ndarray] = ()
) -> SparseNullResult:
    """Sparsest null vector of ``gt`` linearly independent of the priors.

    Solver: L1 coordinate-sweep by linear programming over the null basis,
    refined by iteratively reweighted L1; for systems of at most
    ``SOLVER_ORACLE_ROWS`` coordinates the answer is arbitrated against the
    exhaustive minimal-rowset oracle.
    """
    gt = np.atleast_2d(np.asarray(gt, dtype=float))
    m = gt.shape[1]
    z = nullspace_basis(gt)
    q = z.shape[1]
    prior = [np.asarray(p, dtype=float) for p in prior]
    if q <= len(prior):
        raise NoIndependentNullVectorError(
            f"null space dimension {q} admits no vector independent of "
            f"{len(prior)} priors"
        )
    b_on = _independence_operator(z, prior)

    def normalize(x: np.ndarray) -> Optional[np.ndarray]:
        c = b_on.T @ x
        nc = np.linalg.norm(c)
        if nc <= 1e-9 * max(np.linalg.norm(x), 1.0):
            return None
        return x / nc

    pivots = [k for k in range(m) if np.max(np.abs(z[k])) > 1e-12]

    def better(cand, best):
        if best is None:
            return True
        return (len(cand[0]), cand[0]) < (len(best[0]), best[0])

    best: Optional[Tuple[Tuple[int, ...], np.ndarray]] = None
    for raw in _l1_min_in_span(z, pivots):
        x = normalize(raw)
        if x is None:
            continue
        cand = (_support_of(x), x)
        if cand[0] and better(cand, best):
            best = cand

    if best is None and prior:
        # Sweep again restricted to the prior-orthogonal slice; any pivot
        # solution there is independent by construction.
        for raw in _l1_min_in_span(b_on, pivots):
            x = normalize(raw)
            if x is None:
                continue
            cand = (_support_of(x), x)
            if cand[0] and better(cand, best):
                best = cand
    if best is None:
        raise NoIndependentNullVectorError("no independent null vector found")

    # Reweighted refinement around the incumbent's pivot coordinate.
    pivot = int(best[0][0])
    x_cur = best[1]
    for _ in range(20):
        weights = 1.0 / (np.abs(x_cur) + IRLS_EPS)
        improved = None
        for raw in _l1_min_in_span(z, [pivot], weights):
            x = normalize(raw)
            if x is None:
                continue
            cand = (_support_of(x), x)
            if cand[0] and better(cand, best):
                improved = cand
        if improved is None:
            break
        best = improved
        x_cur = improved[1]

    if m <= SOLVER_ORACLE_ROWS:
        oracle = _oracle_pick(gt.T, prior, b_on)
        if oracle is not None and oracle[0] != best[0]:
            best = oracle

    x = best[1]
    return SparseNullResult(
        vector=x, support=best[0], certificate=float(np.linalg.norm(gt @ x))
    )


def _oracle_pick(rows_matrix, prior, b_on):
    """Lexicographically first minimal dependent rowset independent of priors."""
    for subset in minimal_dependent_rowset_oracle(rows_matrix):
        sub = rows_matrix[list(subset)]
        kernel = nullspace_basis(sub.T)
        if kernel.shape[1] != 1:
            continue
        x = np.zeros(rows_matrix.shape[0])
        x[list(subset)] = kernel[:, 0]
        c = b_on.T @ x
        nc = np.linalg.norm(c)
        if nc <= 1e-9:
            continue
        x = x / nc
        return (_support_of(x), x)
    return None


def minimal_dependent_rowset_oracle(m: np.ndarray) -> List[Tuple[int, ...]]:
    """All inclusion-minimal row subsets with a linear dependency, by enumeration.

    Sorted by (size, lexicographic indices).  Only rows that participate in
    the left null space can belong to a dependency, so enumeration is confined
    to that support union.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows = m.shape[0]
    if rows > ORACLE_ROW_BOUND:
        raise OracleBoundError(f"{rows} rows exceed the oracle bound {ORACLE_ROW_BOUND}")
    kernel = nullspace_basis(m.T)
    if kernel.shape[1] == 0:
        return []
    union = [int(i) for i in np.flatnonzero(np.max(np.abs(kernel), axis=1) > 1e-9)]
    found: List[Tuple[int, ...]] = []
    for size in range(2, len(union) + 1):
        for combo in itertools.combinations(union, size):
            if any(set(prev) <= set(combo) for prev in found):
                continue
            if matrix_rank(m[list(combo)]) < size:
                found.append(combo)
    found.sort(key=lambda s: (len(s), s))
    return found


# ---------------------------------------------------------------------------
# Row-sparse fitting (mixed-norm minimization over entity row groups)

@dataclass(frozen=True)
class RowSparseResult:
    """Solution of min #(nonzero row groups of B X - F)."""

    coefficients: np.ndarray
    zero_groups: Tuple[int, ...]
    group_residuals: Tuple[float, ...]


def _group_rows(groups: Sequence[Sequence[int]]) -> List[np.ndarray]:
    return [np.asarray(g, dtype=int) for g in groups]


def _fit_on(b: np.ndarray, f: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return np.zeros((b.shape[1], f.shape[1]))
    sol, *_ = np.linalg.lstsq(b[rows], f[rows], rcond=None)
    return sol

def rows_consistent(
    b: np.ndarray, f: np.ndarray, rows: Sequence[int], tol: float = CONSISTENT_TOL
) -> bool:
    """Whether the stacked equations B[rows] X = F[rows] are solvable."""
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        return True
    x = _fit_on(b, f, rows)
    resid = b[rows] @ x - f[rows]
    return float(np.max(np.abs(resid))) <= tol if resid.size else True


def row_sparse_fit(
    b: np.ndarray, f: np.ndarray, groups: Sequence[Sequence[int]]
) -> RowSparseResult:
    """Minimize the number of row groups of ``B X - F`` with nonzero residual.

    Iteratively reweighted least squares on the group norms followed by greedy
    rounding; arbitrated against :func:`row_sparse_oracle` when the group
    count is within the exhaustive bound.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    f = np.atleast_2d(np.asarray(f, dtype=float))
    idx = _group_rows(groups)
    ngroups = len(idx)
    tol = CONSISTENT_TOL * max(1.0, float(np.linalg.norm(f)) if f.size else 1.0)

    weights = np.ones(ngroups)
    x = np.zeros((b.shape[1], f.shape[1]))
    eps = 1e-6
    for _ in range(50):
        row_w = np.ones(b.shape[0])
        for g, rows in enumerate(idx):
            row_w[rows] = np.sqrt(weights[g])
        try:
            x, *_ = np.linalg.lstsq(b * row_w[:, None], f * row_w[:, None], rcond=None)
        except np.linalg.LinAlgError:
            break
        resid = b @ x - f
        norms = np.array(
            [float(np.linalg.norm(resid[rows])) if rows.size else 0.0 for rows in idx]
        )
        new_weights = 1.0 / np.sqrt(norms**2 + eps**2)
        new_weights /= np.max(new_weights)
        if np.max(np.abs(new_weights - weights)) < 1e-10:
            weights = new_weights
            break
        weights = new_weights

    resid = b @ x - f
    norms = [float(np.linalg.norm(resid[rows])) if rows.size else 0.0 for rows in idx]
    order = sorted(range(ngroups), key=lambda g: (norms[g], g))
    kept: List[int] = []
    rows_acc = np.zeros(0, dtype=int)
    for g in order:
        trial = np.concatenate([rows_acc, idx[g]])
        if rows_consistent(b, f, trial, tol):
            kept.append(g)
            rows_acc = trial
    kept_set = set(kept)

    if ngroups <= ORACLE_GROUP_BOUND:
        oracle = row_sparse_oracle(b, f, groups)
        if set(oracle) != kept_set:
            kept_set = set(oracle)
            rows_acc = (
                np.concatenate([idx[g] for g in sorted(kept_set)])
                if kept_set
                else np.zeros(0, dtype=int)
            )

    x = _fit_on(b, f, rows_acc)
    resid = b @ x - f
    group_res = tuple(
        float(np.linalg.norm(resid[rows])) if rows.size else 0.0 for rows in idx
    )
    return RowSparseResult(
        coefficients=x,
        zero_groups=tuple(sorted(kept_set)),
        group_residuals=group_res,
    )


def row_sparse_oracle(
    b: np.ndarray, f: np.ndarray, groups: Sequence[Sequence[int]]
) -> Tuple[int, ...]:
    """Largest group subset whose stacked equations are exactly solvable.

    Exhaustive search in decreasing subset size; among equally large subsets
    the lexicographically first one wins.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    f = np.atleast_2d(np.asarray(f, dtype=float))
    idx = _group_rows(groups)
    ngroups = len(idx)
    if ngroups > ORACLE_GROUP_BOUND:
        raise OracleBoundError(
            f"{ngroups} groups exceed the oracle bound {ORACLE_GROUP_BOUND}"
        )
    tol = CONSISTENT_TOL * max(1.0, float(np.linalg.norm(f)) if f.size else 1.0)
    for size in range(ngroups, -1, -1):
        for combo in itertools.combinations(range(ngroups), size):
            rows = (
                np.concatenate([idx[g] for g in combo]) if combo else np.zeros(0, int)
            )
            if rows_consistent(b, f, rows, tol):
                return tuple(combo)
    return ()
