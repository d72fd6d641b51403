"""Minimal over-constrained part extraction, plus the greedy baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analyze import classify
from .errors import AnalysisError
from .linearize import PerturbationSystem, build_perturbation_system
from .model import ConstraintId, Model
from .numeric import (
    SUPPORT_TOL,
    matrix_rank,
    nullspace_basis,
    sparsest_independent_null_vector,
)


@dataclass(frozen=True)
class OverPart:
    """A minimal group of mutually dependent constraints."""

    constraints: Tuple[ConstraintId, ...]
    rows: Tuple[int, ...]
    dependency_vector: np.ndarray

    def __contains__(self, cid: ConstraintId) -> bool:
        return cid in self.constraints


def _rows_to_constraints(ps: PerturbationSystem, rows: Sequence[int]) -> Tuple[str, ...]:
    rowset = set(rows)
    hit = []
    for c in ps.model.constraints:
        if rowset & set(ps.rows_of(c.id)):
            hit.append(c.id)
    return tuple(hit)


def detect_minimal_over_parts(
    m: Model, ps: Optional[PerturbationSystem] = None
) -> List[OverPart]:
    """Extract one minimal over-constrained part per row dependency.

    Returns exactly dim NullSpace(G^T) parts with pairwise independent
    dependency vectors, sparsest first.  A constraint belongs to a part when
    any of its rows carries a significant coefficient of the part's
    dependency vector.
    """
    ps = ps or build_perturbation_system(m)
    state = classify(m, ps)
    if not state.over:
        raise AnalysisError("model has no over-constrained part")
    gt = ps.matrix.T
    parts: List[OverPart] = []
    priors: List[np.ndarray] = []
    for _ in range(state.over_dim):
        result = sparsest_independent_null_vector(gt, priors)
        priors.append(result.vector)
        parts.append(
            OverPart(
                constraints=_rows_to_constraints(ps, result.support),
                rows=result.support,
                dependency_vector=result.vector,
            )
        )
    return parts


def greedy_over_baseline(
    m: Model, ps: Optional[PerturbationSystem] = None, seed: Optional[ConstraintId] = None
) -> List[OverPart]:
    """Seed-and-grow baseline: maximal independent subset, then leftovers.

    Starting from a seed constraint it greedily grows a maximal subset of
    constraints with independent rows (in document order), then reports, for
    each leftover constraint, the dependency it forms with that subset.  No
    minimality guarantee; kept for comparison against the optimal detector.
    """
    ps = ps or build_perturbation_system(m)
    state = classify(m, ps)
    if not state.over:
        raise AnalysisError("model has no over-constrained part")
    order = [c.id for c in m.constraints]
    if seed is not None:
        if seed not in ps.residuals.constraint_rows:
            raise AnalysisError(f"unknown seed constraint {seed!r}")
        order.remove(seed)
        order.insert(0, seed)

    g = ps.matrix
    chosen: List[str] = []
    chosen_rows: List[int] = []
    rank = 0
    for cid in order:
        rows = list(ps.rows_of(cid))
        trial = chosen_rows + rows
        trial_rank = matrix_rank(g[trial])
        if trial_rank == rank + len(rows):
            chosen.append(cid)
            chosen_rows = trial
            rank = trial_rank

    parts: List[OverPart] = []
    for cid in order:
        if cid in chosen:
            continue
        rows = list(ps.rows_of(cid))
        stack = chosen_rows + rows
        kernel = nullspace_basis(g[stack].T)
        # combine kernel directions into one dependency vector over the stack
        if kernel.shape[1] == 0:
            continue
        vec = np.zeros(g.shape[0])
        local = kernel[:, 0]
        for k, row in enumerate(stack):
            vec[row] += local[k]
        peak = np.max(np.abs(vec))
        support = tuple(int(i) for i in np.flatnonzero(np.abs(vec) > SUPPORT_TOL * peak))
        parts.append(
            OverPart(
                constraints=_rows_to_constraints(ps, support),
                rows=support,
                dependency_vector=vec,
            )
        )
    return parts
