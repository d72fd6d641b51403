"""Maximal well-constrained part extraction, plus the greedy baseline.

A part is an entity subset whose free perturbations, restricted to the part,
are all explained by nominal motions; extraction peels parts off largest
first by minimizing the number of entity row-groups that cannot be matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analyze import classify
from .errors import AnalysisError
from .linearize import PerturbationSystem, build_perturbation_system
from .model import EntityId, Model
from .numeric import (
    CONSISTENT_TOL,
    nullspace_basis,
    row_sparse_fit,
    rows_consistent,
)


@dataclass(frozen=True)
class WellPart:
    """A maximal well-constrained entity subset; rank_order 1 is the largest."""

    entities: Tuple[EntityId, ...]
    rank_order: int

    def __contains__(self, eid: EntityId) -> bool:
        return eid in self.entities


def induced_submodel(m: Model, entities: Sequence[EntityId]) -> Model:
    """Sub-model of the given entities and the constraints fully inside them."""
    keep = set(entities)
    for eid in keep:
        m.entity(eid)
    ents = tuple(e for e in m.entities if e.id in keep)
    cons = tuple(c for c in m.constraints if all(eid in keep for eid in c.entities))
    return Model(ents, cons)


def _part_rows(ps: PerturbationSystem, entities: Sequence[EntityId]) -> np.ndarray:
    rows: List[int] = []
    for eid in entities:
        b = ps.transform.blocks[eid]
        rows.extend(range(b.start, b.stop))
    return np.asarray(rows, dtype=int)


def _free_basis(ps: PerturbationSystem) -> np.ndarray:
    return nullspace_basis(ps.matrix)


def _restricted_solvable(
    ps: PerturbationSystem, free: np.ndarray, entities: Sequence[EntityId]
) -> bool:
    rows = _part_rows(ps, entities)
    tol = CONSISTENT_TOL * max(1.0, float(np.linalg.norm(free)) if free.size else 1.0)
    return rows_consistent(ps.nominal_basis, free, rows, tol)


def is_part_well(
    m: Model, entities: Sequence[EntityId], ps: Optional[PerturbationSystem] = None
) -> bool:
    """Whether the entity subset is a well-constrained part.

    Checks both that every free perturbation restricted to the part is a
    nominal motion and that the induced sub-model classifies well-constrained;
    the part qualifies only when both hold.
    """
    ps = ps or build_perturbation_system(m)
    free = _free_basis(ps)
    restricted_ok = _restricted_solvable(ps, free, entities)
    induced_ok = classify(induced_submodel(m, entities)).well
    return restricted_ok and induced_ok


def is_part_maximal(
    m: Model,
    entities: Sequence[EntityId],
    ps: Optional[PerturbationSystem] = None,
    universe: Optional[Sequence[EntityId]] = None,
) -> bool:
    """Whether no outside entity can be appended without losing solvability.

    ``universe`` limits which outside entities are considered; it defaults to
    the whole model.  Parts peeled off after the first are maximal relative to
    the entities that remained at their extraction, so callers verifying a
    partition pass the not-yet-extracted universe.
    """
    ps = ps or build_perturbation_system(m)
    if not is_part_well(m, entities, ps):
        raise AnalysisError("maximality is only defined for well-constrained parts")
    free = _free_basis(ps)
    inside = set(entities)
    pool = universe if universe is not None else [e.id for e in m.entities]
    for eid in pool:
        if eid in inside:
            continue
        if _restricted_solvable(ps, free, list(entities) + [eid]):
            return False
    return True


def detect_maximal_well_parts(
    m: Model, ps: Optional[PerturbationSystem] = None
) -> List[WellPart]:
    """Partition the entities into maximal well-constrained parts, largest first.

    Requires a model without over-constrained parts.  Each round solves a
    row-sparse fit of the free perturbations against the nominal basis,
    grouped by entity; the groups that match exactly form the next part, and
    their rows are removed before the following round.
    """
    ps = ps or build_perturbation_system(m)
    state = classify(m, ps)
    if state.over:
        raise AnalysisError(
            "over-constrained parts must be resolved before well-part detection"
        )
    free = _free_basis(ps)
    b_full = ps.nominal_basis

    # Group order by entity id so that subset enumeration ties prefer the
    # lexicographically smallest entity.
    remaining = sorted(e.id for e in m.entities)
    parts: List[Tuple[str, ...]] = []
    while remaining:
        rows_per_entity = [_part_rows(ps, [eid]) for eid in remaining]
        all_rows = np.concatenate(rows_per_entity) if rows_per_entity else np.zeros(0, int)
        local = {r: i for i, r in enumerate(all_rows)}
        groups = [[local[r] for r in rows] for rows in rows_per_entity]
        result = row_sparse_fit(b_full[all_rows], free[all_rows], groups)
        zero = [remaining[g] for g in result.zero_groups]
        if not zero:
            raise AnalysisError(
                "no entity subset matches the nominal motions; "
                f"unbound intrinsic coordinates on {', '.join(remaining)}?"
            )
        parts.append(tuple(zero))
        remaining = [eid for eid in remaining if eid not in set(zero)]

    sizes = [len(p) for p in parts]
    if sizes != sorted(sizes, reverse=True):
        raise AnalysisError("part extraction produced increasing sizes")
    return [WellPart(entities=p, rank_order=i + 1) for i, p in enumerate(parts)]


def greedy_well_baseline(
    m: Model, ps: Optional[PerturbationSystem] = None
) -> List[WellPart]:
    """Seed-and-grow baseline partition, for comparison with the optimal one.

    Grows a part entity-by-entity in document order, accepting an entity
    whenever the grown set is still well-constrained, then repeats on the
    remainder.
    """
    ps = ps or build_perturbation_system(m)
    state = classify(m, ps)
    if state.over:
        raise AnalysisError(
            "over-constrained parts must be resolved before well-part detection"
        )
    remaining = [e.id for e in m.entities]
    parts: List[Tuple[str, ...]] = []
    while remaining:
        part = [remaining[0]]
        for eid in remaining[1:]:
            if is_part_well(m, part + [eid], ps):
                part.append(eid)
        parts.append(tuple(part))
        taken = set(part)
        remaining = [eid for eid in remaining if eid not in taken]
    parts.sort(key=lambda p: (-len(p), p))
    return [WellPart(entities=p, rank_order=i + 1) for i, p in enumerate(parts)]
