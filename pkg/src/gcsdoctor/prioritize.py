"""Two-level ranking of resolution options.

Rough level: a type-precedence table keyed by the operand entity classes
(1 = most important, 5 = least).  Fine level: the change rate — how strongly
the model geometry responds, relative to its neighbours, to a unit parameter
change of the constraint — computed through the pseudo-inverse of the
perturbation matrix and a graph-Laplacian style relative-change operator.

For removal the least important option wins (large precedence first, then the
smallest summed change rate of the rest of its part, measured with the
constraint taken out).  For addition the most important option wins (small
precedence first, then the smallest change rate of the virtually added rows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import AnalysisError, DegeneracyError
from .linearize import (
    PerturbationSystem,
    build_perturbation_system,
    virtual_constraint_rows,
)
from .model import Constraint, ConstraintKind, EntityKind, Model
from .numeric import pseudoinverse
from .options import ResolutionOption
from .overdetect import OverPart

_FACE = "Face"
_EDGE = "Edge"
_VERTEX = "Vertex"

_ENTITY_CLASS = {
    EntityKind.PLANE: _FACE,
    EntityKind.CYLINDER: _FACE,
    EntityKind.LINE: _EDGE,
    EntityKind.VERTEX: _VERTEX,
}

_DIRECTION = "direction"
_DISTANCE = "distance"
_EQUAL_PARAM = "equal_param"
_GENERAL_ANGLE = "general_angle"

#: (entity class pair) -> {category: precedence}; missing pairings rank 5.
_PRECEDENCE: Mapping[frozenset, Mapping[str, int]] = {
    frozenset({_FACE}): {_DIRECTION: 1, _DISTANCE: 1, _EQUAL_PARAM: 1, _GENERAL_ANGLE: 2},
    frozenset({_FACE, _EDGE}): {_DIRECTION: 2, _DISTANCE: 2, _GENERAL_ANGLE: 4},
    frozenset({_FACE, _VERTEX}): {_DISTANCE: 5},
    frozenset({_EDGE}): {_DIRECTION: 3, _DISTANCE: 3, _EQUAL_PARAM: 3, _GENERAL_ANGLE: 5},
    frozenset({_EDGE, _VERTEX}): {_DISTANCE: 5},
    frozenset({_VERTEX}): {_DISTANCE: 5},
}

UNRANKED_PRECEDENCE = 5


def _categories(kind: ConstraintKind) -> Tuple[str, ...]:
    """Constituent categories of a constraint kind; compounds list them all."""
    if kind in (ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR):
        return (_DIRECTION,)
    if kind is ConstraintKind.ANGLE:
        return (_GENERAL_ANGLE,)
    if kind is ConstraintKind.DISTANCE:
        return (_DISTANCE,)
    if kind in (ConstraintKind.EQUAL_LENGTH_PARAM, ConstraintKind.EQUAL_ANGLE_PARAM):
        return (_EQUAL_PARAM,)
    if kind is ConstraintKind.TANGENT:
        return (_DIRECTION, _DISTANCE)
    return ()


def type_precedence(m: Model, c: Constraint) -> int:
    """Table rank 1..5 for the constraint; compounds take their best constituent."""
    classes = frozenset(_ENTITY_CLASS[m.entity(eid).kind] for eid in c.entities)
    table = _PRECEDENCE.get(classes, {})
    cats = _categories(c.kind)
    ranks = [table[cat] for cat in cats if cat in table]
    if c.kind is ConstraintKind.DISTANCE and classes == frozenset({_FACE}):
        # plane-plane distance is compound: parallel directions + offset
        pair_kinds = {m.entity(eid).kind for eid in c.entities}
        if pair_kinds == {EntityKind.PLANE} and _DIRECTION in table:
            ranks.append(table[_DIRECTION])
    if not ranks:
        return UNRANKED_PRECEDENCE
    return min(ranks)


# ---------------------------------------------------------------------------
# Change rates

@dataclass(frozen=True)
class ChangeRateContext:
    """Pseudo-inverse and relative-change operator for one model snapshot."""

    system: PerturbationSystem
    g_pinv: np.ndarray
    relative_operator: np.ndarray

    def rate_of_rows(self, rows: Sequence[int]) -> float:
        rows = list(rows)
        if not rows:
            return 0.0
        response = self.relative_operator @ self.g_pinv[:, rows]
        return float(np.linalg.norm(response) / math.sqrt(len(rows)))


def _neighbor_map(m: Model) -> Dict[str, Dict[str, float]]:
    nb: Dict[str, Dict[str, float]] = {e.id: {} for e in m.entities}
    for c in m.constraints:
        if len(c.entities) < 2:
            continue
        a, b = c.entities
        nb[a][b] = 1.0
        nb[b][a] = 1.0
    return nb


def build_change_rate_context(
    ps: PerturbationSystem, weights: Optional[Mapping[Tuple[str, str], float]] = None
) -> ChangeRateContext:
    """Assemble G+ and the blockwise relative-change operator.

    Neighbours are entities sharing at least one constraint; each entity's
    6-dim rigid block is compared against the weighted mean of its
    neighbours', while intrinsic scalar coordinates pass through unchanged.
    Default weights are 1.
    """
    m = ps.model
    n = ps.motion_dim
    r = np.eye(n)
    neighbors = _neighbor_map(m)
    for e in m.entities:
        nb = neighbors[e.id]
        if not nb:
            continue
        w = {}
        for other, default in nb.items():
            key = (e.id, other)
            rkey = (other, e.id)
            if weights and key in weights:
                w[other] = float(weights[key])
            elif weights and rkey in weights:
                w[other] = float(weights[rkey])
            else:
                w[other] = default
        total = sum(w.values())
        if total <= 0:
            continue
        s_i = ps.transform.rigid_slice(e.id)
        for other, wij in w.items():
            s_j = ps.transform.rigid_slice(other)
            r[s_i, s_j] -= (wij / total) * np.eye(6)
    return ChangeRateContext(
        system=ps, g_pinv=pseudoinverse(ps.matrix), relative_operator=r
    )


def change_rate(
    m: Model,
    cid: str,
    ctx: Optional[ChangeRateContext] = None,
    weights: Optional[Mapping[Tuple[str, str], float]] = None,
) -> float:
    """Relative geometry response to a unit parameter change of one constraint."""
    m.constraint(cid)
    ctx = ctx or build_change_rate_context(build_perturbation_system(m), weights)
    return ctx.rate_of_rows(ctx.system.rows_of(cid))


def summed_change_rate(
    m: Model,
    part: OverPart,
    cid: str,
    weights: Optional[Mapping[Tuple[str, str], float]] = None,
) -> float:
    """Sum of the other part members' change rates once ``cid`` is removed."""
    if cid not in part.constraints:
        raise AnalysisError(f"{cid} is not part of the over-constrained group")
    reduced = m.without_constraint(cid)
    ctx = build_change_rate_context(build_perturbation_system(reduced), weights)
    total = 0.0
    for other in part.constraints:
        if other == cid or other not in reduced.constraint_map:
            continue
        total += ctx.rate_of_rows(ctx.system.rows_of(other))
    return total


def candidate_change_rate(
    m: Model,
    opt: ResolutionOption,
    ps: Optional[PerturbationSystem] = None,
    weights: Optional[Mapping[Tuple[str, str], float]] = None,
) -> float:
    """Change rate of an addition candidate, measured on the augmented system."""
    if opt.action != "add":
        raise AnalysisError("candidate change rate applies to addition options")
    ps = ps or build_perturbation_system(m)
    _, rows = virtual_constraint_rows(ps, opt.constraint)
    if not rows.size or float(np.max(np.abs(rows))) <= 1e-12:
        raise DegeneracyError("candidate rows vanish at the witness")
    g = np.vstack([ps.matrix, rows]) if ps.matrix.size else rows
    ctx = ChangeRateContext(
        system=ps,
        g_pinv=pseudoinverse(g),
        relative_operator=build_change_rate_context(ps, weights).relative_operator,
    )
    new_rows = range(ps.row_count, ps.row_count + rows.shape[0])
    return ctx.rate_of_rows(list(new_rows))


# ---------------------------------------------------------------------------
# Comparison and total ordering

def _sort_key(opt: ResolutionOption, flag: str, ordinal: int):
    if opt.precedence is None or opt.score is None:
        raise AnalysisError("options must be scored before comparison")
    if flag == "over":
        return (-opt.precedence, opt.score, ordinal)
    return (opt.precedence, opt.score, ordinal)


def compare(
    a: ResolutionOption, b: ResolutionOption, flag: str, ordinals: Tuple[int, int] = (0, 1)
) -> ResolutionOption:
    """Winner of a pairwise priority comparison.

    ``flag='over'`` prefers removing the least important constraint type and,
    within a type, the one whose removal leaves the gentlest summed change
    rate; ``flag='under'`` prefers adding the most important type and, within
    a type, the lowest change rate.  Exact ties fall back to the stable
    ordinal.
    """
    if flag not in ("over", "under"):
        raise AnalysisError(f"unknown comparison flag {flag!r}")
    expected = "remove" if flag == "over" else "add"
    if a.action != expected or b.action != expected:
        raise AnalysisError(f"{flag} comparison requires {expected} options")
    ka = _sort_key(a, flag, ordinals[0])
    kb = _sort_key(b, flag, ordinals[1])
    return a if ka <= kb else b


def prioritize(
    options: Sequence[ResolutionOption],
    flag: str,
    m: Model,
    ps: Optional[PerturbationSystem] = None,
    part: Optional[OverPart] = None,
    weights: Optional[Mapping[Tuple[str, str], float]] = None,
) -> List[ResolutionOption]:
    """Score every option and return them best-first, deterministically."""
    if flag not in ("over", "under"):
        raise AnalysisError(f"unknown prioritization flag {flag!r}")
    ps = ps or build_perturbation_system(m)
    scored: List[ResolutionOption] = []
    for opt in options:
        prec = type_precedence(m, opt.constraint)
        if flag == "over":
            group = part or OverPart(
                constraints=opt.target_parts[0], rows=(), dependency_vector=np.zeros(0)
            )
            score = summed_change_rate(m, group, opt.constraint.id, weights)
        else:
            score = candidate_change_rate(m, opt, ps, weights)
        scored.append(replace(opt, precedence=prec, score=score))
    order = sorted(
        range(len(scored)), key=lambda i: _sort_key(scored[i], flag, i)
    )
    return [scored[i] for i in order]
