"""Generation and revalidation of valid resolution options.

Removal options come straight from a minimal over-constrained part (each of
its constraints breaks the dependency).  Addition options bridge two maximal
well-constrained parts: a naive candidate set is generated from the constraint
look-up rules with parameters measured off the witness, then every candidate
that would introduce a new row dependency (or constrain a nominal motion) is
discarded.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import AnalysisError
from .linearize import (
    PerturbationSystem,
    build_perturbation_system,
    virtual_constraint_rows,
)
from .model import (
    EPS_WITNESS,
    Constraint,
    ConstraintKind,
    EntityKind,
    GeometricEntity,
    Model,
    measure_parameter,
    operands_admissible,
)
from .numeric import matrix_rank
from .overdetect import OverPart
from .welldetect import WellPart

CANDIDATE_ID = "__candidate__"
_COINCIDENT_TOL = 1e-9


def option_id(action: str, c: Constraint) -> str:
    """Content hash of an option; stable across regeneration."""
    param = None if c.parameter is None else round(c.parameter, 12)
    payload = json.dumps(
        [action, c.kind.value, list(c.entities), param], separators=(",", ":")
    )
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class ResolutionOption:
    """One accept/rejectable resolution step."""

    action: str                       # "remove" | "add"
    constraint: Constraint
    target_parts: Tuple[Tuple[str, ...], ...]
    precedence: Optional[int] = None  # filled by the prioritizer
    score: Optional[float] = None     # filled by the prioritizer

    @property
    def id(self) -> str:
        return option_id(self.action, self.constraint)

    def describe(self) -> str:
        c = self.constraint
        args = ", ".join(c.entities)
        if c.parameter is not None:
            value = c.parameter
            if c.kind is ConstraintKind.ANGLE:
                value = math.degrees(value)
            head = f"{c.kind.value}({args}) = {value:g}"
        else:
            head = f"{c.kind.value}({args})"
        verb = "Remove" if self.action == "remove" else "Add"
        name = f" {c.id}" if self.action == "remove" else ""
        return f"{verb}{name}: {head}"


def over_options(part: OverPart, m: Model) -> List[ResolutionOption]:
    """One removal option per constraint of a minimal over-constrained part."""
    return [
        ResolutionOption(
            action="remove",
            constraint=m.constraint(cid),
            target_parts=(part.constraints,),
        )
        for cid in part.constraints
    ]


def _directional(e: GeometricEntity) -> bool:
    return e.direction is not None


def _pair_candidates(ea: GeometricEntity, eb: GeometricEntity, m: Model) -> List[Constraint]:
    """Naive witness-satisfied candidate constraints for one entity pair."""
    out: List[Constraint] = []

    def cand(kind: ConstraintKind, parameter=None):
        out.append(
            Constraint(
                id=CANDIDATE_ID, kind=kind, entities=(ea.id, eb.id), parameter=parameter
            )
        )

    if _directional(ea) and _directional(eb):
        cos = abs(float(np.dot(ea.direction, eb.direction)))
        if cos >= 1.0 - _COINCIDENT_TOL:
            cand(ConstraintKind.PARALLEL)
        elif cos <= _COINCIDENT_TOL:
            cand(ConstraintKind.PERPENDICULAR)
        else:
            theta = measure_parameter(m, ConstraintKind.ANGLE, (ea.id, eb.id))
            cand(ConstraintKind.ANGLE, math.radians(theta))

    kinds = {ea.kind, eb.kind}
    if operands_admissible(ConstraintKind.TANGENT, (ea.kind, eb.kind)):
        plane, cyl = (ea, eb) if ea.kind is EntityKind.PLANE else (eb, ea)
        perp = abs(float(np.dot(plane.direction, cyl.direction)))
        offset = abs(
            float(np.dot(plane.direction, np.subtract(cyl.point, plane.point)))
        )
        if perp <= _COINCIDENT_TOL and abs(offset - cyl.radius) <= _COINCIDENT_TOL:
            cand(ConstraintKind.TANGENT)

    if operands_admissible(ConstraintKind.EQUAL_POSITION, (ea.kind, eb.kind)):
        if np.linalg.norm(np.subtract(ea.point, eb.point)) <= _COINCIDENT_TOL:
            cand(ConstraintKind.EQUAL_POSITION)

    if operands_admissible(ConstraintKind.EQUAL_LENGTH_PARAM, (ea.kind, eb.kind)):
        values = [
            e.radius if e.kind is EntityKind.CYLINDER else e.length for e in (ea, eb)
        ]
        if None not in values and abs(values[0] - values[1]) <= _COINCIDENT_TOL:
            cand(ConstraintKind.EQUAL_LENGTH_PARAM)

    # Distance last so equally-typed direction candidates list first.
    distance_ok = True
    if kinds == {EntityKind.PLANE}:
        distance_ok = abs(float(np.dot(ea.direction, eb.direction))) >= 1.0 - _COINCIDENT_TOL
    elif EntityKind.PLANE not in kinds:
        distance_ok = (
            np.linalg.norm(np.subtract(ea.point, eb.point)) > _COINCIDENT_TOL
        )
    if distance_ok:
        value = measure_parameter(m, ConstraintKind.DISTANCE, (ea.id, eb.id))
        cand(ConstraintKind.DISTANCE, value)

    return out


def candidate_is_valid(ps: PerturbationSystem, c: Constraint) -> bool:
    """Virtual-addition filter: the candidate must not over-constrain.

    Rejects candidates whose rows are violated at the witness, vanish at the
    witness, touch the nominal free motions, or are linearly dependent on the
    existing rows (a new dependency is exactly a new over-constraint).
    """
    values, rows = virtual_constraint_rows(ps, c)
    if values.size and float(np.max(np.abs(values))) > EPS_WITNESS:
        return False
    scale = float(np.max(np.abs(rows))) if rows.size else 0.0
    if scale <= 1e-12:
        return False
    if ps.nominal_basis.size:
        coupling = float(np.max(np.abs(rows @ ps.nominal_basis)))
        if coupling > 1e-8 * max(1.0, scale):
            return False
    g = ps.matrix
    stacked = np.vstack([g, rows]) if g.size else rows
    return matrix_rank(stacked) == matrix_rank(g) + rows.shape[0]


def under_options(
    a: WellPart,
    b: WellPart,
    m: Model,
    ps: Optional[PerturbationSystem] = None,
) -> List[ResolutionOption]:
    """Valid bridging candidates between two disjoint well-constrained parts."""
    if set(a.entities) & set(b.entities):
        raise AnalysisError("parts overlap; cannot bridge")
    ps = ps or build_perturbation_system(m)
    target = (tuple(a.entities), tuple(b.entities))
    out: List[ResolutionOption] = []
    for ea_id in a.entities:
        for eb_id in b.entities:
            ea, eb = m.entity(ea_id), m.entity(eb_id)
            for cand in _pair_candidates(ea, eb, m):
                if candidate_is_valid(ps, cand):
                    out.append(
                        ResolutionOption(
                            action="add", constraint=cand, target_parts=target
                        )
                    )
    return out


def revalidate(
    options: Sequence[ResolutionOption],
    m: Model,
    ps: Optional[PerturbationSystem] = None,
) -> List[ResolutionOption]:
    """Drop options invalidated by decisions accepted since generation.

    Removal options survive while their over-constrained part still carries a
    dependency in the current model; addition options are re-filtered through
    the virtual-addition check.
    """
    ps = ps or build_perturbation_system(m)
    kept: List[ResolutionOption] = []
    for opt in options:
        if opt.action == "remove":
            cid = opt.constraint.id
            if cid not in m.constraint_map:
                continue
            part_rows: List[int] = []
            for member in opt.target_parts[0]:
                if member in m.constraint_map:
                    part_rows.extend(ps.rows_of(member))
            if matrix_rank(ps.matrix[part_rows]) < len(part_rows):
                kept.append(opt)
        else:
            if candidate_is_valid(ps, opt.constraint):
                kept.append(opt)
    return kept


def apply_option(m: Model, opt: ResolutionOption) -> Model:
    """Apply an accepted option, producing the next model."""
    if opt.action == "remove":
        return m.without_constraint(opt.constraint.id)
    fresh = replace(opt.constraint, id=m.fresh_constraint_id())
    return m.with_constraint(fresh)
