"""Domain model: geometric entities, constraints, documents, and GCS updates.

A :class:`Model` couples a concrete *witness* geometry (the entities) with the
constraint list that is supposed to describe it.  Every model entering
analysis must satisfy its own constraints: the geometry acts as an exact
witness configuration, which is what makes the downstream perturbation
analysis sound.

Angles are stored in radians internally and in degrees in documents.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Tuple

from .errors import (
    AdmissibilityError,
    DanglingReferenceError,
    DegeneracyError,
    ModelError,
    SchemaError,
)

EntityId = str
ConstraintId = str

Vec3 = Tuple[float, float, float]

EPS_WITNESS = 1e-6      # max residual accepted for a witness-valid model
EPS_ANGLE = 1e-6        # rad; angle-to-parallel/perpendicular conversion band
EPS_UNIT = 1e-9         # unit-norm tolerance on stored directions
UNIT_FIX_TOL = 1e-3     # parse renormalizes directions this far off unit
EPS_POINT = 1e-9        # below this, a point-point distance is degenerate


class EntityKind(str, enum.Enum):
    PLANE = "Plane"
    CYLINDER = "Cylinder"
    LINE = "Line"
    VERTEX = "Vertex"


class ConstraintKind(str, enum.Enum):
    ANGLE = "Angle"
    PARALLEL = "Parallel"
    PERPENDICULAR = "Perpendicular"
    DISTANCE = "Distance"
    EQUAL_POSITION = "EqualPosition"
    EQUAL_ANGLE_PARAM = "EqualAngleParam"
    EQUAL_LENGTH_PARAM = "EqualLengthParam"
    LENGTH = "Length"
    TANGENT = "Tangent"


PARAMETERIZED_KINDS = frozenset(
    {ConstraintKind.ANGLE, ConstraintKind.DISTANCE, ConstraintKind.LENGTH}
)

#: Entity kinds that carry a direction vector usable by Angle/Parallel/Perpendicular.
DIRECTIONAL_KINDS = frozenset(
    {EntityKind.PLANE, EntityKind.CYLINDER, EntityKind.LINE}
)


def _v(x) -> Vec3:
    return (float(x[0]), float(x[1]), float(x[2]))


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(a: Vec3) -> float:
    return math.sqrt(_dot(a, a))


@dataclass(frozen=True)
class GeometricEntity:
    """One witness-geometry primitive.

    Field usage by kind:

    * ``Plane``: ``direction`` is the unit normal, ``point`` a reference point
      on the plane.
    * ``Cylinder``: ``direction`` is the unit axis, ``point`` the axis point
      (the cylinder's position), ``radius`` > 0.
    * ``Line``: ``direction`` is the unit line direction, ``point`` a point on
      the line, ``length`` > 0 optional.
    * ``Vertex``: ``point`` is the position; no direction.
    """

    id: EntityId
    kind: EntityKind
    point: Vec3
    direction: Optional[Vec3] = None
    radius: Optional[float] = None
    length: Optional[float] = None

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise ModelError("entity id must be a non-empty string")
        object.__setattr__(self, "kind", EntityKind(self.kind))
        object.__setattr__(self, "point", _v(self.point))
        if self.kind is EntityKind.VERTEX:
            if self.direction is not None:
                raise ModelError(f"{self.id}: a vertex has no direction")
        else:
            if self.direction is None:
                raise ModelError(f"{self.id}: {self.kind.value} requires a direction")
            d = _v(self.direction)
            if abs(_norm(d) - 1.0) > EPS_UNIT:
                raise ModelError(f"{self.id}: direction is not unit length")
            object.__setattr__(self, "direction", d)
        if self.kind is EntityKind.CYLINDER:
            if self.radius is None or self.radius <= 0.0:
                raise ModelError(f"{self.id}: cylinder radius must be positive")
            object.__setattr__(self, "radius", float(self.radius))
        elif self.radius is not None:
            raise ModelError(f"{self.id}: only cylinders carry a radius")
        if self.length is not None:
            if self.kind is not EntityKind.LINE:
                raise ModelError(f"{self.id}: only lines carry a length")
            if self.length <= 0.0:
                raise ModelError(f"{self.id}: line length must be positive")
            object.__setattr__(self, "length", float(self.length))

    @property
    def intrinsics(self) -> Tuple[str, ...]:
        """Names of the entity's scalar coordinates beyond pose."""
        if self.kind is EntityKind.CYLINDER:
            return ("radius",)
        if self.kind is EntityKind.LINE and self.length is not None:
            return ("length",)
        return ()


@dataclass(frozen=True)
class Constraint:
    """A single constraint over one or two entities.

    ``parameter`` is present exactly for the parameterized kinds (Angle,
    Distance, Length); Angle parameters are radians here, degrees on disk.
    """

    id: ConstraintId
    kind: ConstraintKind
    entities: Tuple[EntityId, ...]
    parameter: Optional[float] = None

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise ModelError("constraint id must be a non-empty string")
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        object.__setattr__(self, "entities", tuple(str(e) for e in self.entities))
        n = len(self.entities)
        if self.kind is ConstraintKind.LENGTH:
            if n != 1:
                raise ModelError(f"{self.id}: Length takes exactly one entity")
        elif n != 2:
            raise ModelError(f"{self.id}: {self.kind.value} takes exactly two entities")
        elif self.entities[0] == self.entities[1]:
            raise ModelError(f"{self.id}: operands must be distinct entities")
        if self.kind in PARAMETERIZED_KINDS:
            if self.parameter is None:
                raise ModelError(f"{self.id}: {self.kind.value} requires a parameter")
            object.__setattr__(self, "parameter", float(self.parameter))
        elif self.parameter is not None:
            raise ModelError(f"{self.id}: {self.kind.value} takes no parameter")


def operands_admissible(kind: ConstraintKind, entity_kinds: Sequence[EntityKind]) -> bool:
    """Whether the constraint kind is defined for the operand entity kinds."""
    ks = tuple(entity_kinds)
    if kind is ConstraintKind.LENGTH:
        return len(ks) == 1 and ks[0] is EntityKind.LINE
    if len(ks) != 2:
        return False
    pair = frozenset(ks) if ks[0] != ks[1] else frozenset({ks[0]})
    if kind in (ConstraintKind.ANGLE, ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR):
        return ks[0] in DIRECTIONAL_KINDS and ks[1] in DIRECTIONAL_KINDS
    if kind is ConstraintKind.DISTANCE:
        return True
    if kind is ConstraintKind.EQUAL_POSITION:
        return pair == frozenset({EntityKind.VERTEX})
    if kind is ConstraintKind.EQUAL_LENGTH_PARAM:
        return pair in (frozenset({EntityKind.LINE}), frozenset({EntityKind.CYLINDER}))
    if kind is ConstraintKind.EQUAL_ANGLE_PARAM:
        # No current entity kind carries an intrinsic angle parameter.
        return False
    if kind is ConstraintKind.TANGENT:
        return pair == frozenset({EntityKind.PLANE, EntityKind.CYLINDER})
    return False


@dataclass(frozen=True)
class Model:
    """Witness geometry plus its constraint list; immutable once built."""

    entities: Tuple[GeometricEntity, ...]
    constraints: Tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        seen = set()
        for e in self.entities:
            if e.id in seen:
                raise ModelError(f"duplicate entity id {e.id!r}")
            seen.add(e.id)
        cseen = set()
        by_id = {e.id: e for e in self.entities}
        for c in self.constraints:
            if c.id in cseen:
                raise ModelError(f"duplicate constraint id {c.id!r}")
            cseen.add(c.id)
            kinds = []
            for eid in c.entities:
                if eid not in by_id:
                    raise DanglingReferenceError(
                        f"constraint {c.id} references missing entity {eid!r}"
                    )
                kinds.append(by_id[eid].kind)
            if not operands_admissible(c.kind, kinds):
                raise AdmissibilityError(
                    f"constraint {c.id}: {c.kind.value} is not defined for "
                    f"({', '.join(k.value for k in kinds)})"
                )
            if c.kind is ConstraintKind.LENGTH and by_id[c.entities[0]].length is None:
                raise AdmissibilityError(
                    f"constraint {c.id}: Length requires a line with a length coordinate"
                )
            if c.kind is ConstraintKind.EQUAL_LENGTH_PARAM:
                ents = [by_id[eid] for eid in c.entities]
                if ents[0].kind is EntityKind.LINE and any(e.length is None for e in ents):
                    raise AdmissibilityError(
                        f"constraint {c.id}: both lines need length coordinates"
                    )

    @cached_property
    def entity_map(self) -> Mapping[EntityId, GeometricEntity]:
        return {e.id: e for e in self.entities}

    @cached_property
    def constraint_map(self) -> Mapping[ConstraintId, Constraint]:
        return {c.id: c for c in self.constraints}

    def entity(self, eid: EntityId) -> GeometricEntity:
        try:
            return self.entity_map[eid]
        except KeyError:
            raise DanglingReferenceError(f"unknown entity {eid!r}") from None

    def constraint(self, cid: ConstraintId) -> Constraint:
        try:
            return self.constraint_map[cid]
        except KeyError:
            raise DanglingReferenceError(f"unknown constraint {cid!r}") from None

    def without_constraint(self, cid: ConstraintId) -> "Model":
        self.constraint(cid)
        return Model(self.entities, tuple(c for c in self.constraints if c.id != cid))

    def with_constraint(self, c: Constraint) -> "Model":
        return Model(self.entities, self.constraints + (c,))

    def fresh_constraint_id(self) -> ConstraintId:
        used = set(self.constraint_map)
        n = len(used) + 1
        while f"C{n}" in used:
            n += 1
        return f"C{n}"

    def structurally_equal(self, other: "Model", tol: float = 1e-9) -> bool:
        """Field-by-field equality with a numeric tolerance on coordinates."""
        if len(self.entities) != len(other.entities):
            return False
        if len(self.constraints) != len(other.constraints):
            return False
        for a, b in zip(self.entities, other.entities):
            if (a.id, a.kind) != (b.id, b.kind):
                return False
            if not _close_vec(a.point, b.point, tol):
                return False
            if (a.direction is None) != (b.direction is None):
                return False
            if a.direction is not None and not _close_vec(a.direction, b.direction, tol):
                return False
            for x, y in ((a.radius, b.radius), (a.length, b.length)):
                if (x is None) != (y is None):
                    return False
                if x is not None and not math.isclose(x, y, rel_tol=tol, abs_tol=tol):
                    return False
        for a, b in zip(self.constraints, other.constraints):
            if (a.id, a.kind, a.entities) != (b.id, b.kind, b.entities):
                return False
            if (a.parameter is None) != (b.parameter is None):
                return False
            if a.parameter is not None and not math.isclose(
                a.parameter, b.parameter, rel_tol=tol, abs_tol=tol
            ):
                return False
        return True


def _close_vec(a: Vec3, b: Vec3, tol: float) -> bool:
    return all(math.isclose(x, y, rel_tol=tol, abs_tol=tol) for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Document parsing / serialization

_VECTOR_KEYS = {
    EntityKind.PLANE: ("normal", "point"),
    EntityKind.CYLINDER: ("axis", "point"),
    EntityKind.LINE: ("direction", "point"),
    EntityKind.VERTEX: (None, "position"),
}


def _parse_vec(obj, key: str, ctx: str) -> Vec3:
    val = obj.get(key)
    if (
        not isinstance(val, (list, tuple))
        or len(val) != 3
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)
    ):
        raise SchemaError(f"{ctx}: {key!r} must be a 3-vector of numbers")
    return _v(val)


def parse_model(document: str) -> Model:
    """Parse a JSON model document into a validated :class:`Model`.

    Directions up to ``1e-3`` off unit length are renormalized; anything
    further off is rejected.  Angle parameters are converted from degrees to
    radians.
    """
    try:
        data = json.loads(document)
    except ValueError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object")
    raw_entities = data.get("entities", [])
    raw_constraints = data.get("constraints", [])
    if not isinstance(raw_entities, list) or not isinstance(raw_constraints, list):
        raise SchemaError("'entities' and 'constraints' must be lists")

    entities = []
    for i, obj in enumerate(raw_entities):
        ctx = f"entities[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError(f"{ctx}: must be an object")
        eid = obj.get("id")
        if not isinstance(eid, str) or not eid:
            raise SchemaError(f"{ctx}: missing id")
        try:
            kind = EntityKind(obj.get("kind"))
        except ValueError:
            raise SchemaError(f"{ctx}: unknown entity kind {obj.get('kind')!r}") from None
        dir_key, point_key = _VECTOR_KEYS[kind]
        point = _parse_vec(obj, point_key, ctx)
        direction = None
        if dir_key is not None:
            direction = _parse_vec(obj, dir_key, ctx)
            n = _norm(direction)
            if abs(n - 1.0) > UNIT_FIX_TOL:
                raise SchemaError(f"{ctx}: {dir_key!r} is not unit length (|v|={n:.6g})")
            direction = (direction[0] / n, direction[1] / n, direction[2] / n)
        radius = obj.get("radius")
        length = obj.get("length")
        if kind is EntityKind.CYLINDER and radius is None:
            raise SchemaError(f"{ctx}: cylinder requires a radius")
        try:
            entities.append(
                GeometricEntity(
                    id=eid,
                    kind=kind,
                    point=point,
                    direction=direction,
                    radius=radius,
                    length=length,
                )
            )
        except ModelError as exc:
            raise SchemaError(f"{ctx}: {exc}") from None

    constraints = []
    for i, obj in enumerate(raw_constraints):
        ctx = f"constraints[{i}]"
        if not isinstance(obj, dict):
            raise SchemaError(f"{ctx}: must be an object")
        cid = obj.get("id")
        if not isinstance(cid, str) or not cid:
            raise SchemaError(f"{ctx}: missing id")
        try:
            kind = ConstraintKind(obj.get("kind"))
        except ValueError:
            raise SchemaError(f"{ctx}: unknown constraint kind {obj.get('kind')!r}") from None
        ents = obj.get("entities")
        if not isinstance(ents, list) or not all(isinstance(e, str) for e in ents):
            raise SchemaError(f"{ctx}: 'entities' must be a list of ids")
        parameter = obj.get("parameter")
        if parameter is not None and not isinstance(parameter, (int, float)):
            raise SchemaError(f"{ctx}: parameter must be a number")
        if kind in PARAMETERIZED_KINDS and parameter is None:
            raise SchemaError(f"{ctx}: {kind.value} requires a parameter")
        if kind not in PARAMETERIZED_KINDS and parameter is not None:
            raise SchemaError(f"{ctx}: {kind.value} takes no parameter")
        if kind is ConstraintKind.ANGLE:
            parameter = math.radians(float(parameter))
        try:
            constraints.append(
                Constraint(id=cid, kind=kind, entities=tuple(ents), parameter=parameter)
            )
        except ModelError as exc:
            raise SchemaError(f"{ctx}: {exc}") from None

    return Model(tuple(entities), tuple(constraints))


def _entity_to_obj(e: GeometricEntity) -> dict:
    obj = {"id": e.id, "kind": e.kind.value}
    dir_key, point_key = _VECTOR_KEYS[e.kind]
    if dir_key is not None:
        obj[dir_key] = list(e.direction)
    obj[point_key] = list(e.point)
    if e.radius is not None:
        obj["radius"] = e.radius
    if e.length is not None:
        obj["length"] = e.length
    return obj


def _constraint_to_obj(c: Constraint) -> dict:
    obj = {"id": c.id, "kind": c.kind.value, "entities": list(c.entities)}
    if c.parameter is not None:
        value = c.parameter
        if c.kind is ConstraintKind.ANGLE:
            value = math.degrees(value)
        obj["parameter"] = value
    return obj


def constraint_to_document(c: Constraint) -> dict:
    """Document-form object for one constraint (angles back in degrees)."""
    return _constraint_to_obj(c)


def serialize_model(m: Model) -> str:
    """Render a model back to its JSON document form (deterministic)."""
    doc = {
        "entities": [_entity_to_obj(e) for e in m.entities],
        "constraints": [_constraint_to_obj(c) for c in m.constraints],
    }
    return json.dumps(doc, indent=2) + "\n"


def model_fingerprint(m: Model) -> str:
    """Content hash of the model's canonical document."""
    return hashlib.sha256(serialize_model(m).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Witness measurements

def measure_parameter(
    m_or_entities, kind: ConstraintKind, operands: Sequence[EntityId]
) -> float:
    """Measure the dimension a parameterized constraint would take from the witness.

    Distances come back nonnegative; angles in degrees.  Raises
    :class:`DegeneracyError` when the geometry does not realize the dimension
    (e.g. a plane-plane distance between non-parallel planes).
    """
    if isinstance(m_or_entities, Model):
        lookup = m_or_entities.entity_map
    else:
        lookup = {e.id: e for e in m_or_entities}
    kind = ConstraintKind(kind)
    ents = []
    for eid in operands:
        if eid not in lookup:
            raise DanglingReferenceError(f"unknown entity {eid!r}")
        ents.append(lookup[eid])

    if kind is ConstraintKind.ANGLE:
        d1, d2 = (_require_direction(e) for e in ents)
        return math.degrees(math.acos(max(-1.0, min(1.0, _dot(d1, d2)))))
    if kind is ConstraintKind.LENGTH:
        (e,) = ents
        if e.length is None:
            raise DegeneracyError(f"{e.id} has no length coordinate")
        return e.length
    if kind is ConstraintKind.DISTANCE:
        return _measure_distance(ents[0], ents[1])
    raise ModelError(f"{kind.value} is not a parameterized constraint kind")


def _require_direction(e: GeometricEntity) -> Vec3:
    if e.direction is None:
        raise DegeneracyError(f"{e.id} ({e.kind.value}) has no direction")
    return e.direction


def _measure_distance(a: GeometricEntity, b: GeometricEntity) -> float:
    if b.kind is EntityKind.PLANE and a.kind is not EntityKind.PLANE:
        a, b = b, a
    if a.kind is EntityKind.PLANE:
        if b.kind is EntityKind.PLANE:
            if _norm(_cross(a.direction, b.direction)) > 1e-6:
                raise DegeneracyError(
                    f"plane-plane distance between non-parallel planes {a.id}, {b.id}"
                )
        return abs(_dot(a.direction, _sub(b.point, a.point)))
    return _norm(_sub(a.point, b.point))


def distance_offset_sign(a: GeometricEntity, b: GeometricEntity) -> float:
    """Witness sign of a plane-based offset so documents can store |distance|."""
    s = _dot(a.direction, _sub(b.point, a.point))
    return -1.0 if s < 0 else 1.0


def predicate_residual(c: Constraint, lookup: Mapping[EntityId, GeometricEntity]) -> float:
    """Max absolute violation of an unparameterized constraint at the witness."""
    ents = [lookup[eid] for eid in c.entities]
    if c.kind is ConstraintKind.PARALLEL:
        return _norm(_cross(ents[0].direction, ents[1].direction))
    if c.kind is ConstraintKind.PERPENDICULAR:
        return abs(_dot(ents[0].direction, ents[1].direction))
    if c.kind is ConstraintKind.EQUAL_POSITION:
        return _norm(_sub(ents[0].point, ents[1].point))
    if c.kind is ConstraintKind.EQUAL_LENGTH_PARAM:
        vals = [
            e.radius if e.kind is EntityKind.CYLINDER else e.length for e in ents
        ]
        return abs(vals[0] - vals[1])
    if c.kind is ConstraintKind.TANGENT:
        plane, cyl = ents if ents[0].kind is EntityKind.PLANE else ents[::-1]
        perp = abs(_dot(plane.direction, cyl.direction))
        offset = abs(abs(_dot(plane.direction, _sub(cyl.point, plane.point))) - cyl.radius)
        return max(perp, offset)
    raise ModelError(f"{c.kind.value} is not an unparameterized predicate")


# ---------------------------------------------------------------------------
# GCS update after a direct edit

def update_gcs_after_edit(
    pre: Model, post_geometry: Iterable[GeometricEntity]
) -> Model:
    """Reconcile a pre-edit constraint list with edited witness geometry.

    Constraints whose operands were deleted are dropped.  Parameterized
    constraints are re-measured against the new geometry (dropped if the
    measurement is degenerate).  Unparameterized predicates that the new
    geometry no longer satisfies are dropped.  Angle constraints that landed
    on 0/180 degrees become Parallel, on 90 degrees Perpendicular, keeping
    their ids.  The result is witness-valid by construction.
    """
    post = list(post_geometry)
    lookup = {}
    for e in post:
        if e.id in lookup:
            raise ModelError(f"duplicate entity id {e.id!r} in post geometry")
        lookup[e.id] = e

    # Stable entity order: survivors keep the pre-model order, new ids append.
    pre_order = [e.id for e in pre.entities if e.id in lookup]
    new_order = [e.id for e in post if e.id not in set(pre_order)]
    entities = tuple(lookup[eid] for eid in pre_order + new_order)

    constraints = []
    for c in pre.constraints:
        if any(eid not in lookup for eid in c.entities):
            continue
        if c.kind in PARAMETERIZED_KINDS:
            updated = _remeasure(c, lookup)
            if updated is not None:
                constraints.append(updated)
        else:
            if predicate_residual(c, lookup) <= EPS_WITNESS:
                constraints.append(c)
    return Model(entities, tuple(constraints))


def _remeasure(c: Constraint, lookup) -> Optional[Constraint]:
    try:
        value = measure_parameter(lookup.values(), c.kind, c.entities)
    except DegeneracyError:
        return None
    if c.kind is ConstraintKind.ANGLE:
        theta = math.radians(value)
        if theta <= EPS_ANGLE or math.pi - theta <= EPS_ANGLE:
            return Constraint(id=c.id, kind=ConstraintKind.PARALLEL, entities=c.entities)
        if abs(theta - math.pi / 2) <= EPS_ANGLE:
            return Constraint(
                id=c.id, kind=ConstraintKind.PERPENDICULAR, entities=c.entities
            )
        return Constraint(id=c.id, kind=c.kind, entities=c.entities, parameter=theta)
    if c.kind is ConstraintKind.DISTANCE:
        kinds = {lookup[eid].kind for eid in c.entities}
        if EntityKind.PLANE not in kinds and value <= EPS_POINT:
            return None  # coincident positions: the distance row would vanish
    return Constraint(id=c.id, kind=c.kind, entities=c.entities, parameter=value)
