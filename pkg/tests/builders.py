"""Deterministic builders for the fixture models used across the test suite."""

from __future__ import annotations

import math

import numpy as np

from gcsdoctor.model import (
    Constraint,
    ConstraintKind,
    EntityKind,
    GeometricEntity,
    Model,
)

K = ConstraintKind


def plane(eid, normal, point):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return GeometricEntity(
        id=eid, kind=EntityKind.PLANE, direction=tuple(n), point=tuple(point)
    )


def line(eid, direction, point, length=None):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return GeometricEntity(
        id=eid, kind=EntityKind.LINE, direction=tuple(d), point=tuple(point), length=length
    )


def cylinder(eid, axis, point, radius):
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    return GeometricEntity(
        id=eid, kind=EntityKind.CYLINDER, direction=tuple(a), point=tuple(point), radius=radius
    )


def vertex(eid, position):
    return GeometricEntity(id=eid, kind=EntityKind.VERTEX, point=tuple(position))


def con(cid, kind, ents, parameter=None):
    if kind is K.ANGLE and parameter is not None:
        parameter = math.radians(parameter)
    return Constraint(id=cid, kind=kind, entities=tuple(ents), parameter=parameter)


def _box_planes(dx=1.0, dy=1.0, dz=1.0):
    """Axis-aligned box faces: F1/F3 bottom/top (z), F2/F4 back/front (y), F5/F6 (x)."""
    return [
        plane("F1", (0, 0, 1), (dx / 2, dy / 2, 0.0)),
        plane("F2", (0, 1, 0), (dx / 2, dy, dz / 2)),
        plane("F3", (0, 0, 1), (dx / 2, dy / 2, dz)),
        plane("F4", (0, 1, 0), (dx / 2, 0.0, dz / 2)),
        plane("F5", (1, 0, 0), (0.0, dy / 2, dz / 2)),
        plane("F6", (1, 0, 0), (dx, dy / 2, dz / 2)),
    ]


def unit_cube_model() -> Model:
    """Six box faces with the classic well-constrained dimensioning scheme."""
    return Model(
        tuple(_box_planes()),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C2", K.DISTANCE, ("F2", "F4"), 1.0),
            con("C3", K.DISTANCE, ("F5", "F6"), 1.0),
            con("C4", K.PERPENDICULAR, ("F1", "F5")),
            con("C5", K.PERPENDICULAR, ("F1", "F4")),
            con("C6", K.PERPENDICULAR, ("F4", "F5")),
        ),
    )


def stretched_cube_model(dy=2.0) -> Model:
    """The cube after a stretch along y; same scheme, one re-measured distance."""
    return Model(
        tuple(_box_planes(dy=dy)),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C2", K.DISTANCE, ("F2", "F4"), dy),
            con("C3", K.DISTANCE, ("F5", "F6"), 1.0),
            con("C4", K.PERPENDICULAR, ("F1", "F5")),
            con("C5", K.PERPENDICULAR, ("F1", "F4")),
            con("C6", K.PERPENDICULAR, ("F4", "F5")),
        ),
    )


def under_cube_pre_model() -> Model:
    """Cube dimensioned through F1/F4/F6 perpendicularities (second scheme)."""
    return Model(
        tuple(_box_planes()),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C2", K.DISTANCE, ("F2", "F4"), 1.0),
            con("C3", K.DISTANCE, ("F5", "F6"), 1.0),
            con("C4", K.PERPENDICULAR, ("F1", "F6")),
            con("C5", K.PERPENDICULAR, ("F1", "F4")),
            con("C6", K.PERPENDICULAR, ("F4", "F6")),
        ),
    )


def under_cube_post_entities():
    """Edit that rotates F2 and F5 by a quarter turn each, breaking both
    distances that involve them (their partners are no longer parallel)."""
    ents = _box_planes()
    ents[1] = plane("F2", (0, 0, 1), (0.5, 1.0, 1.4))
    ents[4] = plane("F5", (0, 1, 0), (0.0, 1.3, 0.5))
    return ents


def under_cube_model() -> Model:
    """Post-edit under-constrained model: F2 and F5 have lost their bindings."""
    ents = under_cube_post_entities()
    return Model(
        tuple(ents),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C4", K.PERPENDICULAR, ("F1", "F6")),
            con("C5", K.PERPENDICULAR, ("F1", "F4")),
            con("C6", K.PERPENDICULAR, ("F4", "F6")),
        ),
    )


def over_cube_pre_model() -> Model:
    """Prism with a slanted F2 held by two angle dimensions, plus a free edge."""
    ents = _box_planes()
    # normal at 150 degrees to +y and 60 degrees to +x, in the xy-plane
    ents[1] = plane("F2", (0.5, -math.sqrt(3) / 2, 0.0), (0.5, 1.0, 0.5))
    ents.append(line("E1", (0, 0, 1), (0.5, 1.0, 0.5), length=1.0))
    return Model(
        tuple(ents),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C2", K.DISTANCE, ("F5", "F6"), 1.0),
            con("C3", K.PERPENDICULAR, ("F1", "F5")),
            con("C4", K.PERPENDICULAR, ("F1", "F4")),
            con("C5", K.PERPENDICULAR, ("F4", "F5")),
            con("C6", K.ANGLE, ("F2", "F4"), 150.0),
            con("C7", K.ANGLE, ("F2", "F5"), 60.0),
            con("C8", K.LENGTH, ("E1",), 1.0),
        ),
    )


def over_cube_post_entities():
    """Edit that straightens F2 parallel to F4 (and perpendicular to F5)."""
    ents = list(over_cube_pre_model().entities)
    ents[1] = plane("F2", (0, 1, 0), (0.5, 1.0, 0.5))
    return ents


def over_cube_model() -> Model:
    """Post-edit over-constrained model: the angle pair collapsed to Parallel
    + Perpendicular, which is dependent with the F4/F5 perpendicularity."""
    ents = over_cube_post_entities()
    return Model(
        tuple(ents),
        (
            con("C1", K.DISTANCE, ("F1", "F3"), 1.0),
            con("C2", K.DISTANCE, ("F5", "F6"), 1.0),
            con("C3", K.PERPENDICULAR, ("F1", "F5")),
            con("C4", K.PERPENDICULAR, ("F1", "F4")),
            con("C5", K.PERPENDICULAR, ("F4", "F5")),
            con("C6", K.PARALLEL, ("F2", "F4")),
            con("C7", K.PERPENDICULAR, ("F2", "F5")),
            con("C8", K.LENGTH, ("E1",), 1.0),
        ),
    )


def duplicate_over_model() -> Model:
    """An angle cycle F1-F2-F3-F4 plus C8 duplicating C7.

    Normals of F1..F4 lie in the xy-plane at 0/50/110/170 degrees, so the
    four angle dimensions around the cycle carry exactly one dependency;
    C8 repeats C7 verbatim for the two-constraint duplicate part.
    """

    def at(deg):
        t = math.radians(deg)
        return (math.cos(t), math.sin(t), 0.0)

    v1, v2, v3 = (0.0, 0.0, 0.0), (1.3, 0.2, 0.4), (0.3, 1.1, 0.9)

    def d(a, b):
        return float(np.linalg.norm(np.subtract(a, b)))

    ents = (
        plane("F1", at(0), (0, 0, 0)),
        plane("F2", at(50), (2, 0, 0)),
        plane("F3", at(110), (4, 0, 0)),
        plane("F4", at(170), (6, 0, 0)),
        plane("F5", (0, 0, 1), (0, 0, 2)),
        vertex("V1", v1),
        vertex("V2", v2),
        vertex("V3", v3),
    )
    return Model(
        ents,
        (
            con("C1", K.ANGLE, ("F1", "F2"), 50.0),
            con("C2", K.ANGLE, ("F2", "F3"), 60.0),
            con("C3", K.PERPENDICULAR, ("F1", "F5")),
            con("C4", K.PERPENDICULAR, ("F2", "F5")),
            con("C5", K.ANGLE, ("F3", "F4"), 60.0),
            con("C6", K.PERPENDICULAR, ("F3", "F5")),
            con("C7", K.ANGLE, ("F1", "F4"), 170.0),
            con("C8", K.ANGLE, ("F1", "F4"), 170.0),
            con("C9", K.DISTANCE, ("V1", "V2"), d(v1, v2)),
            con("C10", K.DISTANCE, ("V2", "V3"), d(v2, v3)),
            con("C11", K.DISTANCE, ("V1", "V3"), d(v1, v3)),
        ),
    )


def _triangle(prefix, origin, u, v):
    o = np.asarray(origin, dtype=float)
    pts = [o, o + np.asarray(u, float), o + np.asarray(v, float)]
    ents = [vertex(f"{prefix}{i+1}", tuple(p)) for i, p in enumerate(pts)]
    cons = []
    for i, j in ((0, 1), (1, 2), (0, 2)):
        d = float(np.linalg.norm(pts[i] - pts[j]))
        cons.append((f"{prefix}{i+1}", f"{prefix}{j+1}", d))
    return ents, cons


def greedy_well_trap_model() -> Model:
    """Four vertices where greedy growth locks onto the wrong pair.

    P1-P2 are joined by one distance; P1, P3, P4 form a rigid triangle.  The
    optimal largest part is {P1, P3, P4}; growing from P1 in document order
    accepts P2 first and can then accept nothing else.
    """
    p1 = (0.0, 0.0, 0.0)
    p2 = (2.0, 0.5, 0.3)
    p3 = (1.0, 1.5, 0.0)
    p4 = (0.4, 0.7, 1.2)
    ents = (vertex("P1", p1), vertex("P2", p2), vertex("P3", p3), vertex("P4", p4))

    def d(a, b):
        return float(np.linalg.norm(np.subtract(a, b)))

    return Model(
        ents,
        (
            con("C1", K.DISTANCE, ("P1", "P2"), d(p1, p2)),
            con("C2", K.DISTANCE, ("P1", "P3"), d(p1, p3)),
            con("C3", K.DISTANCE, ("P1", "P4"), d(p1, p4)),
            con("C4", K.DISTANCE, ("P3", "P4"), d(p3, p4)),
        ),
    )


def crank_analog_model() -> Model:
    """Three rigid vertex triangles with bridge distances leaving one degree
    of freedom between parts A and B and one between A+B and C."""
    ents_a, cons_a = _triangle("A", (0, 0, 0), (1, 0, 0), (0, 1, 0))
    ents_b, cons_b = _triangle("B", (3.0, 0.2, 1.0), (1.0, 0.2, 0.1), (0.1, 1.1, 0.4))
    ents_c, cons_c = _triangle("C", (0.3, 3.0, 2.0), (1.0, 0.3, 0.2), (0.4, 0.9, 0.1))
    ents = tuple(ents_a + ents_b + ents_c)
    lookup = {e.id: np.asarray(e.point) for e in ents}

    def d(a, b):
        return float(np.linalg.norm(lookup[a] - lookup[b]))

    cons = []
    cid = 0
    for a, b, dist in cons_a + cons_b + cons_c:
        cid += 1
        cons.append(con(f"C{cid}", K.DISTANCE, (a, b), dist))
    bridges = [
        ("A1", "B1"), ("A1", "B2"), ("A2", "B1"), ("A2", "B3"), ("A3", "B2"),
        ("B1", "C1"), ("B2", "C1"), ("B3", "C2"), ("A1", "C2"), ("A2", "C3"),
    ]
    for a, b in bridges:
        cid += 1
        cons.append(con(f"C{cid}", K.DISTANCE, (a, b), d(a, b)))
    return Model(ents, tuple(cons))
