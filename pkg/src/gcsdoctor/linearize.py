"""Linearization of a model around its witness geometry.

Builds the scalar residual rows for every constraint, their Jacobian with
respect to the raw entity coordinates, the block-diagonal motion transform
mapping per-entity rigid motions (plus intrinsic scalars) to raw-coordinate
velocities, the resulting geometric perturbation matrix, and the nominal free
perturbation space (motions that leave the model geometry unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ModelError
from .model import (
    Constraint,
    ConstraintKind,
    EntityId,
    EntityKind,
    GeometricEntity,
    Model,
    distance_offset_sign,
)
from .numeric import orthonormal_columns

GradFn = Callable[[np.ndarray], Dict[int, float]]
EvalFn = Callable[[np.ndarray], float]


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def plane_basis(d: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis of the plane orthogonal to unit d."""
    d = np.asarray(d, dtype=float)
    axis = int(np.argmin(np.abs(d)))
    e = np.zeros(3)
    e[axis] = 1.0
    u = np.cross(d, e)
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    return u, v


# ---------------------------------------------------------------------------
# Raw coordinate layout

@dataclass(frozen=True)
class CoordinateLayout:
    """Maps entity ids to slices of the raw coordinate vector X."""

    order: Tuple[EntityId, ...]
    offsets: Mapping[EntityId, int]
    sizes: Mapping[EntityId, int]
    total: int

    def direction_slice(self, eid: EntityId) -> slice:
        off = self.offsets[eid]
        return slice(off, off + 3)

    def point_slice(self, eid: EntityId, kind: EntityKind) -> slice:
        off = self.offsets[eid]
        if kind is EntityKind.VERTEX:
            return slice(off, off + 3)
        return slice(off + 3, off + 6)

    def intrinsic_index(self, eid: EntityId) -> int:
        return self.offsets[eid] + 6


def _entity_raw_size(e: GeometricEntity) -> int:
    if e.kind is EntityKind.VERTEX:
        return 3
    return 6 + len(e.intrinsics)


def coordinate_layout(m: Model) -> CoordinateLayout:
    offsets = {}
    off = 0
    for e in m.entities:
        offsets[e.id] = off
        off += _entity_raw_size(e)
    sizes = {e.id: _entity_raw_size(e) for e in m.entities}
    return CoordinateLayout(
        order=tuple(e.id for e in m.entities), offsets=offsets, sizes=sizes, total=off
    )


def witness_coordinates(m: Model, layout: Optional[CoordinateLayout] = None) -> np.ndarray:
    layout = layout or coordinate_layout(m)
    x = np.zeros(layout.total)
    for e in m.entities:
        off = layout.offsets[e.id]
        if e.kind is EntityKind.VERTEX:
            x[off : off + 3] = e.point
        else:
            x[off : off + 3] = e.direction
            x[off + 3 : off + 6] = e.point
            if e.kind is EntityKind.CYLINDER:
                x[off + 6] = e.radius
            elif e.length is not None:
                x[off + 6] = e.length
    return x


# ---------------------------------------------------------------------------
# Residual rows

@dataclass(frozen=True)
class ResidualRow:
    """One scalar equation, differentiable in the raw coordinates."""

    constraint_id: str
    label: str
    fn: EvalFn
    grad: GradFn


@dataclass(frozen=True)
class ResidualSystem:
    rows: Tuple[ResidualRow, ...]
    layout: CoordinateLayout
    constraint_rows: Mapping[str, Tuple[int, ...]]

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.array([row.fn(x) for row in self.rows])


def _dot_row(cid, label, s1: slice, s2: slice, target: float) -> ResidualRow:
    def fn(x):
        return float(np.dot(x[s1], x[s2]) - target)

    def grad(x):
        g: Dict[int, float] = {}
        a, b = x[s1], x[s2]
        for k in range(3):
            g[s1.start + k] = g.get(s1.start + k, 0.0) + b[k]
            g[s2.start + k] = g.get(s2.start + k, 0.0) + a[k]
        return g

    return ResidualRow(cid, label, fn, grad)


def _parallel_rows(cid, s1: slice, s2: slice, u: np.ndarray, v: np.ndarray):
    def make(w: np.ndarray, tag: str) -> ResidualRow:
        w = w.copy()

        def fn(x):
            return float(np.dot(w, np.cross(x[s1], x[s2])))

        def grad(x):
            g: Dict[int, float] = {}
            d1, d2 = x[s1], x[s2]
            g1 = np.cross(d2, w)
            g2 = np.cross(w, d1)
            for k in range(3):
                g[s1.start + k] = g.get(s1.start + k, 0.0) + g1[k]
                g[s2.start + k] = g.get(s2.start + k, 0.0) + g2[k]
            return g

        return ResidualRow(cid, tag, fn, grad)

    return [make(u, "parallel_u"), make(v, "parallel_v")]


def _point_distance_row(cid, s1: slice, s2: slice, dist: float) -> ResidualRow:
    target = dist * dist

    def fn(x):
        d = x[s1] - x[s2]
        return float(np.dot(d, d) - target)

    def grad(x):
        d = x[s1] - x[s2]
        g: Dict[int, float] = {}
        for k in range(3):
            g[s1.start + k] = g.get(s1.start + k, 0.0) + 2.0 * d[k]
            g[s2.start + k] = g.get(s2.start + k, 0.0) - 2.0 * d[k]
        return g

    return ResidualRow(cid, "point_distance", fn, grad)


def _plane_offset_row(
    cid,
    n_sl: slice,
    p_sl: slice,
    q_sl: slice,
    target: float,
    radius_index: Optional[int] = None,
    radius_sign: float = 0.0,
    label: str = "plane_offset",
) -> ResidualRow:
    # residual: n . (q - p) - target (- sign * r when tangency couples a radius)
    def fn(x):
        val = float(np.dot(x[n_sl], x[q_sl] - x[p_sl])) - target
        if radius_index is not None:
            val -= radius_sign * float(x[radius_index])
        return val

    def grad(x):
        g: Dict[int, float] = {}
        n = x[n_sl]
        diff = x[q_sl] - x[p_sl]
        for k in range(3):
            g[n_sl.start + k] = g.get(n_sl.start + k, 0.0) + diff[k]
            g[q_sl.start + k] = g.get(q_sl.start + k, 0.0) + n[k]
            g[p_sl.start + k] = g.get(p_sl.start + k, 0.0) - n[k]
        if radius_index is not None:
            g[radius_index] = g.get(radius_index, 0.0) - radius_sign
        return g

    return ResidualRow(cid, label, fn, grad)


def _coordinate_rows(cid, s1: slice, s2: slice):
    rows = []
    for k in range(3):
        i, j = s1.start + k, s2.start + k

        def fn(x, i=i, j=j):
            return float(x[i] - x[j])

        def grad(x, i=i, j=j):
            return {i: 1.0, j: -1.0}

        rows.append(ResidualRow(cid, f"equal_position_{('xyz'[k])}", fn, grad))
    return rows


def _scalar_row(cid, index: int, target: float, label: str) -> ResidualRow:
    def fn(x):
        return float(x[index] - target)

    def grad(x):
        return {index: 1.0}

    return ResidualRow(cid, label, fn, grad)


def _scalar_diff_row(cid, i: int, j: int, label: str) -> ResidualRow:
    def fn(x):
        return float(x[i] - x[j])

    def grad(x):
        return {i: 1.0, j: -1.0}

    return ResidualRow(cid, label, fn, grad)


def _intrinsic_coordinate(e: GeometricEntity, layout: CoordinateLayout) -> int:
    if not e.intrinsics:
        raise ModelError(f"{e.id} has no intrinsic scalar coordinate")
    return layout.intrinsic_index(e.id)


def _rows_for_constraint(
    c: Constraint, m: Model, layout: CoordinateLayout
) -> Sequence[ResidualRow]:
    ents = [m.entity(eid) for eid in c.entities]
    kind = c.kind

    if kind in (ConstraintKind.ANGLE, ConstraintKind.PERPENDICULAR):
        target = math.cos(c.parameter) if kind is ConstraintKind.ANGLE else 0.0
        s1 = layout.direction_slice(ents[0].id)
        s2 = layout.direction_slice(ents[1].id)
        label = "angle" if kind is ConstraintKind.ANGLE else "perpendicular"
        return [_dot_row(c.id, label, s1, s2, target)]

    if kind is ConstraintKind.PARALLEL:
        s1 = layout.direction_slice(ents[0].id)
        s2 = layout.direction_slice(ents[1].id)
        u, v = plane_basis(ents[0].direction)
        return _parallel_rows(c.id, s1, s2, u, v)

    if kind is ConstraintKind.DISTANCE:
        a, b = ents
        if b.kind is EntityKind.PLANE and a.kind is not EntityKind.PLANE:
            a, b = b, a
        if a.kind is EntityKind.PLANE:
            sign = distance_offset_sign(a, b)
            rows = []
            if b.kind is EntityKind.PLANE:
                u, v = plane_basis(a.direction)
                rows.extend(
                    _parallel_rows(
                        c.id,
                        layout.direction_slice(a.id),
                        layout.direction_slice(b.id),
                        u,
                        v,
                    )
                )
            rows.append(
                _plane_offset_row(
                    c.id,
                    layout.direction_slice(a.id),
                    layout.point_slice(a.id, a.kind),
                    layout.point_slice(b.id, b.kind),
                    sign * c.parameter,
                )
            )
            return rows
        return [
            _point_distance_row(
                c.id,
                layout.point_slice(a.id, a.kind),
                layout.point_slice(b.id, b.kind),
                c.parameter,
            )
        ]

    if kind is ConstraintKind.EQUAL_POSITION:
        return _coordinate_rows(
            c.id,
            layout.point_slice(ents[0].id, ents[0].kind),
            layout.point_slice(ents[1].id, ents[1].kind),
        )

    if kind is ConstraintKind.EQUAL_LENGTH_PARAM:
        return [
            _scalar_diff_row(
                c.id,
                _intrinsic_coordinate(ents[0], layout),
                _intrinsic_coordinate(ents[1], layout),
                "equal_length",
            )
        ]

    if kind is ConstraintKind.LENGTH:
        return [
            _scalar_row(
                c.id, _intrinsic_coordinate(ents[0], layout), c.parameter, "length"
            )
        ]

    if kind is ConstraintKind.TANGENT:
        plane, cyl = ents if ents[0].kind is EntityKind.PLANE else ents[::-1]
        sign = distance_offset_sign(plane, cyl)
        return [
            _dot_row(
                c.id,
                "tangent_perpendicular",
                layout.direction_slice(plane.id),
                layout.direction_slice(cyl.id),
                0.0,
            ),
            _plane_offset_row(
                c.id,
                layout.direction_slice(plane.id),
                layout.point_slice(plane.id, plane.kind),
                layout.point_slice(cyl.id, cyl.kind),
                0.0,
                radius_index=_intrinsic_coordinate(cyl, layout),
                radius_sign=sign,
                label="tangent_offset",
            ),
        ]

    raise ModelError(f"no residual rows defined for {kind.value}")


def assemble_system(m: Model) -> ResidualSystem:
    """Expand every constraint into its scalar residual rows."""
    layout = coordinate_layout(m)
    rows = []
    constraint_rows: Dict[str, Tuple[int, ...]] = {}
    for c in m.constraints:
        new_rows = _rows_for_constraint(c, m, layout)
        start = len(rows)
        rows.extend(new_rows)
        constraint_rows[c.id] = tuple(range(start, len(rows)))
    return ResidualSystem(tuple(rows), layout, constraint_rows)


def witness_residual(m: Model) -> float:
    """Max absolute row residual of the assembled system at the witness."""
    rs = assemble_system(m)
    if not rs.rows:
        return 0.0
    x = witness_coordinates(m, rs.layout)
    return float(np.max(np.abs(rs.evaluate(x))))


def jacobian(rs: ResidualSystem, m: Model) -> np.ndarray:
    """Analytic Jacobian of the residual rows w.r.t. the raw coordinates."""
    x = witness_coordinates(m, rs.layout)
    out = np.zeros((rs.row_count, rs.layout.total))
    for i, row in enumerate(rs.rows):
        for j, val in row.grad(x).items():
            out[i, j] = val
    return out


# ---------------------------------------------------------------------------
# Motion transform and nominal space

@dataclass(frozen=True)
class MotionTransform:
    """Block-diagonal map from per-entity motion coordinates to raw velocities.

    Each entity owns 6 rigid coordinates (rotation generator about its own
    reference point, then translation) followed by its intrinsic scalars.
    """

    matrix: np.ndarray                     # raw_dim x motion_dim
    blocks: Mapping[EntityId, slice]       # motion-coordinate block per entity
    order: Tuple[EntityId, ...]

    @property
    def motion_dim(self) -> int:
        return self.matrix.shape[1]

    def rigid_slice(self, eid: EntityId) -> slice:
        b = self.blocks[eid]
        return slice(b.start, b.start + 6)

    def intrinsic_indices(self, eid: EntityId) -> range:
        b = self.blocks[eid]
        return range(b.start + 6, b.stop)


def motion_transform(m: Model) -> MotionTransform:
    layout = coordinate_layout(m)
    blocks: Dict[EntityId, slice] = {}
    col = 0
    for e in m.entities:
        width = 6 + len(e.intrinsics)
        blocks[e.id] = slice(col, col + width)
        col += width
    t = np.zeros((layout.total, col))
    for e in m.entities:
        roff = layout.offsets[e.id]
        b = blocks[e.id]
        if e.kind is EntityKind.VERTEX:
            # rotation about its own point is a zero motion; translation moves it
            t[roff : roff + 3, b.start + 3 : b.start + 6] = np.eye(3)
        else:
            d = np.asarray(e.direction)
            t[roff : roff + 3, b.start : b.start + 3] = -_skew(d)   # delta dir = w x d
            t[roff + 3 : roff + 6, b.start + 3 : b.start + 6] = np.eye(3)
            for k, _name in enumerate(e.intrinsics):
                t[roff + 6 + k, b.start + 6 + k] = 1.0
    return MotionTransform(matrix=t, blocks=blocks, order=layout.order)


def perturbation_matrix(j: np.ndarray, t: MotionTransform | np.ndarray) -> np.ndarray:
    tm = t.matrix if isinstance(t, MotionTransform) else t
    if j.shape[1] != tm.shape[0]:
        raise ModelError(
            f"jacobian columns ({j.shape[1]}) do not match transform rows ({tm.shape[0]})"
        )
    return j @ tm


def _nominal_generators(m: Model, transform: MotionTransform) -> np.ndarray:
    n = transform.motion_dim
    gens = []

    # Global rigid motions: a shared (w, t) pair reaches each entity as a
    # rotation about its own reference point plus the transferred moment w x q.
    for k in range(6):
        w = np.zeros(3)
        tr = np.zeros(3)
        if k < 3:
            w[k] = 1.0
        else:
            tr[k - 3] = 1.0
        g = np.zeros(n)
        for e in m.entities:
            b = transform.blocks[e.id]
            q = np.asarray(e.point)
            g[b.start : b.start + 3] = w
            g[b.start + 3 : b.start + 6] = tr + np.cross(w, q)
        gens.append(g)

    # Per-entity self-symmetry motions.
    for e in m.entities:
        b = transform.blocks[e.id]
        if e.kind is EntityKind.VERTEX:
            for k in range(3):
                g = np.zeros(n)
                g[b.start + k] = 1.0
                gens.append(g)
            continue
        d = np.asarray(e.direction)
        g = np.zeros(n)
        g[b.start : b.start + 3] = d        # spin about own direction
        gens.append(g)
        if e.kind is EntityKind.PLANE:
            u, v = plane_basis(d)
            for w_ in (u, v):               # translations within the plane
                g = np.zeros(n)
                g[b.start + 3 : b.start + 6] = w_
                gens.append(g)
        elif e.kind is EntityKind.CYLINDER:
            g = np.zeros(n)                 # slide along the axis
            g[b.start + 3 : b.start + 6] = d
            gens.append(g)
    if not gens:
        return np.zeros((n, 0))
    return np.column_stack(gens)


def nominal_space(m: Model, transform: Optional[MotionTransform] = None) -> np.ndarray:
    """Orthonormal basis of the motions that leave the model geometry unchanged."""
    transform = transform or motion_transform(m)
    gens = _nominal_generators(m, transform)
    return orthonormal_columns(gens)


# ---------------------------------------------------------------------------
# Bundled perturbation system

@dataclass(frozen=True)
class PerturbationSystem:
    """Everything the analyzers need about one model, built at the witness."""

    model: Model
    residuals: ResidualSystem
    transform: MotionTransform
    jacobian_matrix: np.ndarray
    matrix: np.ndarray          # G = J @ T, rows are residual rows
    nominal_basis: np.ndarray   # orthonormal columns spanning the nominal space

    @property
    def row_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def motion_dim(self) -> int:
        return self.matrix.shape[1]

    def rows_of(self, cid: str) -> Tuple[int, ...]:
        return self.residuals.constraint_rows[cid]


def virtual_constraint_rows(
    ps: PerturbationSystem, c: Constraint
) -> Tuple[np.ndarray, np.ndarray]:
    """Residual values and G-rows a candidate constraint would contribute.

    The candidate must reference entities of the system's model; nothing is
    added to the model.  Returns ``(values_at_witness, g_rows)``.
    """
    layout = ps.residuals.layout
    rows = _rows_for_constraint(c, ps.model, layout)
    x = witness_coordinates(ps.model, layout)
    values = np.array([row.fn(x) for row in rows])
    j = np.zeros((len(rows), layout.total))
    for i, row in enumerate(rows):
        for k, val in row.grad(x).items():
            j[i, k] = val
    return values, j @ ps.transform.matrix


def build_perturbation_system(m: Model) -> PerturbationSystem:
    rs = assemble_system(m)
    t = motion_transform(m)
    j = jacobian(rs, m)
    g = perturbation_matrix(j, t)
    nb = nominal_space(m, t)
    return PerturbationSystem(
        model=m,
        residuals=rs,
        transform=t,
        jacobian_matrix=j,
        matrix=g,
        nominal_basis=nb,
    )
