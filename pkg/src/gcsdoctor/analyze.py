"""Constraint-state classification on the witness geometry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import InvalidWitnessError
from .linearize import PerturbationSystem, build_perturbation_system, witness_residual
from .model import EPS_WITNESS, Model
from .numeric import matrix_rank


@dataclass(frozen=True)
class ConstraintState:
    """Over/under flags with the dimensions behind them.

    A model can be over- and under-constrained at the same time; it is
    well-constrained exactly when both flags are false.
    """

    over: bool
    under: bool
    over_dim: int
    under_dim: int

    @property
    def well(self) -> bool:
        return not (self.over or self.under)


def classify_system(ps: PerturbationSystem) -> ConstraintState:
    g = ps.matrix
    rank_g = matrix_rank(g)
    over_dim = g.shape[0] - rank_g
    null_dim = g.shape[1] - rank_g
    nominal_dim = ps.nominal_basis.shape[1]
    under_dim = null_dim - nominal_dim
    if under_dim < 0:
        raise InvalidWitnessError(
            "constraints cut into the nominal free perturbation space "
            f"(null dim {null_dim} < nominal dim {nominal_dim})"
        )
    return ConstraintState(
        over=over_dim > 0,
        under=under_dim > 0,
        over_dim=int(over_dim),
        under_dim=int(under_dim),
    )


def classify(m: Model, ps: Optional[PerturbationSystem] = None) -> ConstraintState:
    """Classify a witness-valid model as over/under/well-constrained."""
    resid = witness_residual(m)
    if resid > EPS_WITNESS:
        raise InvalidWitnessError(
            f"model geometry violates its constraints (residual {resid:.3g})"
        )
    return classify_system(ps or build_perturbation_system(m))
