"""gcsdoctor: witness-based diagnosis and repair of geometric constraint systems."""

from .analyze import ConstraintState, classify
from .errors import (
    AdmissibilityError,
    AnalysisError,
    DanglingReferenceError,
    DegeneracyError,
    ForcedRemovalError,
    GcsError,
    InvalidWitnessError,
    KernelError,
    ModelError,
    NoIndependentNullVectorError,
    OracleBoundError,
    PhaseError,
    SchemaError,
    SessionError,
    StaleOptionError,
    UndoEmptyError,
    UnresolvableError,
)
from .linearize import (
    MotionTransform,
    PerturbationSystem,
    ResidualSystem,
    assemble_system,
    build_perturbation_system,
    jacobian,
    motion_transform,
    nominal_space,
    perturbation_matrix,
    witness_residual,
)
from .model import (
    Constraint,
    ConstraintKind,
    EntityKind,
    GeometricEntity,
    Model,
    measure_parameter,
    model_fingerprint,
    parse_model,
    serialize_model,
    update_gcs_after_edit,
)
from .numeric import (
    RowSparseResult,
    SparseNullResult,
    minimal_dependent_rowset_oracle,
    nullspace_basis,
    pseudoinverse,
    row_sparse_fit,
    row_sparse_oracle,
    sparsest_independent_null_vector,
)
from .options import (
    ResolutionOption,
    apply_option,
    over_options,
    revalidate,
    under_options,
)
from .overdetect import OverPart, detect_minimal_over_parts, greedy_over_baseline
from .prioritize import (
    ChangeRateContext,
    candidate_change_rate,
    change_rate,
    compare,
    prioritize,
    summed_change_rate,
    type_precedence,
)
from .session import (
    Phase,
    Presentation,
    Session,
    accept,
    auto_resolve,
    journal_jsonl,
    reject,
    replay_journal,
    start,
    step,
    undo,
)
from .welldetect import (
    WellPart,
    detect_maximal_well_parts,
    greedy_well_baseline,
    is_part_maximal,
    is_part_well,
)

__version__ = "0.1.0"
