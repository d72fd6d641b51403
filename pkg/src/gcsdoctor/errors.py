"""Exception hierarchy shared across the package."""


class GcsError(Exception):
    """Base class for all gcsdoctor errors."""


class ModelError(GcsError):
    """Invalid model content."""


class SchemaError(ModelError):
    """Document does not conform to the model schema."""


class DanglingReferenceError(ModelError):
    """Constraint references an entity id that does not exist."""


class AdmissibilityError(ModelError):
    """Constraint kind is not defined for the operand entity kinds."""


class DegeneracyError(ModelError):
    """Requested measurement is geometrically degenerate."""


class InvalidWitnessError(ModelError):
    """Model geometry does not satisfy its own constraints."""


class AnalysisError(GcsError):
    """Detector called outside its precondition."""


class KernelError(GcsError):
    """Numeric kernel failure."""


class OracleBoundError(KernelError):
    """Problem size exceeds the exhaustive-search bound."""


class NoIndependentNullVectorError(KernelError):
    """Null space has no direction independent of the prior vectors."""


class SessionError(GcsError):
    """Resolution-session misuse or dead end."""


class StaleOptionError(SessionError):
    """Option is not part of the current presentation."""


class ForcedRemovalError(SessionError):
    """The last option of a minimal over-constrained part cannot be rejected."""


class UndoEmptyError(SessionError):
    """Undo requested with an empty history."""


class PhaseError(SessionError):
    """Operation not valid in the session's current phase."""


class UnresolvableError(SessionError):
    """A live inconsistency has no valid resolution options."""
