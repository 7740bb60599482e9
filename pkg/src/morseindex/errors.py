"""Exception hierarchy.

Every error carries a machine-readable ``code`` and the CLI ``exit_code``
it maps to: 2 for configuration problems, 3 for violated preconditions,
4 for numerical failures.
"""


class MorseIndexError(Exception):
    code = "MORSE_INDEX_ERROR"
    exit_code = 4

    def to_dict(self):
        return {"code": self.code, "message": str(self), "exit_code": self.exit_code}


# configuration (exit code 2)
class ConfigError(MorseIndexError):
    code = "CONFIG_ERROR"
    exit_code = 2


class ParseError(ConfigError):
    """Expression syntax error at a byte offset of the source string."""

    code = "PARSE_ERROR"

    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at offset {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)

    def to_dict(self):
        out = super().to_dict()
        out["position"] = self.position
        out["expected"] = list(self.expected)
        return out


# violated preconditions (exit code 3)
class PreconditionError(MorseIndexError):
    code = "PRECONDITION_ERROR"
    exit_code = 3


class DomainError(PreconditionError):
    code = "DOMAIN_ERROR"


class SignatureMismatch(PreconditionError):
    code = "SIGNATURE_MISMATCH"


class NotNormal(PreconditionError):
    code = "NOT_NORMAL"


class NotTangent(PreconditionError):
    code = "NOT_TANGENT"


class NotOrthogonal(PreconditionError):
    code = "NOT_ORTHOGONAL"


class OffSubmanifold(PreconditionError):
    code = "OFF_SUBMANIFOLD"


class DegenerateTangentMetric(PreconditionError):
    code = "DEGENERATE_TANGENT_METRIC"


class DegenerateInitialCondition(PreconditionError):
    code = "DEGENERATE_INITIAL_CONDITION"


class UnsupportedCausalCharacter(PreconditionError):
    code = "UNSUPPORTED_CAUSAL_CHARACTER"


class DependentSeed(PreconditionError):
    code = "DEPENDENT_SEED"


class GridMismatch(PreconditionError):
    code = "GRID_MISMATCH"


class BoundaryNotTangent(PreconditionError):
    code = "BOUNDARY_NOT_TANGENT"


class SpanDeficiency(PreconditionError):
    code = "SPAN_DEFICIENCY"


class FocalPresent(PreconditionError):
    code = "FOCAL_PRESENT"


# numerical failures (exit code 4)
class NumericalError(MorseIndexError):
    code = "NUMERICAL_ERROR"
    exit_code = 4


class EnergyDriftError(NumericalError):
    code = "ENERGY_DRIFT"


class InconsistentCharacter(NumericalError):
    code = "INCONSISTENT_CHARACTER"


class AccumulationSuspected(NumericalError):
    code = "ACCUMULATION_SUSPECTED"


class ConjugateEndpoints(NumericalError):
    code = "CONJUGATE_ENDPOINTS"


class PartitionFailure(NumericalError):
    code = "PARTITION_FAILURE"
