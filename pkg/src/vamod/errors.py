"""Exception hierarchy for the vamod package.

Validation errors mean the input data (or a config) is malformed; numerical
errors mean a computation cannot proceed on otherwise well-formed input.
The CLI maps the two groups to distinct exit codes.
"""


class VamodError(Exception):
    """Base class for all vamod errors."""


# --- input / data validation -------------------------------------------------

class ValidationError(VamodError):
    """Base class for cohort and file validation failures."""


class DanglingSchoolRef(ValidationError):
    """A pupil references a school_id absent from the school list."""


class DuplicateId(ValidationError):
    """A pupil_id or school_id occurs more than once."""


class OutOfRangeField(ValidationError):
    """A field value is outside its documented range or category list."""


class SchemaMismatch(ValidationError):
    """A CSV header does not match the expected schema exactly."""


class BadToken(ValidationError):
    """A CSV cell holds a token outside the fixed category vocabulary."""


class BadNumber(ValidationError):
    """A CSV cell expected to be numeric failed to parse."""


class InvalidConfig(ValidationError):
    """A generator or run configuration violates its invariants."""


# --- numerical ---------------------------------------------------------------

class NumericalError(VamodError):
    """Base class for failures of the estimation machinery."""


class EmptyInput(NumericalError):
    """An operation requiring at least one value received none."""


class LengthMismatch(NumericalError):
    """Paired vectors have different lengths."""


class ZeroVariance(NumericalError):
    """A correlation was requested for a constant vector."""


class InvalidKs2(NumericalError):
    """A KS2 score is NaN or outside the representable range."""


class UnknownSpec(NumericalError):
    """Model specification name is not one of the defined specs."""


class UnknownLabel(NumericalError):
    """A coefficient label does not exist in the fitted model."""


class UnknownCharacteristic(NumericalError):
    """A group-gap characteristic name is not a pupil or school attribute."""


class SingleCategory(NumericalError):
    """A group-gap characteristic has fewer than two nonempty categories."""


class RankDeficient(NumericalError):
    """The design matrix does not have full column rank."""


class TooFewRows(NumericalError):
    """Fewer observations than parameters."""


class SingleCluster(NumericalError):
    """Cluster-robust covariance needs at least two clusters."""


class SingularSubmatrix(NumericalError):
    """The covariance submatrix of a Wald test is not invertible."""


class TooFewSchools(NumericalError):
    """Shrinkage needs at least two schools."""


class DegenerateWithin(NumericalError):
    """Within-school variance cannot be estimated (no replication)."""


class Infeasible(NumericalError):
    """Variance calibration targets admit no nonnegative solution."""


# --- warnings ----------------------------------------------------------------

class EmptyCategoryWarning(UserWarning):
    """A category with no pupils was dropped from the design."""

