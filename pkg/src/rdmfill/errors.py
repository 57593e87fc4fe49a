"""Exception types shared across the package.

Every failure mode that callers are expected to catch gets its own class;
generic ValueError is reserved for plain misuse of an API.
"""


class RdmError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(RdmError):
    """Array shapes inconsistent with the declared system size."""


class SymmetryViolation(RdmError):
    """Input tensor breaks a required index symmetry beyond tolerance."""


class DegenerateSystem(RdmError):
    """System has too few electrons for the requested quantity."""


class NotIdempotent(RdmError):
    """1-RDM handed to a determinant-only routine is not a projector."""


class ZeroReference(RdmError):
    """Relative error against a zero reference matrix is undefined."""


class RankExhausted(RdmError):
    """No rank up to full dimension meets the requested error target."""


class TooLarge(RdmError):
    """System exceeds the dense diagonalization size limit."""


class OptimizationFailure(RdmError):
    """An optimizer returned an unusable state (not mere non-convergence)."""


class NonFiniteObjective(RdmError):
    """Objective or gradient evaluated to NaN/inf."""


class BudgetExceedsUnique(RdmError):
    """Requested more samples than unique elements available."""


class NoFeasiblePoint(RdmError):
    """No searched configuration met the error target under the given cap."""


class BudgetCap(NoFeasiblePoint):
    """Shot doubling search hit its ceiling before reaching the target."""


class UnphysicalExpectation(RdmError):
    """A derived Pauli expectation lies outside [-1, 1] by more than slack."""


class ModeMismatch(RdmError):
    """Post-processing step applied in a mode where it is invalid."""


class ZeroTrace(RdmError):
    """Trace normalization of a matrix with (near-)zero trace."""


class SampleSetMismatch(RdmError):
    """Model correction requires identical samplings for model and target."""


class BundleFormatError(RdmError):
    """On-disk bundle directory is malformed or inconsistent."""


class ChemistryBackendFailure(RdmError):
    """External quantum chemistry backend failed or is unavailable."""
