"""Exception hierarchy for the package.

Every error raised on purpose derives from :class:`WDROError`, which lets the
command line layer turn it into a machine-readable error object.
"""


class WDROError(Exception):
    """Base class for all errors raised by wdro."""

    code = "WDROError"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


def _make(name, doc, base=WDROError):
    cls = type(name, (base,), {"__doc__": doc, "code": name})
    return cls


# ot-core
InfeasibleCost = _make("InfeasibleCost", "Every coupling has infinite transport cost.")
UnboundedDual = _make("UnboundedDual", "The dual objective diverges.")
InfeasibleLP = _make("InfeasibleLP", "Linear program has no feasible point.")
UnboundedLP = _make("UnboundedLP", "Linear program objective is unbounded.")

# worstcase
InnerSupUnboundedForAllLambda = _make(
    "InnerSupUnboundedForAllLambda",
    "No multiplier makes the inner supremum finite.")
UnsupportedLoss = _make("UnsupportedLoss", "No closed-form inner supremum for this loss/cost pair.")

# estimators
RankDeficient = _make("RankDeficient", "Design matrix is rank deficient.")
Infeasible = _make("Infeasible", "Constraint set is empty.")

# profile
OutsideThetaTilde = _make(
    "OutsideThetaTilde",
    "Zero is not in the interior of the convex hull of the estimating function values.")
InnerSupUnboundedEverywhere = _make(
    "InnerSupUnboundedEverywhere", "No nonzero multiplier gives a finite inner value.")

# radius
SingularA = _make("SingularA", "Quadratic form of the limit law is singular.")
UnboundedConjugate = _make("UnboundedConjugate", "Convex conjugate is +infinity at this point.")
SingularCovariance = _make("SingularCovariance", "Sample covariance is singular.")

# inference
SingularHessian = _make("SingularHessian", "Estimated Hessian is not invertible.")
EmptyGroup = _make("EmptyGroup", "A protected group has no positive-label samples.")
DegenerateSigma = _make("DegenerateSigma", "Variance of the fairness influence variable vanishes.")

# simlab
ZeroVariation = _make("ZeroVariation", "Variation norm vanishes; its derivative is singular.")

# io
ParseError = _make("ParseError", "Malformed CSV input.")
MissingColumn = _make("MissingColumn", "Requested column is not in the file.")
NonNumericCell = _make("NonNumericCell", "A cell could not be parsed as a finite number.", ParseError)
SchemaViolation = _make("SchemaViolation", "Column contents violate the declared role.")


class DegenerateResidualsWarning(UserWarning):
    """Square-root loss hit zero residuals; the returned fit interpolates."""


class SingularCovarianceWarning(UserWarning):
    """Covariance was ridged to make it positive definite."""
