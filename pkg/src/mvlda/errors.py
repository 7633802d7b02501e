"""Exception hierarchy.

Every error carries a stable ``code`` token and an ``exit_status`` used by the
command-line front end (1 for invalid input, 2 for numerical failure).
"""


class MvldaError(Exception):
    code = "mvlda_error"
    exit_status = 1


class ValidationError(MvldaError, ValueError):
    code = "invalid_input"


class DimensionError(ValidationError):
    code = "dimension_mismatch"


class BundleFormatError(ValidationError):
    code = "bundle_format"


class NumericalError(MvldaError, ArithmeticError):
    code = "numerical_failure"
    exit_status = 2


class NotPositiveDefiniteError(NumericalError):
    code = "not_positive_definite"


class SingularFactorError(NumericalError):
    code = "singular_factor"

    def __init__(self, factor, eigenvalue, threshold):
        self.factor = factor
        self.eigenvalue = eigenvalue
        self.threshold = threshold
        super().__init__(
            f"covariance factor {factor} is singular: smallest eigenvalue "
            f"{eigenvalue:.6g} <= {threshold:.6g}; consider a positive ridge"
        )


class DegenerateScatterError(NumericalError):
    code = "zero_within_class_scatter"
