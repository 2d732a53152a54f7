"""Exception and warning types shared across the package."""


class DoubleCLError(Exception):
    """Base class for all package errors."""


class ParameterError(DoubleCLError, ValueError):
    pass


class SingularReduction(ParameterError):
    """lambda_22**2 * m1 * m2 equals 1, so the reduced masses blow up."""


class NonPositiveParameter(ParameterError):
    pass


class Unstable(ParameterError):
    """Normal-mode frequencies are not both real and positive."""


class NegativeRenormalizedFrequency(ParameterError):
    pass


class NonIntegrableForm(DoubleCLError, ArithmeticError):
    """The momentum block of an evolved Gaussian lost positive definiteness."""


class GridTooLarge(DoubleCLError, ValueError):
    pass


class StepTooLarge(DoubleCLError, ValueError):
    pass


class BoxTooSmall(DoubleCLError, ArithmeticError):
    pass


class InvalidMagnitudes(DoubleCLError, ValueError):
    pass


class WrongComponentCount(DoubleCLError, ValueError):
    pass


class InvalidAxis(DoubleCLError, ValueError):
    pass


class ValidationError(DoubleCLError, ValueError):
    """Raised by ``validate`` with the full list of violations attached."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.kind}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid model")


class HighTemperatureWarning(UserWarning):
    """k_B T is not large compared with the largest bare frequency."""


class DegenerateModesWarning(UserWarning):
    pass


class ResonantPairWarning(UserWarning):
    pass
