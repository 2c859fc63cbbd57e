"""Exception and warning types raised across the package."""


class RNFFError(Exception):
    pass


class NonHermitianInput(RNFFError, ValueError):
    pass


class IndefiniteInput(RNFFError, ValueError):
    pass


class SingularInnerSystem(RNFFError, ArithmeticError):
    pass


class NonRealKernel(RNFFError, ValueError):
    pass


class ZeroReference(RNFFError, ZeroDivisionError):
    pass


class DivergedLoss(RNFFError, ArithmeticError):
    def __init__(self, iteration, value):
        super().__init__(f"loss became non-finite ({value}) at iteration {iteration}")
        self.iteration = iteration
        self.value = value


class AliasingViolation(UserWarning):
    """Locations reach past half the period 2*pi/delta_omega.

    Emitted through ``warnings.warn`` by default; raised when strict
    checking is requested.
    """
