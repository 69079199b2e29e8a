"""Exception hierarchy shared across the package."""


class CellIdError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CellIdError, ValueError):
    pass


class CurveDomainError(CellIdError, ValueError):
    """Equilibrium curve evaluated outside its stoichiometry domain."""


class SaturationError(CellIdError):
    """Surface concentration left the open interval (0, c_max).

    Signals lithium depletion (anode/cathode emptied) or saturation.
    """

    def __init__(self, electrode, time=None, index=None, stoich=None):
        self.electrode = electrode
        self.time = time
        self.index = index
        self.stoich = stoich
        where = []
        if index is not None:
            where.append(f"sample {index}")
        if time is not None:
            where.append(f"t={time:g} s")
        msg = f"{electrode} surface concentration saturated"
        if stoich is not None:
            msg += f" (theta={stoich:.6g})"
        if where:
            msg += " at " + ", ".join(where)
        super().__init__(msg)


class NumericalError(CellIdError, ArithmeticError):
    pass


class RangeError(CellIdError, ValueError):
    pass


class ProtocolMismatchError(CellIdError, ValueError):
    pass


class InsufficientDataError(CellIdError, ValueError):
    pass


class SizeError(CellIdError, ValueError):
    pass


class OptimizerError(CellIdError):
    """Base for solver failures. ``diagnostics`` carries solver state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvalidStartError(OptimizerError):
    pass


class StallError(OptimizerError):
    pass


class ProbeError(OptimizerError):
    def __init__(self, message, index, diagnostics=None):
        super().__init__(message, diagnostics)
        self.index = index


class MultiStartError(OptimizerError):
    pass
