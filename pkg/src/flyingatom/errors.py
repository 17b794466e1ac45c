"""Exception types. Each carries the CLI exit code for its category."""


class FlyingAtomError(Exception):
    exit_code = 1


class ConfigurationError(FlyingAtomError, ValueError):
    """Invalid parameters, dimensions, labels or grid geometry."""

    exit_code = 2


class NumericalError(FlyingAtomError, ArithmeticError):
    """Blow-up, non-convergent quadrature, or a hygiene threshold violated."""

    exit_code = 3


class ContractError(FlyingAtomError, ValueError):
    """An operator precondition (e.g. Hermiticity) does not hold."""

    exit_code = 4


class OutputError(FlyingAtomError, OSError):
    exit_code = 5
