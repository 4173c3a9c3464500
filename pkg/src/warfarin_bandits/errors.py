"""Exception hierarchy. CLI exit codes hang off ``exit_code``."""


class WarfarinBanditsError(Exception):
    exit_code = 3


class ConfigurationError(WarfarinBanditsError):
    exit_code = 1


class SchemaError(ConfigurationError):
    """A required column is absent from the table header."""


class DataError(WarfarinBanditsError):
    exit_code = 2


class ImputationError(DataError):
    pass


class DomainError(DataError, ValueError):
    """An argument outside the operation's mathematical domain."""


class NumericError(WarfarinBanditsError, ArithmeticError):
    exit_code = 3


class SingularMatrixError(NumericError):
    pass


class PolicyError(NumericError):
    def __init__(self, message, step=None, policy=None):
        self.step = step
        self.policy = policy
        where = []
        if policy is not None:
            where.append(f"policy={policy}")
        if step is not None:
            where.append(f"step={step}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
