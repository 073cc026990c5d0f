"""Exception types. Validation problems map to CLI exit code 1, numeric ones to 2."""


class RTIError(Exception):
    pass


class ValidationError(RTIError, ValueError):
    pass


class NumericError(RTIError, ArithmeticError):
    pass


class SingularSystemError(NumericError):
    def __init__(self, message, rank=None, iteration=None):
        super().__init__(message)
        self.rank = rank
        self.iteration = iteration


class DivergenceError(NumericError):
    pass
