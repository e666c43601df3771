"""Exception types shared across the package."""


class ArmsortError(Exception):
    pass


class InvalidArgument(ArmsortError, ValueError):
    pass


class WorkspaceViolation(ArmsortError):
    """Target lies outside the allowed end-effector box."""


class InvalidStart(ArmsortError):
    """Start joints violate the joint limits."""


class InsufficientData(ArmsortError):
    pass


class NumericError(ArmsortError, ArithmeticError):
    def __init__(self, message, iterates=()):
        super().__init__(message)
        self.iterates = list(iterates)
