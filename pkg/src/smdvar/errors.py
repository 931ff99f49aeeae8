"""Exception hierarchy shared by every module."""


class SMDError(Exception):
    """Base class for all errors raised by smdvar."""


class DomainError(SMDError):
    """A primal point lies outside the (strict interior of the) mirror domain."""


class DualRangeError(SMDError):
    """A dual point left the range of the mirror gradient."""

    def __init__(self, message, eta=None, step=None):
        super().__init__(message)
        self.eta = eta
        self.step = step

    def __str__(self):
        msg = super().__str__()
        if self.eta is not None:
            msg += f" (eta={self.eta!r})"
        if self.step is not None:
            msg += f" at step {self.step}"
        return msg


class NonFinite(SMDError):
    """Overflow, NaN, or a Bregman divergence that is negative beyond rounding."""


class UnknownMeanGradient(SMDError):
    pass


class UnknownPerSampleOpt(SMDError):
    pass


class UnsupportedProxPair(SMDError):
    pass


class StepSizeTooLarge(SMDError):
    pass


class SingularHessian(SMDError):
    pass


class QuadratureUnderflow(SMDError):
    pass


class OutOfBranch(SMDError):
    pass


class DegenerateVariance(SMDError):
    """A Gaussian iterate reached zero (or negative) variance."""


class ConfigError(SMDError):
    """Invalid experiment configuration; carries field/line diagnostics."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field is not None:
            where.append(f"field '{self.field}'")
        msg = super().__str__()
        return f"{', '.join(where)}: {msg}" if where else msg
