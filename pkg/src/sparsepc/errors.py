"""Exception hierarchy shared by all modules."""


class SparsePCError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SparsePCError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResolutionError(DomainError):
    """A requested frequency is not representable on the grid."""

    def __init__(self, message, required_n=None):
        super().__init__(message)
        self.required_n = required_n


class ResourceError(SparsePCError):
    """A configured work budget would be exceeded."""


class CoefficientDegeneracyError(SparsePCError):
    """The diffusion coefficient has non-positive real part at a grid point."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class NonConvergenceError(SparsePCError):
    """The iterative solver stopped at ``max_iter`` without meeting tolerance."""

    def __init__(self, message, residual=None, iterations=None, sample=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.sample = sample


class DivergenceError(DomainError):
    """A Gaussian integral diverges for the given parameters."""


class ConfigError(SparsePCError):
    """Invalid experiment configuration; carries line/key diagnostics."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
