"""Exception types shared across the solver suite."""


class VmsdError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfigError(VmsdError):
    """A parameter or configuration value violates its constraints."""


class AssemblyError(VmsdError):
    """Inconsistent dimensions or indices during system assembly."""


class DomainError(VmsdError):
    """A point lies outside the mesh or slab it was evaluated on."""


class SolverFailure(VmsdError):
    """A linear solve did not meet its residual tolerance.

    Carries the achieved relative residual so callers can report it.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual
