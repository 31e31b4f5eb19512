"""Exception hierarchy shared by the solvers, optimizer and CLI."""

from __future__ import annotations


class PhaseFieldError(Exception):
    """Base class for every error raised by this package."""


class SolverError(PhaseFieldError):
    """A forward, tangent or adjoint solve failed (CLI exit code 1)."""


class DomainError(SolverError, ValueError):
    """A potential derivative was requested outside the admissible open interval."""

    def __init__(self, value: float, guard: float):
        self.value = value
        self.guard = guard
        super().__init__(
            f"rho={value!r} outside [{guard:g}, 1-{guard:g}]: the iterate left the barrier"
        )


class NonConvergence(SolverError):
    def __init__(self, step: int, iterations: int, residual: float):
        self.step = step
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"Newton failed at step {step} after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class BarrierBreach(SolverError):
    def __init__(self, step: int, detail: str = ""):
        self.step = step
        msg = f"rho could not be kept inside (0, 1) at step {step}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class DiagonalLoss(SolverError):
    """The mu-system lost its positive diagonal; the time step is too large."""

    def __init__(self, step: int, min_diagonal: float):
        self.step = step
        self.min_diagonal = min_diagonal
        super().__init__(
            f"non-positive diagonal {min_diagonal:.3e} in mu-system at step {step}"
        )


class SingularJacobian(SolverError):
    pass


class DegenerateInput(PhaseFieldError, ValueError):
    pass


class ProjectionStall(SolverError):
    def __init__(self, sweeps: int, box_violation: float, rate_excess: float):
        self.sweeps = sweeps
        self.box_violation = box_violation
        self.rate_excess = rate_excess
        super().__init__(
            f"projection not admissible after {sweeps} sweeps "
            f"(box violation {box_violation:.3e}, rate excess {rate_excess:.3e})"
        )


class LineSearchFail(SolverError):
    def __init__(self, iteration: int, step: float, trace=None):
        self.iteration = iteration
        self.step = step
        self.trace = trace
        super().__init__(
            f"Armijo backtracking failed at iteration {iteration} (step {step:.3e})"
        )


class ConfigError(PhaseFieldError):
    """Invalid configuration (CLI exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ConfigError, ValueError):
    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class ShapeMismatch(PhaseFieldError, ValueError):
    def __init__(self, what: str, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"{what}: expected {expected}, found {found}")
