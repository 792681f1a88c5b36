"""Exceptions raised by the solvers and the run setup."""
from typing import List, Optional


class ConvergenceError(RuntimeError):
    """A numerical solve did not converge; the driver answers with a cutback."""


class HardeningError(ConvergenceError):
    """The implicit hardening relation could not be solved."""

    def __init__(self, message: str, eps0_p=None):
        super().__init__(message)
        self.eps0_p = eps0_p


class ReturnMappingError(ConvergenceError):
    """Material return mapping failed in one or more voxels."""

    def __init__(self, model: str, n_failed: int, worst_residual: float):
        super().__init__(
            f"{model} return mapping did not converge in {n_failed} voxel(s), "
            f"worst residual {worst_residual:.3e}"
        )
        self.model = model
        self.n_failed = n_failed
        self.worst_residual = worst_residual


class KrylovError(ConvergenceError):
    """Conjugate gradient hit its iteration cap or broke down."""

    def __init__(self, solver: str, iterations: int, residual: float,
                 history: Optional[List[float]] = None):
        super().__init__(
            f"{solver} CG stopped after {iterations} iterations "
            f"with relative residual {residual:.3e}"
        )
        self.solver = solver
        self.iterations = iterations
        self.residual = residual
        self.history = history or []


class NewtonError(ConvergenceError):
    """Mechanical Newton-Raphson did not reach equilibrium."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Newton did not converge after {iterations} iterations "
            f"(normalized residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class StaggeredError(ConvergenceError):
    """Staggered mechanics/Helmholtz iterations did not converge."""

    def __init__(self, iterations: int, error: float):
        super().__init__(
            f"staggered scheme did not converge after {iterations} iterations (ERR={error:.3e})"
        )
        self.iterations = iterations
        self.error = error


class StepTooSmallError(ConvergenceError):
    """Adaptive stepping went below the minimum admissible strain increment."""

    def __init__(self, time: float, strain_increment: float, minimum: float):
        super().__init__(
            f"at t={time:.6g} the strain increment {strain_increment:.3e} "
            f"fell below the minimum {minimum:.3e}"
        )
        self.time = time
        self.strain_increment = strain_increment
        self.minimum = minimum


class ActivationBoundaryError(ValueError):
    """A finite-difference perturbation switched voxels between elastic and plastic."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class PackingError(RuntimeError):
    """Random sequential adsorption could not place every sphere."""

    def __init__(self, placed: int, requested: int, achieved_fraction: float):
        super().__init__(
            f"placed {placed} of {requested} spheres (volume fraction {achieved_fraction:.4f})"
        )
        self.placed = placed
        self.requested = requested
        self.achieved_fraction = achieved_fraction
