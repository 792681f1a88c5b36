"""Heterogeneous Helmholtz regularization solved by preconditioned CG with FFT-applied operators."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ductile.errors import KrylovError
from ductile.grid import (
    FrequencyTable,
    GridSpec,
    divergence_spectral,
    forward_transform,
    gradient_spectral,
    inverse_transform,
)

logger = logging.getLogger(__name__)


class Preconditioner(Enum):
    """Preconditioner choice for the Helmholtz CG."""
    MEAN_LENGTH = "mean_length"
    NONE = "none"


@dataclass
class CGConfig:
    """Tolerance and limits of a Helmholtz solve."""
    rel_tolerance: float = 1e-10
    max_iterations: Optional[int] = None
    preconditioner: Preconditioner = Preconditioner.MEAN_LENGTH
    record_residuals: bool = False

    def __post_init__(self):
        if isinstance(self.preconditioner, str):
            self.preconditioner = Preconditioner(self.preconditioner)
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError(f"CG tolerance must lie in (0, 1), got {self.rel_tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def iteration_cap(self, grid: GridSpec) -> int:
        return self.max_iterations or 10 * max(grid.cells)


@dataclass
class HelmholtzResult:
    """Solution of one Helmholtz solve with its diagnostics."""
    field: np.ndarray
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)


def length_squared_field(phase_index: np.ndarray, lengths: Dict[int, float]) -> np.ndarray:
    """Piecewise-constant l^2(x) from the per-phase characteristic lengths."""
    ell2 = np.zeros(phase_index.shape)
    for phase in np.unique(phase_index):
        if int(phase) not in lengths:
            raise ValueError(f"No characteristic length given for phase {phase}")
        ell = lengths[int(phase)]
        if ell < 0.0:
            raise ValueError(f"Characteristic length of phase {phase} is negative: {ell}")
        ell2[phase_index == phase] = ell ** 2
    return ell2


def apply_operator(alpha_bar_hat: np.ndarray, ell2: np.ndarray, freq: FrequencyTable) -> np.ndarray:
    """Fourier-space action of  alpha_bar - div(l^2 grad alpha_bar)."""
    grid = freq.grid
    grid.check_field(ell2, "l^2 field")
    flux = ell2[..., None] * inverse_transform(gradient_spectral(alpha_bar_hat, freq), grid)
    return alpha_bar_hat - divergence_spectral(forward_transform(flux, grid), freq)


def apply_preconditioner(r_hat: np.ndarray, mean_ell2: float, freq: FrequencyTable) -> np.ndarray:
    """Multiply each mode by 1 / (1 + <l^2> |xi|^2)."""
    return r_hat / (1.0 + mean_ell2 * freq.norm2)


def solve_helmholtz(
    alpha: np.ndarray,
    ell2: np.ndarray,
    freq: FrequencyTable,
    cfg: Optional[CGConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> HelmholtzResult:
    """Non-local field of the source `alpha` by preconditioned CG.

    Iterates in real space; by Parseval the residual norms equal the
    Fourier-space ones up to a constant factor.
    """
    cfg = cfg or CGConfig()
    grid = freq.grid
    grid.check_field(alpha, "source")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("Helmholtz source contains non-finite values")
    shape = grid.cells
    size = grid.n_voxels
    mean_ell2 = float(np.mean(ell2))

    def matvec(u):
        u_hat = forward_transform(np.reshape(u, shape), grid)
        return inverse_transform(apply_operator(u_hat, ell2, freq), grid).ravel()

    def psolve(r):
        r_hat = forward_transform(np.reshape(r, shape), grid)
        return inverse_transform(apply_preconditioner(r_hat, mean_ell2, freq), grid).ravel()

    A = LinearOperator((size, size), matvec=matvec, dtype=float)
    M = None
    if cfg.preconditioner is Preconditioner.MEAN_LENGTH:
        M = LinearOperator((size, size), matvec=psolve, dtype=float)

    b = alpha.ravel().astype(float)
    b_norm = float(np.linalg.norm(b))
    history: List[float] = []
    iterations = 0

    def callback(xk):
        nonlocal iterations
        iterations += 1
        if cfg.record_residuals and b_norm > 0.0:
            history.append(float(np.linalg.norm(b - matvec(xk)) / b_norm))

    start = None if x0 is None else np.asarray(x0, dtype=float).ravel()
    maxiter = cfg.iteration_cap(grid)
    x, info = cg(A, b, x0=start, rtol=cfg.rel_tolerance, atol=0.0, maxiter=maxiter, M=M, callback=callback)
    residual = float(np.linalg.norm(b - matvec(x)) / b_norm) if b_norm > 0.0 else 0.0
    if info != 0:
        raise KrylovError("Helmholtz", iterations, residual, history)

    logger.debug("Helmholtz CG: %d iteration(s), relative residual %.3e", iterations, residual)
    return HelmholtzResult(field=np.reshape(x, shape), iterations=iterations, residual=residual, history=history)


class HelmholtzSolver:
    """Helmholtz solver bound to a grid, a frequency table and an l^2 field."""

    def __init__(self, freq: FrequencyTable, ell2: np.ndarray, cfg: Optional[CGConfig] = None):
        freq.grid.check_field(ell2, "l^2 field")
        if np.any(ell2 < 0.0):
            raise ValueError("l^2 field must be non-negative")
        self.freq = freq
        self.ell2 = ell2
        self.cfg = cfg or CGConfig()

    @property
    def mean_ell2(self) -> float:
        return float(np.mean(self.ell2))

    def solve(self, alpha: np.ndarray, x0: Optional[np.ndarray] = None) -> HelmholtzResult:
        return solve_helmholtz(alpha, self.ell2, self.freq, self.cfg, x0=x0)

    def residual(self, alpha_bar: np.ndarray, alpha: np.ndarray) -> float:
        """||L(alpha_bar) - alpha|| / ||alpha||, or the absolute norm for a zero source."""
        grid = self.freq.grid
        applied = inverse_transform(apply_operator(forward_transform(alpha_bar, grid), self.ell2, self.freq), grid)
        r = float(np.linalg.norm(applied - alpha))
        scale = float(np.linalg.norm(alpha))
        return r / scale if scale > 0.0 else r
