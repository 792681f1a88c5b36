"""Galerkin-FFT mechanical equilibrium with mixed macroscopic strain/stress control."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ductile import tensors as tn
from ductile.errors import KrylovError, NewtonError
from ductile.grid import FrequencyTable, GridSpec, forward_transform, inverse_transform
from ductile.materials import MaterialMap, VoxelState

logger = logging.getLogger(__name__)


class ControlMode(Enum):
    """How a macroscopic tensor component is prescribed."""
    STRAIN = "strain"
    STRESS = "stress"


@dataclass
class MacroLoad:
    """Targets at t_{n+1}: averaged strain where strain-controlled, averaged stress elsewhere."""
    stress_controlled: np.ndarray
    strain: np.ndarray
    stress: np.ndarray

    def __post_init__(self):
        self.stress_controlled = np.asarray(self.stress_controlled, dtype=bool)
        self.strain = np.asarray(self.strain, dtype=float)
        self.stress = np.asarray(self.stress, dtype=float)
        for name, a in (("stress_controlled", self.stress_controlled), ("strain", self.strain), ("stress", self.stress)):
            if a.shape != (3, 3):
                raise ValueError(f"MacroLoad.{name} must be 3x3, got shape {a.shape}")
        if not np.array_equal(self.stress_controlled, self.stress_controlled.T):
            raise ValueError("Control modes must be symmetric in (i, j)")

    @classmethod
    def from_modes(cls, modes: Dict[str, ControlMode], values: Dict[str, float]) -> "MacroLoad":
        """Build from component names ('11', '12', ...) mapped to a mode and a target value."""
        mask = np.zeros((3, 3), dtype=bool)
        strain = np.zeros((3, 3))
        stress = np.zeros((3, 3))
        for name, (i, j) in zip(tn.COMPONENT_NAMES, tn.COMPONENTS):
            mode = ControlMode(modes.get(name, ControlMode.STRESS))
            value = float(values.get(name, 0.0))
            target = stress if mode is ControlMode.STRESS else strain
            mask[i, j] = mask[j, i] = mode is ControlMode.STRESS
            target[i, j] = target[j, i] = value
        return cls(stress_controlled=mask, strain=strain, stress=stress)

    @property
    def stress_mask(self) -> np.ndarray:
        return self.stress_controlled.astype(float)

    @property
    def strain_mask(self) -> np.ndarray:
        return 1.0 - self.stress_mask


@dataclass
class NewtonConfig:
    """Tolerances of the mechanical Newton-Raphson and its inner CG."""
    tolerance: float = 1e-6
    max_iterations: int = 30
    cg_tolerance: float = 1e-8
    cg_max_iterations: int = 2000

    def __post_init__(self):
        if self.tolerance <= 0.0 or self.cg_tolerance <= 0.0:
            raise ValueError(f"Tolerances must be positive, got {self.tolerance} and {self.cg_tolerance}")
        if self.max_iterations < 1 or self.cg_max_iterations < 1:
            raise ValueError("Iteration caps must be >= 1")


class ProjectionOperator:
    """Galerkin projection onto compatible strain fields, applied mode by mode in closed form.

    At the zero frequency only stress-controlled components pass, which adds
    the macroscopic stress constraints to the equilibrium residual.
    """

    def __init__(self, freq: FrequencyTable, stress_mask: Optional[np.ndarray] = None):
        self.freq = freq
        self.grid = freq.grid
        self.stress_mask = np.zeros((3, 3)) if stress_mask is None else np.asarray(stress_mask, dtype=float)
        xi = freq.derivative
        norm2 = freq.norm2
        self._free = norm2 > 1e-12 * max(float(norm2.max()), 1.0)
        safe = np.where(self._free, norm2, 1.0)
        self._xi = np.where(self._free[..., None], xi, 0.0)
        self._inv_norm2 = np.where(self._free, 1.0 / safe, 0.0)

    def apply_hat(self, tau_hat: np.ndarray) -> np.ndarray:
        """Project a tensor spectrum of shape (N1, N2, N3, 3, 3)."""
        xi = self._xi
        v = np.einsum("...ij,...j->...i", tau_hat, np.conj(xi))
        s = np.einsum("...i,...i->...", np.conj(xi), v)
        inv = self._inv_norm2[..., None, None]
        xv = xi[..., :, None] * v[..., None, :]
        out = (xv + np.swapaxes(xv, -1, -2)) * inv
        out -= (s * self._inv_norm2 ** 2)[..., None, None] * xi[..., :, None] * xi[..., None, :]
        t0 = tau_hat[0, 0, 0]
        out[0, 0, 0] = self.stress_mask * 0.5 * (t0 + t0.T)
        return out

    def apply(self, tau: np.ndarray) -> np.ndarray:
        """Real-space projection G*(tau)."""
        return inverse_transform(self.apply_hat(forward_transform(tau, self.grid)), self.grid)

    def tensor(self) -> np.ndarray:
        """Dense operator per mode, shape (N1, N2, N3, 3, 3, 3, 3)."""
        out = np.zeros(self.grid.cells + (3, 3, 3, 3), dtype=complex)
        for k, l in tn.COMPONENTS:
            unit = np.zeros(self.grid.cells + (3, 3), dtype=complex)
            unit[..., k, l] = unit[..., l, k] = 1.0 if k == l else 0.5
            column = self.apply_hat(unit)
            out[..., k, l] = column
            out[..., l, k] = column
        return out


def build_projection(grid: GridSpec, freq: FrequencyTable, stress_mask: Optional[np.ndarray] = None) -> ProjectionOperator:
    if freq.grid != grid:
        raise ValueError("Frequency table was built for a different grid")
    return ProjectionOperator(freq, stress_mask)


def apply_G(stress: np.ndarray, op: ProjectionOperator, stress_target: Optional[np.ndarray] = None) -> np.ndarray:
    """Equilibrium residual G*(sigma - Sigma_bar); Sigma_bar enters at the zero frequency only."""
    r = op.apply(stress)
    if stress_target is not None:
        r -= op.stress_mask * np.asarray(stress_target, dtype=float)
    return r


@dataclass
class NewtonResult:
    """Converged mechanical state of one staggered iterate."""
    strain: np.ndarray
    stress: np.ndarray
    states: Dict[int, VoxelState]
    iterations: int
    cg_iterations: int
    residual: float


def residual_norm(r: np.ndarray, stress: np.ndarray, reference_stress: float) -> float:
    """RMS of the residual field over max(||<sigma>||, 1e-3 * reference stress)."""
    rms = float(np.sqrt(np.mean(np.sum(r ** 2, axis=(-2, -1)))))
    mean = float(np.linalg.norm(stress.mean(axis=(0, 1, 2))))
    return rms / max(mean, 1e-3 * reference_stress)


def newton_solve(
    material_map: MaterialMap,
    states_n: Dict[int, VoxelState],
    eps_start: np.ndarray,
    nonlocal_np1: Dict[str, np.ndarray],
    nonlocal_n: Dict[str, np.ndarray],
    load: MacroLoad,
    op: ProjectionOperator,
    cfg: Optional[NewtonConfig] = None,
) -> NewtonResult:
    """Equilibrium at t_{n+1} for frozen non-local fields.

    Starts from eps_start shifted so that its strain-controlled averages hit
    the targets; the iteration count is the number of linearized solves.
    Material updates always start from the converged states_n.
    """
    cfg = cfg or NewtonConfig()
    shape = eps_start.shape
    size = eps_start.size
    ref = material_map.reference_stress()

    mean_start = eps_start.mean(axis=(0, 1, 2))
    eps = eps_start + load.strain_mask * (load.strain - mean_start)

    cg_total = 0
    for iteration in range(cfg.max_iterations + 1):
        sigma, tangent, states = material_map.evaluate(states_n, eps, nonlocal_np1, nonlocal_n)
        r = apply_G(sigma, op, load.stress)
        res = residual_norm(r, sigma, ref)
        if not np.isfinite(res):
            raise NewtonError(iteration, res)
        logger.debug("Newton %d: residual %.3e", iteration, res)
        if res <= cfg.tolerance:
            return NewtonResult(eps, sigma, states, iteration, cg_total, res)
        if iteration == cfg.max_iterations:
            break

        c_sym = tn.major_sym(tangent)

        def matvec(x):
            d = np.reshape(x, shape)
            return op.apply(tn.ddot42(c_sym, d)).ravel()

        A = LinearOperator((size, size), matvec=matvec, dtype=float)
        count = 0

        def callback(_):
            nonlocal count
            count += 1

        d_eps, info = cg(A, -r.ravel(), rtol=cfg.cg_tolerance, atol=0.0, maxiter=cfg.cg_max_iterations, callback=callback)
        cg_total += count
        if info != 0:
            b_norm = float(np.linalg.norm(r))
            rel = float(np.linalg.norm(matvec(d_eps) + r.ravel())) / b_norm if b_norm > 0.0 else 0.0
            raise KrylovError("mechanics", count, rel)
        eps = eps + np.reshape(d_eps, shape)

    raise NewtonError(cfg.max_iterations, res)
