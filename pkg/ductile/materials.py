"""Material point models: elastic moduli, voxel state batches and the model interface."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ductile import tensors as tn
from ductile.errors import ActivationBoundaryError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ElasticModuli:
    """Isotropic elastic constants. Stresses are in MPa throughout."""
    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def K(self) -> float:
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    def stiffness(self) -> np.ndarray:
        return tn.isotropic_stiffness(self.K, self.mu)


def elastic_update(moduli: ElasticModuli, eps_e: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """sigma = K tr(eps_e) I + 2 mu dev(eps_e) with the isotropic tangent."""
    sigma = moduli.K * tn.trace(eps_e)[..., None, None] * tn.I2 + 2.0 * moduli.mu * tn.dev(eps_e)
    tangent = np.broadcast_to(moduli.stiffness(), eps_e.shape[:-2] + (3, 3, 3, 3))
    return sigma, tangent


@dataclass
class VoxelState:
    """History variables of a batch of voxels sharing one material.

    `internal` maps scalar (or tensor) variable names to arrays whose first
    axis runs over the voxels of the batch.
    """
    sigma: np.ndarray
    eps_p: np.ndarray
    internal: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, n: int, scalars=(), tensors=()) -> "VoxelState":
        internal = {name: np.zeros(n) for name in scalars}
        internal.update({name: np.zeros((n, 3, 3)) for name in tensors})
        return cls(sigma=np.zeros((n, 3, 3)), eps_p=np.zeros((n, 3, 3)), internal=internal)

    @property
    def size(self) -> int:
        return self.sigma.shape[0]

    def copy(self) -> "VoxelState":
        return VoxelState(
            sigma=self.sigma.copy(),
            eps_p=self.eps_p.copy(),
            internal={k: v.copy() for k, v in self.internal.items()},
        )

    def select(self, mask: np.ndarray) -> "VoxelState":
        """Sub-batch of the voxels where `mask` is true."""
        return VoxelState(
            sigma=self.sigma[mask],
            eps_p=self.eps_p[mask],
            internal={k: v[mask] for k, v in self.internal.items()},
        )

    def get(self, name: str) -> np.ndarray:
        if name not in self.internal:
            raise KeyError(f"Voxel state has no variable '{name}'")
        return self.internal[name]


class Material:
    """Base constitutive model acting on a batch of voxels.

    Subclasses list the local variables they regularize in
    `nonlocal_variables` and implement `update`.
    """
    name = "material"
    nonlocal_variables: Tuple[str, ...] = ()
    damage_variable: Optional[str] = None

    def __init__(self, moduli: ElasticModuli):
        self.moduli = moduli

    def initial_state(self, n: int) -> VoxelState:
        return VoxelState.zeros(n, scalars=("active",))

    def update(
        self,
        state_n: VoxelState,
        eps: np.ndarray,
        nonlocal_np1: Dict[str, np.ndarray],
        nonlocal_n: Dict[str, np.ndarray],
    ) -> Tuple[np.ndarray, np.ndarray, VoxelState]:
        """
        Backward-Euler update from the converged state at t_n to total strain `eps`.
        Non-local fields are frozen inputs at t_n and t_{n+1}.
        Returns: (stress, tangent, new state)
        """
        raise NotImplementedError("Subclasses must implement update")

    def local_sources(self, state: VoxelState) -> Dict[str, np.ndarray]:
        """Right-hand sides of the Helmholtz equations, one per non-local variable."""
        return {}

    def damage(self, state: VoxelState) -> np.ndarray:
        if self.damage_variable is None:
            return np.zeros(state.size)
        return state.get(self.damage_variable)

    def reference_stress(self) -> float:
        """Stress scale used to normalize equilibrium residuals."""
        return self.moduli.E * 1e-3

    def describe(self) -> str:
        return f"{self.name}(E={self.moduli.E:g}, nu={self.moduli.nu:g})"


class ElasticMaterial(Material):
    """Linear elastic phase with no internal variables."""
    name = "elastic"

    def update(self, state_n, eps, nonlocal_np1, nonlocal_n):
        sigma, tangent = elastic_update(self.moduli, eps)
        state = VoxelState(sigma=sigma, eps_p=np.zeros_like(eps), internal={"active": np.zeros(eps.shape[0])})
        return sigma, tangent, state


def consistent_tangent_fd(
    material: Material,
    state_n: VoxelState,
    eps: np.ndarray,
    nonlocal_np1: Optional[Dict[str, np.ndarray]] = None,
    nonlocal_n: Optional[Dict[str, np.ndarray]] = None,
    h: float = 1e-7,
) -> np.ndarray:
    """Central finite-difference d(sigma)/d(eps) of a material update, shape (n, 3, 3, 3, 3).

    Raises ActivationBoundaryError when a perturbation flips any voxel between
    elastic and plastic response; retry with a smaller h.
    """
    n = eps.shape[0]
    nonlocal_np1 = nonlocal_np1 or {v: np.zeros(n) for v in material.nonlocal_variables}
    nonlocal_n = nonlocal_n or {v: np.zeros(n) for v in material.nonlocal_variables}
    _, _, base = material.update(state_n, eps, nonlocal_np1, nonlocal_n)
    active = base.internal.get("active", np.zeros(n)) > 0.5

    tangent = np.zeros((n, 3, 3, 3, 3))
    for k, l in tn.COMPONENTS:
        d = np.zeros((3, 3))
        d[k, l] = d[l, k] = h
        columns = []
        for sign in (1.0, -1.0):
            sigma, _, state = material.update(state_n, eps + sign * d, nonlocal_np1, nonlocal_n)
            flipped = (state.internal.get("active", np.zeros(n)) > 0.5) != active
            if np.any(flipped):
                raise ActivationBoundaryError(
                    f"perturbation h={h:g} of component {k + 1}{l + 1} switched "
                    f"{int(np.sum(flipped))} voxel(s) between elastic and plastic"
                )
            columns.append(sigma)
        dsig = (columns[0] - columns[1]) / (2.0 * h)
        if k != l:
            # both eps_kl and eps_lk were perturbed
            dsig = 0.5 * dsig
        tangent[..., k, l] = dsig
        tangent[..., l, k] = dsig
    return tangent


class MaterialMap:
    """Materials of all phases laid over the voxel grid.

    Phase batches are addressed by flat voxel indices in C order, so a field of
    shape (N1, N2, N3, ...) reshaped to (n, ...) lines up with them.
    """

    def __init__(self, phase_index: np.ndarray, materials: Dict[int, Material]):
        self.shape = phase_index.shape
        flat = phase_index.ravel()
        missing = sorted(set(int(p) for p in np.unique(flat)) - set(materials))
        if missing:
            raise ValueError(f"Phase(s) {missing} have no material")
        self.materials = materials
        self.indices = {pid: np.flatnonzero(flat == pid) for pid in sorted(materials)}
        self.indices = {pid: idx for pid, idx in self.indices.items() if idx.size > 0}

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def nonlocal_variables(self) -> Tuple[str, ...]:
        names = []
        for pid in self.indices:
            for name in self.materials[pid].nonlocal_variables:
                if name not in names:
                    names.append(name)
        return tuple(names)

    def reference_stress(self) -> float:
        return max(self.materials[pid].reference_stress() for pid in self.indices)

    def initial_states(self) -> Dict[int, VoxelState]:
        return {pid: self.materials[pid].initial_state(idx.size) for pid, idx in self.indices.items()}

    def evaluate(
        self,
        states_n: Dict[int, VoxelState],
        eps: np.ndarray,
        nonlocal_np1: Dict[str, np.ndarray],
        nonlocal_n: Dict[str, np.ndarray],
    ) -> Tuple[np.ndarray, np.ndarray, Dict[int, VoxelState]]:
        """Update every phase at the strain field `eps` (shape (N1, N2, N3, 3, 3)).

        Returns: (stress field, tangent field, new states)
        """
        n = self.n_voxels
        eps_flat = eps.reshape(n, 3, 3)
        sigma = np.zeros((n, 3, 3))
        tangent = np.zeros((n, 3, 3, 3, 3))
        states = {}
        for pid, idx in self.indices.items():
            material = self.materials[pid]
            bar_np1 = {v: nonlocal_np1[v].ravel()[idx] for v in material.nonlocal_variables}
            bar_n = {v: nonlocal_n[v].ravel()[idx] for v in material.nonlocal_variables}
            s, c, state = material.update(states_n[pid], eps_flat[idx], bar_np1, bar_n)
            sigma[idx] = s
            tangent[idx] = c
            states[pid] = state
        return sigma.reshape(eps.shape), tangent.reshape(self.shape + (3, 3, 3, 3)), states

    def local_sources(self, states: Dict[int, VoxelState]) -> Dict[str, np.ndarray]:
        """Helmholtz sources on the whole grid; zero in phases that do not carry a variable."""
        sources = {v: np.zeros(self.n_voxels) for v in self.nonlocal_variables}
        for pid, idx in self.indices.items():
            for name, values in self.materials[pid].local_sources(states[pid]).items():
                sources[name][idx] = values
        return {v: s.reshape(self.shape) for v, s in sources.items()}

    def gather(self, states: Dict[int, VoxelState], name: str) -> np.ndarray:
        """Scalar internal variable as a grid field, zero where a phase lacks it."""
        out = np.zeros(self.n_voxels)
        for pid, idx in self.indices.items():
            if name in states[pid].internal and states[pid].internal[name].ndim == 1:
                out[idx] = states[pid].internal[name]
        return out.reshape(self.shape)

    def damage(self, states: Dict[int, VoxelState]) -> np.ndarray:
        out = np.zeros(self.n_voxels)
        for pid, idx in self.indices.items():
            out[idx] = self.materials[pid].damage(states[pid])
        return out.reshape(self.shape)

    def plastic_strain(self, states: Dict[int, VoxelState]) -> np.ndarray:
        out = np.zeros((self.n_voxels, 3, 3))
        for pid, idx in self.indices.items():
            out[idx] = states[pid].eps_p
        return out.reshape(self.shape + (3, 3))
