"""Lemaitre damage coupled to J2 plasticity with linear isotropic hardening."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ductile import tensors as tn
from ductile.errors import ReturnMappingError
from ductile.materials import ElasticModuli, Material, VoxelState

logger = logging.getLogger(__name__)

SQRT_2_3 = math.sqrt(2.0 / 3.0)


@dataclass(frozen=True)
class LemaitreParams:
    """Flow stress sigma_Y + k eps_p and a linear damage law between eps_C and eps_R."""
    sigma_Y: float = 1000.0
    k: float = 10000.0
    eps_C: float = 0.03
    eps_R: float = 0.2
    D_max: float = 0.99

    def __post_init__(self):
        if self.sigma_Y <= 0.0:
            raise ValueError(f"sigma_Y must be positive, got {self.sigma_Y}")
        if self.k < 0.0:
            raise ValueError(f"Hardening modulus must be non-negative, got {self.k}")
        if not 0.0 <= self.eps_C < self.eps_R:
            raise ValueError(f"Need 0 <= eps_C < eps_R, got eps_C={self.eps_C}, eps_R={self.eps_R}")
        if not 0.0 <= self.D_max < 1.0:
            raise ValueError(f"D_max must lie in [0, 1), got {self.D_max}")


def damage_law(eps_p_bar, params: LemaitreParams) -> np.ndarray:
    """Linear damage in the non-local equivalent plastic strain, capped at D_max."""
    eps = np.asarray(eps_p_bar, dtype=float)
    D = np.clip((eps - params.eps_C) / (params.eps_R - params.eps_C), 0.0, 1.0)
    return np.minimum(D, params.D_max)


def lemaitre_update(
    state_n: VoxelState,
    eps: np.ndarray,
    nonlocal_np1: Dict[str, np.ndarray],
    moduli: ElasticModuli,
    params: LemaitreParams,
) -> Tuple[np.ndarray, np.ndarray, VoxelState]:
    """Radial return on the effective stress, then sigma = (1 - D) sigma_tilde.

    D depends only on the frozen non-local strain, so the nominal tangent is
    (1 - D) times the effective consistent tangent.
    """
    K, mu = moduli.K, moduli.mu
    n = eps.shape[0]
    eps_p_n = state_n.eps_p
    ep_n = state_n.get("eps_p_eq")

    eps_e = eps - eps_p_n
    s_tr = 2.0 * mu * tn.dev(eps_e)
    s_norm = tn.norm(s_tr)
    sigma0 = params.sigma_Y + params.k * ep_n
    phi_tr = s_norm - SQRT_2_3 * sigma0
    plastic = phi_tr > 1e-12 * params.sigma_Y

    denom = 2.0 * mu + 2.0 * params.k / 3.0
    dlam = np.where(plastic, phi_tr / denom, 0.0)
    safe = np.where(s_norm > 0.0, s_norm, 1.0)
    n_hat = s_tr / safe[:, None, None]

    eps_p = eps_p_n + dlam[:, None, None] * n_hat
    ep = ep_n + SQRT_2_3 * dlam
    sigma_tilde = K * tn.trace(eps_e)[:, None, None] * tn.I2 + s_tr - 2.0 * mu * dlam[:, None, None] * n_hat

    D = np.maximum(state_n.get("D"), damage_law(nonlocal_np1["eps_p_eq"], params))
    sigma = (1.0 - D)[:, None, None] * sigma_tilde

    theta = 1.0 - 2.0 * mu * dlam / safe
    theta_bar = np.where(plastic, 2.0 * mu / denom - (1.0 - theta), 0.0)
    r = tn.expand4
    tangent_eff = (
        K * np.broadcast_to(tn.II, (n, 3, 3, 3, 3))
        + r(2.0 * mu * theta) * tn.I4d
        - r(2.0 * mu * theta_bar) * tn.dyad22(n_hat, n_hat)
    )
    tangent = r(1.0 - D) * tangent_eff

    if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(tangent))):
        bad = ~np.isfinite(sigma).all(axis=(1, 2))
        raise ReturnMappingError("Lemaitre", int(np.sum(bad)), float("inf"))

    internal = {
        "eps_p_eq": ep,
        "D": D,
        "sigma_tilde": sigma_tilde,
        "active": plastic.astype(float),
        "eps_p_eq_bar": np.asarray(nonlocal_np1["eps_p_eq"], dtype=float).copy(),
    }
    return sigma, tangent, VoxelState(sigma=sigma, eps_p=eps_p, internal=internal)


class LemaitreMaterial(Material):
    """Non-local Lemaitre matrix regularizing the equivalent plastic strain."""
    name = "lemaitre"
    nonlocal_variables = ("eps_p_eq",)
    damage_variable = "D"

    def __init__(self, moduli: ElasticModuli, params: Optional[LemaitreParams] = None):
        super().__init__(moduli)
        self.params = params or LemaitreParams()

    def initial_state(self, n: int) -> VoxelState:
        return VoxelState.zeros(n, scalars=("eps_p_eq", "D", "active", "eps_p_eq_bar"), tensors=("sigma_tilde",))

    def update(self, state_n, eps, nonlocal_np1, nonlocal_n):
        return lemaitre_update(state_n, eps, nonlocal_np1, self.moduli, self.params)

    def local_sources(self, state: VoxelState) -> Dict[str, np.ndarray]:
        return {"eps_p_eq": state.get("eps_p_eq")}

    def yield_value(self, state: VoxelState) -> np.ndarray:
        """||dev(sigma_tilde)|| - sqrt(2/3) sigma0 at the stored state."""
        s = tn.dev(state.get("sigma_tilde"))
        return tn.norm(s) - SQRT_2_3 * (self.params.sigma_Y + self.params.k * state.get("eps_p_eq"))

    def reference_stress(self) -> float:
        return self.params.sigma_Y

    def describe(self) -> str:
        p = self.params
        return f"lemaitre(E={self.moduli.E:g}, nu={self.moduli.nu:g}, sigma_Y={p.sigma_Y:g}, k={p.k:g})"
