"""Second- and fourth-order tensor algebra on stacks of voxels.

Tensors are stored with the voxel axes first and the tensor indices last,
e.g. a stress field on an (N1, N2, N3) grid has shape (N1, N2, N3, 3, 3) and a
material point batch has shape (n, 3, 3).
"""
from typing import List, Tuple

import numpy as np

# symmetric tensor components in the order used for loads and output
COMPONENTS: List[Tuple[int, int]] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
COMPONENT_NAMES: List[str] = ["11", "22", "33", "12", "13", "23"]

I2 = np.eye(3)
I4 = np.einsum("ik,jl->ijkl", I2, I2)
I4rt = np.einsum("il,jk->ijkl", I2, I2)
I4s = 0.5 * (I4 + I4rt)
II = np.einsum("ij,kl->ijkl", I2, I2)
I4d = I4s - II / 3.0


def trace(a: np.ndarray) -> np.ndarray:
    """Trace of a stack of 3x3 tensors."""
    return np.einsum("...ii->...", a)


def dev(a: np.ndarray) -> np.ndarray:
    """Deviatoric part."""
    return a - trace(a)[..., None, None] * I2 / 3.0


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def ddot22(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a_ij b_ij"""
    return np.einsum("...ij,...ij->...", a, b)


def ddot42(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A_ijkl b_kl"""
    return np.einsum("...ijkl,...kl->...ij", A, b)


def ddot44(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A_ijmn B_mnkl"""
    return np.einsum("...ijmn,...mnkl->...ijkl", A, B)


def dyad22(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a_ij b_kl"""
    return np.einsum("...ij,...kl->...ijkl", a, b)


def norm(a: np.ndarray) -> np.ndarray:
    """Frobenius norm of each tensor in the stack."""
    return np.sqrt(ddot22(a, a))


def isotropic_stiffness(K, mu) -> np.ndarray:
    """C = K I⊗I + 2 mu I_dev, broadcast over array-valued moduli."""
    K = np.asarray(K, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return K[..., None, None, None, None] * II + 2.0 * mu[..., None, None, None, None] * I4d


def major_sym(A: np.ndarray) -> np.ndarray:
    """Major-symmetric part (A_ijkl + A_klij) / 2."""
    return 0.5 * (A + np.einsum("...ijkl->...klij", A))


def to_components(a: np.ndarray) -> np.ndarray:
    """Six symmetric components (11, 22, 33, 12, 13, 23) of the last two axes."""
    return np.stack([a[..., i, j] for i, j in COMPONENTS], axis=-1)


def from_components(v) -> np.ndarray:
    """Symmetric tensor from six components (11, 22, 33, 12, 13, 23)."""
    v = np.asarray(v, dtype=float)
    a = np.zeros(v.shape[:-1] + (3, 3))
    for c, (i, j) in enumerate(COMPONENTS):
        a[..., i, j] = v[..., c]
        a[..., j, i] = v[..., c]
    return a


def expand4(v: np.ndarray) -> np.ndarray:
    """Broadcast a per-voxel scalar against fourth-order tensors."""
    return np.asarray(v)[..., None, None, None, None]
