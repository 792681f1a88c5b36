"""Periodic voxel grid, Fourier frequency tables and spectral derivatives."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
import scipy.fft

logger = logging.getLogger(__name__)

FFT_AXES = (0, 1, 2)


class FrequencyScheme(Enum):
    """Derivative rule used in Fourier space."""
    CONTINUOUS = "continuous"
    WILLOT = "willot"


@dataclass(frozen=True)
class GridSpec:
    """Regular periodic array of voxels. 2D grids have a single voxel along x3."""
    cells: Tuple[int, int, int]
    lengths: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        lengths = tuple(float(l) for l in self.lengths)
        if len(cells) == 2:
            cells = cells + (1,)
        if len(lengths) == 2:
            lengths = lengths + (lengths[0] / cells[0],)
        if len(cells) != 3 or len(lengths) != 3:
            raise ValueError(f"Grid needs three cell counts and lengths, got {self.cells} and {self.lengths}")
        if any(n < 1 for n in cells):
            raise ValueError(f"Cell counts must be >= 1, got {cells}")
        if any(not np.isfinite(l) or l <= 0.0 for l in lengths):
            raise ValueError(f"Cell lengths must be positive, got {lengths}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def square(cls, n: int, dims: int = 2, length: float = 1.0) -> "GridSpec":
        """n^dims voxels on a cube (or square) of edge `length`."""
        if dims == 2:
            return cls((n, n, 1), (length, length, length / n))
        if dims == 3:
            return cls((n, n, n), (length, length, length))
        raise ValueError(f"dims must be 2 or 3, got {dims}")

    @property
    def dims(self) -> int:
        return 2 if self.cells[2] == 1 else 3

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return tuple(l / n for l, n in zip(self.lengths, self.cells))

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.cells))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.cells

    def axis_centers(self, axis: int) -> np.ndarray:
        """Voxel center coordinates (1/2 + n) h along one axis."""
        h = self.spacing[axis]
        return (0.5 + np.arange(self.cells[axis])) * h

    def voxel_centers(self) -> np.ndarray:
        """Center coordinates of every voxel, shape (N1, N2, N3, 3)."""
        axes = np.meshgrid(*(self.axis_centers(a) for a in range(3)), indexing="ij")
        return np.stack(axes, axis=-1)

    def check_field(self, field: np.ndarray, name: str = "field"):
        if field.shape[:3] != self.cells:
            raise ValueError(f"{name} has shape {field.shape}, expected leading axes {self.cells}")

    def mean(self, field: np.ndarray) -> np.ndarray:
        """Volume average over the voxel axes."""
        self.check_field(field)
        return field.mean(axis=FFT_AXES)


@dataclass
class FrequencyTable:
    """Frequencies of a grid in the FFT library's wrapped storage order.

    `xi` holds the scheme's frequency vector per mode (real for the continuous
    scheme, complex for the rotated scheme). `derivative` is the symbol used by
    the spectral operators; for the continuous scheme it equals `xi` except that
    per-axis Nyquist entries are zero, so that derivatives of real fields stay real.
    """
    grid: GridSpec
    scheme: FrequencyScheme
    xi: np.ndarray
    derivative: np.ndarray

    @property
    def norm2(self) -> np.ndarray:
        """|xi|^2 of the derivative symbol, shape (N1, N2, N3)."""
        return np.sum(np.abs(self.derivative) ** 2, axis=-1)

    def axis_values(self, axis: int) -> np.ndarray:
        """Frequencies along one axis with the other indices at zero."""
        index = [0, 0, 0]
        index[axis] = slice(None)
        return self.xi[tuple(index) + (axis,)]


def _integer_frequencies(n: int) -> np.ndarray:
    return np.rint(scipy.fft.fftfreq(n, d=1.0 / n)).astype(int)


def build_frequencies(grid: GridSpec, scheme: FrequencyScheme = FrequencyScheme.CONTINUOUS) -> FrequencyTable:
    """Build the frequency table of `grid` for the given derivative rule."""
    if isinstance(scheme, str):
        scheme = FrequencyScheme(scheme)
    if any(n < 1 for n in grid.cells):
        raise ValueError(f"Cannot build frequencies for cells {grid.cells}")

    k = [_integer_frequencies(n) for n in grid.cells]
    kk = np.meshgrid(*k, indexing="ij")
    xi_cont = np.stack([2.0 * np.pi * kk[a] / grid.lengths[a] for a in range(3)], axis=-1)

    if scheme is FrequencyScheme.CONTINUOUS:
        derivative = xi_cont.astype(complex)
        for a, n in enumerate(grid.cells):
            if n % 2 == 0 and n > 1:
                nyquist = [slice(None)] * 3
                nyquist[a] = n // 2
                derivative[tuple(nyquist) + (a,)] = 0.0
        xi = xi_cont
    else:
        h = grid.spacing
        theta = [2.0 * np.pi * kk[a] / grid.cells[a] for a in range(3)]
        # (1 + e^{i theta}) / 2 per axis
        half = [0.5 * (1.0 + np.exp(1j * t)) for t in theta]
        components = []
        for a in range(3):
            comp = -1j * (np.exp(1j * theta[a]) - 1.0) / h[a]
            for b in range(3):
                if b != a:
                    comp = comp * half[b]
            components.append(comp)
        xi = np.stack(components, axis=-1)
        derivative = xi

    logger.debug("Built %s frequency table for cells %s", scheme.value, grid.cells)
    return FrequencyTable(grid=grid, scheme=scheme, xi=xi, derivative=derivative)


def forward_transform(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Unnormalized DFT over the voxel axes; trailing axes are components."""
    grid.check_field(field)
    return scipy.fft.fftn(field, axes=FFT_AXES)


def inverse_transform(spectrum: np.ndarray, grid: GridSpec, real: bool = True) -> np.ndarray:
    """Inverse of forward_transform. Returns the real part unless real=False."""
    grid.check_field(spectrum, "spectrum")
    out = scipy.fft.ifftn(spectrum, axes=FFT_AXES)
    return out.real if real else out


def gradient_spectral(scalar_hat: np.ndarray, freq: FrequencyTable) -> np.ndarray:
    """i xi s_hat, shape (N1, N2, N3, 3)."""
    freq.grid.check_field(scalar_hat, "scalar spectrum")
    if scalar_hat.ndim != 3:
        raise ValueError(f"Expected a scalar spectrum, got shape {scalar_hat.shape}")
    return 1j * freq.derivative * scalar_hat[..., None]


def divergence_spectral(vector_hat: np.ndarray, freq: FrequencyTable) -> np.ndarray:
    """i conj(xi) . v_hat, the negative adjoint of gradient_spectral."""
    freq.grid.check_field(vector_hat, "vector spectrum")
    if vector_hat.shape[3:] != (3,):
        raise ValueError(f"Expected a vector spectrum, got shape {vector_hat.shape}")
    return 1j * np.sum(np.conj(freq.derivative) * vector_hat, axis=-1)


def symmetric_gradient_spectral(vector_hat: np.ndarray, freq: FrequencyTable) -> np.ndarray:
    """Spectrum of the compatible strain sym(grad u), shape (N1, N2, N3, 3, 3)."""
    freq.grid.check_field(vector_hat, "vector spectrum")
    g = 1j * freq.derivative[..., :, None] * vector_hat[..., None, :]
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def tensor_divergence_spectral(tensor_hat: np.ndarray, freq: FrequencyTable) -> np.ndarray:
    """i conj(xi_j) tau_hat_ij, shape (N1, N2, N3, 3)."""
    freq.grid.check_field(tensor_hat, "tensor spectrum")
    return 1j * np.einsum("...ij,...j->...i", tensor_hat, np.conj(freq.derivative))
