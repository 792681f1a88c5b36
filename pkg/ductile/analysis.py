"""Post-processing of stress-strain histories and damage fields."""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ductile.driver import SimulationHistory
from ductile.grid import FrequencyScheme, GridSpec, build_frequencies, forward_transform

logger = logging.getLogger(__name__)


def peak_stress(history: SimulationHistory, component: str = "11") -> Tuple[float, float]:
    """(strain, stress) at the maximum of the averaged stress component."""
    if len(history) == 0:
        raise ValueError("Empty history has no peak")
    stress = history.stress(component)
    i = int(np.argmax(stress))
    return float(history.strain(component)[i]), float(stress[i])


def strain_at_stress_drop(history: SimulationHistory, fraction: float = 0.5,
                          component: str = "11") -> Optional[float]:
    """Strain at which the stress first falls to `fraction` of its peak after the peak.

    Interpolates linearly between increments; None if the drop never happens.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"Fraction must lie in (0, 1), got {fraction}")
    strain = history.strain(component)
    stress = history.stress(component)
    if len(stress) == 0:
        return None
    i_peak = int(np.argmax(stress))
    target = fraction * stress[i_peak]
    for i in range(i_peak + 1, len(stress)):
        if stress[i] <= target:
            s0, s1 = stress[i - 1], stress[i]
            w = (s0 - target) / (s0 - s1) if s0 != s1 else 1.0
            return float(strain[i - 1] + w * (strain[i] - strain[i - 1]))
    return None


def failure_strain(history: SimulationHistory, component: str = "11") -> Optional[float]:
    return strain_at_stress_drop(history, 0.1, component)


def _plane(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape == grid.cells:
        if grid.dims != 2:
            raise ValueError(f"Band analysis works on 2D grids, got cells {grid.cells}")
        return field[:, :, 0]
    if field.shape == grid.cells[:2] and grid.cells[2] == 1:
        return field
    raise ValueError(f"Field shape {field.shape} does not match cells {grid.cells}")


def _wrapped_offsets(grid: GridSpec, origin: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """In-plane voxel offsets from the voxel `origin`, wrapped to the nearest periodic image."""
    offsets = []
    for axis in (0, 1):
        L = grid.lengths[axis]
        d = grid.axis_centers(axis) - grid.axis_centers(axis)[origin[axis]]
        d = d - L * np.round(d / L)
        offsets.append(d[:, None] if axis == 0 else d[None, :])
    dx, dy = np.broadcast_arrays(offsets[0], offsets[1])
    return dx, dy


def band_angle(field: np.ndarray, grid: GridSpec, threshold: float = 0.5) -> float:
    """Angle in degrees, in [0, 180), between x1 and the damage band.

    Second moments of the power spectrum of the thresholded field give the
    band normal; voxels below threshold * max(field) are set to zero.
    """
    plane = _plane(field, grid)
    peak = float(plane.max())
    if peak <= 0.0:
        raise ValueError("Field has no positive values to analyse")
    w = np.where(plane >= threshold * peak, plane, 0.0)
    freq = build_frequencies(grid, FrequencyScheme.CONTINUOUS)
    power = np.abs(forward_transform((w - w.mean())[:, :, None], grid)) ** 2
    k1 = freq.derivative[..., 0].real
    k2 = freq.derivative[..., 1].real
    m11 = np.sum(power * k1 * k1)
    m22 = np.sum(power * k2 * k2)
    m12 = np.sum(power * k1 * k2)
    normal = 0.5 * math.degrees(math.atan2(2.0 * m12, m11 - m22))
    return (normal + 90.0) % 180.0


def band_width(field: np.ndarray, grid: GridSpec, angle: Optional[float] = None,
               threshold: float = 0.5) -> Tuple[float, float]:
    """Full width at half maximum of the field profile across the band.

    The profile is the maximum of the field in bins of one voxel along the
    band normal through the voxel holding the field maximum. Returns
    (width in voxels, width in length units).
    """
    plane = _plane(field, grid)
    if angle is None:
        angle = band_angle(field, grid, threshold)
    origin = np.unravel_index(int(np.argmax(plane)), plane.shape)
    dx, dy = _wrapped_offsets(grid, origin)
    a = math.radians(angle)
    s = -math.sin(a) * dx + math.cos(a) * dy
    h = min(grid.spacing[0], grid.spacing[1])
    bins = np.round(s / h).astype(int)
    top = -int(bins.min())
    bins += top
    profile = np.full(int(bins.max()) + 1, float(plane.min()))
    np.maximum.at(profile, bins.ravel(), plane.ravel())
    base = float(profile.min())
    half = base + 0.5 * (float(profile[top]) - base)
    lo = hi = top
    while lo > 0 and profile[lo - 1] >= half:
        lo -= 1
    while hi < len(profile) - 1 and profile[hi + 1] >= half:
        hi += 1
    n = hi - lo + 1
    return float(n), float(n * h)


def radial_profile(field: np.ndarray, grid: GridSpec,
                   direction: Sequence[float] = (1.0, 0.0, 0.0)) -> Tuple[np.ndarray, np.ndarray]:
    """Samples of a scalar field along a line through the cell center.

    Returns (signed distance from the center, value at the nearest voxel),
    one sample per voxel spacing, wrapping periodically.
    """
    field = np.asarray(field, dtype=float)
    grid.check_field(field)
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or not np.linalg.norm(d) > 0.0:
        raise ValueError(f"Direction must be a non-zero 3-vector, got {direction}")
    d = d / np.linalg.norm(d)
    active = [i for i in range(3) if grid.cells[i] > 1]
    h = min(grid.spacing[i] for i in active)
    half = 0.5 * min(grid.lengths[i] / max(abs(d[i]), 1e-12) for i in active)
    s = np.arange(-half, half, h)
    center = 0.5 * np.asarray(grid.lengths)
    points = center + s[:, None] * d
    idx = []
    for axis in range(3):
        i = np.floor(points[:, axis] / grid.spacing[axis]).astype(int) % grid.cells[axis]
        idx.append(i)
    return s, field[idx[0], idx[1], idx[2]]
