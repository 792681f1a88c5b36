"""Voxelized RVEs: phase grids, the voxel file format and the RVE generators."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ductile.errors import PackingError
from ductile.grid import GridSpec

logger = logging.getLogger(__name__)

MAGIC = "DUCTILE-VOXELS"
VERSION = 1
MODELS = ("elastic", "gtn", "lemaitre")


@dataclass
class PhaseDefinition:
    """Model kind and parameters of one phase; `ell` is its characteristic length."""
    model: str
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"Unknown material model '{self.model}', expected one of {MODELS}")

    @property
    def ell(self) -> Optional[float]:
        return self.params.get("ell")


def default_phases() -> Dict[int, PhaseDefinition]:
    """Damaging matrix (0) with elastic inclusions (1); parameters come from the run config."""
    return {0: PhaseDefinition("gtn"), 1: PhaseDefinition("elastic")}


@dataclass
class PhaseGrid:
    """Phase index per voxel plus the phase table."""
    grid: GridSpec
    phase_index: np.ndarray
    phases: Dict[int, PhaseDefinition] = field(default_factory=default_phases)

    def __post_init__(self):
        self.phase_index = np.asarray(self.phase_index)
        if self.phase_index.shape != self.grid.cells:
            raise ValueError(f"Phase index shape {self.phase_index.shape} does not match cells {self.grid.cells}")
        if self.phase_index.size and (self.phase_index.min() < 0 or self.phase_index.max() > 255):
            raise ValueError("Phase indices must lie in [0, 255]")
        self.phase_index = self.phase_index.astype(np.uint8)
        missing = sorted(set(int(p) for p in np.unique(self.phase_index)) - set(self.phases))
        if missing:
            raise ValueError(f"Phase index {missing} has no entry in the phase table")

    def volume_fraction(self, phase: int) -> float:
        return float(np.mean(self.phase_index == phase))

    def present_phases(self):
        return sorted(int(p) for p in np.unique(self.phase_index))

    def with_phases(self, phases: Dict[int, PhaseDefinition]) -> "PhaseGrid":
        return PhaseGrid(self.grid, self.phase_index.copy(), phases)

    def refine(self, factor: int) -> "PhaseGrid":
        """Split every voxel into factor^dims voxels, keeping the digitized topology."""
        if factor < 1:
            raise ValueError(f"Refinement factor must be >= 1, got {factor}")
        reps = [factor, factor, factor if self.grid.dims == 3 else 1]
        index = self.phase_index
        for axis, r in enumerate(reps):
            index = np.repeat(index, r, axis=axis)
        lengths = self.grid.lengths
        if self.grid.dims == 2:
            # keep the out-of-plane voxel cubic
            lengths = (lengths[0], lengths[1], lengths[2] / factor)
        grid = GridSpec(tuple(n * r for n, r in zip(self.grid.cells, reps)), lengths)
        return PhaseGrid(grid, index, dict(self.phases))


def _format_value(v: float) -> str:
    return repr(float(v))


def write_microstructure(phase_grid: PhaseGrid, path: Union[str, Path], binary: bool = False):
    """Write the voxel file: text header then phase indices with x1 fastest."""
    g = phase_grid.grid
    lines = [
        f"{MAGIC} {VERSION}",
        "CELLS " + " ".join(str(n) for n in g.cells),
        "LENGTHS " + " ".join(_format_value(l) for l in g.lengths),
    ]
    for pid in sorted(phase_grid.phases):
        phase = phase_grid.phases[pid]
        items = " ".join(f"{k}={_format_value(v)}" for k, v in sorted(phase.params.items()))
        lines.append(f"PHASE {pid} {phase.model} {items}".rstrip())
    data = phase_grid.phase_index.ravel(order="F")
    path = Path(path)
    if binary:
        lines.append("DATA raw8")
        path.write_bytes(("\n".join(lines) + "\n").encode("ascii") + data.astype(np.uint8).tobytes())
    else:
        lines.append("DATA ascii")
        n1 = g.cells[0]
        rows = [" ".join(str(v) for v in data[i:i + n1]) for i in range(0, data.size, n1)]
        path.write_text("\n".join(lines + rows) + "\n")
    logger.info("Wrote %s voxels to %s", "x".join(str(n) for n in g.cells), path)


def _parse_phase(tokens, line_no: int):
    if len(tokens) < 3:
        raise ValueError(f"line {line_no}: PHASE needs an id and a model")
    try:
        pid = int(tokens[1])
    except ValueError:
        raise ValueError(f"line {line_no}: bad phase id '{tokens[1]}'") from None
    params = {}
    for item in tokens[3:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"line {line_no}: expected key=value, got '{item}'")
        try:
            params[key] = float(value)
        except ValueError:
            raise ValueError(f"line {line_no}: value of '{key}' is not a number: '{value}'") from None
    return pid, PhaseDefinition(tokens[2], params)


def load_microstructure(path: Union[str, Path]) -> PhaseGrid:
    """Read a voxel file written by write_microstructure (or by hand)."""
    raw = Path(path).read_bytes()
    cells = lengths = None
    phases: Dict[int, PhaseDefinition] = {}
    offset = 0
    line_no = 0
    mode = None
    while offset < len(raw):
        end = raw.find(b"\n", offset)
        if end < 0:
            end = len(raw)
        line = raw[offset:end].decode("ascii", errors="replace").strip()
        offset = end + 1
        line_no += 1
        if not line:
            continue
        tokens = line.split()
        if line_no == 1:
            if tokens[0] != MAGIC or len(tokens) != 2 or tokens[1] != str(VERSION):
                raise ValueError(f"{path}: not a {MAGIC} {VERSION} file (header '{line}')")
            continue
        key = tokens[0]
        try:
            if key == "CELLS":
                cells = tuple(int(t) for t in tokens[1:])
            elif key == "LENGTHS":
                lengths = tuple(float(t) for t in tokens[1:])
            elif key == "PHASE":
                pid, phase = _parse_phase(tokens, line_no)
                phases[pid] = phase
            elif key == "DATA":
                mode = tokens[1] if len(tokens) > 1 else ""
                break
            else:
                raise ValueError(f"unknown header keyword '{key}'")
        except ValueError as exc:
            raise ValueError(f"{path}: line {line_no}: {exc}") from None

    if cells is None or len(cells) != 3:
        raise ValueError(f"{path}: missing or malformed CELLS line")
    if lengths is None or len(lengths) != 3:
        raise ValueError(f"{path}: missing or malformed LENGTHS line")
    grid = GridSpec(cells, lengths)
    n = grid.n_voxels
    if mode == "ascii":
        try:
            data = np.array(raw[offset:].split(), dtype=np.int64)
        except ValueError:
            raise ValueError(f"{path}: non-integer phase index in data section") from None
    elif mode == "raw8":
        data = np.frombuffer(raw[offset:], dtype=np.uint8).astype(np.int64)
    else:
        raise ValueError(f"{path}: DATA must be 'ascii' or 'raw8', got '{mode}'")
    if data.size != n:
        raise ValueError(f"{path}: expected {n} phase indices for cells {cells}, found {data.size}")
    index = data.reshape(cells, order="F")
    if not phases:
        phases = default_phases()
    return PhaseGrid(grid, index, phases)


def generate_rve_2d(grid: GridSpec, volume_fraction: float = 0.1,
                    phases: Optional[Dict[int, PhaseDefinition]] = None) -> PhaseGrid:
    """Centered circular inclusion (phase 1) in a matrix (phase 0).

    A voxel belongs to the inclusion when its center lies inside the disc of
    area volume_fraction * L1 * L2.
    """
    if grid.dims != 2:
        raise ValueError(f"generate_rve_2d needs a 2D grid, got cells {grid.cells}")
    if not 0.0 <= volume_fraction < 1.0:
        raise ValueError(f"Volume fraction must lie in [0, 1), got {volume_fraction}")
    L1, L2 = grid.lengths[0], grid.lengths[1]
    radius = math.sqrt(volume_fraction * L1 * L2 / math.pi)
    if 2.0 * radius > min(L1, L2):
        raise ValueError(f"Disc of fraction {volume_fraction} does not fit in the cell")
    x = grid.voxel_centers()
    r2 = (x[..., 0] - 0.5 * L1) ** 2 + (x[..., 1] - 0.5 * L2) ** 2
    index = (r2 < radius ** 2).astype(np.uint8)
    return PhaseGrid(grid, index, phases or default_phases())


def sphere_radius(n_spheres: int, volume_fraction: float, lengths) -> float:
    volume = float(np.prod(lengths))
    return (volume_fraction * volume * 3.0 / (4.0 * math.pi * n_spheres)) ** (1.0 / 3.0)


def periodic_distance(a: np.ndarray, b: np.ndarray, lengths) -> np.ndarray:
    """Minimum-image distance between points under periodic wrapping."""
    L = np.asarray(lengths, dtype=float)
    d = a - b
    d -= L * np.round(d / L)
    return np.sqrt(np.sum(d ** 2, axis=-1))


def rsa_sphere_centers(n_spheres: int, radius: float, lengths, rng: np.random.Generator,
                       max_attempts: int = 100000) -> np.ndarray:
    """Random sequential adsorption of non-overlapping periodic spheres."""
    L = np.asarray(lengths, dtype=float)
    centers = np.empty((0, 3))
    attempts = 0
    while len(centers) < n_spheres and attempts < max_attempts:
        attempts += 1
        candidate = rng.random(3) * L
        if len(centers) == 0 or np.all(periodic_distance(centers, candidate, L) >= 2.0 * radius):
            centers = np.vstack([centers, candidate])
    if len(centers) < n_spheres:
        fraction = len(centers) * 4.0 / 3.0 * math.pi * radius ** 3 / float(np.prod(L))
        raise PackingError(len(centers), n_spheres, fraction)
    logger.debug("RSA placed %d spheres in %d attempts", n_spheres, attempts)
    return centers


def generate_rve_3d_spheres(grid: GridSpec, n_spheres: int = 30, volume_fraction: float = 0.2,
                            seed: int = 0, max_attempts: int = 100000,
                            phases: Optional[Dict[int, PhaseDefinition]] = None) -> PhaseGrid:
    """Identical periodic spheres (phase 1) placed by RSA in a matrix (phase 0)."""
    if grid.dims != 3:
        raise ValueError(f"generate_rve_3d_spheres needs a 3D grid, got cells {grid.cells}")
    if n_spheres < 1:
        raise ValueError(f"Need at least one sphere, got {n_spheres}")
    if not 0.0 < volume_fraction < 1.0:
        raise ValueError(f"Volume fraction must lie in (0, 1), got {volume_fraction}")
    rng = np.random.default_rng(seed)
    radius = sphere_radius(n_spheres, volume_fraction, grid.lengths)
    centers = rsa_sphere_centers(n_spheres, radius, grid.lengths, rng, max_attempts)

    x = grid.voxel_centers().reshape(-1, 3)
    inside = np.zeros(x.shape[0], dtype=bool)
    for c in centers:
        inside |= periodic_distance(x, c, grid.lengths) < radius
    index = inside.reshape(grid.cells).astype(np.uint8)
    logger.info("Sphere RVE: %d spheres, radius %.4g, voxel fraction %.4f", n_spheres, radius, inside.mean())
    return PhaseGrid(grid, index, phases or default_phases())
