"""History CSV files and legacy VTK structured-points snapshots."""
import csv
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import vtk
from vtk.util import numpy_support

from ductile import tensors as tn
from ductile.driver import IncrementRecord, SimulationHistory, SimulationState
from ductile.grid import GridSpec
from ductile.materials import MaterialMap

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = (
    ["increment", "time"]
    + [f"E{c}" for c in tn.COMPONENT_NAMES]
    + [f"S{c}" for c in tn.COMPONENT_NAMES]
    + ["staggered_iterations", "newton_iterations", "cg_iterations", "helmholtz_iterations",
       "error", "cutbacks", "wall_time"]
)
INT_COLUMNS = ("increment", "staggered_iterations", "newton_iterations", "cg_iterations",
               "helmholtz_iterations", "cutbacks")


def write_history_csv(history: SimulationHistory, path: Union[str, Path]):
    """One row per increment; floats are written with repr so they parse back exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for r in history:
            writer.writerow(
                [r.increment, repr(float(r.time))]
                + [repr(float(v)) for v in tn.to_components(r.strain)]
                + [repr(float(v)) for v in tn.to_components(r.stress)]
                + [r.staggered_iterations, r.newton_iterations, r.cg_iterations, r.helmholtz_iterations,
                   repr(float(r.error)), r.cutbacks, repr(float(r.wall_time))]
            )


def read_history_csv(path: Union[str, Path]) -> SimulationHistory:
    history = SimulationHistory()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(HISTORY_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing history column(s) {sorted(missing)}")
        for row in reader:
            values = {k: (int(row[k]) if k in INT_COLUMNS else float(row[k])) for k in HISTORY_COLUMNS}
            history.append(IncrementRecord(
                increment=values["increment"],
                time=values["time"],
                strain=tn.from_components([values[f"E{c}"] for c in tn.COMPONENT_NAMES]),
                stress=tn.from_components([values[f"S{c}"] for c in tn.COMPONENT_NAMES]),
                staggered_iterations=values["staggered_iterations"],
                newton_iterations=values["newton_iterations"],
                cg_iterations=values["cg_iterations"],
                helmholtz_iterations=values["helmholtz_iterations"],
                error=values["error"],
                cutbacks=values["cutbacks"],
                wall_time=values["wall_time"],
            ))
    return history


def _voxel_major(field: np.ndarray, n: int) -> np.ndarray:
    """Flatten the three voxel axes with x1 fastest, keeping component axes."""
    comps = field.shape[3:]
    moved = np.transpose(field, (2, 1, 0) + tuple(range(3, field.ndim)))
    return np.ascontiguousarray(moved.reshape((n,) + (int(np.prod(comps)),) if comps else (n,)))


def write_field_snapshot(fields: Dict[str, np.ndarray], grid: GridSpec, path: Union[str, Path]):
    """ASCII legacy structured points with one point per voxel center.

    Scalar fields have shape (N1, N2, N3); tensor fields (N1, N2, N3, 3, 3).
    """
    dataset = vtk.vtkStructuredPoints()
    dataset.SetDimensions(*grid.cells)
    h = grid.spacing
    dataset.SetOrigin(*(0.5 * s for s in h))
    dataset.SetSpacing(*h)
    n = grid.n_voxels
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        grid.check_field(values, name)
        if values.shape[3:] not in ((), (3,), (3, 3)):
            raise ValueError(f"Field '{name}' has unsupported component shape {values.shape[3:]}")
        array = numpy_support.numpy_to_vtk(_voxel_major(values, n), deep=True)
        array.SetName(name)
        dataset.GetPointData().AddArray(array)

    writer = vtk.vtkStructuredPointsWriter()
    writer.SetFileName(str(path))
    writer.SetFileVersion(42)
    writer.SetFileTypeToASCII()
    writer.SetInputData(dataset)
    writer.Write()
    logger.debug("Wrote snapshot %s with fields %s", path, sorted(fields))


def read_field_snapshot(path: Union[str, Path]) -> Tuple[GridSpec, Dict[str, np.ndarray]]:
    """Read a snapshot written by write_field_snapshot back into grid-shaped arrays."""
    if not Path(path).exists():
        raise FileNotFoundError(path)
    reader = vtk.vtkStructuredPointsReader()
    reader.SetFileName(str(path))
    reader.ReadAllScalarsOn()
    reader.ReadAllVectorsOn()
    reader.ReadAllTensorsOn()
    reader.ReadAllFieldsOn()
    reader.Update()
    dataset = reader.GetOutput()
    cells = tuple(int(d) for d in dataset.GetDimensions())
    spacing = dataset.GetSpacing()
    grid = GridSpec(cells, tuple(n * s for n, s in zip(cells, spacing)))
    fields = {}
    data = dataset.GetPointData()
    for i in range(data.GetNumberOfArrays()):
        array = data.GetArray(i)
        values = numpy_support.vtk_to_numpy(array)
        comps = array.GetNumberOfComponents()
        shape = {1: (), 3: (3,), 9: (3, 3)}[comps]
        values = values.reshape((cells[2], cells[1], cells[0]) + shape)
        fields[array.GetName()] = np.transpose(values, (2, 1, 0) + tuple(range(3, values.ndim)))
    return grid, fields


def snapshot_fields(material_map: MaterialMap, state: SimulationState, phase_index: np.ndarray) -> Dict[str, np.ndarray]:
    """Fields written at a snapshot: phases, damage, non-local fields, strain and stress."""
    fields = {
        "phase": phase_index.astype(float),
        "damage": material_map.damage(state.states),
        "strain": state.strain,
        "stress": state.stress,
    }
    names = {m.damage_variable for m in material_map.materials.values() if m.damage_variable}
    for name in sorted(names) + ["eps0_p", "eps_p_eq"]:
        if any(name in s.internal for s in state.states.values()):
            fields[name] = material_map.gather(state.states, name)
    for name, values in state.nonlocal_fields.items():
        fields[f"{name}_bar"] = values
    return fields
