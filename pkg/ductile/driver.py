"""Time incrementation and the iterative staggered mechanics/Helmholtz scheme."""
import logging
import time as timer
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import scipy.fft

from ductile import tensors as tn
from ductile.errors import ConvergenceError, StaggeredError, StepTooSmallError
from ductile.grid import FrequencyScheme, GridSpec, build_frequencies
from ductile.helmholtz import CGConfig, HelmholtzSolver, length_squared_field
from ductile.materials import MaterialMap, VoxelState
from ductile.mechanics import ControlMode, MacroLoad, NewtonConfig, build_projection, newton_solve

logger = logging.getLogger(__name__)

# denominators below this switch the staggered error to an absolute measure
ERR_FLOOR = 1e-12


@dataclass
class LoadComponent:
    """Target history of one macroscopic component: value + rate * t, or piecewise linear points."""
    mode: ControlMode = ControlMode.STRESS
    rate: float = 0.0
    value: float = 0.0
    points: Optional[List[Tuple[float, float]]] = None

    def __post_init__(self):
        self.mode = ControlMode(self.mode)
        if self.points is not None:
            if self.rate != 0.0 or self.value != 0.0:
                raise ValueError("A load component takes either points or rate/value, not both")
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
                raise ValueError(f"Load points must be [t, value] pairs, got {self.points}")
            if np.any(np.diff(pts[:, 0]) <= 0.0):
                raise ValueError("Load point times must be strictly increasing")

    def at(self, t: float) -> float:
        if self.points is not None:
            pts = np.asarray(self.points, dtype=float)
            return float(np.interp(t, pts[:, 0], pts[:, 1]))
        return self.value + self.rate * t


@dataclass
class LoadHistory:
    """Mixed macroscopic loading over [t_start, t_final] with the step size limits."""
    components: Dict[str, LoadComponent]
    t_final: float
    dt: float
    t_start: float = 0.0
    dt_max: Optional[float] = None

    def __post_init__(self):
        unknown = set(self.components) - set(tn.COMPONENT_NAMES)
        if unknown:
            raise ValueError(f"Unknown load component(s): {sorted(unknown)}")
        for name in tn.COMPONENT_NAMES:
            self.components.setdefault(name, LoadComponent())
        if not self.t_final > self.t_start:
            raise ValueError(f"t_final ({self.t_final}) must exceed t_start ({self.t_start})")
        if not self.dt > 0.0:
            raise ValueError(f"Initial time step must be positive, got {self.dt}")
        if self.dt_max is None:
            self.dt_max = self.dt
        if self.dt_max < self.dt:
            raise ValueError(f"dt_max ({self.dt_max}) is smaller than dt ({self.dt})")

    @classmethod
    def uniaxial(cls, rate: float, t_final: float, dt: float, plane_strain: bool = False,
                 dt_max: Optional[float] = None) -> "LoadHistory":
        """E11 ramp with all other components stress-free (zero strain in 33, 13, 23 for plane strain)."""
        components = {"11": LoadComponent(ControlMode.STRAIN, rate=rate)}
        if plane_strain:
            for name in ("33", "13", "23"):
                components[name] = LoadComponent(ControlMode.STRAIN)
        return cls(components=components, t_final=t_final, dt=dt, dt_max=dt_max)

    @property
    def stress_mask(self) -> np.ndarray:
        return self.macro_load(self.t_start).stress_mask

    def macro_load(self, t: float) -> MacroLoad:
        modes = {name: c.mode for name, c in self.components.items()}
        values = {name: c.at(t) for name, c in self.components.items()}
        return MacroLoad.from_modes(modes, values)

    def strain_increment(self, t: float, dt: float) -> float:
        """Largest change of a strain-controlled target over [t, t + dt]."""
        deltas = [abs(c.at(t + dt) - c.at(t)) for c in self.components.values() if c.mode is ControlMode.STRAIN]
        return max(deltas, default=0.0)


@dataclass
class StaggeredConfig:
    """Staggered tolerance and adaptive stepping controls."""
    tol: float = 1e-4
    max_iterations: int = 100
    cutback: float = 0.5
    growth: float = 1.2
    growth_streak: int = 2
    min_strain_increment: float = 1e-5
    helmholtz_tol: Optional[float] = None

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError(f"Staggered tolerance must be positive, got {self.tol}")
        if not 0.0 < self.cutback < 1.0 < self.growth:
            raise ValueError(f"Need 0 < cutback < 1 < growth, got {self.cutback} and {self.growth}")
        if self.max_iterations < 1 or self.growth_streak < 1:
            raise ValueError("Iteration and streak limits must be >= 1")
        if self.helmholtz_tol is None:
            self.helmholtz_tol = 0.01 * self.tol


@dataclass
class IncrementRecord:
    """Averages and solver statistics of one accepted increment."""
    increment: int
    time: float
    strain: np.ndarray
    stress: np.ndarray
    staggered_iterations: int
    newton_iterations: int
    cg_iterations: int
    helmholtz_iterations: int = 0
    error: float = 0.0
    cutbacks: int = 0
    wall_time: float = 0.0


class SimulationHistory:
    """Append-only record of accepted increments."""

    def __init__(self):
        self.records: List[IncrementRecord] = []

    def append(self, record: IncrementRecord):
        if self.records and record.time <= self.records[-1].time:
            raise ValueError(f"History times must increase, got {record.time} after {self.records[-1].time}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[IncrementRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> IncrementRecord:
        return self.records[index]

    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    def strain(self, component: str = "11") -> np.ndarray:
        i, j = tn.COMPONENTS[tn.COMPONENT_NAMES.index(component)]
        return np.array([r.strain[i, j] for r in self.records])

    def stress(self, component: str = "11") -> np.ndarray:
        i, j = tn.COMPONENTS[tn.COMPONENT_NAMES.index(component)]
        return np.array([r.stress[i, j] for r in self.records])

    @property
    def total_cutbacks(self) -> int:
        return sum(r.cutbacks for r in self.records)


@dataclass
class SimulationState:
    """Converged fields at one instant."""
    time: float
    strain: np.ndarray
    stress: np.ndarray
    states: Dict[int, VoxelState]
    nonlocal_fields: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class StepDiagnostics:
    staggered_iterations: int
    newton_iterations: int
    cg_iterations: int
    helmholtz_iterations: int
    errors: List[float]


def staggered_error(eps_new, eps_old, bar_new: Dict[str, np.ndarray], bar_old: Dict[str, np.ndarray]) -> float:
    """Joint change of the strain field and the non-local fields between staggered iterates."""
    d_eps = float(np.max(np.abs(eps_new - eps_old)))
    mean = float(np.linalg.norm(eps_new.mean(axis=(0, 1, 2))))
    err = d_eps / mean if mean > ERR_FLOOR else d_eps
    for name, new in bar_new.items():
        change = float(np.linalg.norm(new - bar_old[name]))
        scale = float(np.linalg.norm(new))
        err = max(err, change / scale if scale > ERR_FLOOR else change)
    return err


class StaggeredSolver:
    """Couples the Galerkin-FFT mechanics with one Helmholtz solve per non-local variable."""

    def __init__(
        self,
        grid: GridSpec,
        material_map: MaterialMap,
        ell2: np.ndarray,
        load: LoadHistory,
        scheme: FrequencyScheme = FrequencyScheme.CONTINUOUS,
        staggered: Optional[StaggeredConfig] = None,
        newton: Optional[NewtonConfig] = None,
        helmholtz_max_iterations: Optional[int] = None,
    ):
        self.grid = grid
        self.material_map = material_map
        self.load = load
        self.staggered = staggered or StaggeredConfig()
        self.newton = newton or NewtonConfig()
        self.freq = build_frequencies(grid, scheme)
        self.projection = build_projection(grid, self.freq, load.stress_mask)
        cg_cfg = CGConfig(rel_tolerance=self.staggered.helmholtz_tol, max_iterations=helmholtz_max_iterations)
        self.helmholtz = HelmholtzSolver(self.freq, ell2, cg_cfg)

    @property
    def nonlocal_variables(self) -> Tuple[str, ...]:
        return self.material_map.nonlocal_variables

    def initial_state(self) -> SimulationState:
        shape = self.grid.cells
        return SimulationState(
            time=self.load.t_start,
            strain=np.zeros(shape + (3, 3)),
            stress=np.zeros(shape + (3, 3)),
            states=self.material_map.initial_states(),
            nonlocal_fields={v: np.zeros(shape) for v in self.nonlocal_variables},
        )

    def staggered_step(self, state_n: SimulationState, t_np1: float,
                       load: Optional[MacroLoad] = None) -> Tuple[SimulationState, StepDiagnostics]:
        """Advance from the converged state at t_n to t_np1.

        Iterate k starts from the fields at t_n and alternates one mechanical
        solve with frozen non-local fields and the Helmholtz solves with the new
        local sources, until the joint change drops below the tolerance.
        """
        load = load or self.load.macro_load(t_np1)
        cfg = self.staggered
        eps_k = state_n.strain
        bar_k = {v: f.copy() for v, f in state_n.nonlocal_fields.items()}
        newton_total = cg_total = helm_total = 0
        errors: List[float] = []

        for k in range(1, cfg.max_iterations + 1):
            mech = newton_solve(
                self.material_map, state_n.states, eps_k, bar_k, state_n.nonlocal_fields,
                load, self.projection, self.newton,
            )
            newton_total += mech.iterations
            cg_total += mech.cg_iterations

            sources = self.material_map.local_sources(mech.states)
            bar_new = {}
            for name, alpha in sources.items():
                result = self.helmholtz.solve(alpha, x0=bar_k[name])
                helm_total += result.iterations
                bar_new[name] = result.field

            if not bar_new:
                errors.append(0.0)
            else:
                errors.append(staggered_error(mech.strain, eps_k, bar_new, bar_k))
            logger.debug("staggered %d: ERR=%.3e newton=%d", k, errors[-1], mech.iterations)

            if errors[-1] < cfg.tol:
                # states returned by newton_solve still carry the non-local inputs of iterate k
                new = SimulationState(t_np1, mech.strain, mech.stress, mech.states, bar_new)
                return new, StepDiagnostics(k, newton_total, cg_total, helm_total, errors)
            eps_k, bar_k = mech.strain, bar_new

        raise StaggeredError(cfg.max_iterations, errors[-1])

    def run(self, callback: Optional[Callable[[SimulationState, IncrementRecord], None]] = None,
            history: Optional[SimulationHistory] = None) -> SimulationHistory:
        """Advance through the load history with adaptive stepping.

        Accepted increments are appended to `history` as they complete, so a
        caller passing its own history keeps the records of an aborted run.
        """
        cfg = self.staggered
        load = self.load
        history = SimulationHistory() if history is None else history
        state = self.initial_state()
        dt = load.dt
        streak = 0
        cutbacks = 0
        increment = 0
        t_end = load.t_final - 1e-12 * max(abs(load.t_final), 1.0)

        while state.time < t_end:
            dt_try = min(dt, load.t_final - state.time)
            t_np1 = state.time + dt_try
            started = timer.perf_counter()
            try:
                new_state, diag = self.staggered_step(state, t_np1)
            except ConvergenceError as exc:
                dt = cfg.cutback * dt_try
                cutbacks += 1
                streak = 0
                d_strain = load.strain_increment(state.time, dt)
                logger.warning("increment at t=%.6g failed (%s); cutting back to dt=%.4g", t_np1, exc, dt)
                if d_strain < cfg.min_strain_increment:
                    raise StepTooSmallError(state.time, d_strain, cfg.min_strain_increment) from exc
                continue

            increment += 1
            state = new_state
            record = IncrementRecord(
                increment=increment,
                time=state.time,
                strain=state.strain.mean(axis=(0, 1, 2)),
                stress=state.stress.mean(axis=(0, 1, 2)),
                staggered_iterations=diag.staggered_iterations,
                newton_iterations=diag.newton_iterations,
                cg_iterations=diag.cg_iterations,
                helmholtz_iterations=diag.helmholtz_iterations,
                error=diag.errors[-1],
                cutbacks=cutbacks,
                wall_time=timer.perf_counter() - started,
            )
            history.append(record)
            cutbacks = 0
            logger.info(
                "inc %d t=%.6g E11=%.5e S11=%.5e ERR=%.2e stag=%d newton=%d cg=%d helm=%d",
                increment, record.time, record.strain[0, 0], record.stress[0, 0], record.error,
                record.staggered_iterations, record.newton_iterations, record.cg_iterations,
                record.helmholtz_iterations,
            )
            streak += 1
            if streak >= cfg.growth_streak:
                dt = min(dt * cfg.growth, load.dt_max)
                streak = 0
            if callback is not None:
                callback(state, record)
        return history

    def check(self) -> StepDiagnostics:
        """Run one staggered increment at zero load."""
        zero = self.load.macro_load(self.load.t_start)
        zero = MacroLoad(zero.stress_controlled, np.zeros((3, 3)), np.zeros((3, 3)))
        state = self.initial_state()
        _, diag = self.staggered_step(state, self.load.t_start + self.load.dt, load=zero)
        return diag


@dataclass
class RunResult:
    history: SimulationHistory
    final_state: Optional[SimulationState]
    snapshots: List[str]
    error: Optional[ConvergenceError] = None


def build_solver(config, phase_grid) -> StaggeredSolver:
    """Assemble the staggered solver from a RunConfig and a PhaseGrid."""
    materials = config.materials()
    index = phase_grid.phase_index
    material_map = MaterialMap(index, materials)
    ell2 = length_squared_field(index, config.lengths())
    load = config.load_history(phase_grid.grid.dims)
    helm_cap = config.solver.helmholtz_max_iter
    return StaggeredSolver(
        phase_grid.grid, material_map, ell2, load,
        scheme=config.scheme,
        staggered=config.staggered_config(),
        newton=config.newton_config(),
        helmholtz_max_iterations=helm_cap,
    )


def run_simulation(config, phase_grid, workers: Optional[int] = None,
                   progress: Optional[Callable[[SimulationState, IncrementRecord], None]] = None,
                   raise_on_failure: bool = True) -> RunResult:
    """Run one configured simulation and write its history CSV and VTK snapshots.

    The history and a final snapshot are written even when the run aborts on
    a too-small step, which is how ductile failure usually ends a run.
    """
    # output imports this module
    from ductile.output import snapshot_fields, write_field_snapshot, write_history_csv

    out_dir = Path(config.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solver = build_solver(config, phase_grid)
    every = config.output.snapshot_every
    history = SimulationHistory()
    snapshots: List[str] = []
    last: Dict[str, Optional[SimulationState]] = {"state": None, "written": None}

    def snapshot(state: SimulationState, increment: int):
        path = out_dir / f"snapshot_{increment:05d}.vtk"
        fields = snapshot_fields(solver.material_map, state, phase_grid.phase_index)
        write_field_snapshot(fields, phase_grid.grid, path)
        snapshots.append(str(path))
        last["written"] = state

    def on_increment(state: SimulationState, record: IncrementRecord):
        last["state"] = state
        if config.output.snapshots and every and record.increment % every == 0:
            snapshot(state, record.increment)
        if progress is not None:
            progress(state, record)

    logger.info("Running %s on %s grid, %d voxels, non-local %s", config.preset or "custom",
                "x".join(str(n) for n in phase_grid.grid.cells), phase_grid.grid.n_voxels,
                solver.nonlocal_variables or "none")
    for pid, material in sorted(solver.material_map.materials.items()):
        logger.info("Phase %d: %s", pid, material.describe())
    failure = None
    with scipy.fft.set_workers(workers or 1):
        try:
            solver.run(callback=on_increment, history=history)
        except ConvergenceError as exc:
            failure = exc
            logger.error("Run stopped after %d increments: %s", len(history), exc)
        finally:
            write_history_csv(history, out_dir / config.output.history)
            final = last["state"]
            if config.output.snapshots and final is not None and last["written"] is not final:
                snapshot(final, len(history))
    if failure is not None and raise_on_failure:
        raise failure
    return RunResult(history, last["state"], snapshots, failure)
