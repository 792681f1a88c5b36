"""Run configuration: TOML documents with dotted keys, named presets and pydantic validation."""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ductile import tensors as tn
from ductile.driver import LoadComponent, LoadHistory, StaggeredConfig
from ductile.errors import ConfigError
from ductile.grid import FrequencyScheme, GridSpec
from ductile.gurson import GTNParams, GursonMaterial
from ductile.lemaitre import LemaitreMaterial, LemaitreParams
from ductile.materials import ElasticMaterial, ElasticModuli, Material
from ductile.mechanics import ControlMode, NewtonConfig
from ductile.microstructure import (
    PhaseDefinition,
    PhaseGrid,
    generate_rve_2d,
    generate_rve_3d_spheres,
    load_microstructure,
)

logger = logging.getLogger(__name__)

PLANE_STRAIN_COMPONENTS = ("33", "13", "23")
GTN_KEYS = ("sigma_Y", "N", "q1", "q2", "q3", "f_C", "f_F", "f_N", "eps_N", "s_N", "f0", "f_star_max")
LEMAITRE_KEYS = ("sigma_Y", "k", "eps_C", "eps_R", "D_max")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(Section):
    cells: Tuple[int, int, int] = (64, 64, 1)
    lengths: Optional[Tuple[float, float, float]] = None

    @field_validator("cells")
    @classmethod
    def positive_cells(cls, v):
        if any(n < 1 for n in v):
            raise ValueError(f"cell counts must be >= 1, got {v}")
        return v

    def spec(self) -> GridSpec:
        if self.lengths is not None:
            return GridSpec(self.cells, self.lengths)
        if self.cells[2] == 1:
            return GridSpec(self.cells, (1.0, self.cells[1] / self.cells[0], 1.0 / self.cells[0]))
        return GridSpec(self.cells, (1.0, self.cells[1] / self.cells[0], self.cells[2] / self.cells[0]))


class MicrostructureSection(Section):
    source: Literal["disc", "spheres", "file"] = "disc"
    path: Optional[str] = None
    volume_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    n_spheres: int = Field(30, ge=1)
    seed: int = 0
    refine: int = Field(1, ge=1)

    @model_validator(mode="after")
    def file_exists(self):
        if self.source == "file":
            if not self.path:
                raise ValueError("microstructure.path is required when source = 'file'")
            if not Path(self.path).exists():
                raise ValueError(f"microstructure file {self.path} does not exist")
        return self


class SpectralSection(Section):
    scheme: Literal["continuous", "willot"] = "continuous"


class SolverSection(Section):
    staggered_tol: float = Field(1e-4, gt=0.0)
    staggered_max_iter: int = Field(100, ge=1)
    newton_tol: float = Field(1e-6, gt=0.0)
    newton_max_iter: int = Field(30, ge=1)
    mechanics_cg_tol: float = Field(1e-8, gt=0.0)
    mechanics_cg_max_iter: int = Field(2000, ge=1)
    helmholtz_tol: Optional[float] = Field(None, gt=0.0)
    helmholtz_max_iter: Optional[int] = Field(None, ge=1)
    cutback: float = Field(0.5, gt=0.0, lt=1.0)
    growth: float = Field(1.2, gt=1.0)
    growth_streak: int = Field(2, ge=1)
    min_strain_increment: float = Field(1e-5, gt=0.0)


class LoadComponentSection(Section):
    rate: Optional[float] = None
    value: Optional[float] = None
    points: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def one_form(self):
        if self.points is not None and (self.rate is not None or self.value is not None):
            raise ValueError("give either points or rate/value")
        return self


class LoadSection(Section):
    t_start: float = 0.0
    t_final: float = Field(1000.0, gt=0.0)
    dt: float = Field(10.0, gt=0.0)
    dt_max: Optional[float] = Field(None, gt=0.0)
    E11: Optional[LoadComponentSection] = None
    E22: Optional[LoadComponentSection] = None
    E33: Optional[LoadComponentSection] = None
    E12: Optional[LoadComponentSection] = None
    E13: Optional[LoadComponentSection] = None
    E23: Optional[LoadComponentSection] = None
    S11: Optional[LoadComponentSection] = None
    S22: Optional[LoadComponentSection] = None
    S33: Optional[LoadComponentSection] = None
    S12: Optional[LoadComponentSection] = None
    S13: Optional[LoadComponentSection] = None
    S23: Optional[LoadComponentSection] = None

    @model_validator(mode="after")
    def single_mode(self):
        for c in tn.COMPONENT_NAMES:
            if getattr(self, f"E{c}") is not None and getattr(self, f"S{c}") is not None:
                raise ValueError(f"component {c} is both strain- and stress-controlled")
        return self

    def components(self) -> Dict[str, LoadComponentSection]:
        """Given components keyed E<ij> or S<ij>."""
        names = [p + c for p in ("E", "S") for c in tn.COMPONENT_NAMES]
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


class PhaseSection(Section):
    model: Literal["elastic", "gtn", "lemaitre"]
    E: float = Field(gt=0.0)
    nu: float = Field(gt=-1.0, lt=0.5)
    ell: float = Field(0.0, ge=0.0)
    sigma_Y: Optional[float] = Field(None, gt=0.0)
    N: Optional[float] = None
    q1: Optional[float] = None
    q2: Optional[float] = None
    q3: Optional[float] = None
    f_C: Optional[float] = None
    f_F: Optional[float] = None
    f_N: Optional[float] = None
    eps_N: Optional[float] = None
    s_N: Optional[float] = None
    f0: Optional[float] = None
    f_star_max: Optional[float] = None
    k: Optional[float] = None
    eps_C: Optional[float] = None
    eps_R: Optional[float] = None
    D_max: Optional[float] = None

    def _given(self, keys) -> Dict[str, float]:
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def build(self) -> Material:
        moduli = ElasticModuli(self.E, self.nu)
        if self.model == "gtn":
            return GursonMaterial(moduli, GTNParams(**self._given(GTN_KEYS)))
        if self.model == "lemaitre":
            return LemaitreMaterial(moduli, LemaitreParams(**self._given(LEMAITRE_KEYS)))
        return ElasticMaterial(moduli)

    def definition(self) -> PhaseDefinition:
        params = {"E": self.E, "nu": self.nu, "ell": self.ell}
        params.update(self._given(GTN_KEYS + LEMAITRE_KEYS))
        return PhaseDefinition(self.model, params)


class OutputSection(Section):
    dir: str = "out"
    history: str = "history.csv"
    snapshot_every: int = Field(0, ge=0)
    snapshots: bool = True


class RunConfig(Section):
    """Complete description of one simulation."""
    preset: Optional[str] = None
    grid: GridSection = GridSection()
    microstructure: MicrostructureSection = MicrostructureSection()
    spectral: SpectralSection = SpectralSection()
    solver: SolverSection = SolverSection()
    load: LoadSection = LoadSection()
    phase: Dict[int, PhaseSection] = Field(default_factory=dict)
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def phases_given(self):
        if not self.phase:
            raise ValueError("at least one phase.<id> section is required")
        return self

    @property
    def scheme(self) -> FrequencyScheme:
        return FrequencyScheme(self.spectral.scheme)

    def grid_spec(self) -> GridSpec:
        return self.grid.spec()

    def staggered_config(self) -> StaggeredConfig:
        s = self.solver
        return StaggeredConfig(
            tol=s.staggered_tol,
            max_iterations=s.staggered_max_iter,
            cutback=s.cutback,
            growth=s.growth,
            growth_streak=s.growth_streak,
            min_strain_increment=s.min_strain_increment,
            helmholtz_tol=s.helmholtz_tol,
        )

    def newton_config(self) -> NewtonConfig:
        s = self.solver
        return NewtonConfig(
            tolerance=s.newton_tol,
            max_iterations=s.newton_max_iter,
            cg_tolerance=s.mechanics_cg_tol,
            cg_max_iterations=s.mechanics_cg_max_iter,
        )

    def load_history(self, dims: int) -> LoadHistory:
        """Mixed load; unspecified components are stress-free, or zero strain in 33/13/23 on 2D grids."""
        components = {}
        given = self.load.components()
        for c in tn.COMPONENT_NAMES:
            if f"E{c}" in given:
                mode, section = ControlMode.STRAIN, given[f"E{c}"]
            elif f"S{c}" in given:
                mode, section = ControlMode.STRESS, given[f"S{c}"]
            elif dims == 2 and c in PLANE_STRAIN_COMPONENTS:
                components[c] = LoadComponent(ControlMode.STRAIN)
                continue
            else:
                continue
            components[c] = LoadComponent(
                mode, rate=section.rate or 0.0, value=section.value or 0.0, points=section.points
            )
        return LoadHistory(
            components=components,
            t_final=self.load.t_final,
            dt=self.load.dt,
            t_start=self.load.t_start,
            dt_max=self.load.dt_max,
        )

    def phase_table(self) -> Dict[int, PhaseDefinition]:
        return {pid: p.definition() for pid, p in self.phase.items()}

    def materials(self) -> Dict[int, Material]:
        return {pid: p.build() for pid, p in self.phase.items()}

    def lengths(self) -> Dict[int, float]:
        return {pid: p.ell for pid, p in self.phase.items()}

    def build_phase_grid(self) -> PhaseGrid:
        """Generate or read the microstructure and attach this config's phase table."""
        m = self.microstructure
        grid = self.grid_spec()
        if m.source == "file":
            phase_grid = load_microstructure(m.path)
        elif m.source == "spheres":
            phase_grid = generate_rve_3d_spheres(grid, m.n_spheres, m.volume_fraction, seed=m.seed)
        else:
            phase_grid = generate_rve_2d(grid, m.volume_fraction)
        if m.refine > 1:
            phase_grid = phase_grid.refine(m.refine)
        try:
            return phase_grid.with_phases(self.phase_table())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _phase(model: str, **params) -> Dict[str, Any]:
    return {"model": model, **params}


_GTN_2D = dict(E=300000.0, nu=0.3, sigma_Y=1000.0, N=0.1, q1=1.5, q2=1.0, q3=2.25, f_C=0.15, f_F=0.25,
               f_N=0.04, eps_N=0.3, s_N=0.1, f0=0.0, f_star_max=0.6)
_LEMAITRE_2D = dict(E=300000.0, nu=0.3, sigma_Y=1000.0, k=10000.0, eps_C=0.03, eps_R=0.2, D_max=0.99)

# E11 = 0.5 and 0.3 at the end of the 2D runs, past complete fracture
GTN_2D_T_FINAL = 5000.0
LEMAITRE_2D_T_FINAL = 3000.0


def _preset_2d(matrix: Dict[str, Any], ell_matrix: float, ell_inclusion: float, t_final: float) -> Dict[str, Any]:
    return {
        "grid": {"cells": [64, 64, 1]},
        "microstructure": {"source": "disc", "volume_fraction": 0.1},
        "load": {"E11": {"rate": 1e-4}, "t_final": t_final, "dt": 10.0, "dt_max": 20.0},
        "phase": {
            "0": {**matrix, "ell": ell_matrix},
            "1": _phase("elastic", E=900000.0, nu=0.3, ell=ell_inclusion),
        },
    }


def _preset_3d(matrix: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "grid": {"cells": [32, 32, 32]},
        "microstructure": {"source": "spheres", "n_spheres": 30, "volume_fraction": 0.2, "seed": 0},
        "load": {"E11": {"rate": 1e-4}, "t_final": 6000.0, "dt": 10.0, "dt_max": 20.0},
        "phase": {
            "0": {**matrix, "ell": 0.05},
            "1": _phase("elastic", E=400000.0, nu=0.2, ell=0.001),
        },
    }


PRESETS: Dict[str, Dict[str, Any]] = {
    "gtn-2d": _preset_2d(_phase("gtn", **_GTN_2D), 0.05, 0.001, GTN_2D_T_FINAL),
    "lemaitre-2d": _preset_2d(_phase("lemaitre", **_LEMAITRE_2D), 0.05, 0.001, LEMAITRE_2D_T_FINAL),
    "gtn-2d-local": _preset_2d(_phase("gtn", **_GTN_2D), 1e-4, 1e-4, GTN_2D_T_FINAL),
    "lemaitre-2d-local": _preset_2d(_phase("lemaitre", **_LEMAITRE_2D), 1e-4, 1e-4, LEMAITRE_2D_T_FINAL),
    "gtn-3d": _preset_3d(_phase("gtn", **{**_GTN_2D, "E": 70000.0, "nu": 0.33, "sigma_Y": 200.0,
                                         "eps_N": 0.1, "s_N": 0.05})),
    "lemaitre-3d": _preset_3d(_phase("lemaitre", **{**_LEMAITRE_2D, "E": 70000.0, "nu": 0.33, "sigma_Y": 200.0})),
}


def flatten(tree: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Nested tables to dotted keys; lists stay leaves."""
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def unflatten(flat: Dict[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for dotted, value in flat.items():
        node = tree
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"key '{dotted}' conflicts with a value set higher up")
        node[parts[-1]] = value
    return tree


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return "; ".join(parts)


def config_from_dict(values: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Merge a (nested or dotted) document over its preset and validate it."""
    flat = flatten(values)
    preset = flat.get("preset")
    merged: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESETS)}")
        merged.update(flatten(PRESETS[preset]))
    merged.update(flat)
    merged.update(flatten(overrides or {}))
    try:
        return RunConfig.model_validate(unflatten(merged))
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            document = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    logger.info("Loaded configuration %s (preset %s)", path, document.get("preset"))
    return config_from_dict(document, overrides)
