"""Non-local ductile damage on FFT voxel grids."""
from ductile.grid import GridSpec, FrequencyScheme, FrequencyTable, build_frequencies
from ductile.materials import ElasticModuli, ElasticMaterial, MaterialMap, VoxelState
from ductile.gurson import GTNParams, GursonMaterial
from ductile.lemaitre import LemaitreParams, LemaitreMaterial
from ductile.helmholtz import CGConfig, HelmholtzSolver, solve_helmholtz
from ductile.mechanics import ControlMode, MacroLoad, NewtonConfig, ProjectionOperator
from ductile.driver import LoadHistory, SimulationHistory, StaggeredConfig, StaggeredSolver, run_simulation
from ductile.microstructure import PhaseGrid, generate_rve_2d, generate_rve_3d_spheres, load_microstructure
from ductile.config import RunConfig, load_config

__all__ = [
    "GridSpec",
    "FrequencyScheme",
    "FrequencyTable",
    "build_frequencies",
    "ElasticModuli",
    "ElasticMaterial",
    "MaterialMap",
    "VoxelState",
    "GTNParams",
    "GursonMaterial",
    "LemaitreParams",
    "LemaitreMaterial",
    "CGConfig",
    "HelmholtzSolver",
    "solve_helmholtz",
    "ControlMode",
    "MacroLoad",
    "NewtonConfig",
    "ProjectionOperator",
    "LoadHistory",
    "SimulationHistory",
    "StaggeredConfig",
    "StaggeredSolver",
    "run_simulation",
    "PhaseGrid",
    "generate_rve_2d",
    "generate_rve_3d_spheres",
    "load_microstructure",
    "RunConfig",
    "load_config",
]
