"""Command line entry point: generate RVEs, run simulations, check configurations."""
import argparse
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional

import scipy.fft
from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm

from ductile.config import PRESETS, RunConfig, config_from_dict, load_config
from ductile.driver import build_solver, run_simulation
from ductile.errors import ConfigError, ConvergenceError, PackingError
from ductile.microstructure import write_microstructure

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def configure_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _overrides(args) -> Dict[str, object]:
    out: Dict[str, object] = {}
    if getattr(args, "output", None):
        out["output.dir"] = args.output
    if getattr(args, "cells", None):
        cells = list(args.cells) + [1] * (3 - len(args.cells))
        out["grid.cells"] = cells
    if getattr(args, "fraction", None) is not None:
        out["microstructure.volume_fraction"] = args.fraction
    if getattr(args, "n_spheres", None) is not None:
        out["microstructure.n_spheres"] = args.n_spheres
    if getattr(args, "seed", None) is not None:
        out["microstructure.seed"] = args.seed
    if getattr(args, "refine", None) is not None:
        out["microstructure.refine"] = args.refine
    if getattr(args, "microstructure", None):
        out["microstructure.source"] = "file"
        out["microstructure.path"] = args.microstructure
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        out[key.strip()] = _parse_value(value.strip())
    return out


def _parse_value(text: str):
    """TOML literal if it parses, else the bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _load(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config:
        return load_config(args.config, overrides)
    if args.preset:
        return config_from_dict({"preset": args.preset}, overrides)
    raise ConfigError("give a configuration file or --preset")


def cmd_generate(args) -> int:
    config = _load(args)
    phase_grid = config.build_phase_grid()
    write_microstructure(phase_grid, args.path, binary=args.binary)
    fractions = ", ".join(f"phase {p}: {phase_grid.volume_fraction(p):.4f}" for p in phase_grid.present_phases())
    print(f"Wrote {args.path} ({'x'.join(str(n) for n in phase_grid.grid.cells)}; {fractions})")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load(args)
    phase_grid = config.build_phase_grid()
    span = config.load.t_final - config.load.t_start
    with logging_redirect_tqdm():
        with tqdm(total=span, unit="t", desc="pseudo-time", disable=args.no_progress) as bar:

            def progress(state, record):
                bar.set_postfix(E11=f"{record.strain[0, 0]:.4e}", S11=f"{record.stress[0, 0]:.4g}")
                bar.update(record.time - config.load.t_start - bar.n)

            result = run_simulation(config, phase_grid, workers=args.threads, progress=progress,
                                    raise_on_failure=False)
    out = Path(config.output.dir)
    print(f"{len(result.history)} increments, {result.history.total_cutbacks} cutbacks; "
          f"history in {out / config.output.history}, {len(result.snapshots)} snapshot(s)")
    if result.error is not None:
        print(f"Run stopped: {result.error}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_check(args) -> int:
    config = _load(args)
    phase_grid = config.build_phase_grid()
    with scipy.fft.set_workers(args.threads or 1):
        solver = build_solver(config, phase_grid)
        diag = solver.check()
    print(f"Configuration OK: {'x'.join(str(n) for n in phase_grid.grid.cells)} grid, "
          f"phases {phase_grid.present_phases()}, non-local {list(solver.nonlocal_variables) or 'none'}")
    for pid, material in sorted(solver.material_map.materials.items()):
        print(f"  phase {pid}: {material.describe()}")
    print(f"Zero-load increment: {diag.staggered_iterations} staggered, {diag.newton_iterations} Newton, "
          f"{diag.cg_iterations} CG, {diag.helmholtz_iterations} Helmholtz iteration(s)")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="TOML run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), help="Use a named preset without a config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="Override a dotted configuration key (repeatable)")
    p.add_argument("--microstructure", help="Read the phase grid from a voxel file")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ductile", description="Non-local ductile damage on FFT voxel grids")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Synthesize an RVE and write a voxel file")
    gen.add_argument("path", help="Output voxel file")
    _add_common(gen)
    gen.add_argument("--cells", type=int, nargs="+", help="N1 N2 [N3]")
    gen.add_argument("--fraction", type=float, help="Inclusion volume fraction")
    gen.add_argument("--n-spheres", type=int, help="Number of spheres (3D)")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--refine", type=int, help="Split every voxel into factor^dims voxels")
    gen.add_argument("--binary", action="store_true", help="Write raw 8-bit data")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="Run a simulation")
    _add_common(run)
    run.add_argument("-o", "--output", help="Output directory")
    run.add_argument("-j", "--threads", type=int, help="FFT worker threads")
    run.add_argument("--no-progress", action="store_true", help="Disable the progress bar")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="Validate a configuration and run one zero-load increment")
    _add_common(check)
    check.add_argument("-j", "--threads", type=int, help="FFT worker threads")
    check.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, PackingError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"Solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
