"""Command line entry point for the ductile damage solver.

    python run_simulation.py generate rve.vox --preset gtn-2d --cells 64 64
    python run_simulation.py run --preset gtn-2d --microstructure rve.vox -o out/gtn64 -v
    python run_simulation.py check my_run.toml
"""
import sys

from ductile.cli import main

if __name__ == "__main__":
    sys.exit(main())
