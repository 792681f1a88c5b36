# 3D smoke run: 30 periodic spheres at 32^3 with the Al alloy Gurson preset
import os
import sys

from tqdm import tqdm

from ductile.config import config_from_dict
from ductile.driver import run_simulation

OUT_DIR = os.path.join("out", "smoke_3d")
MIN_INCREMENTS = 50


def main():
    threads = int(sys.argv[1]) if len(sys.argv) > 1 else os.cpu_count()
    config = config_from_dict({
        "preset": "gtn-3d",
        "output": {"dir": OUT_DIR, "snapshot_every": 25},
    })
    phase_grid = config.build_phase_grid()
    print(f"sphere fraction {phase_grid.volume_fraction(1):.4f} on {phase_grid.grid.cells}")

    with tqdm(total=config.load.t_final, unit="t") as bar:
        def progress(state, record):
            bar.update(record.time - bar.n)

        result = run_simulation(config, phase_grid, workers=threads, progress=progress, raise_on_failure=False)

    history = result.history
    print(f"{len(history)} increments ({'ok' if len(history) >= MIN_INCREMENTS else 'too few'}), "
          f"{history.total_cutbacks} cutbacks, stopped by: {result.error or 'end of load'}")


if __name__ == "__main__":
    main()
