# writes the voxel files used by the studies into data/rves
import os

from tqdm import tqdm

from ductile.config import config_from_dict
from ductile.microstructure import write_microstructure

OUT_DIR = os.path.join("data", "rves")
os.makedirs(OUT_DIR, exist_ok=True)

RVES = [
    ("disc_32.vox", "gtn-2d", [32, 32, 1]),
    ("disc_64.vox", "gtn-2d", [64, 64, 1]),
    ("disc_128.vox", "gtn-2d", [128, 128, 1]),
    ("spheres_32.vox", "gtn-3d", [32, 32, 32]),
]


def main():
    for name, preset, cells in tqdm(RVES, desc="RVEs"):
        config = config_from_dict({"preset": preset, "grid": {"cells": cells}})
        phase_grid = config.build_phase_grid()
        path = os.path.join(OUT_DIR, name)
        write_microstructure(phase_grid, path, binary=phase_grid.grid.dims == 3)
        tqdm.write(f"{path}: inclusion fraction {phase_grid.volume_fraction(1):.4f}")


if __name__ == "__main__":
    main()
