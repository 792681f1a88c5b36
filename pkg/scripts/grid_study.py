# grid sensitivity: failure strain, band angle and band width at 32^2 and 64^2 (add 128 with --fine)
import os
import sys

from tqdm import tqdm

from ductile.analysis import band_angle, band_width, strain_at_stress_drop
from ductile.config import config_from_dict
from ductile.driver import run_simulation
from ductile.output import read_field_snapshot

OUT_DIR = os.path.join("out", "grid_study")
PRESETS = ["gtn-2d", "lemaitre-2d", "gtn-2d-local", "lemaitre-2d-local"]


def run_case(preset, n):
    out = os.path.join(OUT_DIR, f"{preset}_{n}")
    config = config_from_dict({
        "preset": preset,
        "grid": {"cells": [n, n, 1]},
        "output": {"dir": out},
    })
    result = run_simulation(config, config.build_phase_grid(), raise_on_failure=False)
    drop = strain_at_stress_drop(result.history, 0.5)
    grid, fields = read_field_snapshot(result.snapshots[-1])
    angle = band_angle(fields["damage"], grid)
    width_vox, width = band_width(fields["damage"], grid, angle)
    return drop, angle, width_vox, width


def main():
    sizes = [32, 64, 128] if "--fine" in sys.argv else [32, 64]
    cases = [(p, n) for p in PRESETS for n in sizes]
    rows = []
    for preset, n in tqdm(cases, desc="runs"):
        rows.append((preset, n) + run_case(preset, n))

    print(f"{'preset':20s} {'N':>4s} {'E11 @ 50% drop':>15s} {'angle':>7s} {'FWHM vox':>9s} {'FWHM':>8s}")
    for preset, n, drop, angle, width_vox, width in rows:
        drop_text = f"{drop:.5f}" if drop is not None else "-"
        print(f"{preset:20s} {n:4d} {drop_text:>15s} {angle:7.1f} {width_vox:9.1f} {width:8.4f}")


if __name__ == "__main__":
    main()
