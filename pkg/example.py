"""Example usage: a small non-local Lemaitre RVE under uniaxial plane-strain loading."""
from ductile.analysis import peak_stress, strain_at_stress_drop
from ductile.config import config_from_dict
from ductile.driver import build_solver


def main():
    # Preset parameters on a coarse grid so the demo finishes quickly
    config = config_from_dict({
        "preset": "lemaitre-2d",
        "grid": {"cells": [16, 16, 1]},
        "load": {"t_final": 600.0, "dt": 20.0, "dt_max": 40.0},
    })
    phase_grid = config.build_phase_grid()
    print(f"Grid {phase_grid.grid.cells}, inclusion fraction {phase_grid.volume_fraction(1):.3f}")

    solver = build_solver(config, phase_grid)
    history = solver.run()

    print("\n  inc        E11          S11   stag  newton")
    for r in history:
        print(f"{r.increment:5d}  {r.strain[0, 0]:.4e}  {r.stress[0, 0]:11.3f}  {r.staggered_iterations:5d}  {r.newton_iterations:6d}")

    e_peak, s_peak = peak_stress(history)
    print(f"\nPeak stress {s_peak:.1f} MPa at E11 = {e_peak:.4f}")
    drop = strain_at_stress_drop(history, 0.5)
    if drop is None:
        print("No 50% stress drop reached yet; increase load.t_final to follow the failure.")
    else:
        print(f"Stress halved at E11 = {drop:.4f}")


if __name__ == "__main__":
    main()
