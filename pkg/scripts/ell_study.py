# ductility versus the matrix characteristic length, Gurson model at 64^2
import os

from tqdm import tqdm

from ductile.analysis import failure_strain, peak_stress
from ductile.config import config_from_dict
from ductile.driver import run_simulation

OUT_DIR = os.path.join("out", "ell_study")
LENGTHS = [0.025, 0.05, 0.075]


def main():
    rows = []
    for ell in tqdm(LENGTHS, desc="ell_M"):
        config = config_from_dict({
            "preset": "gtn-2d",
            "phase": {"0": {"ell": ell}},
            "output": {"dir": os.path.join(OUT_DIR, f"ell_{ell:g}"), "snapshots": False},
        })
        result = run_simulation(config, config.build_phase_grid(), raise_on_failure=False)
        rows.append((ell, peak_stress(result.history), failure_strain(result.history)))

    print(f"{'ell_M':>7s} {'peak S11':>10s} {'failure E11':>12s}")
    for ell, (_, s_peak), eps_f in rows:
        eps_text = f"{eps_f:.5f}" if eps_f is not None else "-"
        print(f"{ell:7.3f} {s_peak:10.2f} {eps_text:>12s}")


if __name__ == "__main__":
    main()
