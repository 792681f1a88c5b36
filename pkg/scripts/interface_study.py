# spreading of the non-local plastic strain into the inclusion for several length contrasts, at E11 = 0.5
import os

import numpy as np
from tqdm import tqdm

from ductile.analysis import radial_profile
from ductile.config import config_from_dict
from ductile.driver import run_simulation
from ductile.output import read_field_snapshot

OUT_DIR = os.path.join("out", "interface_study")
ELL_MATRIX = 0.05
RATIOS = [1, 5, 50]
FINAL_STRAIN = 0.5
STRAIN_RATE = 1e-4


def main():
    rows = []
    profiles = {}
    for ratio in tqdm(RATIOS, desc="ell_M / ell_I"):
        out = os.path.join(OUT_DIR, f"ratio_{ratio}")
        config = config_from_dict({
            "preset": "gtn-2d",
            "spectral": {"scheme": "willot"},
            "load": {"E11": {"rate": STRAIN_RATE}, "t_final": FINAL_STRAIN / STRAIN_RATE},
            "phase": {"0": {"ell": ELL_MATRIX}, "1": {"ell": ELL_MATRIX / ratio}},
            "output": {"dir": out},
        })
        result = run_simulation(config, config.build_phase_grid(), raise_on_failure=False)
        grid, fields = read_field_snapshot(result.snapshots[-1])
        bar = fields["eps0_p_bar"]
        inclusion = fields["phase"] > 0.5
        rows.append((ratio, float(bar[inclusion].max()), float(bar[~inclusion].max())))

        r, values = radial_profile(bar, grid, (1.0, 0.0, 0.0))
        profiles[ratio] = (r, values)
        np.savetxt(os.path.join(out, "profile_x1.csv"), np.column_stack([r, values]),
                   delimiter=",", header="r,eps0_p_bar", comments="")

    print(f"{'ratio':>6s} {'peak in inclusion':>18s} {'peak in matrix':>15s} {'share':>7s}")
    for ratio, inc, mat in rows:
        share = inc / mat if mat > 0.0 else np.nan
        print(f"{ratio:6d} {inc:18.5e} {mat:15.5e} {share:7.3f}")

    print()
    r = profiles[RATIOS[0]][0]
    print(f"{'r':>8s} " + " ".join(f"{f'1:{ratio}':>12s}" for ratio in RATIOS))
    for i in range(0, len(r), 2):
        print(f"{r[i]:8.4f} " + " ".join(f"{profiles[ratio][1][i]:12.5e}" for ratio in RATIOS))


if __name__ == "__main__":
    main()
