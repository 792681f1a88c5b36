# summary of a history CSV written by a run: python scripts/inspect_history.py out/gtn64/history.csv
import sys

from ductile.analysis import failure_strain, peak_stress, strain_at_stress_drop
from ductile.output import read_history_csv


def main():
    if len(sys.argv) != 2:
        print("usage: inspect_history.py HISTORY_CSV")
        sys.exit(2)
    history = read_history_csv(sys.argv[1])
    if len(history) == 0:
        print("empty history")
        return

    e_peak, s_peak = peak_stress(history)
    print(f"increments:            {len(history)}")
    print(f"final time:            {history[-1].time:.6g}")
    print(f"peak <S11>:            {s_peak:.4f} at <E11> = {e_peak:.5f}")
    print(f"50% stress drop at:    {strain_at_stress_drop(history, 0.5)}")
    print(f"failure strain (10%):  {failure_strain(history)}")
    print(f"cutbacks:              {history.total_cutbacks}")
    print(f"staggered iterations:  {sum(r.staggered_iterations for r in history)}")
    print(f"Newton iterations:     {sum(r.newton_iterations for r in history)}")
    print(f"CG iterations:         {sum(r.cg_iterations for r in history)}")
    print(f"Helmholtz iterations:  {sum(r.helmholtz_iterations for r in history)}")
    print(f"wall time [s]:         {sum(r.wall_time for r in history):.1f}")


if __name__ == "__main__":
    main()
