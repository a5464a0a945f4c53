"""Rb anti-resonance amplification versus pump power (0 to 100 mW).

omega_a is ramped linearly from 290 to 400 Hz across the sweep to follow
the pump lightshift.
"""

import csv

import numpy as np

from _common import out_dir, parser
from cpsr import scenarios


def main():
    p = parser(__doc__)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--models", nargs="+", default=list(scenarios.MODELS))
    args = p.parse_args()
    sc = scenarios.builtin("rb_pump_sweep")
    values = np.linspace(0.0, 100.0, args.points)
    result = scenarios.run_pump_sweep(sc, values, models=tuple(args.models))
    path = out_dir(args) / "rb_pump_sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p_pump_mw", "model", "omega_a_hz", "r_pump_over_q_hz", "amplification"])
        for r in result.rows:
            w.writerow([f"{r['value']:.9g}", r["model"], f"{r['omega_a_hz']:.9g}",
                        f"{r.get('r_pump_over_q_hz', float('nan')):.9g}",
                        f"{r.get('amplification', float('nan')):.9g}"])
    for model, x in result.argmax.items():
        print(f"{model:9s} maximum amplification at R_pump/q = {x:.2f} Hz")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
