"""Rb linewidth and contrast versus Larmor frequency (100 to 600 Hz).

Fits FWHM = a * omega_a^2 + b per model and compares a with the
spin-exchange prediction (q^2 - q(1)^2) / (q R_se).
"""

import csv

import numpy as np

from _common import out_dir, parser
from cpsr import scenarios


def main():
    p = parser(__doc__)
    p.add_argument("--step", type=float, default=50.0, help="omega_a step in Hz")
    p.add_argument("--models", nargs="+", default=list(scenarios.MODELS))
    args = p.parse_args()
    sc = scenarios.builtin("rb_serf_sweep")
    values = np.arange(100.0, 600.0 + 1e-9, args.step)
    result = scenarios.run_serf_sweep(sc, values, models=tuple(args.models))
    path = out_dir(args) / "rb_serf_sweep.csv"
    keys = ("fwhm_hz", "contrast", "gain_extremum_contrast", "error")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_a_hz", "model", *keys])
        for r in result.rows:
            w.writerow([f"{r['value']:.9g}", r["model"],
                        *(r.get(k, "") if k == "error" else f"{r.get(k, float('nan')):.9g}"
                          for k in keys)])
    print(f"predicted a = {result.predicted_a:.4e} 1/Hz")
    for model, (a, b) in result.quadratic.items():
        print(f"{model:9s} a = {a:.4e} 1/Hz ({a / result.predicted_a:.3f} of prediction), "
              f"b = {b:.2f} Hz")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
