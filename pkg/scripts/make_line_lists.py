"""Regenerate the bundled D1 hyperfine line lists in src/cpsr/data/.

Offsets are transition frequencies relative to the strength-weighted line
centroid (GHz). Relative strengths combine isotope abundance, the
high-temperature ground-level population (2F+1)/(2(2I+1)) and the
hyperfine branching factor (2F'+1)(2J+1){J J' 1; F' F I}^2 of J=1/2 -> J'=1/2.
"""

from fractions import Fraction
from pathlib import Path

from sympy.physics.wigner import wigner_6j

# isotope: (abundance, I, {F: ground shift GHz}, {F': excited shift GHz}, centroid offset GHz)
ISOTOPES = {
    "RbNatural": {
        "Rb85": (0.7217, Fraction(5, 2), {3: 1.264888516, 2: -1.770843922},
                 {3: 0.150659, 2: -0.210923}, 0.0),
        "Rb87": (0.2783, Fraction(3, 2), {2: 2.563005979, 1: -4.271676631},
                 {2: 0.306246, 1: -0.509060}, 0.077690),
    },
    "K": {
        "K39": (0.932581, Fraction(3, 2), {2: 0.1730, 1: -0.2886},
                {2: 0.02083, 1: -0.03471}, 0.0),
        "K41": (0.067302, Fraction(3, 2), {2: 0.0953, 1: -0.1588},
                {2: 0.01144, 1: -0.01907}, 0.2353),
    },
}


def lines(species):
    out = []
    half = Fraction(1, 2)
    for name, (abundance, spin, ground, excited, shift) in ISOTOPES[species].items():
        for f, eg in ground.items():
            population = (2 * f + 1) / (2 * (2 * spin + 1))
            for fp, ee in excited.items():
                six = wigner_6j(half, half, 1, fp, f, spin)
                branch = (2 * fp + 1) * 2 * six ** 2
                if branch == 0:
                    continue
                weight = float(abundance * population * branch)
                out.append((shift + ee - eg, weight, f"{name} F={f} -> F'={fp}"))
    total = sum(w for _, w, _ in out)
    center = sum(o * w for o, w, _ in out) / total
    return [(o - center, w / total, label) for o, w, label in out]


def main():
    data = Path(__file__).resolve().parents[1] / "src" / "cpsr" / "data"
    for species, fname in (("RbNatural", "rb_natural_d1.txt"), ("K", "k_d1.txt")):
        rows = lines(species)
        text = [f"# {species} D1 hyperfine components",
                "# offset_GHz relative_strength  (offset from strength-weighted centroid;",
                "# strengths: abundance x ground population x hyperfine branching, sum to 1)"]
        text += [f"{o:+.6f} {w:.6f}  # {label}" for o, w, label in sorted(rows)]
        (data / fname).write_text("\n".join(text) + "\n")
        print((data / fname).read_text())


if __name__ == "__main__":
    main()
