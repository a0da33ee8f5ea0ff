"""Regenerate crates/core/tests/golden/kgroups.csv.

Independent of the Rust code: the deformation K-groups come from the closed
formulas, the topological K-groups from integral cohomology of the surface
(K^0 = H^0 + H^2, K^1 = H^1).
"""

import csv
import sys
from pathlib import Path

MAX_G = 5
DEGREES = range(0, 8)


def fmt(rank, torsion=()):
    parts = []
    if rank == 1:
        parts.append("Z")
    elif rank > 1:
        parts.append(f"Z^{rank}")
    parts += [f"Z/{d}" for d in torsion]
    return " + ".join(parts) or "0"


def name(orientable, g, k):
    if orientable:
        return "torus" if g == 1 else f"genus{g}"
    return {1: "rp2", 2: "klein"}.get(k, f"crosscaps{k}")


def kdef(orientable, g, j, d):
    if orientable:
        if d == 0:
            return fmt(1)
        return fmt(2 * g) if d % 2 else fmt(2)
    return fmt(2 * g + j - 1) if d % 2 else fmt(1, [2])


def ktop(orientable, g, k, d):
    if orientable:
        h1, h2 = (2 * g, []), (1, [])
    else:
        h1, h2 = (k - 1, []), (0, [2])
    if d % 2:
        return fmt(*h1)
    return fmt(1 + h2[0], h2[1])


def rows():
    for g in range(1, MAX_G + 1):
        for d in DEGREES:
            a, b = kdef(True, g, 0, d), ktop(True, g, 0, d)
            yield [name(True, g, 0), "true", g, 0, d, a, b, str(a == b).lower()]
    for g in range(0, MAX_G + 1):
        for j in (1, 2):
            if g == 0 and j == 1:
                continue
            k = 2 * g + j
            for d in DEGREES:
                a, b = kdef(False, g, j, d), ktop(False, g, k, d)
                yield [name(False, g, k), "false", g, j, d, a, b, str(a == b).lower()]


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "crates/core/tests/golden/kgroups.csv"
    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["surface", "orientable", "g", "j", "degree", "kdef", "ktop", "agree"])
        w.writerows(rows())


if __name__ == "__main__":
    main()
