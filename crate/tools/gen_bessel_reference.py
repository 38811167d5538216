#!/usr/bin/env python3
"""Regenerate crates/core/tests/fixtures/bessel_reference.csv.

Reference values for the Bessel evaluators: J_m, I_m and their derivatives
at a spread of arguments, computed with mpmath at 40 digits and printed with
17 significant digits (enough to round-trip f64).
"""

from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

ORDERS = [0, 1, 2, 3]
ARGS = ["0.5", "1", "2", "5", "10"]

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/bessel_reference.csv"


def fmt(v):
    return mp.nstr(v, 17, strip_zeros=False)


def main():
    rows = ["m,x,j,dj,i,di"]
    for m in ORDERS:
        for xs in ARGS:
            x = mp.mpf(xs)
            j = mp.besselj(m, x)
            dj = mp.besselj(m, x, derivative=1)
            i = mp.besseli(m, x)
            di = mp.besseli(m, x, derivative=1)
            rows.append(f"{m},{xs},{fmt(j)},{fmt(dj)},{fmt(i)},{fmt(di)}")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(rows) + "\n")
    print(f"wrote {OUT} ({len(rows) - 1} rows)")


if __name__ == "__main__":
    main()
