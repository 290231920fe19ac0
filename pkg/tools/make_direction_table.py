"""Regenerate the bundled Joe-Kuo direction-number table.

The published new-joe-kuo-6.21201 data ships inside SciPy as a compressed
array pair (full primitive polynomial, initial direction integers). This
script rewrites the first ``--dims`` dimensions in the plain-text layout
``d s a m_1 ... m_s`` used by the original file.

    python tools/make_direction_table.py --dims 1111
"""

import argparse
import os

import numpy as np
import scipy.stats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dims", type=int, default=1111)
    parser.add_argument(
        "--out",
        default=os.path.join(
            os.path.dirname(__file__), "..", "src", "rqmc_sqn", "data", "new-joe-kuo-6.1111"
        ),
    )
    args = parser.parse_args()

    path = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
    with np.load(path) as raw:
        poly = raw["poly"]
        vinit = raw["vinit"]

    lines = ["d       s       a       m_i"]
    # row 0 of the archive is the van der Corput dimension; the text format omits it
    for j in range(1, args.dims):
        p = int(poly[j])
        deg = p.bit_length() - 1
        a = (p >> 1) & ((1 << (deg - 1)) - 1)
        m = " ".join(str(int(v)) for v in vinit[j, :deg])
        lines.append(f"{j + 1}       {deg}       {a}       {m} ")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
