"""Regenerate src/rqmcis/data/direction_numbers.txt.

Extracts the first 96 dimensions of the Joe-Kuo Sobol' direction numbers
(Joe & Kuo, "Constructing Sobol sequences with better two-dimensional
projections", SIAM J. Sci. Comput. 30, 2008) from the copy that scipy
ships, and writes them in the classic text format:

    dim  degree  poly  m_1 ... m_degree

where ``poly`` encodes the inner coefficients of the primitive polynomial
(the leading and trailing 1 are implicit).  Dimension 1 is the van der
Corput sequence and is not listed.

Run from the repository root:

    python3 tools/make_direction_table.py
"""

import os

import numpy as np
import scipy.stats


def main() -> None:
    npz = np.load(
        os.path.join(
            os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz"
        )
    )
    poly = npz["poly"]
    vinit = npz["vinit"]

    ndim = 96
    lines = [
        "# Sobol' direction numbers (Joe-Kuo), dimensions 2..%d." % ndim,
        "# Columns: dimension, polynomial degree s, polynomial coefficients a",
        "# (inner bits of the primitive polynomial, leading/trailing 1 implicit),",
        "# followed by the s initial direction integers m_1..m_s (m_k odd, < 2^k).",
        "# Dimension 1 (not listed) is the van der Corput sequence, m_k = 1.",
        "# Source: Joe & Kuo (2008), via the table distributed with scipy.",
        "d s a m_i",
    ]
    for dim in range(2, ndim + 1):
        j = dim - 1
        p = int(poly[j])
        s = p.bit_length() - 1
        a = (p - (1 << s) - 1) >> 1
        m = [str(int(v)) for v in vinit[j, :s]]
        lines.append(" ".join([str(dim), str(s), str(a)] + m))

    out = os.path.join(
        os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
        "src",
        "rqmcis",
        "data",
        "direction_numbers.txt",
    )
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("wrote %s (%d dimensions)" % (out, ndim))


if __name__ == "__main__":
    main()
