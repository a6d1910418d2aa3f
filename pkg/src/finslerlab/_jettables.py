"""Index layout and Leibniz tables for order-4 bivariate jets.

A jet is a flat length-15 array of raw partial derivatives d^(i+j)f/dr^i ds^j
for i+j <= 4, ordered by total order and then by descending i.  Both the
compiled kernel and the pure-Python fallback are generated from these tables.
"""

from math import comb

ORDER = 4

PAIRS = tuple((n - j, j) for n in range(ORDER + 1) for j in range(n + 1))
NC = len(PAIRS)  # 15
IDX = {p: k for k, p in enumerate(PAIRS)}

# raw-partial (Leibniz) product: out[i,j] = sum C(i,p)C(j,q) a[p,q] b[i-p,j-q]
MUL_A = []
MUL_B = []
MUL_O = []
MUL_W = []
for (i, j) in PAIRS:
    for p in range(i + 1):
        for q in range(j + 1):
            MUL_A.append(IDX[(p, q)])
            MUL_B.append(IDX[(i - p, j - q)])
            MUL_O.append(IDX[(i, j)])
            MUL_W.append(float(comb(i, p) * comb(j, q)))
MUL_A = tuple(MUL_A)
MUL_B = tuple(MUL_B)
MUL_O = tuple(MUL_O)
MUL_W = tuple(MUL_W)
NT = len(MUL_A)

# derivative shifts: source index of (i+1,j) resp. (i,j+1), -1 past top order
SHIFT_R = tuple(IDX.get((i + 1, j), -1) for (i, j) in PAIRS)
SHIFT_S = tuple(IDX.get((i, j + 1), -1) for (i, j) in PAIRS)

# 1/k! for univariate Taylor composition
INV_FACT = (1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0)
