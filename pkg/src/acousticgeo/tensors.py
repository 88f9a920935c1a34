"""Small-dimension tensor algebra over jets (or plain arrays).

Vectors are Python lists of length 3 or 4; tensors are nested lists.
Entries may be Jet instances or numpy arrays; everything here only uses
+, -, * so it works for both.  Index conventions: spacetime indices run
0..3 with 0 the time slot; spatial indices run over the last three.
Permutation symbols are normalized by eps3[1,2,3] = +1 (spatial, 1-based
in the math, 0-based here) and eps4[0,1,2,3] = +1.
"""

from __future__ import annotations

import itertools

import numpy as np


def _perm_sign(p) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


# (permutation, sign) tables; the symbols vanish off permutations
EPS3 = [(p, _perm_sign(p)) for p in itertools.permutations(range(3))]
EPS4 = [(p, _perm_sign(p)) for p in itertools.permutations(range(4))]


def eps3_contract(A, B):
    """(A x B)^i = eps_{ijk} A^j B^k, explicit summation over the symbol."""
    out = [None, None, None]
    for (i, j, k), sign in EPS3:
        term = sign * (A[j] * B[k])
        out[i] = term if out[i] is None else out[i] + term
    return out


def eps4_contract(X1, X2, X3, X4):
    """eps_{abcd} X1^a X2^b X3^c X4^d by explicit 24-permutation summation."""
    out = None
    for (a, b, c, d), sign in EPS4:
        term = sign * (X1[a] * (X2[b] * (X3[c] * X4[d])))
        out = term if out is None else out + term
    return out


def eps4_pair(X3, X4):
    """M_{ab} = eps_{abcd} X3^c X4^d with the first two slots free."""
    out = [[None] * 4 for _ in range(4)]
    for (a, b, c, d), sign in EPS4:
        term = sign * (X3[c] * X4[d])
        cur = out[a][b]
        out[a][b] = term if cur is None else cur + term
    for a in range(4):
        out[a][a] = 0.0 * X3[0]
    return out


def dot(X, Y):
    out = X[0] * Y[0]
    for a in range(1, len(X)):
        out = out + X[a] * Y[a]
    return out


def quad(G, X, Y):
    """G_{ab} X^a Y^b for a square matrix of entries."""
    out = None
    for a in range(len(X)):
        for b in range(len(Y)):
            term = (G[a][b] * X[a]) * Y[b]
            out = term if out is None else out + term
    return out


def mat_vec(G, X):
    return [dot(row, X) for row in G]


def scale_vec(a, X):
    return [a * x for x in X]


def add_vec(X, Y):
    return [x + y for x, y in zip(X, Y)]


def sub_vec(X, Y):
    return [x - y for x, y in zip(X, Y)]


def det3(M):
    out = None
    for p, sign in EPS3:
        term = sign * (M[0][p[0]] * (M[1][p[1]] * M[2][p[2]]))
        out = term if out is None else out + term
    return out


def det4(M):
    out = None
    for p, sign in EPS4:
        term = sign * (M[0][p[0]] * (M[1][p[1]] * (M[2][p[2]] * M[3][p[3]])))
        out = term if out is None else out + term
    return out


def _minor(M, i, j, n):
    rows = [r for r in range(n) if r != i]
    cols = [c for c in range(n) if c != j]
    return [[M[r][c] for c in cols] for r in rows]


def det2(M):
    return M[0][0] * M[1][1] - M[0][1] * M[1][0]


def inv4(M, det=None):
    """Adjugate inverse of a 4x4 of jets/arrays."""
    if det is None:
        det = det4(M)
    inv = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            cof = det3(_minor(M, j, i, 4))
            if (i + j) % 2:
                cof = -cof
            inv[i][j] = cof / det
    return inv


def sym_check(M) -> float:
    """Max |M_{ab} - M_{ba}| over value arrays, for test assertions."""
    worst = 0.0
    for a in range(len(M)):
        for b in range(a):
            x = M[a][b] - M[b][a]
            v = x.value if hasattr(x, "value") else x
            worst = max(worst, float(np.max(np.abs(v))))
    return worst


def values(X):
    """Map a (nested) structure of jets to plain value arrays."""
    if isinstance(X, (list, tuple)):
        return [values(e) for e in X]
    return X.value if hasattr(X, "value") else np.asarray(X)


def rel_residual(*terms):
    """|sum terms| / (1 + max |term|), elementwise over value arrays.

    The terms are the participating summands of an identity arranged so the
    exact sum is zero; the denominator guards against false passes when the
    identity is trivially small.
    """
    vals = [np.asarray(t.value if hasattr(t, "value") else t, dtype=float) for t in terms]
    total = vals[0].copy()
    scale = np.abs(vals[0])
    for v in vals[1:]:
        total = total + v
        scale = np.maximum(scale, np.abs(v))
    return np.abs(total) / (1.0 + scale)
