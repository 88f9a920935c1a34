"""Truncated Taylor-jet arithmetic in four variables (t, x1, x2, x3).

A jet stores the Taylor coefficients of a smooth scalar field about a base
point, up to total degree ``MAX_ORDER``.  Arithmetic (+, -, *, /) and
composition with elementary functions (exp, ln, sqrt, sin, cos, pow) are
exact on the truncated polynomial ring, so partial derivatives extracted
from a jet built out of closed-form pieces are analytically exact, not
finite-difference estimates.  All operations are batched: a jet's
coefficient array has shape ``batch_shape + (N_COEF,)``.

The last axis enumerates monomials by total degree, then lexicographically
in the exponent tuple; see ``MULTI_INDICES``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

NVARS = 4
MAX_ORDER = 3


class DomainError(ValueError):
    """Composition argument outside the domain of the outer function."""


class DegenerateJetError(ZeroDivisionError):
    """Division (or reciprocal) with a vanishing constant term."""


def _build_multi_indices() -> list[tuple[int, ...]]:
    out = []
    for deg in range(MAX_ORDER + 1):
        for mi in itertools.product(range(deg + 1), repeat=NVARS):
            if sum(mi) == deg:
                out.append(mi)
    # within a degree, sort lexicographically for a stable layout
    key = lambda mi: (sum(mi), mi)
    return sorted(out, key=key)


MULTI_INDICES: list[tuple[int, ...]] = _build_multi_indices()
N_COEF = len(MULTI_INDICES)  # 35 for NVARS=4, MAX_ORDER=3
INDEX_OF: dict[tuple[int, ...], int] = {mi: k for k, mi in enumerate(MULTI_INDICES)}
DEGREE = np.array([sum(mi) for mi in MULTI_INDICES])
# number of coefficients of degree <= o
N_UP_TO = [int(np.count_nonzero(DEGREE <= o)) for o in range(MAX_ORDER + 1)]


def _build_mul_tables():
    """Per-order product tables: (fg)_k = sum a_i b_j over i+j=k.

    For output order o only coefficients of degree <= o are produced; the
    table is sorted by output slot so np.add.reduceat can do the contraction.
    """
    tables = []
    for o in range(MAX_ORDER + 1):
        triples = []
        for k, mk in enumerate(MULTI_INDICES):
            if sum(mk) > o:
                continue
            for i, mi in enumerate(MULTI_INDICES):
                mj = tuple(a - b for a, b in zip(mk, mi))
                if min(mj) < 0:
                    continue
                triples.append((k, i, INDEX_OF[mj]))
        triples.sort()
        ks = np.array([t[0] for t in triples])
        starts = np.searchsorted(ks, np.arange(N_UP_TO[o]))
        tables.append(
            (
                np.array([t[1] for t in triples]),
                np.array([t[2] for t in triples]),
                starts,
                N_UP_TO[o],
            )
        )
    return tables


_MUL_TABLES = _build_mul_tables()


def _build_partial_tables():
    """(d_i f)_m = (m_i + 1) f_{m + e_i}, for each direction i."""
    tables = []
    for i in range(NVARS):
        dst, src, fac = [], [], []
        for k, mk in enumerate(MULTI_INDICES):
            shifted = list(mk)
            shifted[i] += 1
            j = INDEX_OF.get(tuple(shifted))
            if j is not None:
                dst.append(k)
                src.append(j)
                fac.append(float(shifted[i]))
        tables.append((np.array(dst), np.array(src), np.array(fac)))
    return tables


_PARTIAL_TABLES = _build_partial_tables()

_FACTORIAL = np.array([math.prod(math.factorial(e) for e in mi) for mi in MULTI_INDICES])


class Jet:
    """Batched truncated Taylor expansion of a scalar field.

    ``coef[..., k]`` is the Taylor coefficient of the monomial
    ``MULTI_INDICES[k]``; ``order`` marks up to which total degree the
    entries are meaningful (all higher entries are kept at zero).
    """

    __slots__ = ("coef", "order")

    def __init__(self, coef: np.ndarray, order: int = MAX_ORDER):
        self.coef = coef
        self.order = order

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value, order: int = MAX_ORDER) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (N_COEF,))
        coef[..., 0] = value
        return Jet(coef, order)

    @staticmethod
    def variable(value, direction: int, order: int = MAX_ORDER) -> "Jet":
        """Jet of the coordinate function x^direction at the given values."""
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (N_COEF,))
        coef[..., 0] = value
        if order >= 1:
            e = [0] * NVARS
            e[direction] = 1
            coef[..., INDEX_OF[tuple(e)]] = 1.0
        return Jet(coef, order)

    # -- inspection ---------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.coef[..., 0]

    @property
    def shape(self):
        return self.coef.shape[:-1]

    def derivative(self, multi_index: tuple[int, ...]) -> np.ndarray:
        """Exact partial-derivative values d^{multi_index} f at the base points."""
        if sum(multi_index) > self.order:
            raise ValueError(f"jet holds order {self.order}, asked {multi_index}")
        k = INDEX_OF[tuple(multi_index)]
        return self.coef[..., k] * _FACTORIAL[k]

    def partial(self, direction: int) -> "Jet":
        """Jet of d f / d x^direction, one order lower."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        dst, src, fac = _PARTIAL_TABLES[direction]
        out = np.zeros_like(self.coef)
        out[..., dst] = self.coef[..., src] * fac
        new_order = self.order - 1
        out[..., N_UP_TO[new_order]:] = 0.0
        return Jet(out, new_order)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        out = self.coef.copy()
        out[..., N_UP_TO[order]:] = 0.0
        return Jet(out, order)

    # -- ring operations ----------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other) -> "Jet":
        other = self._coerce(other)
        return Jet(self.coef + other.coef, min(self.order, other.order))

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.coef, self.order)

    def __sub__(self, other) -> "Jet":
        other = self._coerce(other)
        return Jet(self.coef - other.coef, min(self.order, other.order))

    def __rsub__(self, other) -> "Jet":
        return self._coerce(other).__sub__(self)

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(self.coef * np.asarray(other, dtype=float)[..., None], self.order)
        order = min(self.order, other.order)
        I, J, starts, n_out = _MUL_TABLES[order]
        prods = self.coef[..., I] * other.coef[..., J]
        out = np.zeros(prods.shape[:-1] + (N_COEF,))
        out[..., :n_out] = np.add.reduceat(prods, starts, axis=-1)
        return Jet(out, order)

    def __rmul__(self, other) -> "Jet":
        return self.__mul__(other)

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * reciprocal(other)

    def __rtruediv__(self, other) -> "Jet":
        return self._coerce(other) * reciprocal(self)

    def __pow__(self, exponent: float) -> "Jet":
        return power(self, exponent)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape}, value={self.value!r})"


def coordinate_jets(t, x, order: int = MAX_ORDER) -> list[Jet]:
    """Jets of the four coordinate functions at points (t, x).

    ``t`` has any batch shape; ``x`` has that shape + (3,).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    jets = [Jet.variable(t, 0, order)]
    for a in range(3):
        jets.append(Jet.variable(x[..., a], a + 1, order))
    return jets


def _horner(a: Jet, derivs: list[np.ndarray]) -> Jet:
    """Compose the power series with coefficients derivs[k]/k! with (a - a0).

    Exact on the truncated ring because (a - a0) has no constant term.
    """
    delta = Jet(a.coef.copy(), a.order)
    delta.coef[..., 0] = 0.0
    n = a.order
    out = Jet.constant(derivs[n] / math.factorial(n), a.order)
    for k in range(n - 1, -1, -1):
        out = out * delta + Jet.constant(derivs[k] / math.factorial(k), a.order)
    return out


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return _horner(a, [e] * (a.order + 1))


def ln(a: Jet) -> Jet:
    v = a.value
    if np.any(v <= 0.0):
        raise DomainError(f"ln of non-positive value (min {np.min(v)!r})")
    derivs = [np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3]
    return _horner(a, derivs[: a.order + 1])


def sqrt(a: Jet) -> Jet:
    v = a.value
    if np.any(v <= 0.0):
        raise DomainError(f"sqrt of non-positive value (min {np.min(v)!r})")
    r = np.sqrt(v)
    derivs = [r, 0.5 / r, -0.25 / (v * r), 0.375 / (v * v * r)]
    return _horner(a, derivs[: a.order + 1])


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    return _horner(a, [s, c, -s, -c][: a.order + 1])


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    return _horner(a, [c, -s, -c, s][: a.order + 1])


def power(a: Jet, p: float) -> Jet:
    if float(p) == int(p) and int(p) >= 0:
        # integer powers by repeated multiplication work for any sign of a
        n = int(p)
        out = Jet.constant(np.ones(a.shape), a.order)
        for _ in range(n):
            out = out * a
        return out
    v = a.value
    if np.any(v <= 0.0):
        raise DomainError(f"pow({p}) of non-positive value (min {np.min(v)!r})")
    derivs = [v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2),
              p * (p - 1) * (p - 2) * v ** (p - 3)]
    return _horner(a, derivs[: a.order + 1])


def reciprocal(a: Jet) -> Jet:
    v = a.value
    if np.any(v == 0.0):
        raise DegenerateJetError("reciprocal of a jet with zero constant term")
    derivs = [1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4]
    return _horner(a, derivs[: a.order + 1])


def arccos(a: Jet) -> Jet:
    v = a.value
    if np.any(np.abs(v) >= 1.0):
        raise DomainError(f"arccos needs |value| < 1 (max {np.max(np.abs(v))!r})")
    s = 1.0 / np.sqrt(1.0 - v * v)
    derivs = [np.arccos(v), -s, -v * s**3, -(1.0 + 2.0 * v * v) * s**5]
    return _horner(a, derivs[: a.order + 1])


def _arctan(a: Jet) -> Jet:
    v = a.value
    d = 1.0 / (1.0 + v * v)
    derivs = [np.arctan(v), d, -2.0 * v * d * d, (6.0 * v * v - 2.0) * d**3]
    return _horner(a, derivs[: a.order + 1])


def arctan2(y: Jet, x: Jet) -> Jet:
    """Jet of atan2(y, x); the base point must avoid the origin."""
    order = min(y.order, x.order)
    x0, y0 = x.value, y.value
    if np.any((x0 == 0.0) & (y0 == 0.0)):
        raise DomainError("arctan2 undefined at the origin")
    # two complementary branches, each regular where selected
    use_x = np.abs(x0) >= np.abs(y0)
    ex = np.broadcast_to(use_x[..., None], np.broadcast_shapes(
        use_x[..., None].shape, x.coef.shape, y.coef.shape))
    xs = Jet(np.where(ex, np.broadcast_to(x.coef, ex.shape), 1.0), x.order)
    ys = Jet(np.where(ex, 1.0, np.broadcast_to(y.coef, ex.shape)), y.order)
    ja = _arctan(y * reciprocal(xs))
    shift = np.where(x0 > 0.0, 0.0, np.where(y0 >= 0.0, np.pi, -np.pi))
    ca = ja.coef.copy()
    ca[..., 0] = ca[..., 0] + shift
    jb = _arctan(x * reciprocal(ys))
    cb = (-jb).coef.copy()
    cb[..., 0] = cb[..., 0] + np.where(y0 >= 0.0, 0.5 * np.pi, -0.5 * np.pi)
    out = Jet(np.where(ex, ca, cb), order)
    return out.truncate(order)


# -- finite-difference oracle ------------------------------------------


def _fd_operator(multi_index: tuple[int, ...], h: float) -> dict[tuple[int, ...], float]:
    """Offset->weight table for the repeated 4th-order central stencil."""
    stencil = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}
    op: dict[tuple[int, ...], float] = {(0,) * NVARS: 1.0}
    for direction, count in enumerate(multi_index):
        for _ in range(count):
            new: dict[tuple[int, ...], float] = {}
            for off, w in op.items():
                for step, sw in stencil.items():
                    o = list(off)
                    o[direction] += step
                    key = tuple(o)
                    new[key] = new.get(key, 0.0) + w * sw / h
            op = new
    return op


def fd_oracle(field, t: float, x, order: int,
              h_low: float = 1e-3, h_high: float = 1e-2) -> dict[tuple[int, ...], np.ndarray]:
    """Finite-difference estimates of all partials of ``field`` to ``order``.

    ``field(t, x)`` evaluates at a single point, x of shape (3,).  Orders 1
    and 2 use step ``h_low``; order 3 uses ``h_high`` (third differences
    lose too many digits at the smaller step).
    """
    x = np.asarray(x, dtype=float)
    out = {}
    for mi in MULTI_INDICES:
        deg = sum(mi)
        if deg == 0 or deg > order:
            continue
        h = h_high if deg == 3 else h_low
        acc = None
        for off, w in _fd_operator(mi, h).items():
            val = w * np.asarray(field(t + off[0] * h, x + h * np.array(off[1:])))
            acc = val if acc is None else acc + val
        out[mi] = acc
    return out
