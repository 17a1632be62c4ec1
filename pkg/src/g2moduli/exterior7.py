"""Exterior algebra on R^7 with coefficients over increasing multi-indices.

A k-form is stored as the vector of its coefficients c_I, I = (i_1 < ... < i_k),
in lexicographic order, so that the form is sum_I c_I dx^I.  Indices are
1-based in the public API (``dx^{12}`` is ``(1, 2)``) and 0-based internally.

The orientation is fixed by dx^{1..7} > 0 and the Hodge star is defined by
``a ^ star(g, b) = <a, b>_g dvol_g``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import MetricError

DIM = 7

__all__ = [
    "DIM",
    "KForm",
    "multi_indices",
    "rank",
    "permutation_sign",
    "basis_form",
    "monomial",
    "wedge",
    "interior",
    "hodge_star",
    "star_matrix",
    "form_inner",
    "inner_matrix",
    "compound",
    "derivation_matrix",
    "pullback",
    "dvol",
    "complement_table",
]


@lru_cache(maxsize=None)
def _combos(k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(DIM), k))


@lru_cache(maxsize=None)
def _rank_map(k: int) -> dict[tuple[int, ...], int]:
    return {I: r for r, I in enumerate(_combos(k))}


def multi_indices(k: int) -> list[tuple[int, ...]]:
    """All strictly increasing 1-based multi-indices of length k, in rank order."""
    return [tuple(i + 1 for i in I) for I in _combos(k)]


def rank(indices) -> int:
    """Lexicographic rank of a strictly increasing 1-based multi-index."""
    idx = tuple(int(i) - 1 for i in indices)
    try:
        return _rank_map(len(idx))[idx]
    except KeyError:
        raise ValueError(f"not a strictly increasing multi-index in 1..7: {indices!r}") from None


def permutation_sign(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if it has repeated entries."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class KForm:
    """A constant exterior k-form on R^7."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= DIM:
            raise ValueError(f"degree must be in 0..7, got {self.degree}")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != comb(DIM, self.degree):
            raise ValueError(
                f"degree {self.degree} form needs {comb(DIM, self.degree)} coefficients, got {c.shape[0]}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, degree: int) -> "KForm":
        return cls(degree, np.zeros(comb(DIM, degree)))

    def _check(self, other: "KForm"):
        if not isinstance(other, KForm) or other.degree != self.degree:
            raise ValueError("forms must have equal degree")

    def __add__(self, other: "KForm") -> "KForm":
        self._check(other)
        return KForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "KForm") -> "KForm":
        self._check(other)
        return KForm(self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, -self.coeffs)

    def __mul__(self, s) -> "KForm":
        return KForm(self.degree, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, s) -> "KForm":
        return KForm(self.degree, self.coeffs / float(s))

    def __xor__(self, other: "KForm") -> "KForm":
        return wedge(self, other)

    def __repr__(self) -> str:
        terms = []
        for I, c in zip(multi_indices(self.degree), self.coeffs):
            if c != 0.0:
                terms.append(f"{c:+g} dx^{''.join(map(str, I))}")
        return f"KForm({self.degree}: {' '.join(terms) or '0'})"

    def allclose(self, other: "KForm", rtol=1e-12, atol=1e-12) -> bool:
        return self.degree == other.degree and np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "KForm":
        if not isinstance(d, dict) or "degree" not in d or "coeffs" not in d:
            raise ValueError("KForm JSON needs 'degree' and 'coeffs'")
        degree = d["degree"]
        if not isinstance(degree, int) or isinstance(degree, bool):
            raise ValueError("'degree' must be an integer")
        coeffs = d["coeffs"]
        if not isinstance(coeffs, list) or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs
        ):
            raise ValueError("'coeffs' must be a list of numbers")
        return cls(degree, np.array(coeffs, dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "KForm":
        return cls.from_dict(json.loads(text))


def basis_form(k: int, r: int) -> KForm:
    """The r-th monomial k-form dx^{I_r}."""
    c = np.zeros(comb(DIM, k))
    c[r] = 1.0
    return KForm(k, c)


def monomial(*terms) -> KForm:
    """Build a form from ``(coefficient, "ijk")`` pairs; indices may be unsorted.

    >>> monomial((1, "12"), (-1, "21")).coeffs[0]
    2.0
    """
    k = len(terms[0][1])
    c = np.zeros(comb(DIM, k))
    for coef, idx in terms:
        seq = [int(ch) for ch in str(idx)]
        if len(seq) != k:
            raise ValueError("all terms must have the same degree")
        s = permutation_sign(seq)
        if s:
            c[rank(sorted(seq))] += s * coef
    return KForm(k, c)


@lru_cache(maxsize=None)
def _wedge_table(p: int, q: int):
    ia, ib, ic, sg = [], [], [], []
    rk = _rank_map(p + q)
    for a, I in enumerate(_combos(p)):
        for b, J in enumerate(_combos(q)):
            if set(I) & set(J):
                continue
            ia.append(a)
            ib.append(b)
            ic.append(rk[tuple(sorted(I + J))])
            sg.append(permutation_sign(I + J))
    return np.array(ia, int), np.array(ib, int), np.array(ic, int), np.array(sg, float)


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product a ^ b."""
    p, q = a.degree, b.degree
    if p + q > DIM:
        raise ValueError(f"degree overflow: {p} + {q} > 7")
    ia, ib, ic, sg = _wedge_table(p, q)
    out = np.zeros(comb(DIM, p + q))
    np.add.at(out, ic, sg * a.coeffs[ia] * b.coeffs[ib])
    return KForm(p + q, out)


@lru_cache(maxsize=None)
def _interior_table(k: int):
    vi, src, dst, sg = [], [], [], []
    rk = _rank_map(k - 1)
    for r, I in enumerate(_combos(k)):
        for m, i in enumerate(I):
            vi.append(i)
            src.append(r)
            dst.append(rk[I[:m] + I[m + 1:]])
            sg.append(-1.0 if m % 2 else 1.0)
    return np.array(vi, int), np.array(src, int), np.array(dst, int), np.array(sg, float)


def interior(v, a: KForm) -> KForm:
    """Interior product v _| a, with v a vector of R^7."""
    if a.degree < 1:
        raise ValueError("interior product needs a form of degree >= 1")
    v = np.asarray(v, dtype=float)
    if v.shape != (DIM,):
        raise ValueError("vector must have 7 components")
    vi, src, dst, sg = _interior_table(a.degree)
    out = np.zeros(comb(DIM, a.degree - 1))
    np.add.at(out, dst, sg * v[vi] * a.coeffs[src])
    return KForm(a.degree - 1, out)


def compound(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: the k x k minors det M[I, J] in rank order."""
    M = np.asarray(M, dtype=float)
    if k == 0:
        return np.ones((1, 1))
    idx = np.array(_combos(k))
    sub = M[idx[:, None, :, None], idx[None, :, None, :]]
    with np.errstate(divide="ignore", invalid="ignore"):  # singular minors are legitimately 0
        return np.linalg.det(sub)


def _check_metric(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (DIM, DIM):
        raise MetricError("metric must be 7x7")
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise MetricError("metric is not symmetric")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise MetricError("metric is not positive definite") from None
    return 0.5 * (g + g.T)


def inner_matrix(g, k: int) -> np.ndarray:
    """Gram matrix of the monomial k-forms under the metric g."""
    g = _check_metric(g)
    return compound(np.linalg.inv(g), k)


@lru_cache(maxsize=None)
def complement_table(k: int):
    """For each k-multi-index I: rank of its complement and sign of (I, I^c)."""
    rk = _rank_map(DIM - k)
    ranks, signs = [], []
    for I in _combos(k):
        Ic = tuple(i for i in range(DIM) if i not in I)
        ranks.append(rk[Ic])
        signs.append(permutation_sign(I + Ic))
    return np.array(ranks, int), np.array(signs, float)


def star_matrix(g, k: int) -> np.ndarray:
    """Matrix of the Hodge star on k-forms for the metric g."""
    g = _check_metric(g)
    G = compound(np.linalg.inv(g), k)
    vol = np.sqrt(np.linalg.det(g))
    ranks, signs = complement_table(k)
    S = np.zeros((comb(DIM, DIM - k), comb(DIM, k)))
    S[ranks, :] = (signs * vol)[:, None] * G
    return S


def hodge_star(g, a: KForm) -> KForm:
    return KForm(DIM - a.degree, star_matrix(g, a.degree) @ a.coeffs)


def form_inner(g, a: KForm, b: KForm) -> float:
    """Pointwise inner product <a, b>_g of two forms of equal degree."""
    if a.degree != b.degree:
        raise ValueError("degree mismatch")
    return float(a.coeffs @ inner_matrix(g, a.degree) @ b.coeffs)


def dvol(g) -> KForm:
    g = _check_metric(g)
    return KForm(DIM, [np.sqrt(np.linalg.det(g))])


@lru_cache(maxsize=None)
def _derivation_basis(k: int) -> np.ndarray:
    # T[i, j] is the matrix of the derivation induced by E_ij on k-forms,
    # where E_ij . dx^m = delta_{mi} dx^j.
    n = comb(DIM, k)
    T = np.zeros((DIM, DIM, n, n))
    rk = _rank_map(k)
    for r, I in enumerate(_combos(k)):
        for m, i in enumerate(I):
            for j in range(DIM):
                J = I[:m] + (j,) + I[m + 1:]
                s = permutation_sign(J)
                if s:
                    T[i, j, rk[tuple(sorted(J))], r] += s
    T.setflags(write=False)
    return T


def derivation_matrix(a, k: int) -> np.ndarray:
    """Matrix of the derivation action of a in gl(7) on k-forms.

    This is d/dt of the pullback by I + t a at t = 0, so the identity acts on
    k-forms as multiplication by k.
    """
    a = np.asarray(a, dtype=float)
    return np.einsum("ij,ijpq->pq", a, _derivation_basis(k))


def pullback(A, a: KForm) -> KForm:
    """Pullback A^* a of a constant form by the linear map A."""
    return KForm(a.degree, compound(A, a.degree).T @ a.coeffs)
