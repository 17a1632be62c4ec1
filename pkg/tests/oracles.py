"""Brute-force reference implementations, independent of the package internals.

Forms are full antisymmetric tensors T with a = (1/k!) sum T_{i..} dx^i ^ ...,
so T_I = c_I on increasing I.  Everything here loops over permutations.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

N = 7


def perm_sign(p) -> int:
    p = list(p)
    s = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def to_tensor(coeffs, k):
    T = np.zeros((N,) * k)
    for c, I in zip(coeffs, itertools.combinations(range(N), k)):
        for p in itertools.permutations(range(k)):
            T[tuple(I[i] for i in p)] = perm_sign(p) * c
    return T


def from_tensor(T, k):
    return np.array([T[I] for I in itertools.combinations(range(N), k)])


def levi_civita():
    E = np.zeros((N,) * N)
    for p in itertools.permutations(range(N)):
        E[p] = perm_sign(p)
    return E


_EPS = None


def eps():
    global _EPS
    if _EPS is None:
        _EPS = levi_civita()
    return _EPS


def wedge(a, p, b, q):
    """(a ^ b)_I for increasing I, by summing over all shuffles of I."""
    A, B = to_tensor(a, p), to_tensor(b, q)
    out = []
    for I in itertools.combinations(range(N), p + q):
        tot = 0.0
        for perm in itertools.permutations(range(p + q)):
            J = [I[i] for i in perm]
            tot += perm_sign(perm) * A[tuple(J[:p])] * B[tuple(J[p:])]
        out.append(tot / (math.factorial(p) * math.factorial(q)))
    return np.array(out)


def interior(v, a, k):
    T = to_tensor(a, k)
    return from_tensor(np.tensordot(v, T, axes=(0, 0)), k - 1)


def hodge_star(g, a, k):
    """(*a)_J = (1/k!) sqrt(det g) a^{I} eps_{I J}, indices raised with g^{-1}."""
    gi = np.linalg.inv(g)
    T = to_tensor(a, k)
    for _ in range(k):
        T = np.tensordot(gi, T, axes=(1, k - 1))  # raise one slot, cycling slots
    S = np.sqrt(np.linalg.det(g)) * np.tensordot(T, eps(), axes=(list(range(k)), list(range(k))))
    return from_tensor(S / math.factorial(k), N - k)


def bilinear_B(phi):
    """B_ij from (e_i _| phi) ^ (e_j _| phi) ^ phi = 6 B_ij vol, via explicit wedges."""
    e = np.eye(N)
    om = [interior(e[i], phi, 3) for i in range(N)]
    B = np.zeros((N, N))
    for i in range(N):
        for j in range(i, N):
            w = wedge(wedge(om[i], 2, om[j], 2), 4, phi, 3)
            B[i, j] = B[j, i] = w[0] / 6.0
    return B


def metric_from_phi(phi):
    B = bilinear_B(phi)
    return B / np.linalg.det(B) ** (1.0 / 9.0)


def pullback(A, a, k):
    """(A^* a)_{I} = a_{J} A_{j1 i1} ... A_{jk ik} in tensor form."""
    T = to_tensor(a, k)
    for _ in range(k):
        T = np.tensordot(T, A, axes=(0, 0))
    return from_tensor(T, k)
