"""First-order fast marching on a rectangular chart with a diagonal metric.

The grid has rows i (spacing h1, row metric factor s1[i]) and columns j
(spacing h2, column metric factor a2[i] * b2[j]).  The eikonal equation
|grad T| = 1 is solved with the standard upwind quadratic update and a
binary heap with lazy deletion.
"""
import heapq
import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _solve2(U0, H0, U1, H1):
    if U0 > U1:
        U0, U1, H0, H1 = U1, U0, H1, H0
    T = U0 + H0
    if T <= U1:
        return T
    a = 1.0 / H0 ** 2 + 1.0 / H1 ** 2
    b = -2.0 * (U0 / H0 ** 2 + U1 / H1 ** 2)
    c = U0 ** 2 / H0 ** 2 + U1 ** 2 / H1 ** 2 - 1.0
    disc = b * b - 4 * a * c
    if disc < 0:
        return T
    return (-b + math.sqrt(disc)) / (2 * a)


@nb.njit(cache=True)
def _axis_min(T, state, i, j, di, dj):
    n1, n2 = T.shape
    best = np.inf
    for sgn in (-1, 1):
        i1 = i + sgn * di
        j1 = j + sgn * dj
        if 0 <= i1 < n1 and 0 <= j1 < n2 and state[i1, j1] == 2:
            if T[i1, j1] < best:
                best = T[i1, j1]
    return best


@nb.njit(cache=True)
def _local(T, state, i, j, h1, h2, s1, a2, b2):
    u1 = _axis_min(T, state, i, j, 1, 0)
    u2 = _axis_min(T, state, i, j, 0, 1)
    H1 = h1 * s1[i]
    H2 = h2 * a2[i] * b2[j]
    if u1 == np.inf and u2 == np.inf:
        return np.inf
    if u1 == np.inf:
        return u2 + H2
    if u2 == np.inf:
        return u1 + H1
    return _solve2(u1, H1, u2, H2)


@nb.njit(cache=True)
def march(T0, fixed, h1, h2, s1, a2, b2, t_stop):
    """Return the arrival-time field; nodes beyond t_stop stay at +inf.

    ``fixed`` marks initialised nodes whose values in ``T0`` are kept.
    """
    n1, n2 = T0.shape
    T = T0.copy()
    state = np.zeros((n1, n2), np.int8)
    heap = [(0.0, 0)]
    heap.pop()
    for i in range(n1):
        for j in range(n2):
            if fixed[i, j]:
                state[i, j] = 2
            else:
                T[i, j] = np.inf
    for i in range(n1):
        for j in range(n2):
            if state[i, j] != 2:
                continue
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < n1 and 0 <= jj < n2 and state[ii, jj] != 2:
                    tn = _local(T, state, ii, jj, h1, h2, s1, a2, b2)
                    if tn < T[ii, jj]:
                        T[ii, jj] = tn
                        state[ii, jj] = 1
                        heapq.heappush(heap, (tn, ii * n2 + jj))
    while len(heap) > 0:
        tval, k = heapq.heappop(heap)
        i = k // n2
        j = k % n2
        if state[i, j] == 2 or tval > T[i, j]:
            continue
        if tval > t_stop:
            break
        state[i, j] = 2
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = i + di, j + dj
            if 0 <= ii < n1 and 0 <= jj < n2 and state[ii, jj] != 2:
                tn = _local(T, state, ii, jj, h1, h2, s1, a2, b2)
                if tn < T[ii, jj]:
                    T[ii, jj] = tn
                    state[ii, jj] = 1
                    heapq.heappush(heap, (tn, ii * n2 + jj))
    for i in range(n1):
        for j in range(n2):
            if state[i, j] != 2:
                T[i, j] = np.inf
    return T
