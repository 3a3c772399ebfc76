import itertools
import math

import numpy as np
import pytest

from markov_flb.conversion import gilbert_elliott
from markov_flb.singleshot import JointDistribution
from markov_flb.transition import MarkovSource


def binary_entropy(p: float) -> float:
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def ge_entropy_oracle(q0, q1, p0, p1) -> float:
    """Entropy rate of GE noise given the state: stationary mix of binary entropies."""
    pi0 = q1 / (q0 + q1)
    return pi0 * binary_entropy(p0) + (1 - pi0) * binary_entropy(p1)


def rank_one_source(p) -> MarkovSource:
    """i.i.d. pair chain with per-letter law ``p[x, y]``."""
    p = np.asarray(p, dtype=float)
    nx, ny = p.shape
    T = np.broadcast_to(p[:, :, None, None], (nx, ny, nx, ny)).copy()
    return MarkovSource.from_tensor(T)


def product_chain(V, U) -> MarkovSource:
    V, U = np.asarray(V), np.asarray(U)
    return MarkovSource.from_tensor(np.einsum("ac,bd->abcd", V, U))


def hidden_chain() -> MarkovSource:
    # sum_x W(x, y|x', y') depends on x'
    T = np.zeros((2, 2, 2, 2))
    for xp in range(2):
        wy = [0.8, 0.2] if xp == 0 else [0.3, 0.7]
        for y in range(2):
            T[:, y, xp, :] = 0.5 * wy[y]
    return MarkovSource.from_tensor(T)


# BES by hand: outputs 0, 1, ?; orbit 0 = {0, 1} with trivial stabilizer,
# orbit 1 = {?} with stabilizer Z_2.  iota sends an output to its coset label.
BES_ORBIT = {0: 0, 1: 0, 2: 1}
BES_IOTA = {0: 0, 1: 1, 2: 0}
BES_STAB = {0: [0], 1: [0, 1]}


def enumerate_bes_markov(W_tilde: np.ndarray, Q: np.ndarray, n: int) -> np.ndarray:
    """``P[x^n, y^n]`` from noise paths on ``B`` and the per-letter virtual output."""
    out = np.zeros((2**n, 2**n))
    for bs in itertools.product(range(3), repeat=n):
        pb = Q[bs[0]] * np.prod([W_tilde[bs[i], bs[i - 1]] for i in range(1, n)])
        ys = [BES_ORBIT[b] for b in bs]
        for shifts in itertools.product(*(BES_STAB[y] for y in ys)):
            w = pb / np.prod([len(BES_STAB[y]) for y in ys])
            xs = [(BES_IOTA[b] + s) % 2 for b, s in zip(bs, shifts)]
            xi = int("".join(map(str, xs)), 2)
            yi = int("".join(map(str, ys)), 2)
            out[xi, yi] += w
    return out


def bes_markov_erasure(e01=0.3, e10=0.6, p=0.1) -> np.ndarray:
    """Two-state erasure process on ``B``; non-erased letters flip with prob ``p``."""
    W = np.zeros((3, 3))
    for bp in range(3):
        erase = e01 if bp < 2 else 1 - e10
        W[0, bp] = (1 - erase) * (1 - p)
        W[1, bp] = (1 - erase) * p
        W[2, bp] = erase
    return W


@pytest.fixture(scope="session")
def ge():
    return gilbert_elliott(0.1, 0.1, 0.1, 0.4)


@pytest.fixture(scope="session")
def d2():
    return JointDistribution([[0.5, 0.25], [0.0, 0.25]])


@pytest.fixture(scope="session")
def uniform22():
    return JointDistribution(np.full((2, 2), 0.25))
