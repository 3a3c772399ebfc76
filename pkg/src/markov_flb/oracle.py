"""Brute-force oracles and Monte Carlo coding simulation.

Everything here is deliberately computed by direct enumeration or
sampling, without eigenvectors, so that it can check the analytic
machinery independently.

Random numbers come from numpy's Philox-4x64 counter-based generator.
Trials are grouped in blocks of ``BLOCK`` consecutive trial indices and
block ``b`` draws from ``Philox(SeedSequence(seed, spawn_key=(b,)))``, so
the output does not depend on how blocks are scheduled across workers.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import EnumerationTooLarge, InvalidPrime, ValidationError
from .singleshot import JointDistribution, Lower, RelativeQ, TwoParam, Upper, as_kind
from .transition import Assumption, MarkovSource

STATE_CAP = 10**7
BLOCK = 4096
SCAN_CAP = 4096
TIE_TOL = 1e-9


def worker_count(requested: Optional[int] = None) -> int:
    """Worker cap from the argument or the ``MARKOV_FLB_THREADS`` variable."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("MARKOV_FLB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("MARKOV_FLB_THREADS must be an integer") from None
    return 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


# ---------------------------------------------------------------------------
# exhaustive joint laws


@dataclass(frozen=True)
class ExhaustiveJoint:
    """Explicit law of ``(X_1 Y_1, ..., X_n Y_n)``.

    ``probs`` has shape ``(S,) * n`` with ``S = nx * ny`` and pair states
    flattened as ``x * ny + y``.
    """

    probs: np.ndarray
    n: int
    nx: int
    ny: int

    def joint(self) -> np.ndarray:
        """Matrix ``P[x^n, y^n]`` with both blocks in lexicographic order."""
        n, nx, ny = self.n, self.nx, self.ny
        t = self.probs.reshape((nx, ny) * n)
        order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
        return t.transpose(order).reshape(nx**n, ny**n)

    def distribution(self) -> JointDistribution:
        p = self.joint()
        return JointDistribution(p / p.sum())


def brute_joint(src: MarkovSource, n: int, cap: int = STATE_CAP) -> ExhaustiveJoint:
    """Chain law of length ``n`` by dynamic programming over prefixes."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    S = src.W.size
    if S**n > cap:
        raise EnumerationTooLarge(f"{S}^{n} states exceed cap {cap}")
    WT = np.asarray(src.W.matrix).T  # WT[z_prev, z_next]
    p = np.asarray(src.initial, dtype=float).copy()
    for _ in range(n - 1):
        p = (p.reshape(-1, S)[:, :, None] * WT[None, :, :]).ravel()
    return ExhaustiveJoint(p.reshape((S,) * n), n, src.nx, src.ny)


# ---------------------------------------------------------------------------
# direct-sum measures on an explicit joint matrix


def _power_sum(p: np.ndarray, s: float) -> np.ndarray:
    return np.where(p > 0, np.abs(p) ** s, 0.0)


def brute_theta_h(P, kind, theta: float) -> float:
    """``theta * H_{1+theta}`` by plain power sums on ``P[x, y]``."""
    p = P.joint() if isinstance(P, ExhaustiveJoint) else np.asarray(getattr(P, "p", P), dtype=float)
    kind = as_kind(kind)
    py = p.sum(axis=0)
    if isinstance(kind, Lower):
        q = py
    elif isinstance(kind, RelativeQ):
        q = kind.q
    elif isinstance(kind, TwoParam):
        a = _power_sum(p, 1 + kind.theta_prime).sum(axis=0) ** (1 / (1 + kind.theta_prime))
        q = a / a.sum()
    elif isinstance(kind, Upper):
        a = _power_sum(p, 1 + theta).sum(axis=0) ** (1 / (1 + theta))
        return -(1 + theta) * float(np.log(a.sum()))
    else:
        raise ValidationError(f"unknown kind {kind!r}")
    supp = p > 0
    qq = np.broadcast_to(q[None, :], p.shape)
    return -float(np.log(np.sum(p[supp] ** (1 + theta) * qq[supp] ** (-theta))))


def brute_renyi_n(J, kind, theta: float) -> float:
    """``H_{1+theta}(X^n|Y^n)`` of the given kind on the explicit joint.

    At ``theta = 0`` this is ``-sum P log(P / Q)`` with ``Q`` the kind's
    conditioner at zero order (``P_Y`` for the lower and upper kinds).
    """
    if theta == 0:
        p = J.joint() if isinstance(J, ExhaustiveJoint) else np.asarray(getattr(J, "p", J), dtype=float)
        kind = as_kind(kind)
        q = p.sum(axis=0)
        if isinstance(kind, RelativeQ):
            q = kind.q
        elif isinstance(kind, TwoParam):
            a = _power_sum(p, 1 + kind.theta_prime).sum(axis=0) ** (1 / (1 + kind.theta_prime))
            q = a / a.sum()
        supp = p > 0
        qq = np.broadcast_to(q[None, :], p.shape)
        return float(-np.sum(p[supp] * np.log(p[supp] / qq[supp])))
    return brute_theta_h(J, kind, theta) / theta


# ---------------------------------------------------------------------------
# exact optimal source-coding error on tiny instances


def brute_optimal_source_error(J, M: int, max_items: int = 12, max_bins: int = 4) -> float:
    """Exact ``P_s(M)`` by search over encoder partitions with MAP decoding.

    Partitions of ``X^n`` into at most ``M`` bins are enumerated as
    restricted-growth strings, which removes bin-relabeling symmetry.
    """
    p = J.joint() if isinstance(J, ExhaustiveJoint) else np.asarray(getattr(J, "p", J), dtype=float)
    nitems = p.shape[0]
    if M >= nitems:
        return 0.0
    if nitems > max_items or M > max_bins:
        raise EnumerationTooLarge("instance too large for exhaustive encoder search")
    order = np.argsort(-p.sum(axis=1))
    rows = p[order]
    best = 0.0
    maxes: list[np.ndarray] = []

    def rec(i: int, score: float) -> None:
        nonlocal best
        if i == nitems:
            best = max(best, score)
            return
        row = rows[i]
        for j in range(len(maxes)):
            old = maxes[j]
            new = np.maximum(old, row)
            maxes[j] = new
            rec(i + 1, score + float(new.sum() - old.sum()))
            maxes[j] = old
        if len(maxes) < M:
            maxes.append(row)
            rec(i + 1, score + float(row.sum()))
            maxes.pop()

    rec(0, 0.0)
    return max(0.0, 1.0 - best)


# ---------------------------------------------------------------------------
# chain sampling


def _sample_paths(src: MarkovSource, rng: np.random.Generator, trials: int, n: int) -> np.ndarray:
    """Pair-state paths of shape ``(trials, n)``."""
    S = src.W.size
    cum0 = np.cumsum(src.initial)
    cumW = np.cumsum(src.W.matrix, axis=0)  # column z' gives cdf of next state
    z = np.empty((trials, n), dtype=np.int64)
    u = rng.random((trials, n))
    z[:, 0] = np.minimum(np.searchsorted(cum0, u[:, 0], side="right"), S - 1)
    for i in range(1, n):
        cdf = cumW[:, z[:, i - 1]].T
        z[:, i] = np.minimum((u[:, i : i + 1] >= cdf).sum(axis=1), S - 1)
    return z


class Estimate(NamedTuple):
    value: float
    stderr: float


def _run_blocks(fn, trials: int, seed: int, workers: Optional[int]):
    blocks = [(b, min(BLOCK, trials - b * BLOCK)) for b in range((trials + BLOCK - 1) // BLOCK)]
    nw = worker_count(workers)
    if nw == 1:
        return [fn(b, size, block_rng(seed, b)) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(lambda bs: fn(bs[0], bs[1], block_rng(seed, bs[0])), blocks))


def _self_information(src: MarkovSource, z: np.ndarray) -> np.ndarray:
    """``log 1/P(x^n|y^n)`` for each sampled path."""
    nx, ny = src.nx, src.ny
    W = src.W.matrix
    p1 = np.asarray(src.initial)
    with np.errstate(divide="ignore"):
        logW = np.log(W)
        logp1 = np.log(p1)
    y = z % ny
    x = z // ny
    joint = logp1[z[:, 0]] + logW[z[:, 1:], z[:, :-1]].sum(axis=1)
    if src.level >= Assumption.NON_HIDDEN:
        wy = src.y_transition()
        py1 = p1.reshape(nx, ny).sum(axis=0)
        with np.errstate(divide="ignore"):
            marg = np.log(py1)[y[:, 0]] + np.log(wy)[y[:, 1:], y[:, :-1]].sum(axis=1)
    else:
        T = src.W.tensor()
        m = z.shape[0]
        alpha = p1.reshape(nx, ny)[:, y[:, 0]].T  # (m, nx)
        marg = np.zeros(m)
        for i in range(1, z.shape[1]):
            s = alpha.sum(axis=1)
            marg += np.log(s)
            alpha = alpha / s[:, None]
            # advanced indices separated by a slice move to the front: (m, x, x')
            Ti = T[:, y[:, i], :, y[:, i - 1]]
            alpha = np.einsum("mxp,mp->mx", Ti, alpha)
        marg += np.log(alpha.sum(axis=1))
    return marg - joint


def empirical_varentropy(src: MarkovSource, n: int, trials: int, seed: int,
                         workers: Optional[int] = None) -> Estimate:
    """Sample variance of ``log 1/P(X^n|Y^n)`` divided by ``n``, with its standard error."""
    if trials < 4:
        raise ValidationError("need at least 4 trials")
    parts = _run_blocks(lambda b, size, rng: _self_information(src, _sample_paths(src, rng, size, n)),
                        trials, seed, workers)
    s = np.concatenate(parts)
    mean = s.mean()
    d = s - mean
    m2 = float(d @ d) / (len(s) - 1)
    m4 = float(np.mean(d**4))
    se = np.sqrt(max(m4 - m2 * m2, 0.0) / len(s))
    return Estimate(m2 / n, float(se) / n)


# ---------------------------------------------------------------------------
# hash-code simulation


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo configuration for random linear hashing over ``Z_q``.

    ``k`` is the code dimension: the hash matrix has ``n - k`` rows, so a
    source code has ``M = q^(n-k)`` bins.
    """

    trials: int
    seed: int
    n: int
    k: int
    q: int = 2
    tie_is_error: bool = True
    coset_cap: int = 1 << 16
    method: str = "auto"  # "auto" | "scan" | "coset"

    def __post_init__(self):
        if not _is_prime(self.q):
            raise InvalidPrime(f"q = {self.q} is not prime")
        if not 0 <= self.k <= self.n:
            raise ValidationError("need 0 <= k <= n")
        if self.trials < 1:
            raise ValidationError("trials must be positive")


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, int(q**0.5) + 1))


def _path_loglik(logW4: np.ndarray, logp1: np.ndarray, xs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Log-likelihoods of candidate x-paths ``xs[c, i]`` jointly with one y-path."""
    out = logp1[xs[:, 0], y[0]].copy()
    for i in range(1, len(y)):
        out += logW4[xs[:, i], y[i], xs[:, i - 1], y[i - 1]]
    return out


def _kernel_basis(F: np.ndarray, q: int) -> np.ndarray:
    """Basis of ``{d : F d = 0 mod q}`` as rows, by Gauss-Jordan elimination."""
    A = F.copy() % q
    m, n = A.shape
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + nz[0]
        A[[r, p]] = A[[p, r]]
        A[r] = (A[r] * pow(int(A[r, c]), q - 2, q)) % q
        for i in range(m):
            if i != r and A[i, c]:
                A[i] = (A[i] - A[i, c] * A[r]) % q
        pivots.append(c)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for j, f in enumerate(free):
        basis[j, f] = 1
        for i, pc in enumerate(pivots):
            basis[j, pc] = (-A[i, f]) % q
    return basis


def _decode_errors_coset(src, cfg, z, F):
    nx, ny = src.nx, src.ny
    q = cfg.q
    logW4 = np.log(np.where(src.W.matrix > 0, src.W.matrix, 1e-300)).reshape(nx, ny, nx, ny)
    logW4 = np.where(src.W.tensor() > 0, logW4, -np.inf)
    with np.errstate(divide="ignore"):
        logp1 = np.log(np.asarray(src.initial)).reshape(nx, ny)
    x_all = z // ny
    y_all = z % ny
    errs = np.zeros(len(z), dtype=bool)
    for t in range(len(z)):
        basis = _kernel_basis(F[t], q)
        d = basis.shape[0]
        if d == 0:
            continue
        if q**d > cfg.coset_cap:
            raise EnumerationTooLarge(f"coset of size {q}^{d} exceeds cap")
        coeffs = np.array(list(itertools.product(range(q), repeat=d)), dtype=np.int64)[1:]
        cands = (x_all[t][None, :] + coeffs @ basis) % q
        ll = _path_loglik(logW4, logp1, cands, y_all[t])
        ref = _path_loglik(logW4, logp1, x_all[t][None, :], y_all[t])[0]
        errs[t] = _beats(ll, ref, cfg.tie_is_error)
    return errs


def _beats(ll: np.ndarray, ref: float, tie_is_error: bool) -> bool:
    if not np.isfinite(ref):
        return True
    if tie_is_error:
        return bool(np.any(ll >= ref - TIE_TOL * max(1.0, abs(ref))))
    return bool(np.any(ll > ref + TIE_TOL * max(1.0, abs(ref))))


def _decode_errors_scan(src, cfg, z, F):
    nx, ny = src.nx, src.ny
    q, n = cfg.q, cfg.n
    T = src.W.tensor()
    with np.errstate(divide="ignore"):
        logW4 = np.log(T)
        logp1 = np.log(np.asarray(src.initial)).reshape(nx, ny)
    cands = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)  # (C, n)
    weights = q ** np.arange(n - 1, -1, -1)
    x_all = z // ny
    y_all = z % ny
    B = len(z)
    # log-likelihood of every candidate for every trial
    ll = logp1[cands[None, :, 0], y_all[:, None, 0]]
    for i in range(1, n):
        ll = ll + logW4[cands[None, :, i], y_all[:, None, i], cands[None, :, i - 1], y_all[:, None, i - 1]]
    ref_idx = x_all @ weights
    ref = ll[np.arange(B), ref_idx]
    # candidates sharing the transmitted syndrome
    syn_c = np.einsum("cn,bmn->bcm", cands, F) % q
    syn_x = np.einsum("bn,bmn->bm", x_all, F) % q
    same = np.all(syn_c == syn_x[:, None, :], axis=2)
    same[np.arange(B), ref_idx] = False
    scale = TIE_TOL * np.maximum(1.0, np.abs(ref))
    with np.errstate(invalid="ignore"):
        if cfg.tie_is_error:
            hit = ll >= (ref - scale)[:, None]
        else:
            hit = ll > (ref + scale)[:, None]
    errs = np.any(same & hit, axis=1)
    errs |= ~np.isfinite(ref)
    return errs


def mc_hash_coding(src: MarkovSource, cfg: SimConfig, workers: Optional[int] = None) -> Estimate:
    """Error rate of random linear hashing with MAP decoding in the coset.

    Each trial draws ``(x^n, y^n)`` from the chain and an ``(n-k) x n``
    matrix ``F`` uniformly over ``Z_q``; the decoder fails when another
    member of ``x^n + ker F`` is at least as likely (ties count as errors
    by default).
    """
    if src.nx != cfg.q:
        raise ValidationError("source alphabet size must equal the hash field size q")
    rows = cfg.n - cfg.k
    method = cfg.method
    if method == "auto":
        method = "scan" if cfg.q**cfg.n <= SCAN_CAP else "coset"

    def block(b, size, rng):
        z = _sample_paths(src, rng, size, cfg.n)
        F = rng.integers(0, cfg.q, size=(size, rows, cfg.n), dtype=np.int64)
        if method == "scan":
            out = np.zeros(size, dtype=bool)
            step = max(1, (1 << 20) // max(1, cfg.q**cfg.n))
            for s in range(0, size, step):
                out[s : s + step] = _decode_errors_scan(src, cfg, z[s : s + step], F[s : s + step])
            return out
        return _decode_errors_coset(src, cfg, z, F)

    errs = np.concatenate(_run_blocks(block, cfg.trials, cfg.seed, workers))
    mean = float(errs.mean())
    se = float(np.sqrt(mean * (1 - mean) / len(errs)))
    return Estimate(mean, se)
