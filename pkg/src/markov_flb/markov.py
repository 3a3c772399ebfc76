"""Markov-chain and nonnegative-matrix primitives.

Matrices are indexed ``M[dest, source]`` throughout, so a stochastic matrix
has unit column sums and acts on column vectors of probabilities.
States of a pair chain on ``X x Y`` are flattened as ``z = x * ny + y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    NoConvergence,
    NotAperiodic,
    NotIrreducible,
    StepUnderflow,
    ValidationError,
)

PROB_TOL = 1e-12
PF_REL_TOL = 1e-13
PF_STREAK = 3
PF_MAX_ITER = 100_000
PF_RESIDUAL_TOL = 1e-10


# ---------------------------------------------------------------------------
# validation helpers


def as_prob_vector(p, tol: float = PROB_TOL) -> np.ndarray:
    """Return ``p`` as a float vector after checking it is a distribution."""
    arr = np.asarray(p, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValidationError("probability vector must be finite and nonempty")
    if np.any(arr < 0):
        raise ValidationError("probability vector has negative entries")
    if abs(arr.sum() - 1.0) > tol:
        raise ValidationError(f"probability vector sums to {arr.sum()!r}, not 1")
    return arr


def as_stochastic(W, tol: float = PROB_TOL) -> np.ndarray:
    """Return ``W`` as a float array after checking unit column sums."""
    arr = np.asarray(W, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError("stochastic matrix must be square")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("stochastic matrix entries must be finite and >= 0")
    sums = arr.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > tol:
        raise ValidationError("columns of a stochastic matrix must sum to 1")
    return arr


def _bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


def is_irreducible(mask) -> bool:
    """Strong connectivity of the support graph of a square matrix."""
    m = np.asarray(mask, dtype=bool)
    n = m.shape[0]
    reach = m | np.eye(n, dtype=bool)
    while True:
        nxt = _bool_matmul(reach, reach)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return bool(reach.all())


def is_primitive(mask) -> bool:
    """Irreducible and aperiodic: some power of the support is all-positive.

    Uses Wielandt's bound ``(n-1)^2 + 1`` on the primitivity exponent and
    repeated boolean squaring.
    """
    m = np.asarray(mask, dtype=bool)
    if not is_irreducible(m):
        return False
    n = m.shape[0]
    target = (n - 1) ** 2 + 1
    power = m.copy()
    k = 1
    while k < target:
        power = _bool_matmul(power, power)
        k *= 2
    return bool(power.all())


# ---------------------------------------------------------------------------
# Perron-Frobenius machinery


@dataclass(frozen=True)
class PFResult:
    """Perron-Frobenius eigenpair of a nonnegative irreducible matrix.

    Attributes
    ----------
    eigenvalue : float
    right : ndarray
        ``M @ right = eigenvalue * right``, normalized so ``min(right) == 1``.
    left : ndarray
        ``M.T @ left = eigenvalue * left``, normalized to sum 1.
    iterations : int
    """

    eigenvalue: float
    right: np.ndarray
    left: np.ndarray
    iterations: int


def _power_vector(A: np.ndarray, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Dominant eigenvector of the shifted positive-diagonal matrix ``A``."""
    n = A.shape[0]
    x = np.full(n, 1.0 / n)
    lam_prev = np.nan
    streak = 0
    for it in range(1, max_iter + 1):
        y = A @ x
        lam = float(y.sum())
        if not np.isfinite(lam) or lam <= 0:
            raise NoConvergence("power iteration produced a non-positive norm")
        x = y / lam
        if abs(lam - lam_prev) <= PF_REL_TOL * lam:
            streak += 1
        else:
            streak = 0
        lam_prev = lam
        if streak >= PF_STREAK:
            resid = np.max(np.abs(A @ x - lam * x))
            if resid <= 1e-2 * PF_RESIDUAL_TOL * lam * np.max(x):
                return x, lam, it
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def _pf_scaled(S: np.ndarray, max_iter: int = PF_MAX_ITER) -> PFResult:
    """Eigenpair of an irreducible matrix with entries already scaled to <= 1."""
    shift = 0.5 * float(S.max())
    A = S + shift * np.eye(S.shape[0])
    r, _, it_r = _power_vector(A, max_iter)
    l, _, it_l = _power_vector(A.T.copy(), max_iter)
    # two-sided quotient: second-order accurate in the eigenvector errors
    lam = float(l @ (S @ r)) / float(l @ r)
    if not lam > 0:
        raise NoConvergence("non-positive Perron-Frobenius eigenvalue")
    resid = np.max(np.abs(S @ r - lam * r)) / (lam * np.max(r))
    if resid > PF_RESIDUAL_TOL:
        raise NoConvergence(f"eigen-residual {resid:.3e} above tolerance")
    return PFResult(lam, r / r.min(), l / l.sum(), max(it_r, it_l))


def perron_frobenius(M, max_iter: int = PF_MAX_ITER) -> PFResult:
    """Perron-Frobenius eigenpair by shifted power iteration.

    The matrix is shifted by ``c * I`` with ``c = 0.5 * max(M)`` so that
    periodic supports become primitive; the eigenvalue of ``M`` is recovered
    from a two-sided quotient ``l.M r / l.r`` once both vectors converge.

    Parameters
    ----------
    M : array_like
        Square nonnegative irreducible matrix.

    Returns
    -------
    PFResult

    Raises
    ------
    NotIrreducible
    NoConvergence
    """
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError("matrix must be square")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValidationError("matrix must be finite and nonnegative")
    if not is_irreducible(arr > 0):
        raise NotIrreducible("support graph is not strongly connected")
    scale = float(arr.max())
    res = _pf_scaled(arr / scale, max_iter)
    return PFResult(res.eigenvalue * scale, res.right, res.left, res.iterations)


def log_perron_frobenius(log_M: np.ndarray, mask: np.ndarray) -> tuple[float, PFResult]:
    """Eigenpair of ``exp(log_M)`` restricted to ``mask`` in the log domain.

    Returns ``(log_eigenvalue, result_of_scaled_matrix)``. Entries on the
    support that underflow after scaling are floored at the smallest normal
    double so that the support graph (and irreducibility) is preserved.
    """
    mask = np.asarray(mask, dtype=bool)
    if not is_irreducible(mask):
        raise NotIrreducible("support graph is not strongly connected")
    vals = np.where(mask, log_M, -np.inf)
    top = float(np.max(vals[mask]))
    S = np.where(mask, np.exp(vals - top), 0.0)
    S[mask & (S == 0.0)] = np.finfo(float).tiny
    res = _pf_scaled(S)
    return top + float(np.log(res.eigenvalue)), res


def stationary_distribution(W) -> np.ndarray:
    """Invariant law ``pi`` with ``W @ pi = pi`` of an irreducible chain.

    Examples
    --------
    >>> stationary_distribution([[0.7, 0.4], [0.3, 0.6]]).round(6)
    array([0.571429, 0.428571])
    """
    arr = as_stochastic(W)
    if not is_irreducible(arr > 0):
        raise NotIrreducible("chain is not irreducible")
    res = perron_frobenius(arr)
    pi = res.right / res.right.sum()
    return pi


# ---------------------------------------------------------------------------
# pair transition matrices


@dataclass(frozen=True)
class PairTransitionMatrix:
    """Transition matrix ``W(x, y | x', y')`` of a chain on ``X x Y``.

    Parameters
    ----------
    matrix : ndarray, shape (nx*ny, nx*ny)
        Column-stochastic, ``matrix[x*ny + y, x'*ny + y']``.
    nx, ny : int
        Alphabet sizes.
    """

    matrix: np.ndarray
    nx: int
    ny: int

    def __post_init__(self):
        arr = as_stochastic(self.matrix)
        if arr.shape[0] != self.nx * self.ny:
            raise ValidationError("matrix size does not match nx * ny")
        if not is_irreducible(arr > 0):
            raise NotIrreducible("pair chain is not irreducible")
        if not is_primitive(arr > 0):
            raise NotAperiodic("pair chain is periodic")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @classmethod
    def from_tensor(cls, T) -> "PairTransitionMatrix":
        """Build from an array ``T[x, y, x', y']``."""
        T = np.asarray(T, dtype=float)
        nx, ny = T.shape[:2]
        return cls(T.reshape(nx * ny, nx * ny), nx, ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def tensor(self) -> np.ndarray:
        """View as ``T[x, y, x', y']``."""
        return self.matrix.reshape(self.nx, self.ny, self.nx, self.ny)

    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.matrix)


# ---------------------------------------------------------------------------
# cumulant generating functions


@dataclass(frozen=True)
class CgfSpec:
    """Transition matrix with an additive generator.

    ``phi(rho)`` is the log Perron-Frobenius eigenvalue of
    ``W(z|z') exp(rho g(z, z'))``, where pairs with ``W == 0`` are never
    tilted and ``g`` is ignored there.

    Parameters
    ----------
    W : ndarray
        Column-stochastic matrix.
    g : ndarray
        Generator ``g[z, z']``; may be infinite where ``W == 0``.
    g_init : ndarray, optional
        Single-letter generator ``g~(z)`` for the first symbol.
    initial : ndarray, optional
        Law of the first symbol; defaults to the stationary distribution.
    """

    W: np.ndarray
    g: np.ndarray
    g_init: Optional[np.ndarray] = None
    initial: Optional[np.ndarray] = None
    support: np.ndarray = field(init=False, repr=False)
    log_W: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = as_stochastic(self.W)
        g = np.asarray(self.g, dtype=float)
        if g.shape != W.shape:
            raise ValidationError("generator shape must match W")
        supp = W > 0
        if not np.all(np.isfinite(g[supp])):
            raise ValidationError("generator must be finite on the support of W")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "g", np.where(supp, g, 0.0))
        object.__setattr__(self, "support", supp)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "log_W", np.where(supp, np.log(np.where(supp, W, 1.0)), -np.inf))
        if self.initial is not None:
            object.__setattr__(self, "initial", as_prob_vector(self.initial))
        if self.g_init is not None:
            object.__setattr__(self, "g_init", np.asarray(self.g_init, dtype=float))

    def tilted_log(self, rho: float) -> np.ndarray:
        return np.where(self.support, self.log_W + rho * self.g, -np.inf)

    def first_letter_weights(self, rho: float) -> np.ndarray:
        p1 = self.initial if self.initial is not None else stationary_distribution(self.W)
        gt = self.g_init if self.g_init is not None else np.zeros_like(p1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p1 > 0, p1 * np.exp(rho * np.where(p1 > 0, gt, 0.0)), 0.0)


def _cgf_eigen(spec: CgfSpec, rho: float) -> tuple[float, PFResult]:
    return log_perron_frobenius(spec.tilted_log(float(rho)), spec.support)


def cgf(spec: CgfSpec, rho: float) -> float:
    """Transition CGF ``phi(rho)``; exactly 0 at ``rho = 0``."""
    if rho == 0:
        return 0.0
    return _cgf_eigen(spec, rho)[0]


def richardson(f: Callable[[float], float], x: float, order: int, h: float) -> float:
    """Central difference of ``order`` 1 or 2 with two Richardson levels.

    Uses steps ``h, h/2, h/4``; truncation error is ``O(h^6)``.
    """
    cache: dict[float, float] = {}

    def F(t: float) -> float:
        if t not in cache:
            cache[t] = f(t)
        return cache[t]

    def D(step: float) -> float:
        if order == 1:
            return (F(x + step) - F(x - step)) / (2 * step)
        return (F(x + step) - 2 * F(x) + F(x - step)) / (step * step)

    d0, d1, d2 = D(h), D(h / 2), D(h / 4)
    r1a = (4 * d1 - d0) / 3
    r1b = (4 * d2 - d1) / 3
    return (16 * r1b - r1a) / 15


def stable_derivative(
    f: Callable[[float], float],
    x: float,
    order: int,
    h0: float,
    rtol: float,
    h_min: float = 1e-8,
) -> float:
    """Richardson derivative with step halving until two steps agree.

    Raises
    ------
    StepUnderflow
        When the step falls below ``h_min`` without agreement or with
        non-finite function values.
    """
    h = h0
    prev = None
    while h >= h_min:
        try:
            est = richardson(f, x, order, h)
        except (ArithmeticError, ValueError):
            est = np.nan
        if np.isfinite(est):
            if prev is not None and abs(est - prev) <= rtol * max(1.0, abs(est)):
                return est
            prev = est
        else:
            prev = None
        h /= 2
    raise StepUnderflow(f"derivative of order {order} failed to stabilize at x={x}")


# base steps: first derivative per the core convention; the second
# derivative starts larger because roundoff scales like eps / h^2
H_FIRST = 1e-4
H_SECOND = 1e-2


def cgf_derivatives(spec: CgfSpec, rho: float) -> tuple[float, float]:
    """``(phi'(rho), phi''(rho))`` by Richardson-extrapolated differences."""
    f = lambda t: cgf(spec, t)
    d1 = stable_derivative(f, rho, 1, H_FIRST, 1e-9)
    d2 = stable_derivative(f, rho, 2, H_SECOND, 1e-8)
    return d1, d2


def left_vector_min1(res: PFResult) -> np.ndarray:
    return res.left / res.left.min()


def cgf_finite_bounds(spec: CgfSpec, rho: float, n: int) -> tuple[float, float]:
    """Bounds on ``phi_n(rho) = log E[exp(rho S_n)]`` for the n-step chain.

    With ``v`` the left eigenvector of the tilted matrix (min entry 1) and
    ``w(z) = P_1(z) exp(rho g~(z))``,
    ``(n-1) phi + log<v|w> - log max v <= phi_n <= (n-1) phi + log<v|w>``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    phi, res = _cgf_eigen(spec, rho)
    v = left_vector_min1(res)
    w = spec.first_letter_weights(rho)
    upper_c = float(np.log(v @ w))
    lower_c = upper_c - float(np.log(v.max()))
    return (n - 1) * phi + lower_c, (n - 1) * phi + upper_c
