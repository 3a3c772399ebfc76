"""Conditional Renyi entropy rates of pair Markov chains.

A :class:`MarkovSource` couples a pair transition matrix ``W(x,y|x',y')``
with an initial law.  Rates are Perron-Frobenius eigenvalues of tilted
matrices; the n-letter measures are sandwiched by ``(n-1)`` times the rate
plus explicit correction constants.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import AssumptionViolated, DomainError, ValidationError
from .markov import (
    CgfSpec,
    PairTransitionMatrix,
    PFResult,
    as_prob_vector,
    cgf_derivatives,
    log_perron_frobenius,
    stable_derivative,
    H_FIRST,
    H_SECOND,
)
from .singleshot import Lower, RenyiKind, TwoParam, Upper, as_kind

SUM_TOL = 1e-12
MULTISET_TOL = 1e-10
THETA_FLOOR = -1 + 1e-6
SHANNON_BAND = 1e-6


class Assumption(enum.IntEnum):
    """Structural level of a pair chain with respect to ``Y``."""

    NONE = 0
    NON_HIDDEN = 1
    STRONGLY_NON_HIDDEN = 2


@dataclass(frozen=True)
class CorrectionPair:
    """Additive constants ``lower <= upper`` of an n-letter sandwich."""

    lower: float
    upper: float


def _log0(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def y_marginal(W: PairTransitionMatrix) -> np.ndarray:
    """``sum_x W(x,y|x',y')`` as an array ``[y, x', y']``."""
    return W.tensor().sum(axis=0)


def check_assumptions(W: PairTransitionMatrix) -> Assumption:
    """Classify ``W`` as hidden, non-hidden or strongly non-hidden.

    Non-hidden: ``sum_x W(x,y|x',y')`` does not depend on ``x'``.
    Strongly non-hidden: additionally, for each ``(y, y')`` the multiset
    ``{W(x|x',y',y)}_x`` is the same for every ``x'``.
    """
    S = y_marginal(W)
    if np.max(np.abs(S - S[:, :1, :])) > SUM_TOL:
        return Assumption.NONE
    T = W.tensor()
    wy = S[:, 0, :]
    for y in range(W.ny):
        for yp in range(W.ny):
            if wy[y, yp] <= 0:
                continue
            cond = np.sort(T[:, y, :, yp] / wy[y, yp], axis=0)
            if np.max(np.abs(cond - cond[:, :1])) > MULTISET_TOL:
                return Assumption.NON_HIDDEN
    return Assumption.STRONGLY_NON_HIDDEN


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """Pair chain with initial law on ``X x Y``.

    Parameters
    ----------
    W : PairTransitionMatrix
    initial : array_like, optional
        Law of ``(X_1, Y_1)`` flattened as ``x * ny + y``; defaults to the
        stationary distribution.
    name : str, optional
    """

    W: PairTransitionMatrix
    initial: Optional[np.ndarray] = None
    name: str = ""
    level: Assumption = field(init=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        init = self.W.stationary() if self.initial is None else as_prob_vector(self.initial)
        if init.shape[0] != self.W.size:
            raise ValidationError("initial distribution length must be nx * ny")
        init = init.copy()
        init.setflags(write=False)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "level", check_assumptions(self.W))
        object.__setattr__(self, "_cache", {})

    @classmethod
    def from_tensor(cls, T, initial=None, name: str = "") -> "MarkovSource":
        return cls(PairTransitionMatrix.from_tensor(T), initial, name)

    # -- basic views -------------------------------------------------------
    @property
    def nx(self) -> int:
        return self.W.nx

    @property
    def ny(self) -> int:
        return self.W.ny

    def initial_joint(self) -> np.ndarray:
        """Initial law as ``p[x, y]``."""
        return self.initial.reshape(self.nx, self.ny)

    def require(self, level: Assumption) -> None:
        if self.level < level:
            raise AssumptionViolated(
                f"transition matrix is {self.level.name}, {level.name} required"
            )

    def _memo(self, key, fn):
        c = self._cache
        if key not in c:
            c[key] = fn()
        return c[key]

    def y_transition(self) -> np.ndarray:
        """``W(y|y')`` (requires non-hidden)."""
        self.require(Assumption.NON_HIDDEN)
        return self._memo("wy", lambda: y_marginal(self.W)[:, 0, :])

    def _log_W(self) -> np.ndarray:
        return self._memo("logW", lambda: _log0(self.W.matrix))

    def _support(self) -> np.ndarray:
        return self._memo("supp", lambda: self.W.matrix > 0)

    def _log_wy_full(self) -> np.ndarray:
        """``log W(y|y')`` broadcast to the pair-state matrix."""
        def build():
            lwy = _log0(self.y_transition())
            full = np.broadcast_to(lwy[None, :, None, :], (self.nx, self.ny, self.nx, self.ny))
            return full.reshape(self.W.size, self.W.size)
        return self._memo("logwy_full", build)

    def log_w_theta(self, theta: float) -> np.ndarray:
        """``log W_theta(y|y') = log sum_x W(x,y|x',y')^{1+theta}`` (any ``x'``)."""
        self.require(Assumption.STRONGLY_NON_HIDDEN)
        T = self.W.tensor()[:, :, 0, :]
        lt = _log0(T)
        vals = np.where(T > 0, (1 + theta) * np.where(T > 0, lt, 0.0), -np.inf)
        return logsumexp(vals, axis=0)

    def _y_support(self) -> np.ndarray:
        return self.y_transition() > 0

    # -- tilted eigenproblems ---------------------------------------------
    def eig_lower(self, theta: float) -> tuple[float, PFResult]:
        """Log eigenvalue of ``W~_theta = W^{1+theta} W(y|y')^{-theta}``."""
        def build():
            supp = self._support()
            lw = np.where(supp, self._log_W(), 0.0)
            lm = (1 + theta) * lw - theta * np.where(supp, self._log_wy_full(), 0.0)
            return log_perron_frobenius(np.where(supp, lm, -np.inf), supp)
        return self._memo(("low", float(theta)), build)

    def eig_lower_reduced(self, theta: float) -> tuple[float, PFResult]:
        """Same eigenvalue from the ``|Y| x |Y|`` matrix ``W_theta W(y|y')^{-theta}``."""
        supp = self._y_support()
        lm = self.log_w_theta(theta) - theta * np.where(supp, _log0(self.y_transition()), 0.0)
        return log_perron_frobenius(np.where(supp, lm, -np.inf), supp)

    def eig_upper(self, theta: float) -> tuple[float, PFResult]:
        """Log eigenvalue of ``K_theta = W_theta^{1/(1+theta)}``."""
        if not theta > -1:
            raise DomainError("upper measure requires theta > -1")
        def build():
            supp = self._y_support()
            return log_perron_frobenius(np.where(supp, self.log_w_theta(theta) / (1 + theta), -np.inf), supp)
        return self._memo(("up", float(theta)), build)

    def eig_two(self, theta: float, theta_prime: float) -> tuple[float, PFResult]:
        """Log eigenvalue of ``N = W_theta W_{theta'}^{-theta/(1+theta')}``."""
        if not theta_prime > -1:
            raise DomainError("theta_prime must exceed -1")
        def build():
            supp = self._y_support()
            lm = self.log_w_theta(theta) - theta / (1 + theta_prime) * np.where(
                supp, self.log_w_theta(theta_prime), 0.0)
            return log_perron_frobenius(np.where(supp, lm, -np.inf), supp)
        return self._memo(("two", float(theta), float(theta_prime)), build)

    # -- theta * H rates (finite for all real theta where defined) --------
    def g_lower(self, theta: float) -> float:
        self.require(Assumption.NON_HIDDEN)
        if theta == 0:
            return 0.0
        return -self.eig_lower(theta)[0]

    def g_upper(self, theta: float) -> float:
        self.require(Assumption.STRONGLY_NON_HIDDEN)
        if theta == 0:
            return 0.0
        return -(1 + theta) * self.eig_upper(theta)[0]

    def g_two(self, theta: float, theta_prime: float) -> float:
        self.require(Assumption.STRONGLY_NON_HIDDEN)
        if theta == 0:
            return 0.0
        log_kappa = 0.0 if theta_prime == 0 else self.eig_upper(theta_prime)[0]
        return -self.eig_two(theta, theta_prime)[0] - theta * log_kappa

    def g(self, kind: RenyiKind, theta: float) -> float:
        kind = as_kind(kind)
        if isinstance(kind, Lower):
            return self.g_lower(theta)
        if isinstance(kind, Upper):
            return self.g_upper(theta)
        if isinstance(kind, TwoParam):
            return self.g_two(theta, kind.theta_prime)
        raise ValidationError(f"kind {kind!r} not available for transition matrices")

    # -- CGF view ------------------------------------------------------------
    def cgf_spec(self) -> CgfSpec:
        """CGF of ``S_n = sum log W(y|y') / W(x,y|x',y')``."""
        def build():
            supp = self._support()
            g = np.where(supp, self._log_wy_full() - np.where(supp, self._log_W(), 0.0), 0.0)
            p1 = self.initial_joint()
            py = p1.sum(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = np.where(p1 > 0, np.log(np.where(p1 > 0, py[None, :] / np.where(p1 > 0, p1, 1.0), 1.0)), 0.0)
            return CgfSpec(self.W.matrix, g, g_init=g1.ravel(), initial=self.initial)
        return self._memo("cgf", build)

    def entropy_rate(self) -> float:
        """``H^W(X|Y) = phi'(0)``."""
        self.require(Assumption.NON_HIDDEN)
        return self._memo("H", lambda: cgf_derivatives(self.cgf_spec(), 0.0)[0])

    def varentropy_rate(self) -> float:
        """``V^W(X|Y) = phi''(0)``."""
        self.require(Assumption.NON_HIDDEN)
        return self._memo("V", lambda: cgf_derivatives(self.cgf_spec(), 0.0)[1])


def _required_level(kind: RenyiKind) -> Assumption:
    return Assumption.NON_HIDDEN if isinstance(kind, Lower) else Assumption.STRONGLY_NON_HIDDEN


def transition_renyi(src: MarkovSource, kind, theta: float) -> float:
    """Conditional Renyi entropy rate ``H^W_{1+theta}`` of the given kind.

    ``theta = 0`` gives ``H^W(X|Y)`` from the CGF derivative; ``theta = -1``
    gives the order-zero limit by linear extrapolation from
    ``-1 + 1e-6`` and ``-1 + 2e-6``.
    """
    kind = as_kind(kind)
    src.require(_required_level(kind))
    if theta < -1:
        raise DomainError("theta must be >= -1")
    if theta == -1:
        eps = 1e-6
        return 2 * transition_renyi(src, kind, -1 + eps) - transition_renyi(src, kind, -1 + 2 * eps)
    if abs(theta) < SHANNON_BAND:
        if isinstance(kind, TwoParam):
            f = lambda t: src.g(kind, t)
            h0 = stable_derivative(f, 0.0, 1, H_FIRST, 1e-9)
            curv = stable_derivative(f, 0.0, 2, H_SECOND, 1e-8)
            return h0 + 0.5 * curv * theta
        h0 = src.entropy_rate()
        if theta == 0:
            return h0
        return h0 - 0.5 * src.varentropy_rate() * theta
    return src.g(kind, theta) / theta


def transition_varentropy(src: MarkovSource) -> float:
    """``V^W(X|Y)`` as the CGF curvature at zero."""
    return src.varentropy_rate()


def _corr(base: float, spread: float) -> CorrectionPair:
    return CorrectionPair(base, base + spread)


def _left_min1(res: PFResult) -> np.ndarray:
    return res.left / res.left.min()


def _upper_weights(p1: np.ndarray, theta: float) -> np.ndarray:
    """``log [sum_x P_1(x,y)^{1+theta}]`` per ``y``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(p1 > 0, (1 + theta) * np.log(np.where(p1 > 0, p1, 1.0)), -np.inf)
    return logsumexp(vals, axis=0)


def _log_inner(v: np.ndarray, log_w: np.ndarray) -> float:
    fin = np.isfinite(log_w)
    return float(logsumexp(log_w[fin], b=v[fin]))


def finite_corrections(src: MarkovSource, kind, theta: float) -> CorrectionPair:
    """Correction constants of the n-letter sandwich for ``kind``.

    Lower kind: ``(n-1) theta H^W + lower <= theta H(X^n|Y^n) <= (n-1) theta H^W + upper``.
    Upper kind: same for ``theta/(1+theta) H^up``.
    TwoParam: same for ``theta H_{1+theta,1+theta'}``.
    Valid for every real ``theta`` on the lower and two-parameter kinds.
    """
    kind = as_kind(kind)
    src.require(_required_level(kind))
    p1 = src.initial_joint()
    if isinstance(kind, Lower):
        _, res = src.eig_lower(theta)
        v = _left_min1(res)
        py = p1.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = np.where(p1 > 0, (1 + theta) * np.log(np.where(p1 > 0, p1, 1.0))
                          - theta * np.log(np.where(p1 > 0, py[None, :], 1.0)), -np.inf)
        base = -_log_inner(v, lw.ravel())
        return _corr(base, float(np.log(v.max())))
    if isinstance(kind, Upper):
        if not theta > -1:
            raise DomainError("upper corrections require theta > -1")
        _, res = src.eig_upper(theta)
        v = _left_min1(res)
        base = -_log_inner(v, _upper_weights(p1, theta) / (1 + theta))
        return _corr(base, float(np.log(v.max())))
    if isinstance(kind, TwoParam):
        tp = kind.theta_prime
        _, res = src.eig_two(theta, tp)
        v = _left_min1(res)
        lw = _upper_weights(p1, theta) - theta / (1 + tp) * _upper_weights(p1, tp)
        base = -_log_inner(v, lw)
        spread = float(np.log(v.max()))
        xi = finite_corrections(src, Upper(), tp)
        if theta >= 0:
            return CorrectionPair(base + theta * xi.lower, base + spread + theta * xi.upper)
        return CorrectionPair(base + theta * xi.upper, base + spread + theta * xi.lower)
    raise ValidationError(f"unsupported kind {kind!r}")


def optimal_V(src: MarkovSource, theta: float) -> np.ndarray:
    """Column-stochastic ``V_theta(y|y')`` attaining the upper rate.

    ``V_theta(y|y') = Q(y) K_theta(y|y') / (kappa Q(y'))`` with ``Q`` the
    left Perron-Frobenius vector of ``K_theta``.
    """
    src.require(Assumption.STRONGLY_NON_HIDDEN)
    if not theta > -1:
        raise DomainError("theta must exceed -1")
    log_kappa, res = src.eig_upper(theta)
    supp = src._y_support()
    K = np.where(supp, np.exp(src.log_w_theta(theta) / (1 + theta) - log_kappa), 0.0)
    q = res.left
    return q[:, None] * K / q[None, :]


def renyi_given_V(src: MarkovSource, V, theta: float) -> float:
    """``-(1/theta) log`` eigenvalue of ``W(x,y|x',y')^{1+theta} V(y|y')^{-theta}``.

    ``V`` must share the support of ``W(y|y')``.
    """
    src.require(Assumption.NON_HIDDEN)
    V = np.asarray(V, dtype=float)
    if np.any((V > 0) != src._y_support()):
        raise ValidationError("V must have the same support as W(y|y')")
    if theta == 0:
        raise DomainError("theta must be nonzero")
    nx, ny = src.nx, src.ny
    lv = np.broadcast_to(_log0(V)[None, :, None, :], (nx, ny, nx, ny)).reshape(src.W.size, src.W.size)
    supp = src._support()
    lm = np.where(supp, (1 + theta) * np.where(supp, src._log_W(), 0.0) - theta * np.where(supp, lv, 0.0), -np.inf)
    log_lam, _ = log_perron_frobenius(lm, supp)
    return -log_lam / theta
