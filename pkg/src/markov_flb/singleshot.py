"""Single-shot conditional Renyi entropies of an explicit joint law.

All quantities are in nats. The joint distribution is stored as
``p[x, y]``. Internally most measures are computed through
``G(theta) = theta * H_{1+theta}``, which stays finite and smooth at
``theta = 0`` and extends to every real ``theta`` for the relative and
lower kinds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, SupportViolation, ValidationError

SHANNON_BAND = 1e-6
# below this |theta| the sums are 1 + O(theta) and are evaluated through
# expm1/log1p (taking P as exactly normalized) to avoid cancellation in
# log(sum) / theta
SMALL_THETA = 1e-2


@dataclass(frozen=True)
class JointDistribution:
    """Joint law ``P_XY`` stored as ``p[x, y]``."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=float)
        if arr.ndim != 2:
            raise ValidationError("joint distribution must be a 2-D array p[x, y]")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("joint distribution entries must be finite and >= 0")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValidationError(f"joint distribution sums to {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @classmethod
    def from_conditional(cls, p_y, p_x_given_y) -> "JointDistribution":
        """Build from ``P_Y`` and columns ``P_{X|Y}[:, y]``."""
        return cls(np.asarray(p_x_given_y, dtype=float) * np.asarray(p_y, dtype=float)[None, :])

    @property
    def p_y(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def p_x(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def support(self) -> np.ndarray:
        return self.p > 0

    def conditional(self) -> np.ndarray:
        """``P_{X|Y}[x, y]`` (columns with ``P_Y = 0`` are left at zero)."""
        py = self.p_y
        out = np.zeros_like(self.p)
        np.divide(self.p, py[None, :], out=out, where=py[None, :] > 0)
        return out


# ---------------------------------------------------------------------------
# kinds


@dataclass(frozen=True)
class Lower:
    """Conditioning on the true marginal ``P_Y``."""


@dataclass(frozen=True)
class Upper:
    """Maximum over conditioners, attained at the order-dependent tilt of ``P_Y``."""


@dataclass(frozen=True)
class RelativeQ:
    """Relative to a fixed conditioner ``Q_Y``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ValidationError("conditioner must be a distribution on Y")
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class TwoParam:
    """Relative to the optimal conditioner of order ``1 + theta_prime``."""

    theta_prime: float

    def __post_init__(self):
        if not self.theta_prime > -1:
            raise DomainError("theta_prime must exceed -1")


RenyiKind = Union[Lower, Upper, RelativeQ, TwoParam]

_KIND_NAMES = {"lower": Lower, "upper": Upper}


def as_kind(kind) -> RenyiKind:
    if isinstance(kind, str):
        try:
            return _KIND_NAMES[kind.lower()]()
        except KeyError:
            raise ValidationError(f"unknown kind {kind!r}") from None
    return kind


def _as_joint(P) -> JointDistribution:
    return P if isinstance(P, JointDistribution) else JointDistribution(P)


# ---------------------------------------------------------------------------
# building blocks on p[x, y]


def _log_p(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _check_support(p: np.ndarray, q: np.ndarray) -> None:
    if np.any((p.sum(axis=0) > 0) & (q <= 0)):
        raise SupportViolation("conditioner vanishes on the support of P_Y")


def g_relative(p: np.ndarray, q: np.ndarray, theta: float) -> float:
    """``theta * H_{1+theta}(P|Q) = -log sum P^{1+theta} Q^{-theta}``.

    Defined for every real ``theta``; sums run over the support of ``P``.
    """
    supp = p > 0
    lp = _log_p(p)[supp]
    lq = np.broadcast_to(_log_p(q)[None, :], p.shape)[supp]
    if abs(theta) <= SMALL_THETA:
        w = p[supp]
        return -float(np.log1p(w @ np.expm1(theta * (lp - lq))))
    return -float(logsumexp((1 + theta) * lp - theta * lq))


def _column_log_power(p: np.ndarray, s: float) -> np.ndarray:
    """``log sum_x p[x, y]^s`` per column, ``-inf`` on empty columns."""
    lp = _log_p(p)
    with np.errstate(invalid="ignore"):
        vals = np.where(p > 0, s * lp, -np.inf)
    return logsumexp(vals, axis=0)


def g_upper(p: np.ndarray, theta: float) -> float:
    """``theta * H^up_{1+theta} = -(1+theta) log sum_y [sum_x P^{1+theta}]^{1/(1+theta)}``."""
    if not theta > -1:
        raise DomainError("upper measure requires theta > -1")
    if abs(theta) <= SMALL_THETA:
        py = p.sum(axis=0)
        keep = py > 0
        lp = _log_p(p)
        rel = np.where(p > 0, p * np.expm1(theta * np.where(p > 0, lp, 0.0)), 0.0)
        c = rel.sum(axis=0)[keep] / py[keep]
        # column term P_Y (1 + c)^{1/(1+theta)} P_Y^{-theta/(1+theta)}
        e = np.expm1((np.log1p(c) - theta * np.log(py[keep])) / (1 + theta))
        w = py[keep]
        return -(1 + theta) * float(np.log1p(w @ e))
    col = _column_log_power(p, 1 + theta)
    col = col[np.isfinite(col)]
    return -(1 + theta) * float(logsumexp(col / (1 + theta)))


def optimal_conditioner_array(p: np.ndarray, theta: float) -> np.ndarray:
    if not theta > -1:
        raise DomainError("optimal conditioner requires theta > -1")
    col = _column_log_power(p, 1 + theta) / (1 + theta)
    fin = np.isfinite(col)
    out = np.zeros(p.shape[1])
    out[fin] = np.exp(col[fin] - logsumexp(col[fin]))
    return out


def g_two_param(p: np.ndarray, theta: float, theta_prime: float) -> float:
    """``theta * H_{1+theta, 1+theta'}`` via the definition with the tilted conditioner."""
    return g_relative(p, optimal_conditioner_array(p, theta_prime), theta)


def g_kind(p: np.ndarray, kind: RenyiKind, theta: float) -> float:
    """``theta * H_{1+theta}`` for the given kind (no endpoint special cases)."""
    if isinstance(kind, Lower):
        return g_relative(p, p.sum(axis=0), theta)
    if isinstance(kind, Upper):
        return g_upper(p, theta)
    if isinstance(kind, RelativeQ):
        return g_relative(p, kind.q, theta)
    if isinstance(kind, TwoParam):
        return g_two_param(p, theta, kind.theta_prime)
    raise ValidationError(f"unknown kind {kind!r}")


def _reference_q(p: np.ndarray, kind: RenyiKind) -> np.ndarray:
    """Conditioner whose relative measure shares the kind's first-order expansion."""
    if isinstance(kind, (Lower, Upper)):
        return p.sum(axis=0)
    if isinstance(kind, RelativeQ):
        return kind.q
    return optimal_conditioner_array(p, kind.theta_prime)


def _relative_moments(p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Mean and variance of ``log Q(y)/P(x, y)`` under ``P``."""
    supp = p > 0
    z = (np.broadcast_to(_log_p(q)[None, :], p.shape) - _log_p(p))[supp]
    w = p[supp]
    mean = float(w @ z)
    var = float(w @ (z - mean) ** 2)
    return mean, max(var, 0.0)


def _order_zero(p: np.ndarray, kind: RenyiKind) -> float:
    counts = (p > 0).sum(axis=0)
    if isinstance(kind, Lower):
        return float(np.log(p.sum(axis=0) @ counts))
    if isinstance(kind, Upper):
        return float(np.log(counts.max()))
    return float(np.log(_reference_q(p, kind) @ counts))


# ---------------------------------------------------------------------------
# public API


def singleshot_renyi(P, kind, theta: float) -> float:
    """Conditional Renyi entropy ``H_{1+theta}(X|Y)`` of the given kind.

    Parameters
    ----------
    P : JointDistribution or array_like
    kind : Lower, Upper, RelativeQ, TwoParam or ``"lower"``/``"upper"``
    theta : float
        Order minus one, ``theta >= -1``.

    Notes
    -----
    ``theta = 0`` gives the Shannon limit and ``|theta| < 1e-6`` its
    first-order expansion ``H - V theta / 2``; ``theta = -1`` gives the
    order-zero support-counting limit.
    """
    P = _as_joint(P)
    kind = as_kind(kind)
    p = P.p
    if theta < -1:
        raise DomainError("theta must be >= -1")
    if isinstance(kind, RelativeQ):
        if kind.q.shape[0] != p.shape[1]:
            raise ValidationError("conditioner length must equal |Y|")
        _check_support(p, kind.q)
    if theta == -1:
        return _order_zero(p, kind)
    if abs(theta) < SHANNON_BAND:
        mean, var = _relative_moments(p, _reference_q(p, kind))
        return mean - 0.5 * var * theta
    return g_kind(p, kind, theta) / theta


def conditional_entropy(P) -> float:
    """Shannon conditional entropy ``H(X|Y)``."""
    P = _as_joint(P)
    return _relative_moments(P.p, P.p_y)[0]


def varentropy(P) -> float:
    """``Var[log 1/P_{X|Y}(X|Y)]`` under ``P``."""
    P = _as_joint(P)
    return _relative_moments(P.p, P.p_y)[1]


def optimal_conditioner(P, theta: float) -> np.ndarray:
    """Normalized ``(sum_x P(x, y)^{1+theta})^{1/(1+theta)}``."""
    return optimal_conditioner_array(_as_joint(P).p, theta)


def gallager_E0(P, tau: float) -> float:
    """``log sum_y P_Y (sum_x P_{X|Y}^{1/(1+tau)})^{1+tau}``."""
    if not tau > -1:
        raise DomainError("tau must exceed -1")
    p = _as_joint(P).p
    col = _column_log_power(p, 1.0 / (1 + tau))
    fin = np.isfinite(col)
    # P_Y (sum_x P_{X|Y}^s)^{1/s} = (sum_x P^s)^{1/s}
    return float(logsumexp((1 + tau) * col[fin]))


def singleshot_cgf(P, q, rho: float) -> float:
    """CGF ``log E_P[exp(rho Z)]`` of ``Z = log Q_Y(Y) / P_XY(X, Y)``.

    Computed as a moment sum over the support, independently of the
    Renyi-entropy formulas.
    """
    p = _as_joint(P).p
    q = np.asarray(q, dtype=float)
    supp = p > 0
    z = (np.log(np.where(supp, q[None, :], 1.0)) - np.log(np.where(supp, p, 1.0)))[supp]
    return float(logsumexp(rho * z, b=p[supp]))
