"""Finite-blocklength and asymptotic bounds for source coding with
side-information and for conditional additive channels.

Probabilities are never formed from raw products: every bound is built in
the log domain and exponentiated only at the end, clamped to ``[0, 1]``.

Achievability results bound the hash-averaged error ``P̄_s`` from above;
converse results bound the optimal error ``P_s`` from below.  A bound is
reported either on the probability scale or on the exponent scale
``-log P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize

from .errors import (
    AssumptionViolated,
    Degenerate,
    DomainError,
    EnumerationTooLarge,
    OutOfRange,
    ValidationError,
)
from .inversion import (
    MeasureFamily,
    critical_rate,
    exponent_linear,
    exponent_scaled,
    exponent_scaled_direct,
    golden_max,
    singleshot_family,
    theta_of_R,
    transition_family,
)
from .oracle import STATE_CAP, brute_joint
from .singleshot import (
    JointDistribution,
    Lower,
    RelativeQ,
    TwoParam,
    Upper,
    g_relative,
    g_two_param,
    g_upper,
)
from .transition import Assumption, MarkovSource, finite_corrections

THETA_GRID = 200
GRID_2D = 40
S_RANGE = (-3.0, 2.0)
DEGENERACY_V = 1e-12

Source = Union[MarkovSource, JointDistribution]


# ---------------------------------------------------------------------------
# result and query types


@dataclass(frozen=True)
class BoundResult:
    """A single bound evaluation.

    Attributes
    ----------
    name : str
        Bound identifier, e.g. ``"spectrum"`` or ``"T7"``.
    role : str
        ``"achievability"`` (upper bound on the error) or ``"converse"``
        (lower bound on the error).
    scale : str
        ``"probability"`` when ``value`` bounds the error probability,
        ``"exponent"`` when it bounds ``-log`` of it.
    value : float
        The bound; ``inf`` on the exponent scale when vacuous.
    n, log_M : int, float
        Blocklength and log message size used.
    params : dict
        Optimizer record (``theta``, ``s``, ``theta_tilde``, ``gamma``, ...).
    vacuous : bool
        True when every candidate failed the ``1 - 2 e^{...} > 0`` guard.
    """

    name: str
    role: str
    scale: str
    value: float
    n: int
    log_M: float
    params: dict = field(default_factory=dict)
    vacuous: bool = False

    @property
    def rate(self) -> float:
        return self.log_M / self.n

    def probability(self) -> float:
        """The implied bound on the error probability."""
        if self.scale == "probability":
            return self.value
        if self.vacuous:
            return 0.0 if self.role == "converse" else 1.0
        return float(min(1.0, math.exp(-self.value)))

    def record(self) -> dict:
        out = dict(n=self.n, log_M=self.log_M, R=self.rate, bound=self.name, role=self.role,
                   scale=self.scale, value=self.value, probability=self.probability(),
                   vacuous=self.vacuous)
        out.update({k: float(v) for k, v in self.params.items()})
        return out


@dataclass(frozen=True)
class SourceQuery:
    """Source-coding query: a source, ``log M`` and blocklength ``n``.

    For a :class:`JointDistribution` with ``n > 1`` the i.i.d. extension is
    used; for a :class:`MarkovSource` the chain law of length ``n``.
    """

    source: Source
    log_M: float
    n: int = 1
    cap: int = STATE_CAP

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not self.log_M >= 0 or not math.isfinite(self.log_M):
            raise ValidationError("message size must satisfy M >= 1")
        if not isinstance(self.source, (MarkovSource, JointDistribution)):
            object.__setattr__(self, "source", JointDistribution(self.source))

    @classmethod
    def at_rate(cls, source, R: float, n: int = 1, **kw) -> "SourceQuery":
        """Query with ``log M = n R``."""
        return cls(source, n * R, n, **kw)

    @classmethod
    def with_size(cls, source, M: float, n: int = 1, **kw) -> "SourceQuery":
        return cls(source, math.log(M), n, **kw)

    @property
    def R(self) -> float:
        return self.log_M / self.n

    @property
    def is_markov(self) -> bool:
        return isinstance(self.source, MarkovSource)

    def joint(self) -> np.ndarray:
        """Explicit ``P[x^n, y^n]``."""
        src = self.source
        if isinstance(src, MarkovSource):
            return brute_joint(src, self.n, self.cap).joint()
        p = src.p
        if p.size ** self.n > self.cap:
            raise EnumerationTooLarge(f"{p.size}^{self.n} states exceed cap {self.cap}")
        out = p
        for _ in range(self.n - 1):
            out = np.kron(out, p)
        return out


def _markov(q: SourceQuery) -> MarkovSource:
    if not q.is_markov:
        raise ValidationError("this bound needs a MarkovSource")
    return q.source


# ---------------------------------------------------------------------------
# one-dimensional optimization helpers


def _theta_grid(lo: float) -> np.ndarray:
    """``THETA_GRID`` log-spaced points in ``[lo, 0)`` plus ``0``."""
    return np.sort(np.append(lo * np.logspace(-6, 0, THETA_GRID), 0.0))


def _maximize_theta(f: Callable[[float], float], lo: float) -> tuple[float, float]:
    """Maximize ``f`` over ``[lo, 0]`` by grid search plus golden refinement."""
    grid = _theta_grid(lo)
    vals = np.array([f(t) for t in grid])
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    arg, val = golden_max(f, a, b)
    if vals[i] >= val:
        return float(grid[i]), float(vals[i])
    return float(arg), float(val)


def normal_quantile(p: float) -> float:
    """``Phi^{-1}(p)`` for ``0 < p < 1``."""
    if not 0 < p < 1:
        raise DomainError("quantile level must lie in (0, 1)")
    return NormalDist().inv_cdf(p)


# ---------------------------------------------------------------------------
# single-shot achievability


def _support_arrays(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(log Q(y) - log P(x, y), P(x, y))`` over the support."""
    supp = p > 0
    z = (np.log(np.broadcast_to(q[None, :], p.shape)[supp]) - np.log(p[supp]))
    return z, p[supp]


def _grouped(z: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values of ``z`` (ascending) with summed weights."""
    vals, inv = np.unique(z, return_inverse=True)
    return vals, np.bincount(inv, weights=w)


def spectrum_achievability(p: np.ndarray, log_M: float) -> tuple[float, float]:
    """``inf_{gamma >= 0} P{-log P_{X|Y} > gamma} + e^gamma / M``.

    The first term is a right-continuous step function, so the infimum is
    attained at ``gamma = 0`` or at a jump point.  Returns ``(value, gamma)``.
    """
    py = p.sum(axis=0)
    z, w = _support_arrays(p, py)
    vals, wts = _grouped(z, w)
    above = np.clip(wts.sum() - np.cumsum(wts), 0.0, None)  # P{iota > vals[k]}
    cands = [(float(w[z > 0].sum()) + math.exp(-log_M), 0.0)]
    for v, tail in zip(vals, above):
        if v > 0:
            cands.append((float(tail) + math.exp(v - log_M), float(v)))
    val, gamma = min(cands, key=lambda c: c[0])
    return float(min(1.0, val)), gamma


def _loose_objective(p: np.ndarray, log_M: float) -> Callable[[float], float]:
    py = p.sum(axis=0)
    return lambda t: -t * log_M + g_relative(p, py, t)


def _gallager_objective(p: np.ndarray, log_M: float) -> Callable[[float], float]:
    return lambda t: (-t * log_M + g_upper(p, t)) / (1 + t)


def src_achievability(q: SourceQuery, method: str = "gallager") -> BoundResult:
    """Upper bound on the hash-averaged error ``P̄_s(M)``.

    Parameters
    ----------
    q : SourceQuery
    method : {"spectrum", "gallager", "loose"}
        Information-spectrum bound, the ``H^up`` exponential bound over
        ``theta in [-1/2, 0]``, or the ``H^down`` bound over ``[-1, 0]``.
    """
    p = q.joint()
    if method == "spectrum":
        val, gamma = spectrum_achievability(p, q.log_M)
        return BoundResult("spectrum", "achievability", "probability", val, q.n, q.log_M,
                           dict(gamma=gamma))
    if method == "gallager":
        th, ex = _maximize_theta(_gallager_objective(p, q.log_M), -0.5)
    elif method == "loose":
        th, ex = _maximize_theta(_loose_objective(p, q.log_M), -1.0)
    else:
        raise ValidationError(f"unknown achievability method {method!r}")
    ex = max(ex, 0.0)
    return BoundResult(method, "achievability", "probability", float(min(1.0, math.exp(-ex))),
                       q.n, q.log_M, dict(theta=th, exponent=ex))


# ---------------------------------------------------------------------------
# single-shot converses


def spectrum_converse(p: np.ndarray, q_y: np.ndarray, log_M: float,
                      gamma_max: float = math.inf) -> tuple[float, float]:
    """``sup_{0 <= gamma <= gamma_max} P{log Q/P > gamma} - M e^{-gamma}``.

    The supremum is approached as ``gamma`` increases to a jump point of the
    tail, so each jump ``z`` contributes ``P{Z >= z} - M e^{-z}``.  Returns
    ``(value, gamma)`` with the value clamped to ``[0, 1]``.
    """
    z, w = _support_arrays(p, q_y)
    vals, wts = _grouped(z, w)
    at_least = np.clip(wts.sum() - np.cumsum(wts) + wts, 0.0, None)  # P{Z >= vals[k]}
    cands = [(float(w[z > 0].sum()) - math.exp(log_M), 0.0)]
    for v, tail in zip(vals, at_least):
        if 0 < v <= gamma_max:
            cands.append((float(tail) - math.exp(log_M - v), float(v)))
    if math.isfinite(gamma_max) and gamma_max > 0:
        cands.append((float(w[z > gamma_max].sum()) - math.exp(log_M - gamma_max), gamma_max))
    val, gamma = max(cands, key=lambda c: c[0])
    return float(min(1.0, max(0.0, val))), gamma


def hypothesis_converse(p: np.ndarray, q_y: np.ndarray, log_M: float) -> float:
    """Fractional relaxation of ``min P(Omega^c)`` s.t. ``sum_y Q(y)|Omega_y| <= M``.

    Cells are admitted greedily by ``P(x, y) / Q(y)``; the last admitted cell
    may be fractional.  The relaxed minimum lower-bounds the integer one.
    """
    budget = math.exp(log_M)
    supp = p > 0
    cost = np.broadcast_to(q_y[None, :], p.shape)[supp]
    mass = p[supp]
    free = cost <= 0
    covered = float(mass[free].sum())
    cost, mass = cost[~free], mass[~free]
    order = np.argsort(-mass / cost, kind="stable")
    for c, m in zip(cost[order], mass[order]):
        if budget <= 0:
            break
        take = min(1.0, budget / c)
        covered += take * m
        budget -= take * c
    return float(min(1.0, max(0.0, 1.0 - covered)))


def _exp_converse_search(G: Callable[[float], float], theta_a: float, a: float, G_a: float,
                         R: float, m: float = 1.0,
                         corr: Optional[Callable[[float], tuple[float, float]]] = None,
                         corr_a: float = 0.0) -> tuple[float, dict, bool]:
    """Minimize the exponential converse over ``s > 0`` and ``-1 < t < theta_a``.

    Objective::

        [m ((1+s) G(t) - G((1+s) t)) + d1 - (1+s) log(1 - 2 exp(m E(t) + d2))] / s

    with ``E(t) = (theta_a - t) a - G_a + G(t)``.  Without corrections
    ``d1 = d2 = 0``; otherwise ``corr(t) = (lower, upper)`` and ``corr_a`` is
    the lower correction at the anchor.
    Returns ``(value, params, vacuous)``.
    """
    Gc: dict = {}
    Cc: dict = {}

    def g(t):
        if t not in Gc:
            Gc[t] = G(t)
        return Gc[t]

    def c(t):
        if t not in Cc:
            Cc[t] = corr(t)
        return Cc[t]

    def objective(s: float, t: float) -> float:
        if not (s > 0 and -1 < t < theta_a):
            return math.inf
        st = (1 + s) * t
        E = (theta_a - t) * a - G_a + g(t)
        d1 = d2 = 0.0
        if corr is not None:
            lo_t, hi_t = c(t)
            d1 = (1 + s) * hi_t - c(st)[0]
            d2 = ((theta_a - t) * R - (1 + t) * corr_a + (1 + theta_a) * hi_t) / (1 + theta_a)
        arg = m * E + d2
        if arg >= -math.log(2):
            return math.inf
        guard = math.log1p(-2 * math.exp(arg))
        return (m * ((1 + s) * g(t) - g(st)) + d1 - (1 + s) * guard) / s

    ts = np.linspace(-1.0, theta_a, GRID_2D + 2)[1:-1]
    ss = np.logspace(*S_RANGE, GRID_2D)
    best = (math.inf, None, None)
    for t in ts:
        for s in ss:
            v = objective(float(s), float(t))
            if v < best[0]:
                best = (v, float(s), float(t))
    if not math.isfinite(best[0]):
        return math.inf, dict(theta=theta_a, a=a), True
    res = minimize(lambda x: objective(math.exp(x[0]), x[1]), x0=[math.log(best[1]), best[2]],
                   method="Nelder-Mead", options=dict(xatol=1e-7, fatol=1e-11, maxiter=600))
    val, s, t = best
    if math.isfinite(res.fun) and res.fun < val:
        val, s, t = float(res.fun), math.exp(res.x[0]), float(res.x[1])
    return val, dict(theta=theta_a, a=a, s=s, theta_tilde=t), False


def _singleshot_exp_converse(p: np.ndarray, log_M: float, conditioner) -> tuple[float, dict, bool]:
    P = JointDistribution(p / p.sum()) if abs(p.sum() - 1) > 1e-12 else JointDistribution(p)
    p = P.p
    if isinstance(conditioner, str) and conditioner == "auto":
        fam = singleshot_family(P, "upper", check_concavity=False)
        th = theta_of_R(fam, log_M)

        def G(t, th=th):
            return g_two_param(p, t, th)
    else:
        if isinstance(conditioner, str) and conditioner == "marginal":
            qy = P.p_y
            fam = singleshot_family(P, "lower", check_concavity=False)
        else:
            qy = np.asarray(conditioner, dtype=float)
            fam = singleshot_family(P, RelativeQ(qy), check_concavity=False)
        th = theta_of_R(fam, log_M)

        def G(t, qy=qy):
            return g_relative(p, qy, t)
    a = fam.dG(th)
    return _exp_converse_search(G, th, a, fam.G(th), log_M)


def src_converse(q: SourceQuery, method: str = "spectrum", conditioner="marginal") -> BoundResult:
    """Lower bound on the optimal error ``P_s(M)``.

    Parameters
    ----------
    q : SourceQuery
    method : {"spectrum", "hypothesis", "exponential"}
        ``"exponential"`` bounds ``-log P_s`` from above.
    conditioner : "marginal", "auto" or array_like
        ``Q_Y``: the true marginal, the order-tilted optimal choice at
        ``theta(a(R))`` (exponential method only), or an explicit law.
    """
    p = q.joint()
    if isinstance(conditioner, str):
        if conditioner not in ("marginal", "auto"):
            raise ValidationError(f"unknown conditioner {conditioner!r}")
        if conditioner == "auto" and method != "exponential":
            conditioner = "marginal"
    if method in ("spectrum", "hypothesis"):
        qy = p.sum(axis=0) if isinstance(conditioner, str) else np.asarray(conditioner, dtype=float)
        if qy.shape != (p.shape[1],):
            raise ValidationError("conditioner length must equal |Y|^n")
        if method == "spectrum":
            val, gamma = spectrum_converse(p, qy, q.log_M)
            return BoundResult("spectrum", "converse", "probability", val, q.n, q.log_M,
                               dict(gamma=gamma))
        val = hypothesis_converse(p, qy, q.log_M)
        return BoundResult("hypothesis", "converse", "probability", val, q.n, q.log_M)
    if method == "exponential":
        val, params, vac = _singleshot_exp_converse(p, q.log_M, conditioner)
        return BoundResult("exponential", "converse", "exponent", val, q.n, q.log_M, params, vac)
    raise ValidationError(f"unknown converse method {method!r}")


# ---------------------------------------------------------------------------
# finite Markov bounds

THEOREM_ALIASES = {
    "T5": "markov_loose",
    "T6": "markov_converse_lower",
    "T7": "markov_gallager",
    "T8": "markov_converse_two_param",
}
_THEOREM_NAMES = {v: k for k, v in THEOREM_ALIASES.items()}


def _theorem_key(theorem: str) -> str:
    if theorem in THEOREM_ALIASES:
        return theorem
    if theorem in _THEOREM_NAMES:
        return _THEOREM_NAMES[theorem]
    raise ValidationError(f"unknown theorem {theorem!r}")


def _window(fam: MeasureFamily, R: float) -> None:
    h, h0 = fam.H(), fam.H0()
    if not h < R < h0:
        raise OutOfRange(f"R = {R} outside ({h}, {h0})")


def markov_loose(src: MarkovSource, n: int, log_M: float) -> tuple[float, float]:
    """``sup_{-1<=theta<=0} -theta log M + (n-1) theta H^down,W + lower_delta(theta)``."""
    src.require(Assumption.NON_HIDDEN)

    def f(t):
        return -t * log_M + (n - 1) * src.g_lower(t) + finite_corrections(src, Lower(), t).lower
    return _maximize_theta(f, -1.0)


def markov_gallager(src: MarkovSource, n: int, log_M: float) -> tuple[float, float]:
    """``sup_{-1/2<=theta<=0} [-theta log M + (n-1) theta H^up,W] / (1+theta) + lower_xi(theta)``."""
    src.require(Assumption.STRONGLY_NON_HIDDEN)

    def f(t):
        return ((-t * log_M + (n - 1) * src.g_upper(t)) / (1 + t)
                + finite_corrections(src, Upper(), t).lower)
    return _maximize_theta(f, -0.5)


def markov_additive(src: MarkovSource, n: int, log_M: float) -> tuple[float, float]:
    """Singleton-``Y`` bound ``sup_{-1/2<=theta<=0} [-theta log M + (n-1) theta H^W + lower_delta] / (1+theta)``."""
    if src.ny != 1:
        raise AssumptionViolated("additive bound requires a singleton side-information alphabet")

    def f(t):
        return (-t * log_M + (n - 1) * src.g_lower(t)
                + finite_corrections(src, Lower(), t).lower) / (1 + t)
    return _maximize_theta(f, -0.5)


def markov_converse_lower(src: MarkovSource, n: int, log_M: float) -> tuple[float, dict, bool]:
    """Exponential converse under the non-hidden assumption with ``Q = P_{Y^n}``."""
    src.require(Assumption.NON_HIDDEN)
    R = log_M / n
    fam = transition_family(src, "lower", check_concavity=False)
    _window(fam, R)
    th = theta_of_R(fam, R)
    a = fam.dG(th)

    def corr(t):
        c = finite_corrections(src, Lower(), t)
        return c.lower, c.upper
    return _exp_converse_search(src.g_lower, th, a, fam.G(th), R, m=n - 1, corr=corr,
                                corr_a=corr(th)[0])


def markov_converse_two_param(src: MarkovSource, n: int, log_M: float) -> tuple[float, dict, bool]:
    """Exponential converse under the strongly non-hidden assumption with the tilted conditioner."""
    src.require(Assumption.STRONGLY_NON_HIDDEN)
    R = log_M / n
    fam = transition_family(src, "upper", check_concavity=False)
    _window(fam, R)
    th = theta_of_R(fam, R)
    a = fam.dG(th)
    kind = TwoParam(th)

    def corr(t):
        c = finite_corrections(src, kind, t)
        return c.lower, c.upper
    return _exp_converse_search(lambda t: src.g(kind, t), th, a, src.g_upper(th), R, m=n - 1,
                                corr=corr, corr_a=corr(th)[0])


def src_markov_bounds(q: SourceQuery, theorem: str) -> BoundResult:
    """Finite-``n`` Markov bound on the exponent scale.

    ``T5``/``T7`` lower-bound ``-log P̄_s``; ``T6``/``T8`` upper-bound
    ``-log P_s``.  Descriptive names from :data:`THEOREM_ALIASES` are also
    accepted.
    """
    src = _markov(q)
    key = _theorem_key(theorem)
    if key in ("T5", "T7"):
        fn = markov_loose if key == "T5" else markov_gallager
        th, ex = fn(src, q.n, q.log_M)
        return BoundResult(key, "achievability", "exponent", max(ex, 0.0), q.n, q.log_M,
                           dict(theta=th))
    fn = markov_converse_lower if key == "T6" else markov_converse_two_param
    val, params, vac = fn(src, q.n, q.log_M)
    return BoundResult(key, "converse", "exponent", val, q.n, q.log_M, params, vac)


# ---------------------------------------------------------------------------
# channel coding


@dataclass(frozen=True)
class ChannelQuery:
    """Conditional additive channel query.

    Parameters
    ----------
    noise : MarkovSource or JointDistribution
        Noise law ``(X, Y)`` with ``X`` valued in the input group.
    n : int
        Blocklength.
    k : int, optional
        Code dimension; the achievability side uses ``M = |A|^(n-k)`` bins.
    log_M : float, optional
        Log codebook size ``log M_n`` for the converse side.
    alphabet_size : int, optional
        ``|A|``; defaults to the noise ``X`` alphabet size.
    """

    noise: Source
    n: int
    k: Optional[int] = None
    log_M: Optional[float] = None
    alphabet_size: Optional[int] = None
    cap: int = STATE_CAP

    def __post_init__(self):
        if not isinstance(self.noise, (MarkovSource, JointDistribution)):
            object.__setattr__(self, "noise", JointDistribution(self.noise))
        if self.alphabet_size is None:
            nx = self.noise.nx if isinstance(self.noise, MarkovSource) else self.noise.p.shape[0]
            object.__setattr__(self, "alphabet_size", int(nx))
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.k is not None and not 0 <= self.k <= self.n:
            raise ValidationError("code dimension must satisfy 0 <= k <= n")
        if self.log_M is not None and not 0 <= self.log_M <= self.n * math.log(self.alphabet_size) + 1e-12:
            raise ValidationError("codebook size must satisfy 1 <= M_n <= |A|^n")

    @property
    def log_A(self) -> float:
        return math.log(self.alphabet_size)

    def rate(self) -> float:
        """Noise-side rate ``log|A| - log(M_n)/n`` (or ``(n-k)/n log|A|``)."""
        if self.log_M is not None:
            return self.log_A - self.log_M / self.n
        if self.k is not None:
            return (self.n - self.k) / self.n * self.log_A
        raise ValidationError("query needs k or log_M")

    def achievability_source(self) -> SourceQuery:
        if self.k is None:
            raise ValidationError("achievability bounds need the code dimension k")
        return SourceQuery(self.noise, (self.n - self.k) * self.log_A, self.n, self.cap)

    def converse_source(self) -> SourceQuery:
        if self.log_M is None:
            raise ValidationError("converse bounds need the codebook size log_M")
        return SourceQuery(self.noise, max(0.0, self.n * self.log_A - self.log_M), self.n, self.cap)


CHANNEL_BOUNDS = ("ach_T13", "ach_T14", "ach_T15_additive", "conv_T14c", "conv_T16",
                  "conv_spectrum_L24", "conv_exp_T11", "ach_spectrum", "ach_gallager", "ach_loose")


def _renamed(res: BoundResult, name: str) -> BoundResult:
    return BoundResult(name, res.role, res.scale, res.value, res.n, res.log_M, res.params, res.vacuous)


def chan_bounds(q: ChannelQuery, which: str, conditioner="auto") -> BoundResult:
    """Channel bound obtained from the source bound on the noise.

    Achievability bounds evaluate the source bound at ``M = |A|^(n-k)``;
    converse bounds at ``M' = |A|^n / M_n``.  The returned ``log_M`` is the
    source-side value used.
    """
    if which == "ach_T13":
        return _renamed(src_markov_bounds(q.achievability_source(), "T5"), which)
    if which == "ach_T14":
        return _renamed(src_markov_bounds(q.achievability_source(), "T7"), which)
    if which == "ach_T15_additive":
        sq = q.achievability_source()
        th, ex = markov_additive(_markov(sq), sq.n, sq.log_M)
        return BoundResult(which, "achievability", "exponent", max(ex, 0.0), sq.n, sq.log_M,
                           dict(theta=th))
    if which in ("ach_spectrum", "ach_gallager", "ach_loose"):
        return _renamed(src_achievability(q.achievability_source(), which[4:]), which)
    if which == "conv_T14c":
        return _renamed(src_markov_bounds(q.converse_source(), "T6"), which)
    if which == "conv_T16":
        return _renamed(src_markov_bounds(q.converse_source(), "T8"), which)
    if which == "conv_spectrum_L24":
        sq = q.converse_source()
        p = sq.joint()
        val, gamma = spectrum_converse(p, p.sum(axis=0), sq.log_M, gamma_max=q.n * q.log_A)
        return BoundResult(which, "converse", "probability", val, sq.n, sq.log_M, dict(gamma=gamma))
    if which == "conv_exp_T11":
        return _renamed(src_converse(q.converse_source(), "exponential", conditioner), which)
    raise ValidationError(f"unknown channel bound {which!r}")


# ---------------------------------------------------------------------------
# asymptotics


def _level_for(kind: str) -> Assumption:
    return Assumption.STRONGLY_NON_HIDDEN if kind == "upper" else Assumption.NON_HIDDEN


def large_deviation(src: MarkovSource, R: float, kind: str = "upper") -> dict:
    """Achievability and converse error exponents at rate ``R``.

    ``kind="lower"`` gives the non-hidden pair (linear achievability form
    over ``[-1, 0]``); ``kind="upper"`` the strongly non-hidden pair
    (scaled form over ``[-1/2, 0]``).  The converse is the closed form
    ``-theta(a(R)) a(R) + theta(a(R)) H_{1+theta(a(R))}``.
    """
    if kind not in ("lower", "upper"):
        raise ValidationError(f"unknown kind {kind!r}")
    src.require(_level_for(kind))
    fam = transition_family(src, kind, check_concavity=False)
    if kind == "lower":
        ach = exponent_linear(fam, R)
    else:
        ach = max(0.0, exponent_scaled_direct(fam, R, theta_lo=-0.5)[1])
    try:
        conv = exponent_scaled(fam, R)
    except OutOfRange:
        conv = math.nan
    upper_fam = fam if kind == "upper" else None
    r_cr = critical_rate(upper_fam) if upper_fam is not None else math.nan
    return dict(R=R, kind=kind, achievability=ach, converse=conv, critical_rate=r_cr,
                entropy=fam.H(), coincide=bool(kind == "upper" and R <= r_cr))


def moderate_deviation(src: MarkovSource, delta: float) -> dict:
    """Moderate-deviation coefficient ``delta^2 / (2 V^W)``."""
    src.require(Assumption.NON_HIDDEN)
    V = src.varentropy_rate()
    if V < DEGENERACY_V:
        raise Degenerate("zero varentropy rate")
    return dict(delta=delta, varentropy=V, coefficient=delta**2 / (2 * V))


def second_order(src: MarkovSource, n: int, eps: float, role: str = "source",
                 alphabet_size: Optional[int] = None) -> dict:
    """Normal approximation of the optimal ``log M`` at blocklength ``n``.

    Source: ``n H^W + sqrt(n V^W) Phi^{-1}(1 - eps)``.
    Channel: ``n C + sqrt(n V^W) Phi^{-1}(eps)`` with ``C = log|A| - H^W``.
    """
    src.require(Assumption.NON_HIDDEN)
    H, V = src.entropy_rate(), src.varentropy_rate()
    if V < DEGENERACY_V:
        raise Degenerate("zero varentropy rate")
    if role == "source":
        log_M = n * H + math.sqrt(n * V) * normal_quantile(1 - eps)
        return dict(n=n, eps=eps, role=role, entropy=H, varentropy=V, log_M=log_M)
    if role == "channel":
        A = src.nx if alphabet_size is None else alphabet_size
        C = math.log(A) - H
        log_M = n * C + math.sqrt(n * V) * normal_quantile(eps)
        return dict(n=n, eps=eps, role=role, capacity=C, varentropy=V, log_M=log_M)
    raise ValidationError(f"unknown role {role!r}")


def asymptotics(src: MarkovSource, task: str, **params) -> dict:
    """Dispatch ``ld_source``, ``ld_channel``, ``md`` or ``second_order``.

    ``ld_channel`` accepts either ``R`` (noise-side rate) or ``rate`` with
    optional ``alphabet_size``; the channel exponent at code rate ``r``
    equals the source exponent at ``log|A| - r``.
    """
    if task == "ld_source":
        return large_deviation(src, params["R"], params.get("kind", "upper"))
    if task == "ld_channel":
        if "R" in params:
            R = params["R"]
        else:
            A = params.get("alphabet_size") or src.nx
            R = math.log(A) - params["rate"]
        out = large_deviation(src, R, params.get("kind", "upper"))
        out["code_rate"] = math.log(params.get("alphabet_size") or src.nx) - R
        return out
    if task == "md":
        return moderate_deviation(src, params["delta"])
    if task == "second_order":
        return second_order(src, params["n"], params["eps"], params.get("role", "source"),
                            params.get("alphabet_size"))
    raise ValidationError(f"unknown task {task!r}")
