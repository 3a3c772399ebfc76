"""Inverse maps theta(a), a(R) and Legendre-type exponents of a measure family.

A measure family is the concave map ``G(theta) = theta * H_{1+theta}``.
Its slope ``G'`` decreases from ``a_bar`` (at ``theta -> -1``) to
``a_under`` (at ``theta -> inf``); ``R(a) = (1 + theta(a)) a - G(theta(a))``
is increasing.  Both inversions are done by bisection in ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import Degenerate, OutOfRange, ValidationError
from .markov import richardson
from .singleshot import (
    JointDistribution,
    Lower,
    TwoParam,
    Upper,
    as_kind,
    conditional_entropy,
    g_kind,
    singleshot_renyi,
    varentropy,
)
from .transition import MarkovSource, transition_renyi

THETA_MIN = -1 + 1e-6
THETA_MAX = 50.0
SLOPE_STEP = 1e-5
CURVATURE_STEP = 1e-2
DEGENERACY_TOL = 1e-10
R_MARGIN = 1e-9
BISECT_ITERS = 200
GOLDEN_TOL = 1e-12

_INV_PHI = (math.sqrt(5) - 1) / 2


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL,
               max_iter: int = 300) -> tuple[float, float]:
    """Maximize a unimodal function on ``[lo, hi]``; endpoints included."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    val, arg = max(cands, key=lambda t: t[0])
    return arg, val


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Concave family ``G(theta) = theta * H_{1+theta}``.

    Parameters
    ----------
    g : callable
        ``theta -> theta * H_{1+theta}``.
    theta_min, theta_max : float
        Truncated domain on which slopes are estimated.
    g_floor : float
        ``g`` is defined for ``theta > g_floor`` (``-1`` for upper measures,
        ``-inf`` when the CGF form extends to all real ``theta``).
    h0 : float, optional
        Order-zero limit of ``H``; defaults to ``-g(theta_min)``.
    entropy, varentropy : float, optional
        Known ``G'(0)`` and ``-G''(0)``; estimated numerically otherwise.
    check_concavity : bool
        Spot-check concavity on a 32-point grid.
    """

    g: Callable[[float], float]
    theta_min: float = THETA_MIN
    theta_max: float = THETA_MAX
    g_floor: float = -np.inf
    h0: Optional[float] = None
    entropy: Optional[float] = None
    varentropy: Optional[float] = None
    name: str = ""
    check_concavity: bool = True
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})
        if not self.theta_min < 0 < self.theta_max:
            raise ValidationError("domain must contain 0 in its interior")
        if self.check_concavity:
            grid = np.linspace(self.theta_min, min(self.theta_max, 5.0), 32)
            vals = np.array([self.G(t) for t in grid])
            mid = vals[1:-1] - 0.5 * (vals[:-2] + vals[2:])
            if np.any(mid < -1e-9):
                raise ValidationError("family is not concave on its domain")

    @classmethod
    def from_entropy(cls, h: Callable[[float], float], **kw) -> "MeasureFamily":
        """Family from an evaluator ``theta -> H_{1+theta}``."""
        return cls(lambda t: 0.0 if t == 0 else t * h(t), **kw)

    # -- evaluations -------------------------------------------------------
    def G(self, theta: float) -> float:
        if theta == 0:
            return 0.0
        key = ("G", float(theta))
        if key not in self._cache:
            self._cache[key] = float(self.g(theta))
        return self._cache[key]

    def dG(self, theta: float) -> float:
        """Slope ``G'(theta)`` by Richardson central differences."""
        key = ("dG", float(theta))
        if key not in self._cache:
            h = min(SLOPE_STEP, 0.25 * (theta - self.g_floor))
            self._cache[key] = richardson(self.G, theta, 1, h)
        return self._cache[key]

    def H(self) -> float:
        """Entropy value ``G'(0)``."""
        if self.entropy is not None:
            return self.entropy
        return self.dG(0.0)

    def V(self) -> float:
        """Varentropy ``-G''(0)``."""
        if self.varentropy is not None:
            return self.varentropy
        key = "V"
        if key not in self._cache:
            self._cache[key] = -richardson(self.G, 0.0, 2, CURVATURE_STEP)
        return self._cache[key]

    def is_degenerate(self) -> bool:
        # a large probe step keeps roundoff below the threshold for linear G
        key = "deg"
        if key not in self._cache:
            self._cache[key] = -richardson(self.G, 0.0, 2, CURVATURE_STEP) < DEGENERACY_TOL
        return self._cache[key]

    def H0(self) -> float:
        if self.h0 is not None:
            return self.h0
        return self.G(self.theta_min) / self.theta_min

    def R_of_theta(self, theta: float) -> float:
        """``R = (1 + theta) G'(theta) - G(theta)``."""
        return (1 + theta) * self.dG(theta) - self.G(theta)

    @property
    def a_bar(self) -> float:
        return self.dG(self.theta_min)

    @property
    def a_under(self) -> float:
        return self.dG(self.theta_max)


def _bisect_decreasing(f: Callable[[float], float], target: float, lo: float, hi: float) -> float:
    """Root of ``f(theta) = target`` for decreasing ``f`` on ``[lo, hi]``."""
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _bracket(f: Callable[[float], float], target: float, fam: MeasureFamily) -> tuple[float, float]:
    """Bracket by doubling away from 0 for decreasing ``f``."""
    if f(0.0) > target:  # root at positive theta
        lo, hi = 0.0, 1e-3
        while f(hi) > target:
            if hi >= fam.theta_max:
                raise OutOfRange("target beyond the truncated domain")
            lo, hi = hi, min(2 * hi, fam.theta_max)
        return lo, hi
    lo, hi = -1e-3, 0.0
    while f(lo) < target:
        if lo <= fam.theta_min:
            raise OutOfRange("target beyond the truncated domain")
        hi, lo = lo, max(2 * lo, fam.theta_min)
    return lo, hi


def theta_of_a(fam: MeasureFamily, a: float) -> float:
    """Solve ``G'(theta) = a``."""
    h = fam.H()
    if fam.is_degenerate():
        if abs(a - h) <= 1e-9:
            return 0.0
        raise Degenerate("family has zero varentropy; slope is constant")
    if a == h:
        return 0.0
    if not fam.a_under < a < fam.a_bar:
        raise OutOfRange(f"a = {a} outside ({fam.a_under}, {fam.a_bar})")
    lo, hi = _bracket(fam.dG, a, fam)
    return _bisect_decreasing(fam.dG, a, lo, hi)


def R_max(fam: MeasureFamily) -> float:
    return min(fam.H0(), fam.R_of_theta(fam.theta_min)) - R_MARGIN


def theta_of_R(fam: MeasureFamily, R: float) -> float:
    """``theta(a(R))``: solve ``(1 + theta) G'(theta) - G(theta) = R``."""
    if fam.is_degenerate():
        raise Degenerate("family has zero varentropy")
    if R == fam.H():
        return 0.0
    if R > R_max(fam):
        raise OutOfRange(f"R = {R} above the order-zero limit")
    if R <= fam.R_of_theta(fam.theta_max):
        raise OutOfRange(f"R = {R} below the truncated domain")
    lo, hi = _bracket(fam.R_of_theta, R, fam)
    return _bisect_decreasing(fam.R_of_theta, R, lo, hi)


def a_of_R(fam: MeasureFamily, R: float) -> float:
    """Inverse of ``R(a) = (1 + theta(a)) a - G(theta(a))``."""
    if R == fam.H() and not fam.is_degenerate():
        return R
    return fam.dG(theta_of_R(fam, R))


def exponent_linear(fam: MeasureFamily, R: float) -> float:
    """``sup_{-1 <= theta <= 0} [-theta R + G(theta)]`` by golden-section search."""
    if R < fam.H() - 1e-12:
        raise OutOfRange("rate below the entropy value")
    _, val = golden_max(lambda t: -t * R + fam.G(t), fam.theta_min, 0.0)
    return max(val, 0.0)


def exponent_scaled_direct(fam: MeasureFamily, R: float, theta_lo: Optional[float] = None) -> tuple[float, float]:
    """``sup [-theta R + G(theta)] / (1 + theta)`` over ``[theta_lo, 0]`` by golden-section.

    Returns ``(argmax, value)``.
    """
    lo = fam.theta_min if theta_lo is None else theta_lo
    return golden_max(lambda t: (-t * R + fam.G(t)) / (1 + t), lo, 0.0)


def exponent_scaled(fam: MeasureFamily, R: float) -> float:
    """Closed form ``-theta(a(R)) a(R) + G(theta(a(R)))`` of the scaled exponent."""
    if R < fam.H() - 1e-12:
        raise OutOfRange("rate below the entropy value")
    if R == fam.H():
        return 0.0
    th = theta_of_R(fam, R)
    return -th * fam.dG(th) + fam.G(th)


def critical_rate(fam: MeasureFamily) -> float:
    """``R(a)`` at ``a = G'(-1/2)``."""
    if fam.is_degenerate():
        raise Degenerate("family has zero varentropy")
    return fam.R_of_theta(-0.5)


def quadratic_expansion_check(fam: MeasureFamily, R: float) -> tuple[float, float]:
    """``(exponent_scaled(R), (R - H)^2 / (2 V))``."""
    h, v = fam.H(), fam.V()
    if R == h:
        return 0.0, 0.0
    return exponent_scaled(fam, R), (R - h) ** 2 / (2 * v)


def singleshot_family(P, kind="lower", **kw) -> MeasureFamily:
    """Family of a single-shot measure on an explicit joint law."""
    P = P if isinstance(P, JointDistribution) else JointDistribution(P)
    kind = as_kind(kind)
    p = P.p
    extra = {}
    if isinstance(kind, (Lower, Upper)):
        extra = dict(entropy=conditional_entropy(P), varentropy=varentropy(P))
    floor = -1.0 if isinstance(kind, Upper) else -np.inf
    return MeasureFamily(
        lambda t: g_kind(p, kind, t),
        g_floor=floor,
        h0=singleshot_renyi(P, kind, -1.0),
        name=type(kind).__name__.lower(),
        **{**extra, **kw},
    )


def transition_family(src: MarkovSource, kind="lower", **kw) -> MeasureFamily:
    """Family of a transition-matrix measure rate."""
    kind = as_kind(kind)
    extra = {}
    if isinstance(kind, (Lower, Upper)):
        extra = dict(entropy=src.entropy_rate(), varentropy=src.varentropy_rate())
    floor = -np.inf if isinstance(kind, Lower) else -1.0
    return MeasureFamily(
        lambda t: src.g(kind, t),
        g_floor=floor,
        h0=transition_renyi(src, kind, -1.0),
        name="transition-" + type(kind).__name__.lower(),
        **{**extra, **kw},
    )
