"""Property suites that cross-check analytic quantities against oracles.

Each check returns a record ``{"name", "passed", "margin"}`` where the
margin is the smallest slack observed (negative on violation).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .bounds import SourceQuery, large_deviation, src_achievability, src_converse
from .conversion import bes, decompose, gilbert_elliott, to_conditional_additive
from .markov import cgf
from .oracle import brute_joint, brute_optimal_source_error, brute_theta_h
from .singleshot import (
    JointDistribution,
    RelativeQ,
    TwoParam,
    Upper,
    Lower,
    g_relative,
    optimal_conditioner,
    singleshot_cgf,
    singleshot_renyi,
)
from .transition import (
    Assumption,
    MarkovSource,
    finite_corrections,
    optimal_V,
    renyi_given_V,
    transition_renyi,
)

SANDWICH_TOL = 1e-9
SANDWICH_THETAS = (-0.7, -0.3, 0.5, 1.5)
SANDWICH_THETA_PRIMES = (-0.5, 0.5)


def binary_entropy(p: float) -> float:
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def _stochastic(rng: np.random.Generator, k: int, lo: float = 0.05) -> np.ndarray:
    m = rng.uniform(lo, 1.0, size=(k, k))
    return m / m.sum(axis=0, keepdims=True)


def random_strongly_non_hidden(rng: np.random.Generator, nx: int = 2, ny: int = 2) -> MarkovSource:
    """Random primitive chain satisfying the strongly non-hidden assumption.

    Alternates (by a coin flip) between noise that depends on the state pair
    only and shift-structured noise ``P_Z(x - y - (x' - y'))`` (requires
    ``nx == ny``).
    """
    Q = _stochastic(rng, ny)
    T = np.zeros((nx, ny, nx, ny))
    if nx == ny and rng.random() < 0.5:
        pz = rng.uniform(0.05, 1.0, size=nx)
        pz /= pz.sum()
        for x in range(nx):
            for y in range(ny):
                for xp in range(nx):
                    for yp in range(ny):
                        T[x, y, xp, yp] = Q[y, yp] * pz[((x - y) - (xp - yp)) % nx]
    else:
        px = rng.uniform(0.05, 1.0, size=(nx, ny, ny))
        px /= px.sum(axis=0, keepdims=True)
        for xp in range(nx):
            T[:, :, xp, :] = Q[None, :, :] * px
    src = MarkovSource.from_tensor(T)
    assert src.level >= Assumption.STRONGLY_NON_HIDDEN
    return src


def _record(name: str, margin: float, tol: float = 0.0) -> dict:
    return dict(name=name, passed=bool(margin >= -tol), margin=float(margin))


# ---------------------------------------------------------------------------
# suites


def suite_measures(seed: int = 0) -> list[dict]:
    src = gilbert_elliott(0.1, 0.1, 0.1, 0.4)
    ref = 0.5 * binary_entropy(0.1) + 0.5 * binary_entropy(0.4)
    out = [_record("ge_entropy_rate", 1e-6 - abs(transition_renyi(src, "lower", 0.0) - ref))]
    grid = np.arange(-0.9, 3.0 + 1e-9, 0.05)
    lo = np.array([transition_renyi(src, "lower", t) for t in grid])
    up = np.array([transition_renyi(src, "upper", t) for t in grid])
    out.append(_record("upper_ge_lower", float(np.min(up - lo)), 1e-12))
    out.append(_record("lower_monotone", float(np.min(lo[:-1] - lo[1:])), 1e-12))
    out.append(_record("upper_monotone", float(np.min(up[:-1] - up[1:])), 1e-12))
    return out


def sandwich_margins(src: MarkovSource, n: int) -> dict:
    """Smallest slack of the three n-letter sandwiches on one chain."""
    J = brute_joint(src, n)
    m_low = m_up = m_two = math.inf
    for t in SANDWICH_THETAS:
        c = finite_corrections(src, Lower(), t)
        core = (n - 1) * src.g_lower(t)
        val = brute_theta_h(J, Lower(), t)
        m_low = min(m_low, val - core - c.lower, core + c.upper - val)
        c = finite_corrections(src, Upper(), t)
        core = (n - 1) * src.g_upper(t) / (1 + t)
        val = brute_theta_h(J, Upper(), t) / (1 + t)
        m_up = min(m_up, val - core - c.lower, core + c.upper - val)
        for tp in SANDWICH_THETA_PRIMES:
            kind = TwoParam(tp)
            c = finite_corrections(src, kind, t)
            core = (n - 1) * src.g(kind, t)
            val = brute_theta_h(J, kind, t)
            m_two = min(m_two, val - core - c.lower, core + c.upper - val)
    return dict(lower=m_low, upper=m_up, two_param=m_two)


def suite_sandwich(seed: int = 0, chains: int = 50, ns=range(2, 9)) -> list[dict]:
    rng = np.random.default_rng(seed)
    worst = dict(lower=math.inf, upper=math.inf, two_param=math.inf)
    for _ in range(chains):
        src = random_strongly_non_hidden(rng)
        for n in ns:
            for k, v in sandwich_margins(src, n).items():
                worst[k] = min(worst[k], v)
    return [_record(f"sandwich_{k}", v, SANDWICH_TOL) for k, v in worst.items()]


def _random_joint(rng: np.random.Generator, nx: int = 3, ny: int = 2) -> JointDistribution:
    p = rng.uniform(0.01, 1.0, size=(nx, ny))
    return JointDistribution(p / p.sum())


def suite_cgf(seed: int = 0, instances: int = 20) -> list[dict]:
    rng = np.random.default_rng(seed)
    thetas = (-0.8, -0.3, 0.4, 1.7)
    single = chain = 0.0
    convex = interleave = math.inf
    for _ in range(instances):
        P = _random_joint(rng)
        q = rng.uniform(0.1, 1.0, size=2)
        q /= q.sum()
        for t in thetas:
            single = max(single, abs(g_relative(P.p, q, t) + singleshot_cgf(P, q, -t)))
        src = random_strongly_non_hidden(rng)
        spec = src.cgf_spec()
        for t in thetas:
            chain = max(chain, abs(src.g_lower(t) + cgf(spec, -t)))
        rhos = np.linspace(-1.5, 1.5, 13)
        vals = np.array([cgf(spec, r) for r in rhos])
        convex = min(convex, float(np.min(vals[:-2] + vals[2:] - 2 * vals[1:-1])))
        for t in (0.2, 0.5, 0.8):
            o = 1 / (1 - t)
            h_lo = singleshot_renyi(P, "lower", o - 1)
            h_up = singleshot_renyi(P, "upper", o - 1)
            h_lo2 = singleshot_renyi(P, "lower", t)
            interleave = min(interleave, h_up - h_lo, h_lo2 - h_up)
    return [
        _record("cgf_bridge_singleshot", 1e-10 - single),
        _record("cgf_bridge_transition", 1e-10 - chain),
        _record("cgf_convex", convex, 1e-9),
        _record("interleaving", interleave, 1e-12),
    ]


def suite_attainment(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    P = _random_joint(rng)
    src = gilbert_elliott(0.1, 0.1, 0.1, 0.4)
    single = chain = 0.0
    for t in np.linspace(-0.9, 2.0, 12):
        qopt = optimal_conditioner(P, t)
        single = max(single, abs(singleshot_renyi(P, RelativeQ(qopt), t)
                                 - singleshot_renyi(P, "upper", t)))
        chain = max(chain, abs(renyi_given_V(src, optimal_V(src, t), t)
                               - transition_renyi(src, "upper", t)))
    return [_record("optimal_conditioner", 1e-9 - single), _record("optimal_V", 1e-9 - chain)]


def suite_conversion(seed: int = 0) -> list[dict]:
    ch = bes(Fraction(1, 10), Fraction(1, 5))
    c = to_conditional_additive(ch)
    exact = (c.p_y == (Fraction(4, 5), Fraction(1, 5))
             and c.p_x_given_y[0][0] == Fraction(7, 8)
             and c.p_x_given_y[0][1] == c.p_x_given_y[1][1] == Fraction(1, 2))
    dec = decompose(ch)
    orbit_ok = all(len(o) * len(s) == ch.group.order for o, s in zip(dec.orbits, dec.stabilizers))
    return [_record("bes_exact", 0.0 if exact else -1.0),
            _record("orbit_stabilizer", 0.0 if orbit_ok else -1.0)]


def suite_bounds(seed: int = 0) -> list[dict]:
    D2 = JointDistribution([[0.5, 0.25], [0.0, 0.25]])
    worst_order = worst_gl = math.inf
    for M in (1, 2, 3):
        q = SourceQuery.with_size(D2, M)
        opt = brute_optimal_source_error(D2, M)
        ach = min(src_achievability(q, m).probability() for m in ("spectrum", "gallager", "loose"))
        conv = max(src_converse(q, m).probability() for m in ("spectrum", "hypothesis"))
        worst_order = min(worst_order, opt - conv, ach - opt)
        worst_gl = min(worst_gl, src_achievability(q, "loose").value
                       - src_achievability(q, "gallager").value)
    return [_record("converse_le_optimal_le_achievability", worst_order, 1e-12),
            _record("gallager_le_loose", worst_gl, 1e-12)]


def suite_asymptotics(seed: int = 0, rates: int = 5) -> list[dict]:
    rng = np.random.default_rng(seed)
    src = gilbert_elliott(0.1, 0.1, 0.1, 0.4)
    base = large_deviation(src, src.entropy_rate() + 1e-3, "upper")
    h, r_cr = base["entropy"], base["critical_rate"]
    worst = 0.0
    for R in np.sort(rng.uniform(h, r_cr, size=rates)):
        r = large_deviation(src, float(R), "upper")
        worst = max(worst, abs(r["achievability"] - r["converse"]))
    return [_record("ld_equality_below_critical_rate", 1e-7 - worst)]


SUITES: dict[str, Callable[..., list[dict]]] = {
    "measures": suite_measures,
    "sandwich": suite_sandwich,
    "cgf": suite_cgf,
    "attainment": suite_attainment,
    "conversion": suite_conversion,
    "bounds": suite_bounds,
    "asymptotics": suite_asymptotics,
}


def run_suites(names=("all",), seed: int = 0, quick: bool = False) -> dict:
    """Run the named suites and return a JSON-ready report."""
    if "all" in names:
        names = tuple(SUITES)
    checks = []
    for name in names:
        if name not in SUITES:
            raise KeyError(name)
        kw = dict(chains=8, ns=range(2, 6)) if (quick and name == "sandwich") else {}
        for rec in SUITES[name](seed, **kw):
            checks.append(dict(suite=name, **rec))
    return dict(seed=seed, passed=all(c["passed"] for c in checks), checks=checks)
