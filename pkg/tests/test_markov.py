import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from markov_flb.errors import NotIrreducible, StepUnderflow, ValidationError
from markov_flb.markov import (
    CgfSpec,
    PairTransitionMatrix,
    as_prob_vector,
    as_stochastic,
    cgf,
    cgf_derivatives,
    cgf_finite_bounds,
    is_irreducible,
    is_primitive,
    perron_frobenius,
    richardson,
    stable_derivative,
    stationary_distribution,
)


def brute_phi_n(spec: CgfSpec, rho: float, n: int) -> float:
    """``log E[exp(rho S_n)]`` by summing over every path."""
    W, g = spec.W, spec.g
    k = W.shape[0]
    p1 = spec.initial if spec.initial is not None else stationary_distribution(W)
    gt = spec.g_init if spec.g_init is not None else np.zeros(k)
    total = 0.0
    for path in itertools.product(range(k), repeat=n):
        w = p1[path[0]] * math.exp(rho * gt[path[0]])
        for a, b in zip(path[1:], path[:-1]):
            w *= W[a, b] * math.exp(rho * g[a, b])
        total += w
    return math.log(total)


def dp_phi_n(spec: CgfSpec, rho: float, n: int) -> float:
    """Same path sum as :func:`brute_phi_n`, accumulated letter by letter."""
    p1 = spec.initial if spec.initial is not None else stationary_distribution(spec.W)
    gt = spec.g_init if spec.g_init is not None else np.zeros(len(p1))
    A = spec.W * np.exp(rho * spec.g)
    w = p1 * np.exp(rho * gt)
    for _ in range(n - 1):
        w = A @ w
    return math.log(w.sum())


positive_matrices = st.integers(2, 4).flatmap(
    lambda k: arrays(np.float64, (k, k), elements=st.floats(0.05, 5.0))
)


def random_stochastic(seed: int, k: int) -> np.ndarray:
    m = np.random.default_rng(seed).uniform(0.05, 1.0, size=(k, k))
    return m / m.sum(axis=0, keepdims=True)


def iid_coin_spec() -> CgfSpec:
    W = np.full((2, 2), 0.5)
    g = np.array([[0.0, 0.0], [1.0, 1.0]])
    return CgfSpec(W, g, g_init=np.array([0.0, 1.0]), initial=[0.5, 0.5])


class TestValidation:
    def test_prob_vector_ok(self):
        assert np.allclose(as_prob_vector([0.25, 0.75]), [0.25, 0.75])

    @pytest.mark.parametrize("bad", [[0.5, 0.6], [-0.1, 1.1], [], [np.nan, 1.0]])
    def test_prob_vector_rejects(self, bad):
        with pytest.raises(ValidationError):
            as_prob_vector(bad)

    def test_stochastic_columns(self):
        with pytest.raises(ValidationError):
            as_stochastic([[0.7, 0.4], [0.4, 0.6]])
        with pytest.raises(ValidationError):
            as_stochastic([[1.0, 0.0, 0.0]])

    def test_pair_matrix_rejects_reducible(self):
        with pytest.raises(NotIrreducible):
            PairTransitionMatrix(np.eye(4), 2, 2)

    def test_pair_matrix_tensor_roundtrip(self):
        W = random_stochastic(0, 4)
        pm = PairTransitionMatrix(W, 2, 2)
        T = pm.tensor()
        assert T.shape == (2, 2, 2, 2)
        # z = x * ny + y
        assert T[1, 0, 0, 1] == W[2, 1]
        assert np.array_equal(PairTransitionMatrix.from_tensor(T).matrix, W)


class TestIrreducibility:
    @pytest.mark.parametrize(
        "mask, irr, prim",
        [
            ([[1, 1], [1, 1]], True, True),
            ([[0, 1], [1, 0]], True, False),
            ([[1, 0], [0, 1]], False, False),
            ([[1, 1], [0, 1]], False, False),
            ([[0, 1, 0], [0, 0, 1], [1, 0, 1]], True, True),
        ],
    )
    def test_flags(self, mask, irr, prim):
        m = np.array(mask, dtype=bool)
        assert is_irreducible(m) is irr
        assert is_primitive(m) is prim


class TestStationary:
    def test_symmetric_flip(self):
        assert np.allclose(stationary_distribution([[0.9, 0.1], [0.1, 0.9]]), [0.5, 0.5], atol=1e-12)

    def test_identity_not_irreducible(self):
        with pytest.raises(NotIrreducible):
            stationary_distribution(np.eye(2))

    def test_hand_solved(self):
        # 0.3 pi0 = 0.4 pi1  =>  pi = (4/7, 3/7)
        assert np.allclose(stationary_distribution([[0.7, 0.4], [0.3, 0.6]]), [4 / 7, 3 / 7], atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_fixed_point(self, seed, k):
        W = random_stochastic(seed, k)
        pi = stationary_distribution(W)
        assert np.all(pi > 0)
        assert abs(pi.sum() - 1) < 1e-12
        assert np.max(np.abs(W @ pi - pi)) < 1e-11


class TestPerronFrobenius:
    def test_symmetric_circulant(self):
        r = perron_frobenius([[2.0, 1.0], [1.0, 2.0]])
        assert abs(r.eigenvalue - 3) < 1e-12
        assert np.allclose(r.right, [1, 1])

    def test_periodic_permutation(self):
        r = perron_frobenius([[0.0, 1.0], [1.0, 0.0]])
        assert abs(r.eigenvalue - 1) < 1e-12
        assert np.allclose(r.right, [1, 1])

    @pytest.mark.parametrize("c", [0.5, 1.0, 4.0])
    def test_rank_one(self, c):
        col = np.array([0.3, 0.7]) * c
        r = perron_frobenius(np.column_stack([col, col]))
        assert abs(r.eigenvalue - c) < 1e-12 * c
        assert np.allclose(r.right, [1.0, 0.7 / 0.3])

    def test_reducible(self):
        with pytest.raises(NotIrreducible):
            perron_frobenius([[1.0, 1.0], [0.0, 1.0]])

    def test_negative_entries(self):
        with pytest.raises(ValidationError):
            perron_frobenius([[1.0, -1.0], [1.0, 1.0]])

    @settings(max_examples=60, deadline=None)
    @given(positive_matrices)
    def test_against_dense_eig(self, M):
        r = perron_frobenius(M)
        ev = np.linalg.eigvals(M)
        assert abs(r.eigenvalue - np.max(ev.real)) <= 1e-9 * r.eigenvalue
        assert np.min(r.right) == pytest.approx(1.0)
        assert abs(r.left.sum() - 1) < 1e-12
        assert np.all(r.right > 0) and np.all(r.left > 0)
        assert np.max(np.abs(M @ r.right - r.eigenvalue * r.right)) / r.eigenvalue <= 1e-10
        assert np.max(np.abs(M.T @ r.left - r.eigenvalue * r.left)) / r.eigenvalue <= 1e-10

    @pytest.mark.parametrize("seed", range(6))
    def test_stochastic_matrix(self, seed):
        # with M[dest, source] the right vector carries the invariant law and
        # the left vector is the all-ones (constant) vector
        W = random_stochastic(seed, 4)
        r = perron_frobenius(W)
        assert abs(r.eigenvalue - 1) < 1e-10
        assert np.allclose(r.right / r.right.sum(), stationary_distribution(W), atol=1e-10)
        assert np.allclose(r.left, 0.25, atol=1e-10)


class TestCgf:
    @pytest.mark.parametrize("seed", range(4))
    def test_zero(self, seed):
        W = random_stochastic(seed, 3)
        g = np.random.default_rng(seed).normal(size=(3, 3))
        assert cgf(CgfSpec(W, g), 0.0) == 0.0

    @pytest.mark.parametrize("rho", [-2.0, -0.5, 0.3, 1.7])
    def test_iid_coin(self, rho):
        assert cgf(iid_coin_spec(), rho) == pytest.approx(math.log((1 + math.exp(rho)) / 2), abs=1e-12)

    def test_zero_entries_never_tilted(self):
        W = np.array([[0.0, 1.0], [1.0, 0.0]])
        g = np.array([[np.inf, 1.0], [2.0, -np.inf]])
        # periodic two-cycle: lambda = exp(rho (g01 + g10) / 2)
        assert cgf(CgfSpec(W, g), 0.4) == pytest.approx(0.4 * 1.5, abs=1e-12)

    def test_infinite_generator_on_support(self):
        with pytest.raises(ValidationError):
            CgfSpec(np.full((2, 2), 0.5), np.array([[np.inf, 0], [0, 0]]))

    @pytest.mark.parametrize("n", [1, 2, 5, 7])
    def test_dp_matches_enumeration(self, ge, n):
        spec = ge.cgf_spec()
        assert dp_phi_n(spec, -0.5, n) == pytest.approx(brute_phi_n(spec, -0.5, n), abs=1e-12)

    @pytest.mark.parametrize("rho", [-0.5, 0.7])
    def test_ge_against_path_sum_increment(self, ge, rho):
        # phi_{n+1} - phi_n converges to phi at the rate of the second
        # eigenvalue ratio (about 0.74 here), so n = 100 leaves ~1e-13
        spec = ge.cgf_spec()
        inc = dp_phi_n(spec, rho, 101) - dp_phi_n(spec, rho, 100)
        assert cgf(spec, rho) == pytest.approx(inc, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.01, 0.99))
    def test_convex(self, seed, r1, r2, t):
        rng = np.random.default_rng(seed)
        spec = CgfSpec(random_stochastic(seed, 3), rng.normal(size=(3, 3)))
        lhs = cgf(spec, t * r1 + (1 - t) * r2)
        assert lhs <= t * cgf(spec, r1) + (1 - t) * cgf(spec, r2) + 1e-9


class TestDerivatives:
    def test_iid_coin(self):
        d1, d2 = cgf_derivatives(iid_coin_spec(), 0.0)
        assert d1 == pytest.approx(0.5, abs=1e-9)
        assert d2 == pytest.approx(0.25, abs=1e-7)

    @pytest.mark.parametrize("c", [-1.3, 0.0, 2.5])
    @pytest.mark.parametrize("rho", [-1.0, 0.0, 0.7])
    def test_constant_generator(self, c, rho):
        spec = CgfSpec(random_stochastic(3, 3), np.full((3, 3), c))
        d1, d2 = cgf_derivatives(spec, rho)
        assert d1 == pytest.approx(c, abs=1e-9)
        assert abs(d2) < 1e-7

    @pytest.mark.parametrize("seed", range(4))
    def test_slope_nondecreasing(self, seed):
        rng = np.random.default_rng(seed)
        spec = CgfSpec(random_stochastic(seed, 3), rng.normal(size=(3, 3)))
        slopes = [cgf_derivatives(spec, r)[0] for r in np.linspace(-2, 2, 9)]
        assert np.all(np.diff(slopes) >= -1e-9)
        assert all(cgf_derivatives(spec, r)[1] >= -1e-9 for r in (-1.0, 0.0, 1.0))

    @pytest.mark.parametrize("order, expect", [(1, math.cos(0.3)), (2, -math.sin(0.3))])
    def test_richardson_sine(self, order, expect):
        assert richardson(math.sin, 0.3, order, 1e-2) == pytest.approx(expect, abs=1e-10)

    def test_step_underflow(self):
        with pytest.raises(StepUnderflow):
            stable_derivative(lambda t: math.nan, 0.0, 1, 1e-4, 1e-9)


class TestFiniteBounds:
    def test_iid_collapse(self):
        spec = iid_coin_spec()
        for n in (1, 3, 7):
            lo, hi = cgf_finite_bounds(spec, 0.6, n)
            assert lo == pytest.approx(hi, abs=1e-12)
            assert lo == pytest.approx(n * cgf(spec, 0.6), abs=1e-12)

    def test_n_one_contains_single_letter_sum(self, ge):
        spec = ge.cgf_spec()
        lo, hi = cgf_finite_bounds(spec, 0.8, 1)
        assert lo - 1e-12 <= brute_phi_n(spec, 0.8, 1) <= hi + 1e-12

    def test_ge_n8(self, ge):
        spec = ge.cgf_spec()
        lo, hi = cgf_finite_bounds(spec, -0.3, 8)
        assert lo - 1e-10 <= brute_phi_n(spec, -0.3, 8) <= hi + 1e-10

    def test_rejects_n0(self, ge):
        with pytest.raises(ValidationError):
            cgf_finite_bounds(ge.cgf_spec(), 0.1, 0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-1.5, 1.5), st.integers(1, 6))
    def test_sandwich_random(self, seed, rho, n):
        rng = np.random.default_rng(seed)
        init = rng.uniform(0.1, 1, size=4)
        spec = CgfSpec(random_stochastic(seed, 4), rng.normal(size=(4, 4)),
                       g_init=rng.normal(size=4), initial=init / init.sum())
        lo, hi = cgf_finite_bounds(spec, rho, n)
        val = brute_phi_n(spec, rho, n)
        assert lo <= hi
        assert lo - 1e-9 <= val <= hi + 1e-9
