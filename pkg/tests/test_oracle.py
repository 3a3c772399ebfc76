import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rank_one_source
from markov_flb.conversion import gilbert_elliott
from markov_flb.errors import EnumerationTooLarge, InvalidPrime, ValidationError
from markov_flb.oracle import (
    SimConfig,
    block_rng,
    brute_joint,
    brute_optimal_source_error,
    brute_renyi_n,
    empirical_varentropy,
    mc_hash_coding,
    worker_count,
)
from markov_flb.singleshot import JointDistribution, Lower, TwoParam, Upper, singleshot_renyi, varentropy
from markov_flb.transition import MarkovSource, finite_corrections, transition_renyi


def exact_hash_error(src: MarkovSource, n: int, k: int, tie_is_error: bool = True) -> float:
    """``E_F[P_s]`` over every binary ``(n-k) x n`` matrix, with MAP decoding in the coset."""
    p = brute_joint(src, n).joint()
    xs = np.array(list(itertools.product(range(2), repeat=n)))
    rows = n - k
    total = 0.0
    count = 0
    for bits in itertools.product(range(2), repeat=rows * n):
        F = np.array(bits, dtype=int).reshape(rows, n)
        synd = (xs @ F.T) % 2 if rows else np.zeros((len(xs), 0), dtype=int)
        err = 0.0
        for i in range(len(xs)):
            same = np.all(synd == synd[i], axis=1)
            same[i] = False
            rivals = p[same]
            if rivals.size == 0:
                continue
            best = rivals.max(axis=0)
            # probabilities equal up to roundoff are ties
            lose = best >= p[i] * (1 - 1e-9) if tie_is_error else best > p[i] * (1 + 1e-9)
            err += p[i][lose].sum()
        total += err
        count += 1
    return total / count


class TestBruteJoint:
    def test_n1_is_initial(self, ge):
        J = brute_joint(ge, 1)
        assert np.allclose(J.joint(), ge.initial_joint(), atol=1e-15)

    def test_rank_one_product(self):
        P = np.array([[0.4, 0.1], [0.2, 0.3]])
        J = brute_joint(rank_one_source(P), 3).joint()
        ref = np.einsum("ad,be,cf->abcdef", P, P, P).reshape(8, 8)
        assert np.allclose(J, ref, atol=1e-15)

    def test_y_marginal_is_y_chain(self, ge):
        J = brute_joint(ge, 3).joint()
        wy = ge.y_transition()
        py1 = ge.initial_joint().sum(axis=0)
        for idx, (a, b, c) in enumerate(itertools.product(range(2), repeat=3)):
            assert J[:, idx].sum() == pytest.approx(py1[a] * wy[b, a] * wy[c, b], abs=1e-15)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_sums_and_matrix_powers(self, ge, n):
        J = brute_joint(ge, n)
        assert abs(J.probs.sum() - 1) < 1e-10
        last = J.probs.reshape(-1, ge.W.size).sum(axis=0)
        ref = np.linalg.matrix_power(ge.W.matrix, n - 1) @ ge.initial
        assert np.allclose(last, ref, atol=1e-12)

    def test_cap(self, ge):
        with pytest.raises(EnumerationTooLarge):
            brute_joint(ge, 12)
        with pytest.raises(EnumerationTooLarge):
            brute_joint(ge, 5, cap=100)
        with pytest.raises(ValidationError):
            brute_joint(ge, 0)


class TestBruteRenyi:
    @pytest.mark.parametrize("kind", [Lower(), Upper(), TwoParam(0.4)])
    @pytest.mark.parametrize("theta", [-0.5, 0.0, 1.2])
    def test_n1(self, ge, kind, theta):
        J = brute_joint(ge, 1)
        expect = singleshot_renyi(ge.initial_joint(), kind, theta)
        assert brute_renyi_n(J, kind, theta) == pytest.approx(expect, abs=1e-10)

    @pytest.mark.parametrize("kind", [Lower(), Upper()])
    @pytest.mark.parametrize("theta", [-0.5, 0.0, 1.2])
    def test_additive_for_products(self, kind, theta):
        P = np.array([[0.4, 0.1], [0.2, 0.3]])
        J = brute_joint(rank_one_source(P), 3)
        assert brute_renyi_n(J, kind, theta) == pytest.approx(3 * singleshot_renyi(P, kind, theta), abs=1e-10)

    def test_ge_n6_in_sandwich(self, ge):
        t, n = -0.3, 6
        c = finite_corrections(ge, Lower(), t)
        val = t * brute_renyi_n(brute_joint(ge, n), Lower(), t)
        core = (n - 1) * t * transition_renyi(ge, "lower", t)
        assert core + c.lower - 1e-10 <= val <= core + c.upper + 1e-10

    def test_convergence_envelope(self, ge):
        h = transition_renyi(ge, "lower", 0.5)
        c = finite_corrections(ge, Lower(), 0.5)
        env = (abs(c.lower) + abs(c.upper)) / 0.5 + abs(h)
        for n in range(2, 9):
            gap = abs(brute_renyi_n(brute_joint(ge, n), Lower(), 0.5) / n - h)
            assert gap <= env / n + 1e-12


class TestOptimalSourceError:
    def test_full_size(self, d2):
        assert brute_optimal_source_error(d2, 2) == 0.0

    def test_single_bin_is_map(self, ge):
        p = brute_joint(ge, 3).joint()
        assert brute_optimal_source_error(p, 1) == pytest.approx(1 - p.max(axis=0).sum(), abs=1e-15)

    def test_d2(self, d2):
        assert brute_optimal_source_error(d2, 1) == pytest.approx(0.25, abs=1e-15)

    def test_limits(self, ge):
        with pytest.raises(EnumerationTooLarge):
            brute_optimal_source_error(brute_joint(ge, 4), 2)
        with pytest.raises(EnumerationTooLarge):
            brute_optimal_source_error(brute_joint(ge, 3), 5)

    def test_against_all_encoders(self):
        # every map {0..5} -> {0, 1}
        rng = np.random.default_rng(3)
        p = rng.uniform(0, 1, size=(6, 3))
        p /= p.sum()
        best = 1.0
        for enc in itertools.product(range(2), repeat=6):
            enc = np.array(enc)
            ok = sum(p[enc == b].max(axis=0).sum() for b in range(2) if np.any(enc == b))
            best = min(best, 1 - ok)
        assert brute_optimal_source_error(p, 2) == pytest.approx(best, abs=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3))
    def test_monotone_in_M(self, seed, M):
        p = np.random.default_rng(seed).uniform(0, 1, size=(6, 2))
        p /= p.sum()
        assert brute_optimal_source_error(p, M + 1) <= brute_optimal_source_error(p, M) + 1e-15


class TestHashSimulation:
    def test_config_validation(self):
        with pytest.raises(InvalidPrime):
            SimConfig(trials=10, seed=0, n=4, k=2, q=4)
        with pytest.raises(ValidationError):
            SimConfig(trials=10, seed=0, n=4, k=5)
        with pytest.raises(ValidationError):
            SimConfig(trials=0, seed=0, n=4, k=1)

    def test_alphabet_must_match_field(self, ge):
        with pytest.raises(ValidationError):
            mc_hash_coding(ge, SimConfig(trials=10, seed=0, n=4, k=1, q=3))

    def test_reproducible(self, ge):
        cfg = SimConfig(trials=5000, seed=11, n=6, k=2)
        a = mc_hash_coding(ge, cfg)
        assert a == mc_hash_coding(ge, cfg)
        assert a == mc_hash_coding(ge, cfg, workers=3)

    def test_seeds_differ(self, ge):
        a = mc_hash_coding(ge, SimConfig(trials=5000, seed=1, n=6, k=2))
        b = mc_hash_coding(ge, SimConfig(trials=5000, seed=2, n=6, k=2))
        assert a != b

    def test_block_rng_independent(self):
        assert block_rng(0, 0).random() != block_rng(0, 1).random()
        assert block_rng(5, 3).random() == block_rng(5, 3).random()

    def test_single_bin_is_map(self, ge):
        # k = n leaves no syndrome rows: one bin holding every sequence
        n = 5
        p = brute_joint(ge, n).joint()
        exact = 1 - p.max(axis=0).sum()
        est = mc_hash_coding(ge, SimConfig(trials=20000, seed=4, n=n, k=n))
        assert abs(est.value - exact) <= 4 * est.stderr

    def test_full_rank_hash_mostly_correct(self, ge):
        # k = 0: errors only when the square matrix is singular, which for
        # random binary n x n matrices happens with probability ~0.71
        est = mc_hash_coding(ge, SimConfig(trials=5000, seed=4, n=6, k=0))
        singular = 1 - np.prod([1 - 2.0 ** -i for i in range(1, 7)])
        assert est.value <= singular + 4 * est.stderr

    @pytest.mark.parametrize("n, k", [(3, 1), (4, 2)])
    def test_matches_exact_average_over_hashes(self, ge, n, k):
        exact = exact_hash_error(ge, n, k)
        est = mc_hash_coding(ge, SimConfig(trials=40000, seed=9, n=n, k=k))
        assert abs(est.value - exact) <= 4 * est.stderr

    def test_ties(self, uniform22):
        # uniform noise: every coset member ties, so ties decide the outcome
        src = rank_one_source(uniform22.p)
        strict = mc_hash_coding(src, SimConfig(trials=4000, seed=2, n=4, k=2, tie_is_error=False))
        loose = mc_hash_coding(src, SimConfig(trials=4000, seed=2, n=4, k=2))
        assert strict.value == 0.0
        assert loose.value == 1.0

    @pytest.mark.parametrize("method", ["scan", "coset"])
    def test_methods_agree(self, ge, method):
        cfg = SimConfig(trials=4000, seed=6, n=7, k=3, method=method)
        ref = mc_hash_coding(ge, SimConfig(trials=4000, seed=6, n=7, k=3, method="scan"))
        assert mc_hash_coding(ge, cfg) == ref

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv("MARKOV_FLB_THREADS", "3")
        assert worker_count() == 3
        assert worker_count(5) == 5
        monkeypatch.setenv("MARKOV_FLB_THREADS", "x")
        with pytest.raises(ValidationError):
            worker_count()


class TestEmpiricalVarentropy:
    def test_deterministic_noise(self):
        src = gilbert_elliott(0.2, 0.3, 1e-12, 1e-12)
        est = empirical_varentropy(src, 50, 2000, seed=0)
        assert est.value < 1e-12

    def test_iid(self):
        P = np.array([[0.4, 0.1], [0.2, 0.3]])
        est = empirical_varentropy(rank_one_source(P), 200, 20000, seed=3)
        assert abs(est.value - varentropy(JointDistribution(P))) <= 3 * est.stderr

    def test_reproducible(self, ge):
        a = empirical_varentropy(ge, 30, 5000, seed=8)
        assert a == empirical_varentropy(ge, 30, 5000, seed=8, workers=2)

    def test_ge_moderate_n(self, ge):
        est = empirical_varentropy(ge, 400, 20000, seed=5)
        # finite-n bias is O(1/n); allow it on top of sampling noise
        assert abs(est.value - ge.varentropy_rate()) <= 3 * est.stderr + 5 / 400

    def test_hidden_chain_forward_recursion(self):
        T = np.zeros((2, 2, 2, 2))
        for xp in range(2):
            wy = [0.8, 0.2] if xp == 0 else [0.3, 0.7]
            for y in range(2):
                T[0, y, xp, :] = 0.6 * wy[y]
                T[1, y, xp, :] = 0.4 * wy[y]
        src = MarkovSource.from_tensor(T)
        n = 4
        p = brute_joint(src, n).joint()
        py = p.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(p > 0, -np.log(p / py[None, :]), 0.0)
        mean = (p * s).sum()
        var = (p * (s - mean) ** 2).sum() / n
        est = empirical_varentropy(src, n, 40000, seed=1)
        assert abs(est.value - var) <= 4 * est.stderr

    def test_too_few_trials(self, ge):
        with pytest.raises(ValidationError):
            empirical_varentropy(ge, 10, 2, seed=0)
