import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import bes_markov_erasure, enumerate_bes_markov
from markov_flb.conversion import (
    FiniteAbelianGroup,
    RegularChannel,
    additive_channel,
    bes,
    bsc,
    convert_markov_noise,
    decompose,
    gilbert_elliott,
    iid_noise,
    markov_source_from_json,
    presets,
    regular_channel_from_json,
    regular_channel_to_json,
    symmetric_additive,
    to_conditional_additive,
)
from markov_flb.errors import NotIrreducible, NotRegular, UnknownPreset, ValidationError
from markov_flb.oracle import brute_joint
from markov_flb.transition import Assumption, MarkovSource

F = Fraction


def regular_code_error(ch: RegularChannel, code, n: int) -> float:
    """Exact MAP error of a fixed binary code on the memoryless regular channel."""
    law = ch.law()
    total = 0.0
    for bs in itertools.product(range(ch.nb), repeat=n):
        total += max(np.prod([law[b, c[i]] for i, b in enumerate(bs)]) for c in code)
    return 1 - total / len(code)


def additive_code_error(joint: np.ndarray, code, n: int) -> float:
    """Same for output ``(c + X, Y)`` with i.i.d. noise ``joint[x, y]``."""
    nx, ny = joint.shape
    total = 0.0
    for us in itertools.product(range(nx), repeat=n):
        for ys in itertools.product(range(ny), repeat=n):
            total += max(np.prod([joint[(u - c[i]) % nx, y] for i, (u, y) in enumerate(zip(us, ys))])
                         for c in code)
    return 1 - total / len(code)


class TestGroup:
    @pytest.mark.parametrize("moduli", [(2,), (3,), (2, 2), (2, 4), (3, 3)])
    def test_axioms(self, moduli):
        G = FiniteAbelianGroup(moduli)
        assert G.check_axioms()
        assert len(G.elements()) == G.order == int(np.prod(moduli))
        assert [G.index(a) for a in G.elements()] == list(range(G.order))

    def test_arithmetic(self):
        G = FiniteAbelianGroup((2, 3))
        assert G.add((1, 2), (1, 2)) == (0, 1)
        assert G.sub((0, 0), (1, 1)) == G.neg((1, 1)) == (1, 2)

    @pytest.mark.parametrize("moduli", [(), (0,), (2, -1)])
    def test_invalid(self, moduli):
        with pytest.raises(ValidationError):
            FiniteAbelianGroup(moduli)


class TestRegularChannel:
    def test_law(self):
        ch = bsc(F(1, 10))
        assert np.allclose(ch.law(), [[0.9, 0.1], [0.1, 0.9]])

    def test_not_bijection(self):
        with pytest.raises(NotRegular):
            RegularChannel(FiniteAbelianGroup.cyclic(2), ("0", "1"), (0.5, 0.5), ((0, 1), (0, 0)))

    def test_not_homomorphism(self):
        # pi_1 = pi_2 = swap is not a Z_3 action
        perms = ((0, 1, 2), (1, 0, 2), (1, 0, 2))
        with pytest.raises(NotRegular):
            RegularChannel(FiniteAbelianGroup.cyclic(3), ("a", "b", "c"), (0.2, 0.3, 0.5), perms)

    def test_identity_required(self):
        with pytest.raises(NotRegular):
            RegularChannel(FiniteAbelianGroup.cyclic(2), ("0", "1"), (0.5, 0.5), ((1, 0), (0, 1)))

    @pytest.mark.parametrize("base", [(0.5, 0.6), (F(1, 2), F(1, 3)), (-0.1, 1.1)])
    def test_bad_base(self, base):
        with pytest.raises(ValidationError):
            RegularChannel(FiniteAbelianGroup.cyclic(2), ("0", "1"), base, ((0, 1), (1, 0)))

    def test_duplicate_labels(self):
        with pytest.raises(ValidationError):
            RegularChannel(FiniteAbelianGroup.cyclic(2), ("0", "0"), (0.5, 0.5), ((0, 1), (1, 0)))


class TestDecompose:
    @pytest.mark.parametrize("q", [2, 3, 5])
    def test_additive_single_orbit(self, q):
        dec = decompose(additive_channel(q, [1 / q] * q))
        assert dec.ny == 1 and dec.orbits == (tuple(range(q)),)
        assert dec.stabilizers == (((0,),),)

    def test_bes(self):
        dec = decompose(bes(F(1, 10), F(1, 5)))
        assert dec.orbits == ((0, 1), (2,))
        assert dec.stabilizers == (((0,),), ((0,), (1,)))
        assert dec.orbit_of == (0, 0, 1)
        assert dec.iota[0] == {0: (0,), 1: (1,)}
        assert dec.iota[1] == {2: (0,)}

    def test_identity_representation(self):
        G = FiniteAbelianGroup.cyclic(2)
        ch = RegularChannel(G, ("a", "b", "c"), (0.2, 0.3, 0.5), ((0, 1, 2), (0, 1, 2)))
        dec = decompose(ch)
        assert dec.orbits == ((0,), (1,), (2,))
        assert all(set(s) == set(G.elements()) for s in dec.stabilizers)
        conv = to_conditional_additive(ch)
        assert np.allclose(np.array(conv.p_x_given_y, dtype=float), 0.5)

    @pytest.mark.parametrize("ch", [bes(0.1, 0.2), bsc(0.3), additive_channel(3, [0.2, 0.3, 0.5])])
    def test_orbit_stabilizer(self, ch):
        dec = decompose(ch)
        assert sorted(itertools.chain(*dec.orbits)) == list(range(ch.nb))
        for orb, stb in zip(dec.orbits, dec.stabilizers):
            assert len(orb) * len(stb) == ch.group.order

    def test_stabilizer_independent_of_base_point(self):
        ch = bes(0.1, 0.2)
        assert decompose(ch).stabilizers == decompose(ch, reverse=True).stabilizers


class TestSingleLetter:
    def test_bes_exact(self):
        conv = to_conditional_additive(bes("0.1", "0.2"))
        assert conv.p_y == (F(4, 5), F(1, 5))
        assert conv.p_x_given_y[0][0] == F(7, 8)
        assert conv.p_x_given_y[1][0] == F(1, 8)
        assert (conv.p_x_given_y[0][1], conv.p_x_given_y[1][1]) == (F(1, 2), F(1, 2))

    @pytest.mark.parametrize("p, pe", [(F(1, 10), F(1, 5)), (F(1, 4), F(1, 3)), (F(0), F(1, 2))])
    def test_bes_closed_form(self, p, pe):
        conv = to_conditional_additive(bes(p, pe))
        assert conv.p_y == (1 - pe, pe)
        assert conv.p_x_given_y[0][0] == (1 - p - pe) / (1 - pe)
        assert sum(conv.p_y) == 1
        assert all(sum(conv.p_x_given_y[x][y] for x in range(2)) == 1 for y in range(2))

    def test_additive_is_noise(self):
        conv = to_conditional_additive(additive_channel(3, [F(1, 6), F(1, 3), F(1, 2)]))
        assert conv.p_y == (F(1),)
        assert [row[0] for row in conv.p_x_given_y] == [F(1, 6), F(1, 3), F(1, 2)]

    def test_float_path(self):
        conv = to_conditional_additive(RegularChannel(
            FiniteAbelianGroup.cyclic(2), ("0", "1", "?"), (0.7, 0.1, 0.2), ((0, 1, 2), (1, 0, 2))))
        assert conv.p_x_given_y[0][0] == pytest.approx(0.875, abs=1e-15)

    def test_uniform_base(self):
        conv = to_conditional_additive(bes(F(1, 3), F(1, 3)))
        assert conv.p_x_given_y[0][0] == conv.p_x_given_y[1][0] == F(1, 2)

    @pytest.mark.parametrize("ch", [bes(F(1, 10), F(1, 5)), bes(F(3, 10), F(1, 10)),
                                    additive_channel(3, [0.2, 0.3, 0.5])])
    def test_reverse_lex_invariance(self, ch):
        a = to_conditional_additive(ch)
        b = to_conditional_additive(ch, decompose(ch, reverse=True))
        assert a.p_y == b.p_y
        for y in range(len(a.p_y)):
            col = lambda c: sorted(float(row[y]) for row in c.p_x_given_y)
            assert col(a) == pytest.approx(col(b), abs=1e-15)

    def test_coset_constant(self):
        conv = to_conditional_additive(bes(F(1, 10), F(1, 5)))
        assert conv.p_x_given_y[0][1] == conv.p_x_given_y[1][1]


class TestFixedCodeError:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("ch", [bes(0.1, 0.2), bes(0.25, 0.4), bsc(0.2)])
    def test_error_preserved(self, ch, n):
        words = list(itertools.product(range(2), repeat=n))
        joint = to_conditional_additive(ch).joint().p
        rng = np.random.default_rng(n)
        codes = [list(c) for size in (2, 3) for c in itertools.combinations(words, size)]
        if len(codes) > 30:
            codes = [codes[i] for i in rng.choice(len(codes), 30, replace=False)]
        for code in codes:
            assert regular_code_error(ch, code, n) == pytest.approx(additive_code_error(joint, code, n), abs=1e-12)


class TestMarkovConversion:
    def test_bes_n4_vs_enumeration(self):
        W = bes_markov_erasure()
        Q = np.array([0.5, 0.2, 0.3])
        src = convert_markov_noise(bes(0.1, 0.2), W, Q)
        got = brute_joint(src, 4).joint()
        ref = enumerate_bes_markov(W, Q, 4)
        assert np.max(np.abs(got - ref)) <= 1e-12
        assert src.level >= Assumption.NON_HIDDEN

    def test_default_initial_is_stationary(self):
        W = bes_markov_erasure()
        src = convert_markov_noise(bes(0.1, 0.2), W)
        evals, evecs = np.linalg.eig(W)
        pi = np.real(evecs[:, np.argmin(np.abs(evals - 1))])
        pi /= pi.sum()
        ref = enumerate_bes_markov(W, pi, 2)
        assert np.max(np.abs(brute_joint(src, 2).joint() - ref)) <= 1e-12

    def test_iid_reduction(self):
        ch = bes(0.1, 0.2)
        src = iid_noise(ch)
        single = to_conditional_additive(ch).joint().p.ravel()
        M = np.asarray(src.W.matrix)
        assert np.allclose(M, single[:, None] * np.ones((1, M.shape[1])), atol=1e-15)
        assert np.allclose(src.initial, single, atol=1e-15)

    def test_bsc_iid_singleton(self):
        src = iid_noise(bsc(0.11))
        assert (src.nx, src.ny) == (2, 1)
        assert src.level == Assumption.STRONGLY_NON_HIDDEN

    def test_gilbert_elliott_construction(self):
        q0, q1, p0, p1 = 0.1, 0.1, 0.1, 0.4
        q, p = (q0, q1), (p0, p1)
        # outputs (bit, state) indexed 2*state + bit; inputs flip the bit
        G = FiniteAbelianGroup.cyclic(2)
        perms = ((0, 1, 2, 3), (1, 0, 3, 2))
        ch = RegularChannel(G, ("0a", "1a", "0b", "1b"), (0.25,) * 4, perms)
        Wt = np.zeros((4, 4))
        for s, bit, sp, bp in itertools.product(range(2), repeat=4):
            stay = 1 - q[sp] if s == sp else q[sp]
            Wt[2 * s + bit, 2 * sp + bp] = stay * (p[s] if bit else 1 - p[s])
        conv = convert_markov_noise(ch, Wt)
        direct = gilbert_elliott(q0, q1, p0, p1)
        assert np.allclose(np.asarray(conv.W.matrix), np.asarray(direct.W.matrix), atol=1e-15)
        assert conv.level == Assumption.STRONGLY_NON_HIDDEN

    def test_errors(self):
        with pytest.raises(NotIrreducible):
            convert_markov_noise(bes(0.1, 0.2), np.eye(3))
        with pytest.raises(ValidationError):
            convert_markov_noise(bes(0.1, 0.2), np.full((2, 2), 0.5))
        with pytest.raises(ValidationError):
            convert_markov_noise(bes(0.1, 0.2), bes_markov_erasure(), [0.5, 0.5])


class TestPresets:
    def test_ge(self):
        src = presets("gilbert-elliott", "0.1,0.1,0.1,0.4")
        assert isinstance(src, MarkovSource)
        assert src.level == Assumption.STRONGLY_NON_HIDDEN
        assert np.allclose(np.asarray(src.W.matrix), np.asarray(presets("gilbert_elliott").W.matrix))

    def test_bes_and_bsc(self):
        ch = presets("bes", [F(1, 10), F(1, 5)])
        assert isinstance(ch, RegularChannel) and ch.nb == 3 and ch.exact
        assert presets("BSC", "0.11").base == (F(89, 100), F(11, 100))
        assert decompose(presets("bsc")).ny == 1

    def test_symmetric_additive(self):
        src = presets("symmetric_additive", [[[0.9, 0.2], [0.1, 0.8]], [0.7, 0.3]])
        assert src.level >= Assumption.NON_HIDDEN
        assert src is not None and symmetric_additive([[0.9, 0.2], [0.1, 0.8]], [0.7, 0.3]).nx == 2

    @pytest.mark.parametrize("name, params", [("bes", "0.6,0.6"), ("bsc", "1.5"),
                                              ("gilbert_elliott", "0,0.1,0.1,0.4"),
                                              ("gilbert_elliott", "0.1,0.1")])
    def test_bad_params(self, name, params):
        with pytest.raises(ValidationError):
            presets(name, params)

    def test_unknown(self):
        with pytest.raises(UnknownPreset):
            presets("erasure_plus")
        with pytest.raises(KeyError):
            presets("awgn")

    @pytest.mark.parametrize("name", ["bes", "bsc"])
    def test_presets_are_regular(self, name):
        ch = presets(name)
        ch._check_regular()
        for orb, stb in zip(decompose(ch).orbits, decompose(ch).stabilizers):
            assert len(orb) * len(stb) == ch.group.order


class TestJson:
    def test_regular_round_trip(self):
        ch = bes("0.1", "0.2")
        obj = json.loads(json.dumps(regular_channel_to_json(ch)))
        back = regular_channel_from_json(obj)
        assert back == ch and back.exact

    def test_regular_missing_field(self):
        with pytest.raises(ValidationError):
            regular_channel_from_json({"group": [2]})

    def test_markov_json(self, ge):
        src = markov_source_from_json(json.dumps({"preset": "gilbert_elliott", "params": "0.1,0.1,0.1,0.4"}))
        assert np.allclose(np.asarray(src.W.matrix), np.asarray(ge.W.matrix))
        T = np.full((2, 1, 2, 1), 0.5)
        assert markov_source_from_json({"tensor": T.tolist()}).nx == 2
        with pytest.raises(ValidationError):
            markov_source_from_json({"preset": "bes"})
        with pytest.raises(ValidationError):
            markov_source_from_json({"rows": []})
