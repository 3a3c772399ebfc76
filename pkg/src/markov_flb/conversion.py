"""Regular channels and their conversion to conditional additive channels.

A regular channel on input group ``A`` and output alphabet ``B`` is
``P_{B|A}(b|a) = P(pi_a(b))`` for a permutation representation
``a -> pi_a``.  The conversion labels each output by its orbit
representative ``y`` and an element of ``A`` modulo the stabilizer of the
orbit base point, spreading the mass uniformly over the stabilizer.

Exact rational arithmetic is used when the base distribution is given as
:class:`fractions.Fraction` values.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import NotIrreducible, NotRegular, UnknownPreset, ValidationError
from .markov import as_stochastic, is_irreducible
from .singleshot import JointDistribution
from .transition import MarkovSource

Element = tuple


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class FiniteAbelianGroup:
    """Direct product ``Z_{q_1} x ... x Z_{q_m}`` with tuple elements."""

    moduli: tuple

    def __post_init__(self):
        mods = tuple(int(q) for q in self.moduli)
        if not mods or any(q < 1 for q in mods):
            raise ValidationError("moduli must be positive integers")
        object.__setattr__(self, "moduli", mods)

    @classmethod
    def cyclic(cls, q: int) -> "FiniteAbelianGroup":
        return cls((q,))

    @property
    def order(self) -> int:
        return int(np.prod(self.moduli))

    @property
    def zero(self) -> Element:
        return (0,) * len(self.moduli)

    def elements(self) -> list[Element]:
        """All elements in lexicographic order."""
        return list(itertools.product(*(range(q) for q in self.moduli)))

    def index(self, a: Element) -> int:
        i = 0
        for ai, q in zip(a, self.moduli):
            i = i * q + ai % q
        return i

    def add(self, a: Element, b: Element) -> Element:
        return tuple((x + y) % q for x, y, q in zip(a, b, self.moduli))

    def neg(self, a: Element) -> Element:
        return tuple((-x) % q for x, q in zip(a, self.moduli))

    def sub(self, a: Element, b: Element) -> Element:
        return self.add(a, self.neg(b))

    def check_axioms(self) -> bool:
        """Exhaustive group-axiom check (intended for ``|A| <= 64``)."""
        els = self.elements()
        z = self.zero
        for a in els:
            if self.add(a, z) != a or self.add(a, self.neg(a)) != z:
                return False
            for b in els:
                if self.add(a, b) != self.add(b, a):
                    return False
                for c in els:
                    if self.add(self.add(a, b), c) != self.add(a, self.add(b, c)):
                        return False
        return True


# ---------------------------------------------------------------------------
# regular channels


def _as_weights(values) -> tuple:
    vals = tuple(values)
    if all(isinstance(v, (Fraction, int)) for v in vals):
        vals = tuple(Fraction(v) for v in vals)
    else:
        vals = tuple(float(v) for v in vals)
    if any(v < 0 for v in vals):
        raise ValidationError("probabilities must be nonnegative")
    total = sum(vals)
    if (isinstance(total, Fraction) and total != 1) or abs(float(total) - 1) > 1e-12:
        raise ValidationError(f"base distribution sums to {total}")
    return vals


@dataclass(frozen=True)
class RegularChannel:
    """Regular channel ``P_{B|A}(b|a) = base[pi[a][b]]``.

    Parameters
    ----------
    group : FiniteAbelianGroup
        Input alphabet ``A``.
    outputs : sequence of str
        Output labels ``B``.
    base : sequence
        ``P_X~`` on ``B`` (floats or Fractions).
    perms : array_like, shape (|A|, |B|)
        ``perms[index(a)][b] = pi_a(b)`` as output indices.
    """

    group: FiniteAbelianGroup
    outputs: tuple
    base: tuple
    perms: tuple

    def __post_init__(self):
        outs = tuple(str(o) for o in self.outputs)
        if len(set(outs)) != len(outs):
            raise ValidationError("output labels must be distinct")
        object.__setattr__(self, "outputs", outs)
        base = _as_weights(self.base)
        if len(base) != len(outs):
            raise ValidationError("base distribution length must equal |B|")
        object.__setattr__(self, "base", base)
        perms = tuple(tuple(int(v) for v in row) for row in self.perms)
        object.__setattr__(self, "perms", perms)
        self._check_regular()

    @property
    def nb(self) -> int:
        return len(self.outputs)

    @property
    def exact(self) -> bool:
        return isinstance(self.base[0], Fraction)

    def pi(self, a: Element) -> tuple:
        return self.perms[self.group.index(a)]

    def _check_regular(self) -> None:
        G, nb = self.group, self.nb
        if len(self.perms) != G.order:
            raise NotRegular("need one permutation per group element")
        for row in self.perms:
            if sorted(row) != list(range(nb)):
                raise NotRegular("pi_a is not a bijection of the output alphabet")
        if self.pi(G.zero) != tuple(range(nb)):
            raise NotRegular("pi_0 must be the identity")
        for a in G.elements():
            pa = self.pi(a)
            for b in G.elements():
                pb = self.pi(b)
                if self.pi(G.add(a, b)) != tuple(pa[pb[x]] for x in range(nb)):
                    raise NotRegular("a -> pi_a is not a homomorphism")

    def law(self) -> np.ndarray:
        """``P[b, a] = P_X~(pi_a(b))`` as floats."""
        base = np.array([float(v) for v in self.base])
        return np.array([[base[self.pi(a)[b]] for a in self.group.elements()]
                         for b in range(self.nb)])


# ---------------------------------------------------------------------------
# orbit decomposition


@dataclass(frozen=True)
class OrbitDecomposition:
    """Orbits of ``B`` under ``{pi_a}`` with lexicographic choices.

    Attributes
    ----------
    representatives : tuple of int
        Smallest output index of each orbit, ascending; orbit ``y`` is the
        ``y``-th entry.
    orbits : tuple of tuple of int
    orbit_of : tuple of int
        ``varpi``: output index to orbit index.
    stabilizers : tuple of tuple of Element
        ``Stb(0_y)``.
    coset_rep : tuple of dict
        ``vartheta_y``: element to the smallest member of its coset.
    iota : tuple of dict
        ``iota_y``: output index in ``Orb(y)`` to coset representative.
    """

    group: FiniteAbelianGroup
    representatives: tuple
    orbits: tuple
    orbit_of: tuple
    base_points: tuple
    stabilizers: tuple
    coset_rep: tuple
    iota: tuple

    @property
    def ny(self) -> int:
        return len(self.orbits)

    def iota_inv(self, y: int, abar: Element) -> int:
        """``pi_{-abar}(0_y)``."""
        for b, a in self.iota[y].items():
            if a == abar:
                return b
        raise NotRegular("element is not a coset representative")


def decompose(ch: RegularChannel, reverse: bool = False) -> OrbitDecomposition:
    """Orbit/stabilizer decomposition of a regular channel.

    ``reverse=True`` uses reverse-lexicographic choices of base points and
    coset representatives; any valid choice yields the same converted law up
    to relabeling.
    """
    G = ch.group
    els = G.elements()
    pick = max if reverse else min
    seen: dict[int, int] = {}
    orbits = []
    for b in range(ch.nb):
        if b in seen:
            continue
        orb = tuple(sorted({ch.pi(a)[b] for a in els}))
        for c in orb:
            seen[c] = len(orbits)
        orbits.append(orb)
    reps = tuple(min(o) for o in orbits)
    base_points = tuple(pick(o) for o in orbits)
    stabs, cosets, iotas = [], [], []
    for orb, z in zip(orbits, base_points):
        stb = tuple(a for a in els if ch.pi(a)[z] == z)
        if len(orb) * len(stb) != G.order:
            raise NotRegular("orbit-stabilizer identity fails")
        theta = {a: pick(G.add(a, s) for s in stb) for a in els}
        iota = {}
        for abar in sorted(set(theta.values())):
            b = ch.pi(G.neg(abar))[z]
            if b in iota:
                raise NotRegular("iota is not injective")
            iota[b] = abar
        if set(iota) != set(orb):
            raise NotRegular("iota is not onto the orbit")
        stabs.append(stb)
        cosets.append(theta)
        iotas.append(iota)
    return OrbitDecomposition(G, reps, tuple(orbits), tuple(seen[b] for b in range(ch.nb)),
                              base_points, tuple(stabs), tuple(cosets), tuple(iotas))


# ---------------------------------------------------------------------------
# conversion


@dataclass(frozen=True)
class ConditionalAdditiveChannel:
    """Noise law ``(X, Y)`` of the converted channel.

    ``p_y[y]`` and ``p_x_given_y[x][y]`` hold Fractions when the source
    channel was exact, floats otherwise.  ``X`` is indexed by group element
    index, ``Y`` by orbit.
    """

    group: FiniteAbelianGroup
    p_y: tuple
    p_x_given_y: tuple
    decomposition: OrbitDecomposition

    def joint(self) -> JointDistribution:
        px = np.array([[float(v) for v in row] for row in self.p_x_given_y])
        py = np.array([float(v) for v in self.p_y])
        p = px * py[None, :]
        return JointDistribution(p / p.sum())


def _letter_mass(dec: OrbitDecomposition, weights: Sequence, y: int, x: Element):
    """``weights(iota_y^{-1}(vartheta_y(x))) / |Stb(0_y)|``."""
    b = dec.iota_inv(y, dec.coset_rep[y][x])
    w = weights[b]
    size = len(dec.stabilizers[y])
    return w / size if isinstance(w, Fraction) else w / float(size)


def to_conditional_additive(ch: RegularChannel, dec: Optional[OrbitDecomposition] = None
                            ) -> ConditionalAdditiveChannel:
    """Single-letter conversion ``P_Y(y) = P(Orb(y))`` and ``P_{X|Y}``."""
    dec = decompose(ch) if dec is None else dec
    els = ch.group.elements()
    zero = Fraction(0) if ch.exact else 0.0
    p_y = tuple(sum((ch.base[b] for b in orb), zero) for orb in dec.orbits)
    cols = []
    for y in range(dec.ny):
        col = []
        for x in els:
            m = _letter_mass(dec, ch.base, y, x)
            col.append(m / p_y[y] if p_y[y] != 0 else zero)
        cols.append(col)
    table = tuple(tuple(cols[y][i] for y in range(dec.ny)) for i in range(len(els)))
    return ConditionalAdditiveChannel(ch.group, p_y, table, dec)


def convert_markov_noise(ch: RegularChannel, W_tilde, Q=None, name: str = "",
                         dec: Optional[OrbitDecomposition] = None) -> MarkovSource:
    """Pair chain of the converted channel for Markov noise on ``B``.

    Parameters
    ----------
    ch : RegularChannel
        Supplies the group action; its base distribution is not used.
    W_tilde : array_like, shape (|B|, |B|)
        Column-stochastic ``W~[b, b']``.
    Q : array_like, optional
        Initial law on ``B``; defaults to the stationary law of ``W~``.
    """
    Wt = as_stochastic(W_tilde)
    if Wt.shape != (ch.nb, ch.nb):
        raise ValidationError("noise transition matrix must be |B| x |B|")
    if not is_irreducible(Wt > 0):
        raise NotIrreducible("noise transition matrix is not irreducible")
    dec = decompose(ch) if dec is None else dec
    els = ch.group.elements()
    nx, ny = len(els), dec.ny
    lift = np.zeros((nx, ny), dtype=int)
    scale = np.zeros((nx, ny))
    for i, x in enumerate(els):
        for y in range(ny):
            lift[i, y] = dec.iota_inv(y, dec.coset_rep[y][x])
            scale[i, y] = 1.0 / len(dec.stabilizers[y])
    T = Wt[lift[:, :, None, None], lift[None, None, :, :]] * scale[:, :, None, None]
    init = None
    if Q is not None:
        q = np.asarray(Q, dtype=float)
        if q.shape != (ch.nb,):
            raise ValidationError("initial law must have length |B|")
        init = (q[lift] * scale).ravel()
    return MarkovSource.from_tensor(T, init, name)


def iid_noise(ch: RegularChannel, name: str = "") -> MarkovSource:
    """Memoryless noise ``W~(b|b') = P_X~(b)`` as a rank-one pair chain."""
    base = np.array([float(v) for v in ch.base])
    return convert_markov_noise(ch, np.repeat(base[:, None], ch.nb, axis=1), base, name)


# ---------------------------------------------------------------------------
# presets


def _rational(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    return Fraction(str(v))


def additive_channel(q: int, noise, labels=None) -> RegularChannel:
    """Additive channel on ``Z_q`` with ``pi_a(b) = b - a``."""
    G = FiniteAbelianGroup.cyclic(q)
    perms = [[(b - a[0]) % q for b in range(q)] for a in G.elements()]
    labels = [str(b) for b in range(q)] if labels is None else labels
    return RegularChannel(G, tuple(labels), tuple(noise), tuple(map(tuple, perms)))


def bsc(p) -> RegularChannel:
    """Binary symmetric channel as an additive channel on ``Z_2``."""
    p = _rational(p)
    if not 0 <= p <= 1:
        raise ValidationError("crossover probability must lie in [0, 1]")
    return additive_channel(2, (1 - p, p))


def bes(p, p_erase) -> RegularChannel:
    """Binary erasure symmetric channel with outputs ``0, 1, ?``."""
    p, pe = _rational(p), _rational(p_erase)
    if not (p >= 0 and pe >= 0 and p + pe <= 1):
        raise ValidationError("need p, p' >= 0 and p + p' <= 1")
    G = FiniteAbelianGroup.cyclic(2)
    perms = ((0, 1, 2), (1, 0, 2))
    return RegularChannel(G, ("0", "1", "?"), (1 - p - pe, p, pe), perms)


def gilbert_elliott(q0: float, q1: float, p0: float, p1: float) -> MarkovSource:
    """Gilbert-Elliott noise with receiver-side state information.

    State flips with probability ``q_{y'}``; given the new state ``y`` the
    noise bit is ``1`` with probability ``p_y``.
    """
    for v in (q0, q1, p0, p1):
        if not 0 < v < 1:
            raise ValidationError("Gilbert-Elliott parameters must lie in (0, 1)")
    q, p = (q0, q1), (p0, p1)
    T = np.zeros((2, 2, 2, 2))
    for y, yp in itertools.product(range(2), repeat=2):
        wy = 1 - q[yp] if y == yp else q[yp]
        T[0, y, :, yp] = wy * (1 - p[y])
        T[1, y, :, yp] = wy * p[y]
    return MarkovSource.from_tensor(T, name=f"gilbert_elliott({q0},{q1},{p0},{p1})")


def symmetric_additive(Q, P_Z, pi=None) -> MarkovSource:
    """``W(x, y|x', y') = Q(y|y') P_Z(pi_{z'}(z))`` with ``z = x - y`` on ``Z_m``.

    Parameters
    ----------
    Q : array_like, shape (m, m)
        Column-stochastic ``Q[y, y']``.
    P_Z : array_like, shape (m,)
    pi : array_like, shape (m, m), optional
        ``pi[z'][z]``; defaults to ``z - z'``.
    """
    Qm = as_stochastic(Q)
    pz = np.asarray(P_Z, dtype=float)
    m = Qm.shape[0]
    if pz.shape != (m,) or abs(pz.sum() - 1) > 1e-12 or np.any(pz < 0):
        raise ValidationError("P_Z must be a distribution of length m")
    if pi is None:
        pi = [[(z - zp) % m for z in range(m)] for zp in range(m)]
    pi = np.asarray(pi, dtype=int)
    if pi.shape != (m, m) or any(sorted(row) != list(range(m)) for row in pi.tolist()):
        raise ValidationError("pi must be a table of permutations")
    T = np.zeros((m, m, m, m))
    for x, y, xp, yp in itertools.product(range(m), repeat=4):
        T[x, y, xp, yp] = Qm[y, yp] * pz[pi[(xp - yp) % m, (x - y) % m]]
    return MarkovSource.from_tensor(T, name="symmetric_additive")


def _parse_params(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()] if text else []


PRESETS = ("bes", "bsc", "gilbert_elliott", "symmetric_additive")


def presets(name: str, params: Union[str, Sequence, None] = None):
    """Build a named preset.

    ``name`` accepts ``-`` or ``_``; ``params`` is a comma string or a
    sequence.  ``symmetric_additive`` expects ``(Q, P_Z[, pi])`` arrays.
    """
    key = name.strip().lower().replace("-", "_")
    if isinstance(params, str):
        params = _parse_params(params)
    params = list(params or [])
    try:
        if key == "bes":
            return bes(*(params or ["0.1", "0.2"]))
        if key == "bsc":
            return bsc(*(params or ["0.11"]))
        if key == "gilbert_elliott":
            vals = [float(v) for v in params] or [0.1, 0.1, 0.1, 0.4]
            return gilbert_elliott(*vals)
        if key == "symmetric_additive":
            return symmetric_additive(*params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for preset {name!r}: {exc}") from None
    raise UnknownPreset(name)


# ---------------------------------------------------------------------------
# JSON


def regular_channel_from_json(obj) -> RegularChannel:
    """Load ``{"group": [q...], "outputs": [...], "base": [...], "perms": [[...]]}``.

    Base entries given as strings (e.g. ``"1/10"``) are read exactly.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        G = FiniteAbelianGroup(tuple(obj["group"]))
        base = [Fraction(v) if isinstance(v, str) else v for v in obj["base"]]
        return RegularChannel(G, tuple(obj["outputs"]), tuple(base), tuple(map(tuple, obj["perms"])))
    except KeyError as exc:
        raise ValidationError(f"missing field {exc}") from None


def regular_channel_to_json(ch: RegularChannel) -> dict:
    base = [str(v) if isinstance(v, Fraction) else v for v in ch.base]
    return dict(group=list(ch.group.moduli), outputs=list(ch.outputs), base=base,
                perms=[list(r) for r in ch.perms])


def markov_source_from_json(obj) -> MarkovSource:
    """Load ``{"tensor": T[x][y][x'][y'], "initial": [...]}`` or ``{"matrix", "nx", "ny"}``."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "preset" in obj:
        src = presets(obj["preset"], obj.get("params"))
        if not isinstance(src, MarkovSource):
            raise ValidationError("preset is not a Markov source")
        return src
    init = obj.get("initial")
    if "tensor" in obj:
        return MarkovSource.from_tensor(np.asarray(obj["tensor"], dtype=float), init, obj.get("name", ""))
    if "matrix" in obj:
        from .markov import PairTransitionMatrix

        W = PairTransitionMatrix(np.asarray(obj["matrix"], dtype=float), int(obj["nx"]), int(obj["ny"]))
        return MarkovSource(W, init, obj.get("name", ""))
    raise ValidationError("Markov source JSON needs 'tensor', 'matrix' or 'preset'")

