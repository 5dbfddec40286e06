"""Copies of the generators, the copy-permutation action and polarized operators."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .algebra import (IDENTITY, AlgebraError, Letter, Monomial, Polynomial, canonicalize,
                      multiply, poly_combine)
from .scenario import PARTIES, Distribution, Scenario

PARTY_A, PARTY_B, PARTY_C = 0, 1, 2


@dataclass(frozen=True)
class CopyPermutation:
    """Bijection on copies 1..n; ``image[i - 1]`` is the image of copy i."""
    image: tuple[int, ...]

    def __post_init__(self):
        image = tuple(int(i) for i in self.image)
        if sorted(image) != list(range(1, len(image) + 1)):
            raise AlgebraError(f"{image} is not a permutation of 1..{len(image)}")
        object.__setattr__(self, "image", image)

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i - 1]

    @classmethod
    def identity(cls, n: int) -> "CopyPermutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "CopyPermutation":
        img = list(range(1, n + 1))
        img[i - 1], img[j - 1] = j, i
        return cls(tuple(img))

    @classmethod
    def cycle(cls, n: int, *cyc: int) -> "CopyPermutation":
        img = list(range(1, n + 1))
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            img[a - 1] = b
        return cls(tuple(img))

    def compose(self, other: "CopyPermutation") -> "CopyPermutation":
        """``self ∘ other``: apply ``other`` first."""
        return CopyPermutation(tuple(self(other(i)) for i in range(1, self.n + 1)))


def adjacent_transpositions(n: int) -> list[CopyPermutation]:
    return [CopyPermutation.transposition(n, i, i + 1) for i in range(1, n)]


def build_generators(scenario: Scenario, n: int) -> list[Letter]:
    if n < 1:
        raise ValueError("copy count n must be >= 1")
    out = []
    for party in range(3):
        for copy in range(1, n + 1):
            for x in range(scenario.settings[party]):
                for a in range(scenario.outcomes[party]):
                    out.append(Letter(party, copy, x, a))
    return out


def _relabel(m: Monomial, perm: CopyPermutation, parties=(0, 1, 2)) -> Monomial:
    out = []
    n = perm.n
    for l in m:
        if l.copy > n:
            raise AlgebraError(f"copy {l.copy} of {l} exceeds permutation size {n}")
        out.append(Letter(l.party, perm.image[l.copy - 1], l.setting, l.outcome) if l.party in parties else l)
    return canonicalize(out)


def apply_permutation(m: Monomial, perm: CopyPermutation) -> Monomial:
    return _relabel(m, perm)


def apply_party_restricted_permutation(m: Monomial, perm: CopyPermutation, party: int | str) -> Monomial:
    """Permute the copies of one party's letters only (A/C words only)."""
    if isinstance(party, str):
        party = PARTIES.index(party)
    if any(l.party == PARTY_B for l in m):
        raise AlgebraError("party-restricted permutations are only defined on A/C words")
    return _relabel(m, perm, parties=(party,))


def with_copy(word: Monomial, copy: int) -> Monomial:
    return tuple(Letter(l.party, copy, l.setting, l.outcome) for l in word)


@dataclass(frozen=True)
class PolarizationOperator:
    poly: Polynomial
    kind: str  # "objective_y0" or "factorization_yac"
    provenance: tuple = field(default=())
    # products that make up each monomial, in the order they were multiplied
    factors: dict = field(default_factory=dict, compare=False, repr=False)


def build_y0(d: Distribution) -> PolarizationOperator:
    """Two-copy operator whose product-state value is sum (sigma(ABC) - p)^2."""
    scen = d.scenario
    mA, mB, mC = scen.settings
    kA, kB, kC = scen.outcomes
    parts = []
    factors = {}
    for x, y, z in itertools.product(range(mA), range(mB), range(mC)):
        for a, b, c in itertools.product(range(kA), range(kB), range(kC)):
            p = float(d.p[a, b, c, x, y, z])
            cell = (Letter(0, 1, x, a), Letter(1, 1, y, b), Letter(2, 1, z, c))
            cell2 = with_copy(cell, 2)
            both = multiply(cell, cell2)
            factors[both] = (cell, cell2)
            factors[cell] = (cell,)
            parts.append((1.0, Polynomial.monomial(both)))
            parts.append((-2.0 * p, Polynomial.monomial(cell)))
            parts.append((p * p, Polynomial.constant(1.0)))
    return PolarizationOperator(poly_combine(parts), "objective_y0", (), factors)


def yac_patterns(a: Monomial, c: Monomial) -> list[tuple[float, Monomial, Monomial]]:
    """(coefficient, left half, right half) for a1c1a2c2 - 2 a1c1a2c3 + a1c2a3c4."""
    def half(ia, ic):
        return multiply(with_copy(a, ia), with_copy(c, ic))
    return [(1.0, half(1, 1), half(2, 2)),
            (-2.0, half(1, 1), half(2, 3)),
            (1.0, half(1, 2), half(3, 4))]


def build_yac(a: Monomial, c: Monomial) -> PolarizationOperator:
    """Four-copy operator whose product-state value is (sigma(ac) - sigma(a)sigma(c))^2."""
    a, c = tuple(a), tuple(c)
    if not a or not c:
        raise AlgebraError("factorization words must be nonempty")
    if any(l.party != PARTY_A for l in a):
        raise AlgebraError("the first factorization word may contain only A letters")
    if any(l.party != PARTY_C for l in c):
        raise AlgebraError("the second factorization word may contain only C letters")
    parts, factors = [], {}
    for coef, left, right in yac_patterns(a, c):
        m = multiply(left, right)
        factors[m] = (left, right)
        parts.append((coef, Polynomial.monomial(m)))
    return PolarizationOperator(poly_combine(parts), "factorization_yac", (a, c), factors)


def party_words(scenario: Scenario, party: int, depth: int, copy: int = 1) -> list[Monomial]:
    """All words of length 1..depth in one party's letters on a single copy."""
    letters = [Letter(party, copy, x, o)
               for x in range(scenario.settings[party]) for o in range(scenario.outcomes[party])]
    out = []
    for length in range(1, depth + 1):
        out.extend(itertools.product(letters, repeat=length))
    return out


def enumerate_fact_words(scenario: Scenario, depth: int) -> list[tuple[Monomial, Monomial]]:
    if depth < 1:
        raise ValueError("factorization depth must be >= 1")
    aw = party_words(scenario, PARTY_A, depth)
    cw = party_words(scenario, PARTY_C, depth)
    return [(a, c) for a in aw for c in cw]


def polarization_monomials(d: Distribution, pairs) -> list[Monomial]:
    ms = set(build_y0(d).poly.terms)
    for a, c in pairs:
        ms.update(build_yac(a, c).poly.terms)
    ms.discard(IDENTITY)
    return sorted(ms)
