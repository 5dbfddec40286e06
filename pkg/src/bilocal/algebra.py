"""Words in the POVM generators of n commuting copies of the bilocal algebra.

Letters from different parties commute, and so do letters from different
copies. Within one (party, copy) block nothing commutes: POVM elements are
not assumed projective and completeness is left to the relaxation. A
canonical word is therefore the stable sort of its letters by (party, copy).
"""
from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence
from operator import itemgetter
from typing import NamedTuple

import numpy as np

from .scenario import PARTIES, Scenario


class AlgebraError(ValueError):
    pass


class Letter(NamedTuple):
    """Generator ``P^{(copy)}_{outcome|setting}``; party is 0, 1, 2 for A, B, C.

    Field order puts the commutation key (party, copy) first.
    """
    party: int
    copy: int
    setting: int
    outcome: int

    def __str__(self):
        return f"{PARTIES[self.party]}({self.copy})[{self.outcome}|{self.setting}]"


Monomial = tuple  # tuple[Letter, ...]; the empty tuple is the identity

IDENTITY: Monomial = ()

_block_key = itemgetter(0, 1)


def check_letter(letter: Letter, scenario: Scenario, n: int) -> None:
    p, i, x, a = letter
    if not 0 <= p < 3:
        raise AlgebraError(f"bad party index in {letter!r}")
    if not 1 <= i <= n:
        raise AlgebraError(f"copy {i} out of range 1..{n} in {letter}")
    if not 0 <= x < scenario.settings[p]:
        raise AlgebraError(f"setting {x} out of range for party {PARTIES[p]} in {letter}")
    if not 0 <= a < scenario.outcomes[p]:
        raise AlgebraError(f"outcome {a} out of range for party {PARTIES[p]} in {letter}")


def canonicalize(word: Iterable[Letter], scenario: Scenario | None = None, n: int | None = None) -> Monomial:
    """Stable sort by (party, copy). Bounds are checked when a scenario is given."""
    word = tuple(word)
    if scenario is not None:
        for letter in word:
            check_letter(letter, scenario, n if n is not None else max((l.copy for l in word), default=1))
    return tuple(sorted(word, key=_block_key))


def multiply(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    return tuple(sorted(m1 + m2, key=_block_key))


def adjoint(m: Monomial) -> Monomial:
    """Generators are Hermitian, so the adjoint reverses the word."""
    return tuple(sorted(m[::-1], key=_block_key))


def is_canonical(m: Monomial) -> bool:
    return all(_block_key(a) <= _block_key(b) for a, b in zip(m, m[1:]))


def copies_of(m: Monomial) -> set[int]:
    return {l.copy for l in m}


def parties_of(m: Monomial) -> set[int]:
    return {l.party for l in m}


def format_monomial(m: Monomial) -> str:
    return ".".join(str(l) for l in m) if m else "1"


_LETTER_RE = re.compile(r"([ABC])\((\d+)\)\[(\d+)\|(\d+)\]$")


def parse_monomial(text: str) -> Monomial:
    text = text.strip()
    if text == "1":
        return IDENTITY
    letters = []
    for part in text.split("."):
        match = _LETTER_RE.match(part)
        if match is None:
            raise AlgebraError(f"cannot parse letter {part!r}")
        party, copy, outcome, setting = match.groups()
        letters.append(Letter(PARTIES.index(party), int(copy), int(setting), int(outcome)))
    return canonicalize(letters)


def monomial_sort_key(m: Monomial):
    """Graded by length, then lexicographic on the display form."""
    return (len(m), format_monomial(m))


class Polynomial:
    """Real linear combination of canonical monomials."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        self.terms: dict[Monomial, float] = {}
        if terms:
            for m, c in terms.items():
                self._add(canonicalize(m), float(c))

    def _add(self, m: Monomial, c: float) -> None:
        v = self.terms.get(m, 0.0) + c
        if v == 0.0:
            self.terms.pop(m, None)
        else:
            self.terms[m] = v

    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls({IDENTITY: c})

    @classmethod
    def monomial(cls, m: Monomial, c: float = 1.0) -> "Polynomial":
        return cls({m: c})

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return poly_combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return poly_combine([(1.0, self), (-1.0, other)])

    def __rmul__(self, c: float) -> "Polynomial":
        return poly_combine([(c, self)])

    def coefficient(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    def adjoint(self) -> "Polynomial":
        return Polynomial({adjoint(m): c for m, c in self.terms.items()})

    def evaluate(self, moments: Mapping[Monomial, float] | callable) -> float:
        get = moments if callable(moments) else moments.__getitem__
        return sum(c * get(m) for m, c in self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        body = " + ".join(f"{c:g}*{format_monomial(m)}" for m, c in self.terms.items())
        return f"Polynomial({body})"


def poly_combine(ps: Iterable[tuple[float, Polynomial]]) -> Polynomial:
    out = Polynomial()
    for coef, p in ps:
        for m, c in p.terms.items():
            out._add(m, coef * c)
    return out


def evaluate_on_matrices(m: Sequence[Letter], assignment: Mapping[Letter, np.ndarray],
                         dim: int | None = None) -> np.ndarray:
    """Ordered product of the assigned matrices, letters taken as given."""
    if dim is None:
        if not assignment:
            raise AlgebraError("dimension needed for an empty assignment")
        dim = next(iter(assignment.values())).shape[0]
    out = np.eye(dim, dtype=np.result_type(*assignment.values()) if assignment else float)
    for letter in m:
        mat = assignment[letter]
        if mat.shape != (dim, dim):
            raise AlgebraError(f"matrix for {letter} has shape {mat.shape}, expected {(dim, dim)}")
        out = out @ mat
    return out


def kronecker_assignment(letters: Iterable[Letter], rng: np.random.Generator,
                         factor_dim: int = 2) -> tuple[dict[Letter, np.ndarray], int]:
    """Random real matrices where each (party, copy) class owns one tensor factor.

    Matrices of different classes then commute while matrices within one
    class generically do not.
    """
    letters = list(letters)
    classes = sorted({_block_key(l) for l in letters})
    slot = {cls: i for i, cls in enumerate(classes)}
    total = factor_dim ** len(classes)
    out = {}
    for l in letters:
        local = rng.standard_normal((factor_dim, factor_dim))
        i = slot[_block_key(l)]
        left = np.eye(factor_dim ** i)
        right = np.eye(factor_dim ** (len(classes) - i - 1))
        out[l] = np.kron(np.kron(left, local), right)
    return out, total
