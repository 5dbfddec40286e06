"""Moment relaxations of the polarization and inflation hierarchies.

A level is fixed by the copy count ``n`` and the word length ``k``. The
moment matrix is indexed by all canonical words of length <= k (plus the
augmentation words that make the objective and the polarized constraints
representable). Moments are identified along copy-permutation orbits,
along party-restricted orbits for the inflation hierarchy, and with their
adjoints. Completeness of every POVM enters as linear equalities, which are
eliminated before the problem is handed to the SDP solver.

Because completeness makes every word containing the last outcome of some
measurement a linear combination of words without it, the moment matrix
has a kernel that is known in advance. The LMI handed to the solver
therefore uses only rows labelled by words free of last outcomes; on the
equality-constrained subspace this is equivalent to positivity of the full
matrix and it leaves the solver a strictly feasible interior.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from operator import itemgetter

import numpy as np

from .algebra import (IDENTITY, Letter, Monomial, adjoint, canonicalize,
                      format_monomial, monomial_sort_key, multiply)
from .inflation import (PARTY_B, build_generators, build_y0, build_yac,
                        enumerate_fact_words, with_copy, yac_patterns)
from .scenario import Distribution, Scenario
from .sdp import CertificationError, SDPProblem, SDPSolution, SolverOptions, certify, solve

log = logging.getLogger(__name__)

POLARIZATION = "polarization"
INFLATION = "inflation"
HIERARCHIES = (POLARIZATION, INFLATION)

DEFAULT_CAP = 2000
ELIM_DROP = 1e-13
PIVOT_THRESHOLD = 0.1

_block_key = itemgetter(0, 1)


class RelaxationError(ValueError):
    pass


class IndexSetTooLarge(RelaxationError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"moment index set needs at least {count} words, cap is {cap}")
        self.count = count
        self.cap = cap


class InconsistentEqualities(RuntimeError):
    """Linear equalities without solution; always an assembly bug."""


@dataclass(frozen=True)
class RelaxationParams:
    hierarchy: str
    n: int
    k: int = 2
    d: int | None = None
    augment: bool = True
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.hierarchy not in HIERARCHIES:
            raise RelaxationError(f"unknown hierarchy {self.hierarchy!r}")
        if self.hierarchy == POLARIZATION and self.n < 4:
            raise RelaxationError("the polarization hierarchy needs n >= 4")
        if self.hierarchy == INFLATION and self.n < 2:
            raise RelaxationError("the inflation hierarchy needs n >= 2")
        if self.k < 1:
            raise RelaxationError("word length k must be >= 1")
        if self.d is None:
            object.__setattr__(self, "d", max(1, self.k - 1))
        if self.d < 1:
            raise RelaxationError("factorization depth d must be >= 1")


def is_last_outcome(letter: Letter, scenario: Scenario) -> bool:
    return letter.outcome == scenario.outcomes[letter.party] - 1


def count_last(m: Monomial, scenario: Scenario) -> int:
    return sum(1 for l in m if is_last_outcome(l, scenario))


# ---------------------------------------------------------------- index sets

@dataclass(frozen=True, eq=False)
class MomentIndexSet:
    labels: tuple          # all words, graded then lexicographic; starts with identity
    reduced: tuple         # words free of last outcomes: rows of the solver block
    localizing: tuple      # reduced words of length <= k - 1
    augmented: tuple       # words added beyond length k
    k: int

    def __len__(self):
        return len(self.labels)

    def __contains__(self, m):
        return m in self._set

    @property
    def _set(self):
        s = self.__dict__.get("_cached_set")
        if s is None:
            s = frozenset(self.labels)
            object.__setattr__(self, "_cached_set", s)
        return s


def words_up_to(letters: list[Letter], k: int, cap: int | None = None) -> set:
    words = {IDENTITY}
    layer = {IDENTITY}
    for _ in range(k):
        nxt = set()
        for w in layer:
            for g in letters:
                nxt.add(multiply(w, (g,)))
        nxt -= words
        words |= nxt
        layer = nxt
        if cap is not None and len(words) > cap:
            raise IndexSetTooLarge(len(words), cap)
    return words


def _copy_split(m: Monomial) -> tuple[Monomial, Monomial]:
    """Split a word into two commuting halves made of whole copies."""
    copies = sorted({l.copy for l in m})
    half = len(m) / 2
    left_copies = set()
    count = 0
    for c in copies:
        if count >= half:
            break
        left_copies.add(c)
        count += sum(1 for l in m if l.copy == c)
    left = tuple(l for l in m if l.copy in left_copies)
    right = tuple(l for l in m if l.copy not in left_copies)
    return left, right


def _closure(word: Monomial, scenario: Scenario) -> set:
    """Sub-words and outcome substitutions of a word, with their adjoints."""
    out = set()
    for r in range(len(word) + 1):
        for sub in itertools.combinations(word, r):
            choices = [[Letter(l.party, l.copy, l.setting, o) for o in range(scenario.outcomes[l.party])]
                       for l in sub]
            for variant in itertools.product(*choices):
                w = canonicalize(variant)
                out.add(w)
                out.add(adjoint(w))
    return out


def _covered(m: Monomial, labels: set) -> bool:
    for t in range(len(m) + 1):
        if adjoint(m[:t]) in labels and m[t:] in labels:
            return True
    left, right = _copy_split(m)
    return adjoint(left) in labels and right in labels


def target_monomials(scenario: Scenario, params: RelaxationParams) -> list:
    """Monomials of y0 (all cells) and, for polarization, of every enumerated y_ac."""
    targets = set()
    mA, mB, mC = scenario.settings
    kA, kB, kC = scenario.outcomes
    for x, y, z in itertools.product(range(mA), range(mB), range(mC)):
        for a, b, c in itertools.product(range(kA), range(kB), range(kC)):
            cell = (Letter(0, 1, x, a), Letter(1, 1, y, b), Letter(2, 1, z, c))
            targets.add(cell)
            targets.add(multiply(cell, with_copy(cell, 2)))
    if params.hierarchy == POLARIZATION:
        for a, c in enumerate_fact_words(scenario, params.d):
            for _, left, right in yac_patterns(a, c):
                targets.add(multiply(left, right))
    return sorted(targets, key=monomial_sort_key)


def build_index_set(scenario: Scenario, params: RelaxationParams) -> MomentIndexSet:
    letters = build_generators(scenario, params.n)
    words = words_up_to(letters, params.k, params.cap)
    base = set(words)
    if params.augment:
        for m in target_monomials(scenario, params):
            if _covered(m, words):
                continue
            left, right = _copy_split(m)
            for half in (adjoint(left), right):
                if half not in words:
                    words |= _closure(half, scenario)
            if len(words) > params.cap:
                raise IndexSetTooLarge(len(words), params.cap)
    if len(words) > params.cap:
        raise IndexSetTooLarge(len(words), params.cap)
    labels = tuple(sorted(words, key=monomial_sort_key))
    reduced = tuple(w for w in labels if count_last(w, scenario) == 0)
    localizing = tuple(w for w in reduced if len(w) <= params.k - 1)
    augmented = tuple(w for w in labels if w not in base)
    return MomentIndexSet(labels, reduced, localizing, augmented, params.k)


# ---------------------------------------------------------------- variables

def orbit_key(m: Monomial, split_ac: bool = False) -> Monomial:
    """Canonical representative of the copy-permutation orbit of ``m``.

    A word is determined by the sub-word it carries on each copy, so the
    orbit is the multiset of those sub-words; sorting them and renumbering
    the copies picks one element per orbit. With ``split_ac`` the A and C
    sub-words are renumbered independently, which is the orbit under
    permutations acting separately on A copies and on C copies.
    """
    if not m:
        return m
    groups: dict = {}
    for l in m:
        g = (l.party if split_ac else 0, l.copy)
        groups.setdefault(g, []).append((l.party, l.setting, l.outcome))
    by_kind: dict = defaultdict(list)
    for (kind, _), sig in groups.items():
        by_kind[kind].append(tuple(sig))
    out = []
    for sigs in by_kind.values():
        for new_copy, sig in enumerate(sorted(sigs), 1):
            out.extend(Letter(p, new_copy, x, a) for p, x, a in sig)
    return tuple(sorted(out, key=_block_key))


@dataclass(eq=False)
class VariableTable:
    """Identification of moments into classes.

    Class 0 is the identity, pinned to 1. Class keys are canonical
    representatives, so two monomials share a class exactly when they lie
    in one symmetry orbit or are adjoint images of each other.
    """
    hierarchy: str
    keys: list = field(default_factory=list)       # class index -> key monomial
    index: dict = field(default_factory=dict)      # key monomial -> class index
    tracked: set = field(default_factory=set)      # monomials adjoint(u) v, u, v in the index set

    def key(self, m: Monomial) -> Monomial:
        ac = self.hierarchy == INFLATION and all(l.party != PARTY_B for l in m)
        k1 = orbit_key(m, ac)
        k2 = orbit_key(adjoint(m), ac)
        return min(k1, k2)

    def lookup(self, m: Monomial) -> int | None:
        """Class of ``m`` if it resolves to a tracked class, else None."""
        return self.index.get(self.key(m))

    def cls(self, m: Monomial) -> int:
        c = self.lookup(m)
        if c is None:
            raise KeyError(f"monomial {format_monomial(m)} is not tracked")
        return c

    @property
    def nvars(self) -> int:
        return len(self.keys) - 1

    def _add_key(self, k: Monomial) -> int:
        c = self.index.get(k)
        if c is None:
            c = len(self.keys)
            self.index[k] = c
            self.keys.append(k)
        return c

    def same_class(self, m1: Monomial, m2: Monomial) -> bool:
        return self.key(m1) == self.key(m2)


def merge_variables(index: MomentIndexSet, params: RelaxationParams) -> VariableTable:
    table = VariableTable(params.hierarchy)
    table._add_key(IDENTITY)
    labels = index.labels
    adjs = [adjoint(u) for u in labels]
    tracked = table.tracked
    for i, au in enumerate(adjs):
        for v in labels:
            tracked.add(multiply(au, v))
    keys = {table.key(m) for m in tracked}
    keys.discard(IDENTITY)
    for k in sorted(keys, key=monomial_sort_key):
        table._add_key(k)
    return table


# ---------------------------------------------------------------- equalities

@dataclass(frozen=True)
class LinearEquality:
    """sum coef * rho(class) + const = 0, identity folded into const."""
    terms: tuple  # ((class, coef), ...) sorted
    const: float
    origin: str


def _make_equality(pairs, origin: str) -> LinearEquality | None:
    acc: dict = defaultdict(float)
    for c, coef in pairs:
        acc[c] += coef
    const = acc.pop(0, 0.0)
    terms = tuple(sorted((c, v) for c, v in acc.items() if v != 0.0))
    if not terms and const == 0.0:
        return None
    return LinearEquality(terms, const, origin)


def emit_completeness(index: MomentIndexSet, table: VariableTable, scenario: Scenario) -> list:
    """Completeness of every POVM inside every tracked word.

    For a class representative W whose i-th letter is the last outcome of
    its measurement, the relation
        sum_o rho(W with letter i set to outcome o) = rho(W without letter i)
    holds in every state. Representatives suffice because the relations
    are equivariant under the symmetries defining the classes. A relation
    is emitted only when all of its words resolve to tracked classes.
    """
    out = []
    seen = set()
    for W in table.keys[1:]:
        for i, l in enumerate(W):
            if not is_last_outcome(l, scenario):
                continue
            members = [W[:i] + (Letter(l.party, l.copy, l.setting, o),) + W[i + 1:]
                       for o in range(scenario.outcomes[l.party])]
            shorter = W[:i] + W[i + 1:]
            classes = [table.lookup(m) for m in members]
            cs = table.lookup(shorter)
            if cs is None or any(c is None for c in classes):
                continue
            eq = _make_equality([(c, 1.0) for c in classes] + [(cs, -1.0)], "completeness")
            if eq is None:
                continue
            sig = (eq.terms, eq.const)
            if sig not in seen:
                seen.add(sig)
                out.append(eq)
    return out


def emit_polarization(index: MomentIndexSet, table: VariableTable, d: int,
                      scenario: Scenario) -> tuple[list, int]:
    """rho(y_ac) = 0 for every enumerated factorization pair; returns (equalities, skipped)."""
    out, skipped, seen = [], 0, set()
    for a, c in enumerate_fact_words(scenario, d):
        op = build_yac(a, c)
        classes = [(table.lookup(m), coef) for m, coef in op.poly]
        if any(cl is None for cl, _ in classes):
            skipped += 1
            continue
        eq = _make_equality(classes, "polarization")
        if eq is None:
            continue
        sig = (eq.terms, eq.const)
        if sig not in seen:
            seen.add(sig)
            out.append(eq)
    return out, skipped


# ---------------------------------------------------------------- elimination

def eliminate(equalities: list, nclasses: int, priority) -> tuple[dict, list]:
    """Sparse Gaussian elimination with threshold partial pivoting.

    ``priority(c)`` ranks classes; larger values are eliminated first.
    Returns ``(expressions, free)`` where ``expressions[c] = (dict, const)``
    writes each eliminated class in terms of free classes (class 0 being
    the constant 1 never appears).
    """
    pivot_expr: dict = {}
    order = []
    for eq in equalities:
        row = dict(eq.terms)
        const = eq.const
        # substitute existing pivots until none remain
        while True:
            hits = [c for c in row if c in pivot_expr]
            if not hits:
                break
            for c in hits:
                coef = row.pop(c)
                expr, econst = pivot_expr[c]
                const += coef * econst
                for v, w in expr.items():
                    nv = row.get(v, 0.0) + coef * w
                    if abs(nv) <= ELIM_DROP:
                        row.pop(v, None)
                    else:
                        row[v] = nv
        if not row:
            scale = max(1.0, max((abs(w) for _, w in eq.terms), default=1.0))
            if abs(const) > 1e-9 * scale:
                raise InconsistentEqualities(
                    f"{eq.origin} equality reduces to {const:.3g} = 0")
            continue
        big = max(abs(w) for w in row.values())
        cands = [c for c, w in row.items() if abs(w) >= PIVOT_THRESHOLD * big]
        p = max(cands, key=lambda c: (priority(c), abs(row[c]), c))
        pc = row.pop(p)
        pivot_expr[p] = ({v: -w / pc for v, w in row.items()}, -const / pc)
        order.append(p)
    # back-substitute so that every expression only uses free classes
    resolved: dict = {}
    for p in reversed(order):
        expr, const = pivot_expr[p]
        out: dict = defaultdict(float)
        for v, w in expr.items():
            if v in resolved:
                e2, c2 = resolved[v]
                const += w * c2
                for v2, w2 in e2.items():
                    out[v2] += w * w2
            else:
                out[v] += w
        resolved[p] = ({v: w for v, w in out.items() if abs(w) > ELIM_DROP}, const)
    free = [c for c in range(1, nclasses) if c not in resolved]
    return resolved, free


# ---------------------------------------------------------------- assembly

@dataclass(eq=False)
class RelaxationProblem:
    params: RelaxationParams
    distribution: Distribution
    index: MomentIndexSet
    table: VariableTable
    block_names: list
    block_labels: list           # (row labels, col labels, twist) per block
    block_classes: list          # int arrays of class ids per block
    equalities: list
    objective_terms: list        # ((class, coef), ...) from y0 before elimination
    objective_raw_const: float   # identity coefficient of y0
    objective_const: float       # constant of the objective after elimination
    expressions: dict            # eliminated class -> (dict free class -> coef, const)
    free_classes: list           # classes carried by the SDP, in variable order
    sdp: SDPProblem
    skipped_pairs: int = 0
    counts: dict = field(default_factory=dict)

    @property
    def scenario(self) -> Scenario:
        return self.distribution.scenario

    def class_values(self, y: np.ndarray) -> np.ndarray:
        """Values of every class given the SDP variable vector."""
        vals = np.full(len(self.table.keys), np.nan)
        vals[0] = 1.0
        pos = {c: i for i, c in enumerate(self.free_classes)}
        for c, i in pos.items():
            vals[c] = y[i]
        for c, (expr, const) in self.expressions.items():
            vals[c] = const + sum(w * (y[pos[v]] if v in pos else 0.0) for v, w in expr.items())
        return vals

    def objective_value(self, y: np.ndarray) -> float:
        return float(self.sdp.c @ y) + self.objective_const

    def summary(self) -> str:
        c = self.counts
        return (f"hierarchy={self.params.hierarchy}, n={self.params.n}, k={self.params.k}, "
                f"d={self.params.d}, index_set={c['index_set']}, solver_rows={c['solver_rows']}, "
                f"classes={c['classes']}, equalities={c['equalities']}, "
                f"free_variables={c['free_variables']}, skipped_yac_pairs={self.skipped_pairs}")


@dataclass(frozen=True, eq=False)
class _Structure:
    """Everything that does not depend on the observed distribution."""
    index: MomentIndexSet
    table: VariableTable
    block_names: list
    block_labels: list
    block_classes: list
    equalities: list
    expressions: dict
    free_classes: list
    used: frozenset
    sdp: SDPProblem
    skipped_pairs: int


@functools.lru_cache(maxsize=8)
def _structure(scenario: Scenario, params: RelaxationParams) -> _Structure:
    index = build_index_set(scenario, params)
    table = merge_variables(index, params)
    log.info("index set %d words, %d classes", len(index), len(table.keys))

    equalities = emit_completeness(index, table, scenario)
    skipped = 0
    if params.hierarchy == POLARIZATION:
        pol, skipped = emit_polarization(index, table, params.d, scenario)
        equalities += pol

    names, labels, classes = [], [], []
    red = index.reduced
    adj_red = [adjoint(u) for u in red]
    names.append("moment")
    labels.append((red, red, IDENTITY))
    classes.append(_class_matrix(table, adj_red, red, IDENTITY))
    loc = index.localizing
    adj_loc = [adjoint(u) for u in loc]
    for g in build_generators(scenario, params.n):
        names.append(f"localizing {format_monomial((g,))}")
        labels.append((loc, loc, (g,)))
        classes.append(_class_matrix(table, adj_loc, loc, (g,)))

    in_moment = set(np.unique(classes[0]).tolist())
    in_block = set()
    for cm in classes:
        in_block.update(np.unique(cm).tolist())
    last = [count_last(k, scenario) for k in table.keys]

    def priority(c):
        return (c not in in_moment, c not in in_block, last[c], len(table.keys[c]))

    expressions, free = eliminate(equalities, len(table.keys), priority)

    # keep only free classes that some block constrains
    used = set()
    for cm in classes:
        for c in np.unique(cm).tolist():
            if c in expressions:
                used.update(expressions[c][0])
            elif c != 0:
                used.add(c)
    free = [c for c in free if c in used]
    pos = {c: i for i, c in enumerate(free)}
    # rho(u* u) <= 1: words in POVM elements have norm at most 1. Without it
    # the longest diagonal moments are unbounded at any finite level.
    diag = np.unique([table.cls(multiply(adjoint(u), u)) for u in index.labels])
    diag = diag[diag != 0]
    sdp = _build_sdp(classes, expressions, pos, np.zeros(len(free)), diag)
    return _Structure(index, table, names, labels, classes, equalities, expressions, free,
                      frozenset(used), sdp, skipped)


def assemble(distribution: Distribution, params: RelaxationParams) -> RelaxationProblem:
    """Relaxation of the given level for one distribution.

    The constraint structure depends only on the scenario and the level and
    is cached, so sweeping many distributions over one scenario is cheap.
    """
    st = _structure(distribution.scenario, params)
    table, expressions = st.table, st.expressions

    y0 = build_y0(distribution)
    obj_pairs = []
    for m, coef in y0.poly:
        c = table.lookup(m)
        if c is None:
            raise RelaxationError(
                f"objective monomial {format_monomial(m)} is not representable at k={params.k}; "
                "enable augmentation or raise k")
        obj_pairs.append((c, coef))
    obj = _make_equality(obj_pairs, "objective")
    obj_terms = list(obj.terms) if obj else []
    obj_raw_const = obj.const if obj else 0.0
    obj_const = obj_raw_const

    obj_lin: dict = defaultdict(float)
    for c, w in obj_terms:
        if c in expressions:
            expr, const = expressions[c]
            obj_const += w * const
            for v, ww in expr.items():
                obj_lin[v] += w * ww
        else:
            obj_lin[c] += w
    for c, w in obj_lin.items():
        if abs(w) > ELIM_DROP and c not in st.used:
            raise RelaxationError(
                f"objective depends on unconstrained moment {format_monomial(table.keys[c])}")
    pos = {c: i for i, c in enumerate(st.free_classes)}
    cvec = np.zeros(len(pos))
    for c, w in obj_lin.items():
        if c in pos:
            cvec[pos[c]] += w
    sdp = dataclasses.replace(st.sdp, c=cvec)

    counts = {
        "index_set": len(st.index),
        "solver_rows": len(st.index.reduced),
        "classes": len(table.keys) - 1,
        "equalities": len(st.equalities),
        "free_variables": len(pos),
    }
    return RelaxationProblem(params, distribution, st.index, table, st.block_names, st.block_labels,
                             st.block_classes, st.equalities, obj_terms, obj_raw_const, obj_const,
                             expressions, st.free_classes, sdp, st.skipped_pairs, counts)


def _class_matrix(table: VariableTable, adj_rows, cols, twist) -> np.ndarray:
    n = len(cols)
    out = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        left = multiply(adj_rows[i], twist)
        for j in range(i, n):
            c = table.cls(multiply(left, cols[j]))
            out[i, j] = out[j, i] = c
    return out


def _affine(c, expressions):
    if c == 0:
        return {}, 1.0
    if c in expressions:
        return expressions[c]
    return {c: 1.0}, 0.0


def _build_sdp(classes, expressions, pos, cvec, bound_diag=None) -> SDPProblem:
    """LMI blocks from class matrices, plus an optional diagonal block 1 - rho(bound_diag[i])."""
    mats, blks, rows, cols, vals = [], [], [], [], []

    def put(b, i, j, terms, const, sign):
        # F(y) = sum y_i F_i - F0
        if const != 0.0:
            mats.append(0); blks.append(b); rows.append(i); cols.append(j); vals.append(-const)
        for v, w in terms.items():
            if v in pos:
                mats.append(pos[v] + 1); blks.append(b); rows.append(i); cols.append(j); vals.append(sign * w)

    sizes = [cm.shape[0] for cm in classes]
    for b, cm in enumerate(classes):
        iu, ju = np.triu_indices(cm.shape[0])
        for i, j in zip(iu.tolist(), ju.tolist()):
            terms, const = _affine(int(cm[i, j]), expressions)
            put(b, i, j, terms, const, 1.0)
    if bound_diag is not None and len(bound_diag):
        b = len(sizes)
        sizes.append(len(bound_diag))
        for i, c in enumerate(bound_diag.tolist()):
            terms, const = _affine(int(c), expressions)
            put(b, i, i, terms, 1.0 - const, -1.0)
    return SDPProblem.from_entries(
        len(pos), tuple(sizes), cvec,
        np.array(mats, dtype=np.int64), np.array(blks, dtype=np.int64),
        np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals, dtype=float))


# ---------------------------------------------------------------- feasibility witness

@dataclass(frozen=True)
class FeasibilityReport:
    equality_residual: float
    merge_residual: float
    block_min_eigenvalues: tuple
    objective: float

    @property
    def min_eigenvalue(self) -> float:
        return min(self.block_min_eigenvalues)


def check_feasible_point(problem: RelaxationProblem, moments) -> FeasibilityReport:
    """Evaluate the relaxation at an explicit moment assignment."""
    table = problem.table
    vals = np.full(len(table.keys), np.nan)
    vals[0] = 1.0
    merge_res = 0.0
    for m in sorted(table.tracked, key=monomial_sort_key):
        if m not in moments:
            raise KeyError(f"missing moment for tracked monomial {format_monomial(m)}")
        c = table.cls(m)
        v = float(moments[m])
        if np.isnan(vals[c]):
            vals[c] = v
        else:
            merge_res = max(merge_res, abs(vals[c] - v))
    eq_res = 0.0
    for eq in problem.equalities:
        r = eq.const + sum(w * vals[c] for c, w in eq.terms)
        eq_res = max(eq_res, abs(r))
    eigs = []
    for cm in problem.block_classes:
        eigs.append(float(np.linalg.eigvalsh(vals[cm]).min()) if cm.size else 0.0)
    obj = problem.objective_raw_const + sum(w * vals[c] for c, w in problem.objective_terms)
    return FeasibilityReport(max(eq_res, merge_res), merge_res, tuple(eigs), float(obj))


# ---------------------------------------------------------------- solving a level

@dataclass(eq=False)
class LevelResult:
    problem: RelaxationProblem
    solution: SDPSolution
    value: float                  # hierarchy value at the returned point
    certified: float | None       # rigorous lower bound, None after a numerical failure

    @property
    def status(self) -> str:
        return self.solution.status


def solve_level(distribution: Distribution, params: RelaxationParams,
                options: SolverOptions | None = None) -> LevelResult:
    problem = assemble(distribution, params)
    sol = solve(problem.sdp, options)
    value = problem.objective_value(sol.y)
    try:
        cert = certify(problem.sdp, sol).value + problem.objective_const
    except CertificationError:
        cert = None
    return LevelResult(problem, sol, value, cert)
