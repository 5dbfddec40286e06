"""Acceptance checks shared by ``bilocal selftest`` and the test suite.

Each check returns one or more :class:`CriterionResult`; none of them raise
on failure, so a run always reports every criterion.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algebra import (Letter, adjoint, canonicalize, evaluate_on_matrices, kronecker_assignment,
                      multiply)
from .inflation import (CopyPermutation, apply_party_restricted_permutation, apply_permutation,
                        build_y0, build_yac, party_words)
from .oracle import (analytic_ac_distance, entanglement_swapping_model, product_state_moments,
                     random_classical_bilocal, random_real_model, simulate_distribution)
from .relaxation import (INFLATION, POLARIZATION, RelaxationParams, assemble, check_feasible_point,
                         solve_level)
from .scenario import (Scenario, parse_distribution, serialize_distribution,
                       shared_bit_distribution, uniform_distribution)
from .sdp import SDPProblem, SolverOptions, export_sdpa, parse_sdpa, solve

EPSILON = 1e-5
SANDWICH_REFERENCE = 0.25


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.key}: {self.title}" + (f" ({self.detail})" if self.detail else "")


# ---------------------------------------------------------------- corpus

def toy_problem() -> SDPProblem:
    """minimize y subject to [[y, 1], [1, y]] >= 0; optimum 1."""
    return SDPProblem.from_entries(1, (2,), [1.0], [0, 1, 1], [0, 0, 0], [0, 0, 1], [1, 0, 1],
                                   [-1.0, 1.0, 1.0])


def _corpus_distributions() -> dict:
    return {
        "trivial": uniform_distribution(Scenario((1, 1, 1), (1, 1, 1))),
        "uniform-binary": uniform_distribution(Scenario.binary()),
        "shared-bit": shared_bit_distribution(),
        "classical-seed-0": random_classical_bilocal(0, Scenario((2, 1, 2), (2, 2, 2))),
        "entanglement-swapping": simulate_distribution(entanglement_swapping_model()),
    }


CORPUS_LEVELS = [
    ("trivial", RelaxationParams(INFLATION, 2, 1)),
    ("uniform-binary", RelaxationParams(INFLATION, 2, 2)),
    ("shared-bit", RelaxationParams(INFLATION, 2, 1)),
    ("shared-bit", RelaxationParams(INFLATION, 2, 2)),
    ("shared-bit", RelaxationParams(POLARIZATION, 4, 1)),
    ("shared-bit", RelaxationParams(POLARIZATION, 4, 2)),
    ("classical-seed-0", RelaxationParams(INFLATION, 2, 2)),
    ("entanglement-swapping", RelaxationParams(INFLATION, 2, 2)),
]
QUICK_SKIP = {"entanglement-swapping"}


def load_corpus(corpus_dir: str | Path | None = None) -> dict:
    """Corpus distributions, read from ``corpus_dir`` when present and regenerated otherwise."""
    dists = _corpus_distributions()
    if corpus_dir is None:
        return dists
    root = Path(corpus_dir)
    root.mkdir(parents=True, exist_ok=True)
    for name, d in dists.items():
        path = root / f"{name}.json"
        if path.exists():
            dists[name] = parse_distribution(path.read_text())
        else:
            path.write_text(serialize_distribution(d))
    return dists


def corpus_problems(dists: dict, quick: bool = False):
    for name, params in CORPUS_LEVELS:
        if quick and name in QUICK_SKIP:
            continue
        yield f"{name} {params.hierarchy} n={params.n} k={params.k}", assemble(dists[name], params)


# ---------------------------------------------------------------- criteria

def classical_scenario(seed: int) -> Scenario:
    settings = tuple(int(v) for v in np.random.default_rng(1000 + seed).integers(1, 3, size=3))
    return Scenario(settings, (2, 2, 2))


def criterion_1(opts=None, seeds=range(20), budget=300.0) -> list:
    t0 = time.perf_counter()
    bad = []
    worst = -np.inf
    for seed in seeds:
        d = random_classical_bilocal(seed, classical_scenario(seed))
        r = solve_level(d, RelaxationParams(INFLATION, 2, 2), opts)
        worst = max(worst, r.value)
        compatible = r.certified is not None and r.certified <= EPSILON
        if not (r.value <= EPSILON and compatible):
            bad.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed <= budget
    return [CriterionResult("1", "classical bilocal distributions are compatible at inflation n=2 k=2", ok,
                            f"{len(list(seeds))} seeds, max value {worst:.3g}, failing seeds {bad}, "
                            f"{elapsed:.1f}s of {budget:.0f}s")]


def criterion_2(opts=None, quick=False) -> list:
    model = entanglement_swapping_model()
    d = simulate_distribution(model)
    levels = [RelaxationParams(INFLATION, 2, 2)]
    if not quick:
        levels.append(RelaxationParams(POLARIZATION, 4, 2))
    out = []
    for params in levels:
        r = solve_level(d, params, opts)
        tag = f"{params.hierarchy} n={params.n} k={params.k}"
        out.append(CriterionResult("2", f"entanglement swapping value <= 1e-5 at {tag}",
                                   r.value <= EPSILON, f"value {r.value:.6g}, status {r.status}"))
        moments = product_state_moments(model, r.problem.table.tracked, params.n)
        rep = check_feasible_point(r.problem, moments)
        ok = rep.equality_residual <= 1e-9 and rep.block_min_eigenvalues[0] >= -1e-9
        out.append(CriterionResult("2", f"oracle moments are feasible at {tag}", ok,
                                   f"equality residual {rep.equality_residual:.2g}, moment block min eigenvalue "
                                   f"{rep.block_min_eigenvalues[0]:.2g}, all blocks {rep.min_eigenvalue:.2g}"))
    return out


SANDWICH_LEVELS = [
    RelaxationParams(INFLATION, 2, 1),
    RelaxationParams(INFLATION, 2, 2),
    RelaxationParams(POLARIZATION, 4, 1),
    RelaxationParams(POLARIZATION, 4, 2),
]


def criterion_3(opts=None) -> list:
    d = shared_bit_distribution()
    ref = analytic_ac_distance(d)
    results = {p: solve_level(d, p, opts) for p in SANDWICH_LEVELS}
    out = [CriterionResult("3", "analytic reference distance is 1/4", abs(ref - SANDWICH_REFERENCE) <= 1e-6,
                           f"reference {ref:.9f}")]
    vals = ", ".join(f"{p.hierarchy} n={p.n} k={p.k}: {r.value:.6g}" for p, r in results.items())
    sandwich = all(0.0 <= r.value <= SANDWICH_REFERENCE + 1e-4 for r in results.values())
    out.append(CriterionResult("3", "shared bit: 0 <= value <= 0.25 + 1e-4 at every level", sandwich, vals))
    mono = True
    for h in (INFLATION, POLARIZATION):
        seq = [results[p].value for p in SANDWICH_LEVELS if p.hierarchy == h]
        mono &= all(b >= a - 1e-5 for a, b in zip(seq, seq[1:]))
    out.append(CriterionResult("3", "shared bit: values nondecreasing in the level", mono, vals))
    top = results[RelaxationParams(POLARIZATION, 4, 2)]
    cert = top.certified
    out.append(CriterionResult("3", "shared bit: certified bound at polarization n=4 k=2 is positive",
                               cert is not None and cert > 0, f"certified bound {cert!r}"))
    return out


def weak_duality_holds(sol, tol=1e-9) -> bool:
    return all(dobj <= pobj + tol * (1 + abs(pobj) + abs(dobj)) for pobj, dobj, *_ in sol.history)


def criterion_4(opts=None, corpus_dir=None, quick=False) -> list:
    toy = solve(toy_problem(), opts)
    out = [CriterionResult("4", "2x2 analytic SDP solves to 1 within 1e-7",
                           toy.status == "optimal" and abs(toy.primal_objective - 1.0) <= 1e-7,
                           f"primal {toy.primal_objective!r}, status {toy.status}")]
    dists = load_corpus(corpus_dir)
    wd_bad, rt_bad, n = [], [], 0
    problems = [("2x2 toy", toy_problem())] + [(name, pr.sdp) for name, pr in corpus_problems(dists, quick)]
    for name, sdp in problems:
        n += 1
        s1 = toy if name == "2x2 toy" else solve(sdp, opts)
        if not weak_duality_holds(s1):
            wd_bad.append(name)
        s2 = solve(parse_sdpa(export_sdpa(sdp)), opts)
        a, b = s1.primal_objective, s2.primal_objective
        if abs(a - b) > 1e-5 * max(1.0, abs(a)):
            rt_bad.append(name)
    out.append(CriterionResult("4", "weak duality at every iterate on the corpus", not wd_bad,
                               f"{n} problems, violations {wd_bad}"))
    out.append(CriterionResult("4", "export/parse re-solve agrees to 1e-5 relative", not rt_bad,
                               f"{n} problems, disagreements {rt_bad}"))
    return out


def _random_word(rng, scenario: Scenario, n: int, length: int):
    out = []
    for _ in range(length):
        p = int(rng.integers(3))
        out.append(Letter(p, int(rng.integers(1, n + 1)), int(rng.integers(scenario.settings[p])),
                          int(rng.integers(scenario.outcomes[p]))))
    return tuple(out)


def criterion_5(cases=1000, seed=0) -> list:
    rng = np.random.default_rng(seed)
    worst = 0.0
    laws_ok = True
    for _ in range(cases):
        scen = Scenario(tuple(int(v) for v in rng.integers(1, 3, 3)), tuple(int(v) for v in rng.integers(1, 4, 3)))
        n = int(rng.integers(1, 4))
        w = _random_word(rng, scen, n, int(rng.integers(0, 7)))
        assign, dim = kronecker_assignment(w, rng)
        raw = evaluate_on_matrices(w, assign, dim)
        canon = evaluate_on_matrices(canonicalize(w), assign, dim)
        worst = max(worst, float(np.abs(raw - canon).max() / max(1.0, np.abs(raw).max())))
        # group action and involution laws, exact
        m = canonicalize(w)
        p = CopyPermutation(tuple(int(v) + 1 for v in rng.permutation(n)))
        q = CopyPermutation(tuple(int(v) + 1 for v in rng.permutation(n)))
        laws_ok &= apply_permutation(apply_permutation(m, p), q) == apply_permutation(m, q.compose(p))
        laws_ok &= apply_permutation(m, CopyPermutation.identity(n)) == m
        laws_ok &= adjoint(adjoint(m)) == m
        w2 = canonicalize(_random_word(rng, scen, n, int(rng.integers(0, 4))))
        laws_ok &= adjoint(multiply(m, w2)) == multiply(adjoint(w2), adjoint(m))
        ac = tuple(l for l in m if l.party != 1)
        for party in (0, 2):
            laws_ok &= (apply_party_restricted_permutation(apply_party_restricted_permutation(ac, p, party), q, party)
                        == apply_party_restricted_permutation(ac, q.compose(p), party))
    return [CriterionResult("5", f"canonical form matches matrix evaluation on {cases} random words",
                            worst <= 1e-12, f"worst relative deviation {worst:.2g}"),
            CriterionResult("5", "group action and involution laws hold exactly", bool(laws_ok))]


class CorrelatedACState:
    """A and C measurements on one shared, generally entangled, A-C state.

    Not a bilocal model: sigma(ac) differs from sigma(a) sigma(c), which
    gives the factorization identity nonzero values to compare.
    """

    def __init__(self, model, rng):
        dA, _, _, dC = model.dims
        g = rng.standard_normal((dA * dC, dA * dC))
        rho = g @ g.T
        self.rho = rho / np.trace(rho)
        self.ops = {}
        for party, eye_left, eye_right in ((0, 1, dC), (2, dA, 1)):
            for x, povm in enumerate(model.povms[party]):
                for a, el in enumerate(povm):
                    self.ops[(party, x, a)] = np.kron(np.kron(np.eye(eye_left), np.real(el)), np.eye(eye_right))

    def expectation(self, word) -> float:
        out = self.rho
        for l in word:
            key = (l[0], l[-2], l[-1]) if len(l) == 3 else (l.party, l.setting, l.outcome)
            out = out @ self.ops[key]
        return float(np.trace(out))


def criterion_6(models=50, seed=0) -> list:
    rng = np.random.default_rng(seed)
    worst0 = worst_ac = worst_corr = 0.0
    for s in range(models):
        scen = Scenario(tuple(int(v) for v in rng.integers(1, 3, 3)), tuple(int(v) for v in rng.integers(2, 4, 3)))
        model = random_real_model(s, scen)
        target = random_classical_bilocal(s, scen)
        y0 = build_y0(target)
        mom = product_state_moments(model, y0.poly.terms, 2)
        lhs = y0.poly.evaluate(lambda m: 1.0 if not m else mom[m])
        sigma = simulate_distribution(model).p
        rhs = float(np.sum((sigma - target.p) ** 2))
        worst0 = max(worst0, abs(lhs - rhs))
        aw = party_words(scen, 0, 2)
        cw = party_words(scen, 2, 2)
        corr = CorrelatedACState(model, rng)
        for _ in range(4):
            a = aw[int(rng.integers(len(aw)))]
            c = cw[int(rng.integers(len(cw)))]
            op = build_yac(a, c)
            for state, bucket in ((model, "ac"), (corr, "corr")):
                mom4 = product_state_moments(state, op.poly.terms, 4)
                lhs4 = op.poly.evaluate(lambda m: 1.0 if not m else mom4[m])
                s_ac = state.expectation(multiply(a, c))
                rhs4 = (s_ac - state.expectation(a) * state.expectation(c)) ** 2
                if bucket == "ac":
                    worst_ac = max(worst_ac, abs(lhs4 - rhs4))
                else:
                    worst_corr = max(worst_corr, abs(lhs4 - rhs4))
    return [CriterionResult("6", f"y0 polarization identity on {models} random models", worst0 <= 1e-10,
                            f"worst deviation {worst0:.2g}"),
            CriterionResult("6", f"y_ac polarization identity on {models} random models",
                            max(worst_ac, worst_corr) <= 1e-10,
                            f"bilocal models {worst_ac:.2g}, correlated A-C states {worst_corr:.2g}")]


def criterion_7(corpus_dir=None, quick=False) -> list:
    dists = load_corpus(corpus_dir)
    sdp_bad = []
    problems = [("2x2 toy", toy_problem())] + [(name, pr.sdp) for name, pr in corpus_problems(dists, quick)]
    for name, sdp in problems:
        text = export_sdpa(sdp)
        back = parse_sdpa(text)
        if not (back == sdp and export_sdpa(back) == text):
            sdp_bad.append(name)
    dist_bad = []
    for name, d in dists.items():
        text = serialize_distribution(d)
        back = parse_distribution(text)
        if not (back == d and serialize_distribution(back) == text):
            dist_bad.append(name)
    return [CriterionResult("7", "SDPA export/parse round trip is bit-exact on the corpus", not sdp_bad,
                            f"{len(problems)} problems, mismatches {sdp_bad}"),
            CriterionResult("7", "distribution JSON round trip is bit-exact", not dist_bad,
                            f"{len(dists)} distributions, mismatches {dist_bad}")]


def run_all(solver_options: SolverOptions | None = None, corpus_dir=None, quick=False) -> list:
    out = []
    out += criterion_1(solver_options)
    out += criterion_2(solver_options, quick=quick)
    out += criterion_3(solver_options)
    out += criterion_4(solver_options, corpus_dir, quick=quick)
    out += criterion_5()
    out += criterion_6()
    out += criterion_7(corpus_dir, quick=quick)
    return out
