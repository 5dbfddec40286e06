"""Explicit finite-dimensional bilocal models used as ground truth.

The Hilbert space is ordered H_A ⊗ H_BA ⊗ H_BC ⊗ H_C; source 1 prepares a
state on H_A ⊗ H_BA and source 2 one on H_BC ⊗ H_C. Bob measures on
H_BA ⊗ H_BC.
"""
from __future__ import annotations

import itertools
import json
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .algebra import Letter, Monomial
from .scenario import Distribution, DistributionError, Scenario

MAX_DIM = 4
MAX_HIDDEN = 8
MODEL_TOL = 1e-12
IMAG_TOL = 1e-10


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumModel:
    dims: tuple[int, int, int, int]  # dA, dBA, dBC, dC
    sigma_aba: np.ndarray
    sigma_bcc: np.ndarray
    povms: tuple  # povms[party][setting] -> tuple of matrices

    def __post_init__(self):
        dA, dBA, dBC, dC = self.dims
        if max(self.dims) > MAX_DIM or min(self.dims) < 1:
            raise ModelError(f"dimensions {self.dims} must lie in 1..{MAX_DIM}")
        _check_state(self.sigma_aba, dA * dBA, "sigma_ABA")
        _check_state(self.sigma_bcc, dBC * dC, "sigma_BCC")
        if len(self.povms) != 3:
            raise ModelError("povms must list parties A, B, C")
        for party, dim in zip("ABC", (dA, dBA * dBC, dC)):
            settings = self.povms["ABC".index(party)]
            if not settings:
                raise ModelError(f"party {party} has no settings")
            for x, povm in enumerate(settings):
                total = np.zeros((dim, dim), dtype=complex)
                for a, el in enumerate(povm):
                    el = np.asarray(el)
                    if el.shape != (dim, dim):
                        raise ModelError(f"{party}[{a}|{x}] has shape {el.shape}, expected {(dim, dim)}")
                    if np.max(np.abs(el - el.conj().T)) > MODEL_TOL:
                        raise ModelError(f"{party}[{a}|{x}] is not Hermitian")
                    if np.linalg.eigvalsh(el).min() < -MODEL_TOL:
                        raise ModelError(f"{party}[{a}|{x}] is not positive semidefinite")
                    total = total + el
                if np.max(np.abs(total - np.eye(dim))) > MODEL_TOL:
                    raise ModelError(f"POVM {party}[.|{x}] does not sum to the identity")

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(len(s) for s in self.povms),
                        tuple(len(s[0]) for s in self.povms))

    @cached_property
    def state(self) -> np.ndarray:
        return np.kron(self.sigma_aba, self.sigma_bcc)

    @cached_property
    def _embedded(self) -> dict:
        dA, dBA, dBC, dC = self.dims
        ops = {}
        for party, settings in enumerate(self.povms):
            for x, povm in enumerate(settings):
                for a, el in enumerate(povm):
                    el = np.asarray(el)
                    if party == 0:
                        full = np.kron(el, np.eye(dBA * dBC * dC))
                    elif party == 1:
                        full = np.kron(np.kron(np.eye(dA), el), np.eye(dC))
                    else:
                        full = np.kron(np.eye(dA * dBA * dBC), el)
                    ops[(party, x, a)] = full
        return ops

    def expectation(self, word: Iterable) -> float:
        """sigma(word) on one copy; letters are (party, setting, outcome) or Letters."""
        out = self.state
        for l in word:
            key = (l.party, l.setting, l.outcome) if isinstance(l, Letter) else tuple(l)
            out = out @ self._embedded[key]
        val = np.trace(out)
        if abs(val.imag) > IMAG_TOL:
            raise ModelError(f"moment has imaginary part {val.imag:.3g}; only real models are supported")
        return float(val.real)


def _check_state(rho: np.ndarray, dim: int, name: str) -> None:
    rho = np.asarray(rho)
    if rho.shape != (dim, dim):
        raise ModelError(f"{name} has shape {rho.shape}, expected {(dim, dim)}")
    if np.max(np.abs(rho - rho.conj().T)) > MODEL_TOL:
        raise ModelError(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1) > MODEL_TOL:
        raise ModelError(f"{name} does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -MODEL_TOL:
        raise ModelError(f"{name} is not positive semidefinite")


def simulate_distribution(model: QuantumModel, scenario: Scenario | None = None) -> Distribution:
    scen = model.scenario
    if scenario is not None and scenario != scen:
        raise ModelError(f"model realizes {scen}, not {scenario}")
    p = np.zeros(scen.shape)
    mA, mB, mC = scen.settings
    kA, kB, kC = scen.outcomes
    for x, y, z in itertools.product(range(mA), range(mB), range(mC)):
        for a, b, c in itertools.product(range(kA), range(kB), range(kC)):
            p[a, b, c, x, y, z] = model.expectation([(0, x, a), (1, y, b), (2, z, c)])
    # clip rounding noise below zero, renormalize per setting
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=(0, 1, 2), keepdims=True)
    return Distribution(scen, p)


def _proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.outer(v, v) / (v @ v)


def entanglement_swapping_model() -> QuantumModel:
    """Two |Phi+> sources, Bob's Bell-state measurement, A and C measure Z or X."""
    s = 1 / np.sqrt(2)
    phi_plus = np.array([s, 0, 0, s])
    sigma = np.outer(phi_plus, phi_plus)
    bell = [np.array([s, 0, 0, s]), np.array([s, 0, 0, -s]),
            np.array([0, s, s, 0]), np.array([0, s, -s, 0])]
    bsm = tuple(np.outer(v, v) for v in bell)
    z_basis = (_proj([1, 0]), _proj([0, 1]))
    x_basis = (_proj([1, 1]), _proj([1, -1]))
    return QuantumModel((2, 2, 2, 2), sigma, sigma.copy(),
                        ((z_basis, x_basis), (bsm,), (z_basis, x_basis)))


def uniform_model(scenario: Scenario) -> QuantumModel:
    """One-dimensional systems, every POVM element a multiple of the identity."""
    one = np.ones((1, 1))
    povms = tuple(
        tuple(tuple(one / k for _ in range(k)) for _ in range(m))
        for m, k in zip(scenario.settings, scenario.outcomes))
    return QuantumModel((1, 1, 1, 1), one, one.copy(), povms)


def _random_povm(rng: np.random.Generator, dim: int, k: int) -> tuple:
    if k == 1:
        return (np.eye(dim),)
    raw = []
    for _ in range(k):
        g = rng.standard_normal((dim, dim))
        raw.append(g @ g.T)
    total = sum(raw)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(w ** -0.5) @ v.T
    els = [inv_sqrt @ g @ inv_sqrt for g in raw]
    els = [(e + e.T) / 2 for e in els]
    # absorb the rounding error into the last element
    els[-1] = np.eye(dim) - sum(els[:-1])
    els[-1] = (els[-1] + els[-1].T) / 2
    return tuple(els)


def _random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim))
    rho = g @ g.T
    rho = (rho + rho.T) / 2
    return rho / np.trace(rho)


def random_real_model(seed: int, scenario: Scenario, dims=(2, 2, 2, 2)) -> QuantumModel:
    """Random real states and POVMs; real models have real moments on every word."""
    rng = np.random.default_rng(seed)
    dA, dBA, dBC, dC = dims
    povms = []
    for party, dim in enumerate((dA, dBA * dBC, dC)):
        povms.append(tuple(_random_povm(rng, dim, scenario.outcomes[party])
                           for _ in range(scenario.settings[party])))
    return QuantumModel(tuple(dims), _random_state(rng, dA * dBA), _random_state(rng, dBC * dC),
                        tuple(povms))


def random_classical_bilocal(seed: int, scenario: Scenario) -> Distribution:
    """p induced by two independent hidden variables and deterministic responses."""
    rng = np.random.default_rng(seed)
    n1, n2 = (int(v) for v in rng.integers(1, MAX_HIDDEN + 1, size=2))
    w1 = rng.dirichlet(np.ones(n1))
    w2 = rng.dirichlet(np.ones(n2))
    mA, mB, mC = scenario.settings
    kA, kB, kC = scenario.outcomes
    fa = rng.integers(0, kA, size=(mA, n1))
    fb = rng.integers(0, kB, size=(mB, n1, n2))
    fc = rng.integers(0, kC, size=(mC, n2))
    return classical_distribution(scenario, w1, w2, fa, fb, fc)


def classical_distribution(scenario: Scenario, w1, w2, fa, fb, fc) -> Distribution:
    mA, mB, mC = scenario.settings
    p = np.zeros(scenario.shape)
    for x, y, z in itertools.product(range(mA), range(mB), range(mC)):
        for l1, l2 in itertools.product(range(len(w1)), range(len(w2))):
            p[fa[x, l1], fb[y, l1, l2], fc[z, l2], x, y, z] += w1[l1] * w2[l2]
    p /= p.sum(axis=(0, 1, 2), keepdims=True)
    return Distribution(scenario, p)


def product_state_moments(model: QuantumModel, monomials: Iterable[Monomial], n: int | None = None) -> dict:
    """Moments of the n-fold symmetric product state of the model's state."""
    cache: dict = {}
    out = {}
    for m in monomials:
        by_copy: dict[int, list] = {}
        for l in m:
            if n is not None and l.copy > n:
                raise ModelError(f"letter {l} beyond copy {n}")
            by_copy.setdefault(l.copy, []).append((l.party, l.setting, l.outcome))
        val = 1.0
        for word in by_copy.values():
            key = tuple(word)
            if key not in cache:
                cache[key] = model.expectation(key)
            val *= cache[key]
        out[m] = val
    return out


def analytic_ac_distance(d: Distribution, grid_step: float = 1e-3, tol: float = 1e-8,
                         seed: int = 0) -> float:
    """Brute-force min over product conditionals qA(a|x) qC(c|z) of the squared 2-norm distance.

    Only for scenarios where Bob has a single outcome, so that p reduces
    to its A-C part for every y.
    """
    scen = d.scenario
    mA, mB, mC = scen.settings
    kA, kB, kC = scen.outcomes
    if kB != 1:
        raise DistributionError("analytic_ac_distance needs a trivial Bob (one outcome)")
    if kA * kC > 16 or mA * mC > 16:
        raise DistributionError("scenario too large for the brute-force reference")
    target = d.p[:, 0, :, :, :, :]  # [a, c, x, y, z]

    def objective(qa, qc):
        prod = qa[:, None, :, None, None] * qc[None, :, None, None, :]
        return float(np.sum((prod - target.transpose(0, 1, 2, 3, 4)) ** 2))

    nfree = mA * (kA - 1) + mC * (kC - 1)
    starts = []
    if nfree == 0:
        return objective(np.ones((1, mA)), np.ones((1, mC)))
    if nfree <= 2:
        # dense grid over the free coordinates
        g = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
        if nfree == 1:
            grids = [g]
        else:
            grids = np.meshgrid(g, g, indexing="ij")
        coords = [gr.ravel() for gr in grids]
        vals = _grid_values(coords, target, mA, kA, mC, kC, mB)
        best = int(np.argmin(vals))
        starts.append([c[best] for c in coords])
    else:
        rng = np.random.default_rng(seed)
        for _ in range(64):
            starts.append(None)

    best_val = np.inf
    rng = np.random.default_rng(seed)
    for start in starts:
        if start is None:
            qa = rng.dirichlet(np.ones(kA), size=mA).T
            qc = rng.dirichlet(np.ones(kC), size=mC).T
        else:
            qa, qc = _unpack(start, mA, kA, mC, kC)
        qa, qc = _coordinate_descent(qa, qc, target, objective, tol)
        best_val = min(best_val, objective(qa, qc))
    return best_val


def _unpack(free, mA, kA, mC, kC):
    free = list(free)
    qa = np.zeros((kA, mA))
    qc = np.zeros((kC, mC))
    for q, m, k in ((qa, mA, kA), (qc, mC, kC)):
        for x in range(m):
            if k == 1:
                q[0, x] = 1.0
            else:
                t = free.pop(0)
                q[0, x], q[1, x] = t, 1 - t
    return qa, qc


def _grid_values(coords, target, mA, kA, mC, kC, mB):
    # only reached with at most two binary free coordinates
    npts = coords[0].size
    cols = list(coords)
    qa = np.zeros((npts, kA, mA))
    qc = np.zeros((npts, kC, mC))
    for q, m, k in ((qa, mA, kA), (qc, mC, kC)):
        for x in range(m):
            if k == 1:
                q[:, 0, x] = 1.0
            else:
                t = cols.pop(0)
                q[:, 0, x], q[:, 1, x] = t, 1 - t
    prod = qa[:, :, None, :, None, None] * qc[:, None, :, None, None, :]
    return np.sum((prod - target[None]) ** 2, axis=(1, 2, 3, 4, 5))


def _coordinate_descent(qa, qc, target, objective, tol, max_sweeps=10000):
    """Exact line searches along e_i - e_j inside each conditional distribution.

    With the other party fixed the objective is quadratic along each move,
    so three samples determine it.
    """
    current = objective(qa, qc)
    for _ in range(max_sweeps):
        start = current
        for q in (qa, qc):
            k, m = q.shape
            for x in range(m):
                for i, j in itertools.combinations(range(k), 2):
                    lo, hi = -q[i, x], q[j, x]
                    if hi - lo <= 0:
                        continue

                    def f(t):
                        q[i, x] += t
                        q[j, x] -= t
                        v = objective(qa, qc)
                        q[i, x] -= t
                        q[j, x] += t
                        return v

                    ts = np.array([lo, (lo + hi) / 2, hi])
                    fs = np.array([f(t) for t in ts])
                    coef = np.polyfit(ts, fs, 2)
                    cands = list(ts) + [0.0]
                    if coef[0] > 0:
                        cands.append(min(max(-coef[1] / (2 * coef[0]), lo), hi))
                    t_best = min(cands, key=f)
                    q[i, x] += t_best
                    q[j, x] -= t_best
                    current = objective(qa, qc)
        if start - current <= tol * tol:
            break
    return qa, qc


# serialization of models: complex entries as [re, im] pairs

def _mat_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _mat_from_json(rows) -> np.ndarray:
    arr = np.array(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ModelError("matrices must be nested [re, im] pairs")
    m = arr[..., 0] + 1j * arr[..., 1]
    return m.real if not np.any(arr[..., 1]) else m


def serialize_model(model: QuantumModel) -> str:
    obj = {
        "dims": list(model.dims),
        "sigma_ABA": _mat_to_json(model.sigma_aba),
        "sigma_BCC": _mat_to_json(model.sigma_bcc),
        "povms": {party: [[_mat_to_json(el) for el in povm] for povm in model.povms[i]]
                  for i, party in enumerate("ABC")},
    }
    return json.dumps(obj) + "\n"


def parse_model(text: str) -> QuantumModel:
    obj = json.loads(text)
    if not isinstance(obj, dict) or set(obj) != {"dims", "sigma_ABA", "sigma_BCC", "povms"}:
        raise ModelError("model must have exactly the fields dims, sigma_ABA, sigma_BCC, povms")
    povm_obj = obj["povms"]
    if not isinstance(povm_obj, dict) or set(povm_obj) != set("ABC"):
        raise ModelError("'povms' must map each of A, B, C to a list of settings")
    povms = tuple(tuple(tuple(_mat_from_json(el) for el in povm) for povm in povm_obj[party])
                  for party in "ABC")
    return QuantumModel(tuple(obj["dims"]), _mat_from_json(obj["sigma_ABA"]),
                        _mat_from_json(obj["sigma_BCC"]), povms)
