"""Bilocal measurement scenarios and observed distributions.

A distribution is stored as a dense tensor ``p[a, b, c, x, y, z]`` of
conditional probabilities p(abc|xyz). The text format is JSON with the
tensor nested in the order ``[x][y][z][a][b][c]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

NORMALIZATION_TOL = 1e-9

PARTIES = "ABC"


class DistributionError(ValueError):
    """Raised when a serialized or in-memory distribution is invalid."""


@dataclass(frozen=True)
class Scenario:
    settings: tuple[int, int, int]
    outcomes: tuple[int, int, int]

    def __post_init__(self):
        settings = tuple(int(s) for s in self.settings)
        outcomes = tuple(int(o) for o in self.outcomes)
        if len(settings) != 3 or len(outcomes) != 3:
            raise DistributionError("scenario needs exactly three setting and outcome counts")
        if min(settings + outcomes) < 1:
            raise DistributionError(f"all counts must be >= 1, got settings={settings} outcomes={outcomes}")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "outcomes", outcomes)

    @classmethod
    def binary(cls, settings: int = 1) -> "Scenario":
        return cls((settings,) * 3, (2, 2, 2))

    @property
    def letters_per_copy(self) -> int:
        return sum(m * k for m, k in zip(self.settings, self.outcomes))

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the probability tensor p[a, b, c, x, y, z]."""
        return self.outcomes + self.settings


@dataclass(frozen=True, eq=False)
class Distribution:
    scenario: Scenario
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64)
        if p.shape != self.scenario.shape:
            raise DistributionError(f"tensor shape {p.shape} does not match scenario shape {self.scenario.shape}")
        validate_tensor(p)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.scenario == other.scenario and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.scenario, self.p.tobytes()))

    def prob(self, a: int, b: int, c: int, x: int, y: int, z: int) -> float:
        return float(self.p[a, b, c, x, y, z])


def validate_tensor(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(p))[0])
        raise DistributionError(f"non-finite entry at index (a,b,c,x,y,z)={idx}")
    if np.any(p < 0):
        idx = tuple(int(i) for i in np.argwhere(p < 0)[0])
        raise DistributionError(f"negative entry {p[idx]!r} at index (a,b,c,x,y,z)={idx}")
    sums = p.sum(axis=(0, 1, 2))
    resid = np.abs(sums - 1.0)
    if np.any(resid > NORMALIZATION_TOL):
        xyz = tuple(int(i) for i in np.unravel_index(np.argmax(resid), resid.shape))
        raise DistributionError(
            f"normalization residual {resid[xyz]:.3g} at settings (x,y,z)={xyz}")


def uniform_distribution(scenario: Scenario) -> Distribution:
    kA, kB, kC = scenario.outcomes
    return Distribution(scenario, np.full(scenario.shape, 1.0 / (kA * kB * kC)))


def shared_bit_distribution() -> Distribution:
    """A and C output one shared uniform bit, B is trivial."""
    scen = Scenario((1, 1, 1), (2, 1, 2))
    p = np.zeros(scen.shape)
    p[0, 0, 0] = p[1, 0, 1] = 0.5
    return Distribution(scen, p)


_FIELDS = {"scenario", "p"}
_SCENARIO_FIELDS = {"settings", "outcomes"}


def _schema_error(msg: str) -> DistributionError:
    return DistributionError(f"schema violation: {msg}")


def parse_distribution(text: str) -> Distribution:
    """Parse the JSON text format into a validated :class:`Distribution`."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _schema_error(str(exc)) from exc
    return distribution_from_dict(obj)


def distribution_from_dict(obj: Any) -> Distribution:
    if not isinstance(obj, dict):
        raise _schema_error("top level must be an object")
    unknown = set(obj) - _FIELDS
    if unknown:
        raise _schema_error(f"unknown fields {sorted(unknown)}")
    missing = _FIELDS - set(obj)
    if missing:
        raise _schema_error(f"missing fields {sorted(missing)}")
    scen = obj["scenario"]
    if not isinstance(scen, dict):
        raise _schema_error("'scenario' must be an object")
    if set(scen) != _SCENARIO_FIELDS:
        raise _schema_error(f"'scenario' must have exactly the fields {sorted(_SCENARIO_FIELDS)}")
    for key in _SCENARIO_FIELDS:
        vals = scen[key]
        if (not isinstance(vals, list) or len(vals) != 3
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals)):
            raise _schema_error(f"'scenario.{key}' must be a list of three integers")
    scenario = Scenario(tuple(scen["settings"]), tuple(scen["outcomes"]))

    mA, mB, mC = scenario.settings
    kA, kB, kC = scenario.outcomes
    nested_shape = (mA, mB, mC, kA, kB, kC)
    flat = np.empty(nested_shape)

    def walk(node, depth, idx):
        if depth == len(nested_shape):
            if isinstance(node, bool) or not isinstance(node, (int, float)):
                raise _schema_error(f"entry at [x][y][z][a][b][c]={idx} is not a number")
            flat[idx] = float(node)
            return
        if not isinstance(node, list) or len(node) != nested_shape[depth]:
            raise _schema_error(f"array at depth {depth} (prefix {idx}) must have length {nested_shape[depth]}")
        for i, child in enumerate(node):
            walk(child, depth + 1, idx + (i,))

    walk(obj["p"], 0, ())
    return Distribution(scenario, flat.transpose(3, 4, 5, 0, 1, 2))


def distribution_to_dict(d: Distribution) -> dict:
    nested = d.p.transpose(3, 4, 5, 0, 1, 2)
    return {
        "scenario": {"settings": list(d.scenario.settings), "outcomes": list(d.scenario.outcomes)},
        "p": nested.tolist(),
    }


def serialize_distribution(d: Distribution) -> str:
    # json emits repr() of floats, which round-trips bit-exactly
    return json.dumps(distribution_to_dict(d)) + "\n"


def marginal_ac(d: Distribution, return_deviation: bool = False):
    """A-C marginal q[a, c, x, z], averaged uniformly over Bob's setting.

    With ``return_deviation`` the maximal deviation of the per-y marginals
    from the average is returned as well; it is zero for no-signaling input.
    """
    per_y = d.p.sum(axis=1)  # [a, c, x, y, z]
    q = per_y.mean(axis=3)
    if return_deviation:
        dev = float(np.max(np.abs(per_y - q[:, :, :, None, :])))
        return q, dev
    return q


def factorization_residual(d: Distribution) -> float:
    """max |q(ac|xz) - qA(a|x) qC(c|z)| over the A-C marginal."""
    q = marginal_ac(d)
    qa = q.sum(axis=1)  # [a, x, z]; independent of z for no-signaling input
    qc = q.sum(axis=0)  # [c, x, z]
    prod = qa[:, None, :, :] * qc[None, :, :, :]
    return float(np.max(np.abs(q - prod)))
