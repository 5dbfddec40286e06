import json

import numpy as np
import pytest

from bilocal.oracle import entanglement_swapping_model, random_classical_bilocal, simulate_distribution
from bilocal.scenario import (Distribution, DistributionError, Scenario, factorization_residual, marginal_ac,
                              parse_distribution, serialize_distribution, shared_bit_distribution,
                              uniform_distribution)


def _text(settings, outcomes, p_nested):
    return json.dumps({"scenario": {"settings": settings, "outcomes": outcomes}, "p": p_nested})


def _binary_nested(cells):
    """Nested [x][y][z][a][b][c] list for single settings from a dict (a, b, c) -> value."""
    return [[[[[[cells.get((a, b, c), 0.0) for c in range(2)] for b in range(2)] for a in range(2)]]]]


def test_scenario_rejects_zero_counts():
    with pytest.raises(DistributionError):
        Scenario((1, 0, 1), (2, 2, 2))


def test_letters_per_copy():
    assert Scenario((2, 1, 3), (2, 4, 2)).letters_per_copy == 4 + 4 + 6


def test_parse_uniform():
    d = parse_distribution(_text([1, 1, 1], [2, 2, 2], _binary_nested({k: 0.125 for k in np.ndindex(2, 2, 2)})))
    assert d.p.shape == (2, 2, 2, 1, 1, 1)
    assert np.all(d.p == 0.125)


def test_parse_point_mass():
    d = parse_distribution(_text([1, 1, 1], [2, 2, 2], _binary_nested({(0, 0, 0): 1.0})))
    assert d.prob(0, 0, 0, 0, 0, 0) == 1.0
    assert d.p.sum() == 1.0


def test_normalization_error_reports_residual():
    text = _text([1, 1, 1], [2, 2, 2], _binary_nested({(0, 0, 0): 0.6, (1, 1, 1): 0.5}))
    with pytest.raises(DistributionError, match=r"residual 0\.1"):
        parse_distribution(text)


def test_negative_entry_reports_index():
    with pytest.raises(DistributionError, match=r"\(a,b,c,x,y,z\)=\(1, 0, 0, 0, 0, 0\)"):
        parse_distribution(_text([1, 1, 1], [2, 2, 2], _binary_nested({(0, 0, 0): 1.1, (1, 0, 0): -0.1})))


@pytest.mark.parametrize("obj", [
    {"scenario": {"settings": [1, 1, 1], "outcomes": [1, 1, 1]}, "p": [[[[[[1.0]]]]]], "extra": 1},
    {"scenario": {"settings": [1, 1, 1], "outcomes": [1, 1, 1]}},
    {"scenario": {"settings": [1, 1], "outcomes": [1, 1, 1]}, "p": [[[[[[1.0]]]]]]},
    {"scenario": {"settings": [1, 1, 1], "outcomes": [1, 1, 1], "x": 0}, "p": [[[[[[1.0]]]]]]},
    {"scenario": {"settings": [1, 1, 1], "outcomes": [1, 1, 1]}, "p": [[[[[1.0]]]]]},
    {"scenario": {"settings": [1, 1, 1], "outcomes": [1, 1, 1]}, "p": [[[[[["1.0"]]]]]]},
    [1, 2, 3],
])
def test_schema_violations(obj):
    with pytest.raises(DistributionError, match="schema violation"):
        parse_distribution(json.dumps(obj))


def test_invalid_json():
    with pytest.raises(DistributionError):
        parse_distribution("{not json")


def test_round_trip_bit_exact():
    rng = np.random.default_rng(3)
    scen = Scenario((2, 1, 3), (3, 2, 2))
    raw = rng.random(scen.shape)
    raw /= raw.sum(axis=(0, 1, 2), keepdims=True)
    d = Distribution(scen, raw)
    text = serialize_distribution(d)
    back = parse_distribution(text)
    assert back == d
    assert serialize_distribution(back) == text


def test_json_layout_is_settings_first():
    scen = Scenario((2, 1, 1), (2, 1, 1))
    p = np.zeros(scen.shape)
    p[0, 0, 0, 0] = 1.0
    p[1, 0, 0, 1] = 1.0
    obj = json.loads(serialize_distribution(Distribution(scen, p)))
    assert obj["p"][0][0][0] == [[[1.0]], [[0.0]]]
    assert obj["p"][1][0][0] == [[[0.0]], [[1.0]]]


def test_marginal_of_uniform():
    q = marginal_ac(uniform_distribution(Scenario.binary()))
    assert np.allclose(q, 0.25)


def test_marginal_and_residual_of_shared_bit():
    d = shared_bit_distribution()
    q = marginal_ac(d)[:, :, 0, 0]
    assert np.array_equal(q, [[0.5, 0.0], [0.0, 0.5]])
    assert factorization_residual(d) == pytest.approx(0.25, abs=1e-15)


def test_marginal_of_entanglement_swapping():
    q = marginal_ac(simulate_distribution(entanglement_swapping_model()))
    assert np.allclose(q, 0.25, atol=1e-12)


def test_marginal_averages_over_bob_setting_and_reports_deviation():
    d = random_classical_bilocal(5, Scenario((2, 3, 2), (2, 2, 2)))
    q, dev = marginal_ac(d, return_deviation=True)
    assert dev <= 1e-12
    assert np.allclose(q.sum(axis=(0, 1)), 1.0, atol=1e-9)


def test_residual_of_uniform_is_zero():
    assert factorization_residual(uniform_distribution(Scenario.binary(2))) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_residual_of_classical_bilocal(seed):
    scen = Scenario((2, 2, 2), (2, 3, 2))
    assert factorization_residual(random_classical_bilocal(seed, scen)) <= 1e-12
