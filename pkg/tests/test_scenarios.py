import json

import numpy as np
import pytest

from cdrshift.exceptions import InvalidDistribution, InvalidInput
from cdrshift.scenarios import BUILTIN, load_scenario, scenario_from_dict, scenario_to_dict


@pytest.mark.parametrize("name", BUILTIN)
def test_builtin_scenarios_round_trip(name, tmp_path):
    sc = load_scenario(name)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(scenario_to_dict(sc)))
    again = load_scenario(str(path))
    x = sc.domain.nodes[:: max(1, sc.domain.size // 200)]
    np.testing.assert_allclose(again.source.posterior(x), sc.source.posterior(x), rtol=1e-12)
    np.testing.assert_allclose(sc.source.posterior(x), sc.phi(sc.target.posterior(x)), atol=1e-9)
    assert again.alpha == sc.alpha


def test_builtin_lookup_is_case_insensitive():
    assert load_scenario("s4") is load_scenario("S4")


def test_expected_builtin_thresholds():
    from cdrshift.oracle import optimal_cdr_set

    s1 = load_scenario("S1")
    assert optimal_cdr_set(s1.source, s1.target, s1.alpha).threshold == pytest.approx(0.47)
    s3 = load_scenario("S3")
    assert optimal_cdr_set(s3.source, s3.target, 0.25).threshold == pytest.approx(0.9608, abs=1e-4)


def test_unknown_scenario():
    with pytest.raises(InvalidInput):
        load_scenario("S99")


def test_bad_scenario_fields():
    base = {
        "domain": {"kind": "DiscreteGrid", "points": [[0], [1]]},
        "prior": 0.5,
        "density0": {"family": "TablePmf", "params": [0.7, 0.3]},
        "density1": {"family": "TablePmf", "params": [0.3, 0.7]},
    }
    assert scenario_from_dict(base).alpha == 0.25
    with pytest.raises(InvalidInput):
        scenario_from_dict({**base, "alpha": 1.0})
    with pytest.raises(InvalidDistribution):
        scenario_from_dict({**base, "domain": {"kind": "Sphere"}})
    with pytest.raises(InvalidDistribution):
        scenario_from_dict({**base, "density0": {"family": "Cauchy", "params": []}})
