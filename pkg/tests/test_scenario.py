import json
import random

import pytest

from swarmrank.errors import InvalidNetwork, ScenarioFormatError
from swarmrank.scenario import dumps_network, load_network, network_from_dict, network_to_dict

from scenarios import population, small_scenario


@pytest.mark.parametrize("seed", range(10))
def test_roundtrip_is_byte_stable(seed, tmp_path):
    rng = random.Random(seed)
    net = population(rng) if seed % 2 else small_scenario(rng, single=seed % 4 == 0)[0]
    text = dumps_network(net)
    again = network_from_dict(json.loads(text))
    assert dumps_network(again) == text
    assert again.edges == net.edges
    assert again.nodes == net.nodes


def test_extensions_roundtrip():
    data = {
        "schema": "multiple-domains",
        "extensions": {"pro": [["human", "solution"]]},
        "nodes": [{"id": "h0", "sort": "human"}, {"id": "p0", "sort": "problem"},
                  {"id": "s0", "sort": "solution", "parent": "p0", "payload": 3.5}],
        "edges": [{"source": "h0", "label": "pro", "target": "s0", "weight": 1}],
    }
    net = network_from_dict(data)
    assert net.node("s0").payload == 3.5
    assert network_to_dict(net)["extensions"] == {"pro": [["human", "solution"]]}


@pytest.mark.parametrize("data, fragment", [
    ([], "JSON object"),
    ({"schema": "flat"}, "unknown schema"),
    ({"nodes": [{"id": "h0", "sort": "human", "age": 3}]}, "age"),
    ({"nodes": [{"id": "h0", "sort": "robot"}]}, "robot"),
    ({"nodes": [{"id": "h0", "sort": "human"}, {"id": "h0", "sort": "human"}]}, "h0"),
    ({"nodes": [{"id": "h0", "sort": "human"}, {"id": "h1", "sort": "human"}],
      "edges": [{"source": "h0", "label": "x", "target": "h1", "weight": "1"}]}, "number"),
    ({"nodes": [{"id": "h0", "sort": "human"}, {"id": "p0", "sort": "problem"},
                {"id": "s0", "sort": "solution", "parent": "p0"}],
      "edges": [{"source": "h0", "label": "votedOn", "target": "s0", "weight": 1},
                {"source": "h0", "label": "votedOn", "target": "s0", "weight": 2}]}, "duplicate"),
])
def test_format_errors(data, fragment):
    with pytest.raises(ScenarioFormatError) as err:
        network_from_dict(data)
    assert fragment in str(err.value)


def test_semantic_errors_are_collected():
    data = {"nodes": [{"id": "h0", "sort": "human"}, {"id": "d0", "sort": "domain", "name": "A"}],
            "edges": [{"source": "h0", "label": "votedOn", "target": "d0", "weight": -1}]}
    with pytest.raises(InvalidNetwork) as err:
        network_from_dict(data)
    kinds = sorted(v.kind for v in err.value.violations)
    assert kinds == ["MissingOwner", "NegativeWeight", "SchemaViolation"]
    assert len(network_from_dict(data, strict=False).validate()) == 3


def test_load_network(tmp_path):
    path = tmp_path / "g.json"
    path.write_text("[1,")
    with pytest.raises(ScenarioFormatError):
        load_network(path)
