import json

import pytest

from twinchain.config import ConfigError, SimConfig, small_net_config, large_net_config


def test_reference_configs():
    c4, c5 = small_net_config(1), large_net_config(1)
    assert (c4.nodes, c4.peers_per_node, c4.num_tx, c4.tx_size, c4.block_size, c4.tps) == (10, 5, 1000, 0.05, 1.0, 100)
    assert (c4.bandwidth.mean, c4.bandwidth.std) == (20.0, 5.0)
    assert (c5.nodes, c5.peers_per_node, c5.tps) == (50, 10, 50)


def test_json_round_trip(tmp_path):
    c = small_net_config(3)
    path = tmp_path / "c.json"
    path.write_text(c.to_json())
    assert SimConfig.load(path) == c
    assert SimConfig.load(path, seed=9).seed == 9
    assert json.loads(c.to_json())["bandwidth"] == {"mean": 20.0, "std": 5.0}


@pytest.mark.parametrize("field,value,needle", [
    ("nodes", 1, "nodes:"),
    ("peers_per_node", 10, "peers_per_node:"),
    ("tx_size", 0, "tx_size:"),
    ("block_size", 0.01, "block_size:"),
    ("tps", -1, "tps:"),
    ("bandwidth_mean", 0, "bandwidth.mean:"),
    ("consensus", "PoW", "consensus:"),
    ("workload_mode", "bursty", "workload_mode:"),
])
def test_invalid_fields_are_named(field, value, needle):
    with pytest.raises(ConfigError, match=needle):
        small_net_config(1, **{field: value})


def test_unknown_and_missing_fields():
    d = small_net_config(1).to_dict()
    with pytest.raises(ConfigError, match="unknown config fields: colour"):
        SimConfig.from_dict({**d, "colour": 1})
    d.pop("seed")
    with pytest.raises(ConfigError, match="missing config fields: seed"):
        SimConfig.from_dict(d)
