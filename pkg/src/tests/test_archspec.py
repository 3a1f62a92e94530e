import os

import pytest

from npas import config
from npas import exceptions
from npas import types
from npas.core import archspec

MLP = """
network:
  input_shape: [784]
  layers:
    - {id: fc1, kind: dense, shape: [256, 784]}
    - {id: fc2, kind: dense, shape: [10, 256], activation: none}
"""

CONVS = """
network:
  input_shape: [3, 8, 8]
  layers:
    - {id: conv1, kind: conv2d, shape: [16, 3, 3, 3], padding: 1}
    - {id: conv2, kind: conv2d, shape: [16, 16, 3, 3], padding: 1}
    - {id: head, kind: dense, shape: [10, 1024], activation: softmax}
"""


def budget(total):
    return types.BudgetSpec(total_params=total)


def test_parse_network_config():

    net = archspec.parse_network_config(MLP)

    assert net.weight_counts == [200704, 2560]
    assert net.num_classes == 10
    assert archspec.largest_layer_weights(net) == 200704

    net = archspec.parse_network_config(CONVS)

    assert net.weight_counts[:2] == [432, 2304]
    assert archspec.largest_layer_weights(net) == 10240
    assert net.total_biases == 16 + 16 + 10


def test_parse_errors_name_the_layer():

    duplicate = MLP.replace("id: fc2", "id: fc1")

    with pytest.raises(exceptions.ParseError) as error:
        archspec.parse_network_config(duplicate)

    assert "fc1" in str(error.value)

    with pytest.raises(exceptions.ParseError) as error:
        archspec.parse_network_config(MLP.replace("[10, 256]", "[10, 255]"))

    assert "fc2" in str(error.value)

    with pytest.raises(exceptions.ParseError) as error:
        archspec.parse_network_config(MLP.replace("kind: dense, shape: [256", "kind: lstm, shape: [256"))

    assert "fc1" in str(error.value)

    with pytest.raises(exceptions.ParseError):
        archspec.parse_network_config("network: [1, 2")


def test_round_trip():

    for text in (MLP, CONVS):
        net = archspec.parse_network_config(text)

        assert archspec.parse_network_config(archspec.serialize_network(net)) == net


def test_classify_regime():

    net = archspec.parse_network_config(
        """
        input_shape: [10]
        layers:
          - {id: a, kind: dense, shape: [50, 10]}
          - {id: b, kind: dense, shape: [10, 50], activation: none}
        """
    )

    assert net.total_weights == 1000
    assert archspec.classify_regime(net, budget(250)) == archspec.REGIME_LB
    assert archspec.classify_regime(net, budget(4000)) == archspec.REGIME_HB
    assert archspec.classify_regime(net, budget(1000)) == archspec.REGIME_EXACT


def test_largest_layer_weights():

    single = archspec.parse_network_config(
        """
        input_shape: [3, 4, 4]
        layers:
          - {id: c, kind: conv2d, shape: [16, 3, 3, 3], padding: 1}
        """
    )

    assert archspec.largest_layer_weights(single) == 432


def test_budget_from_dict():

    net = archspec.parse_network_config(MLP)

    assert archspec.budget_from_dict({"fraction": 0.25}, net).total_params == (200704 + 2560) // 4
    assert archspec.budget_from_dict({"fraction": 0.1}, net).total_params == 20326

    parsed = archspec.budget_from_dict({"total_params": 5000, "groups": 2, "templates": 4, "combiner": "wavg"}, net)

    assert (parsed.num_groups, parsed.max_templates, parsed.combiner) == (2, 4, "wavg")
    assert parsed.upsampler == config.DEFAULT_UPSAMPLER
    assert parsed.mask_window == 9 and parsed.emb_dim == 24

    with pytest.raises(exceptions.ParseError):
        archspec.budget_from_dict({"total_params": 5000, "combiner": "mlp"}, net)

    with pytest.raises(exceptions.ParseError):
        archspec.budget_from_dict({"groups": 2}, net)


def test_experiment_config(tmp_path):

    path = tmp_path / "experiment.yaml"
    path.write_text(
        MLP + """
budget: {total_params: 5000}
train: {epochs: 3, seed: 9}
data: {name: "csv:data/train.csv", eval_fraction: 0.5}
mapping: {mode: manual, file: mapping.yaml}
seed: 4
""",
        encoding="utf-8"
    )

    cfg = archspec.load_experiment(str(path))

    assert cfg.seed == 4 and cfg.train.seed == 4
    assert cfg.train.epochs == 3 and cfg.train.lr == config.TRAIN_LR
    assert cfg.data.name == "csv:" + os.path.join(str(tmp_path), "data", "train.csv")
    assert cfg.data.eval_fraction == 0.5
    assert cfg.mapping.file == os.path.join(str(tmp_path), "mapping.yaml")
    assert cfg.output == os.path.join(str(tmp_path), "runs")

    with pytest.raises(exceptions.ParseError):
        archspec.parse_experiment_config(MLP + "budget: {total_params: 10}\nmapping: {mode: manual}\n")

    with pytest.raises(exceptions.ParseError):
        archspec.parse_experiment_config(MLP + "budget: {total_params: 10}\ntrain: {epoch: 3}\n")


def test_non_integer_and_non_string_fields_are_rejected():

    with pytest.raises(exceptions.ParseError) as error:
        archspec.parse_network_config(MLP.replace("shape: [256, 784]", "shape: [true, 784]"))

    assert "fc1" in str(error.value)

    with pytest.raises(exceptions.ParseError):
        archspec.parse_network_config(MLP.replace("input_shape: [784]", "input_shape: [true]"))

    with pytest.raises(exceptions.ParseError):
        archspec.parse_network_config(CONVS.replace("padding: 1}", "padding: false}", 1))

    with pytest.raises(exceptions.ParseError):
        archspec.parse_experiment_config(MLP + "budget: {total_params: true}\n")

    with pytest.raises(exceptions.ConfigError) as error:
        archspec.parse_experiment_config(MLP + "budget: {total_params: 10}\ndata: {name: 5}\n")

    assert isinstance(error.value, exceptions.ParseError)
    assert "data" in str(error.value)

def test_packaged_configs_load():

    cnn = archspec.load_experiment(config.PATH_REFERENCE_CNN)
    mlp = archspec.load_experiment(config.PATH_BLOBS_MLP)

    assert cnn.network.total_weights == 2072 and cnn.budget.total_params == 518
    assert mlp.network.weight_counts == [8192, 16384, 1280]
    assert mlp.budget.total_params == 25856 // 4
