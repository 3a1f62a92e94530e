import json
import os
import struct

import numpy
import pytest

from npas import config
from npas import exceptions
from npas import types
from npas.core import archspec
from npas.core import autodiff
from npas.core import checkpoints
from npas.core import datasets
from npas.core import harness
from npas.core import models
from npas.core import training

SMALL_MLP = """
network:
  input_shape: [4]
  layers:
    - {{id: fc1, kind: dense, shape: [8, 4]}}
    - {{id: fc2, kind: dense, shape: [3, 8], activation: none}}
budget: {{total_params: {total}, templates: 4, combiner: emb, upsampler: mask}}
train: {{epochs: 2, batch_size: 16, lr: 0.05}}
data: {{name: blobs, samples: 120, eval_fraction: 0.25, center_scale: 3.0}}
mapping: {{mode: {mode}}}
seed: {seed}
output: runs
"""


def experiment(tmp_path, total=224, mode="single", seed=0):

    path = tmp_path / "experiment.yaml"
    path.write_text(SMALL_MLP.format(total=total, mode=mode, seed=seed), encoding="utf-8")

    return archspec.load_experiment(str(path))


def dense_net(*shapes, activation="relu"):

    layers = types.Layers([
        types.LayerSpec(
            id=f"fc{index + 1}",
            kind="dense",
            weight_shape=list(shape),
            activation=activation if index < len(shapes) - 1 else "none"
        )
        for index, shape in enumerate(shapes)
    ])

    return types.NetworkSpec(layers=layers, input_shape=[shapes[0][1]], num_classes=shapes[-1][0])


def identity_mapping(net):

    return types.GroupMapping(
        assignment={layer_id: index for index, layer_id in enumerate(net.layers.ids())},
        groups=len(net.layers),
        provenance="manual"
    )


def exact_model(net, seed=0):
    return models.SharedModel(net, types.BudgetSpec(total_params=net.total_weights), identity_mapping(net), seed=seed)


def test_forward_identity_regime_matches_plain():

    batch = autodiff.Tensor(numpy.random.default_rng(0).standard_normal((6, 5)))

    for net in (dense_net((3, 5)), dense_net((7, 5), (4, 7), (3, 4))):
        shared = exact_model(net, seed=4)
        plain = models.PlainModel(net, seed=4)

        assert all(plan.case == "identity" for plan in shared.state.plans.values())
        numpy.testing.assert_array_equal(shared.logits(batch).data, plain.logits(batch).data)


def test_forward_batch_independence():

    net = dense_net((7, 5), (4, 7))
    model = models.SharedModel(net, types.BudgetSpec(total_params=20), types.GroupMapping({"fc1": 0, "fc2": 0}, 1, "single"), seed=1)
    batch = numpy.random.default_rng(1).standard_normal((8, 5))

    full = model.logits(autodiff.Tensor(batch)).data

    for row in range(8):
        alone = model.logits(autodiff.Tensor(batch[row:row + 1])).data

        numpy.testing.assert_allclose(alone[0], full[row], rtol=1e-12, atol=1e-12)


def test_forward_by_hand():

    net = dense_net((2, 2), (1, 2))
    model = exact_model(net)

    model.groups[0].theta.data = numpy.array([1.0, 2.0, 3.0, 4.0])
    model.groups[1].theta.data = numpy.array([2.0, -1.0])
    model.biases["fc1"].data = numpy.array([0.5, -10.0])
    model.biases["fc2"].data = numpy.array([1.0])

    # relu([1 + 2 + 0.5, 3 + 4 - 10]) = [3.5, 0]; 2 * 3.5 - 0 + 1 = 8
    assert model.logits(autodiff.Tensor([[1.0, 1.0]])).tolist() == [[8.0]]

    with pytest.raises(exceptions.DimensionError) as error:
        model.logits(autodiff.Tensor([[1.0, 1.0, 1.0]]))

    assert error.value.subject == "fc1"


def test_forward_flattens_convolutions():

    net = archspec.parse_network_config(
        """
        input_shape: [2, 4, 4]
        layers:
          - {id: conv, kind: conv2d, shape: [3, 2, 3, 3], padding: 1}
          - {id: head, kind: dense, shape: [5, 48], activation: none}
        """
    )
    model = models.PlainModel(net, seed=0)

    assert model.logits(autodiff.Tensor(numpy.ones((2, 2, 4, 4)))).shape == (2, 5)


def test_error_at_k():

    logits = numpy.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])

    assert training.error_at_k(logits, [2, 2], 1) == 0.5
    assert training.error_at_k(logits, [2, 2], 3) == 0.0

    # ties resolve to the lower class index
    assert training.error_at_k(numpy.zeros((1, 3)), [0], 1) == 0.0
    assert training.error_at_k(numpy.zeros((1, 3)), [1], 1) == 1.0

    with pytest.raises(exceptions.ArgumentError):
        training.error_at_k(logits, [0, 0], 0)


def blob_data(features=5, classes=3, n=96):
    return datasets.blobs(seed=0, n=n, classes=classes, features=features, center_scale=3.0)


def test_zero_learning_rate_freezes_parameters():

    net = dense_net((6, 5), (3, 6))
    model = models.SharedModel(net, types.BudgetSpec(total_params=40, combiner="wavg"), types.GroupMapping({"fc1": 0, "fc2": 0}, 1, "single"))
    before = {name: tensor.data.copy() for name, tensor in model.named_parameters()}

    training.fit(model, blob_data(), types.TrainSpec(epochs=1, lr=0.0, batch_size=16))

    for name, tensor in model.named_parameters():
        numpy.testing.assert_array_equal(tensor.data, before[name])


@pytest.mark.parametrize("seed", range(10))
def test_exact_regime_trajectory_matches_plain(seed):

    net = dense_net((6, 5), (4, 6), (3, 4))
    spec = types.TrainSpec(epochs=3, batch_size=16, seed=seed)
    data = blob_data()

    shared = exact_model(net, seed=seed)
    plain = models.PlainModel(net, seed=seed)

    shared_metrics = training.fit(shared, data, spec)
    plain_metrics = training.fit(plain, data, spec)

    assert [record.train_loss for record in shared_metrics] == [record.train_loss for record in plain_metrics]

    for index, layer in enumerate(net.layers):
        numpy.testing.assert_array_equal(shared.groups[index].theta.data.reshape(layer.weight_shape), plain.weights[layer.id].data)


def test_low_budget_training_reduces_loss():

    net = dense_net((16, 8), (4, 16))
    budget = types.BudgetSpec(total_params=(128 + 64) // 4, combiner="emb", upsampler="mask")
    model = models.SharedModel(net, budget, types.GroupMapping({"fc1": 0, "fc2": 0}, 1, "single"), seed=0)
    data = datasets.blobs(seed=3, n=256, classes=4, features=8, center_scale=3.0)

    initial = training.evaluate(model, data).loss
    metrics = training.fit(model, data, types.TrainSpec(epochs=5, batch_size=32, lr=0.05))

    assert training.evaluate(model, data).loss < initial
    assert metrics.last().params_theta == 48
    assert all(record.params_total == metrics[0].params_total for record in metrics)


def test_evaluate_threads_agree():

    net = dense_net((6, 5), (6, 6))
    model = models.PlainModel(net, seed=3)
    data = blob_data(classes=6, n=100)

    single = training.evaluate(model, data, batch_size=7, threads=1)
    threaded = training.evaluate(model, data, batch_size=7, threads=4)

    assert single == threaded
    assert single.samples == 100 and single.error_at_5 is not None
    assert training.evaluate(models.PlainModel(dense_net((3, 5)), seed=0), blob_data()).error_at_5 is None


def test_train_and_materialize(tmp_path):

    cfg = experiment(tmp_path, total=4 * (32 + 24))
    result = harness.train(cfg, out=str(tmp_path / "run"))

    assert archspec.classify_regime(cfg.network, cfg.budget) == archspec.REGIME_HB
    assert result.model.census().theta == 224
    assert set(result.paths) == {"metrics", "checkpoint", "mapping"}

    loaded, meta = harness.load_model(result.paths["checkpoint"])
    batch = autodiff.Tensor(result.eval_set.features)

    assert meta["kind"] == "shared"
    numpy.testing.assert_array_equal(loaded.logits(batch).data, result.model.logits(batch).data)

    frozen, path = harness.materialize(result.paths["checkpoint"])

    assert path == os.path.join(str(tmp_path / "run"), config.WEIGHTS_NAME)
    assert frozen.census().theta == cfg.network.total_weights == 56
    numpy.testing.assert_array_equal(frozen.logits(batch).data, loaded.logits(batch).data)

    with open(file=path, mode="rb") as file:
        content = file.read()

    header_length, = struct.unpack("<I", content[8:12])

    assert len(content) == 12 + header_length + 8 * 56

    reread = checkpoints.read_weights(path)

    numpy.testing.assert_array_equal(reread.logits(batch).data, loaded.logits(batch).data)

    from_checkpoint = harness.evaluate_run(checkpoint_path=result.paths["checkpoint"])
    from_weights = harness.evaluate_run(weights_path=path, cfg=cfg)

    assert from_checkpoint == from_weights
    assert from_checkpoint.samples == 30

    with pytest.raises(exceptions.ArgumentError):
        harness.evaluate_run(weights_path=path)


@pytest.mark.parametrize("seed, total", [(0, 24), (1, 56), (2, 100), (3, 224), (4, 37)])
def test_materialized_logits_are_bitwise_equal(tmp_path, seed, total):

    cfg = experiment(tmp_path, total=total, seed=seed)
    result = harness.train(cfg, out=str(tmp_path / "run"))
    batch = autodiff.Tensor(result.eval_set.features)
    trained = result.model.logits(batch).data

    frozen, path = harness.materialize(result.paths["checkpoint"])

    numpy.testing.assert_array_equal(frozen.logits(batch).data, trained)
    numpy.testing.assert_array_equal(checkpoints.read_weights(path).logits(batch).data, trained)


def test_metrics_are_deterministic(tmp_path):

    cfg = experiment(tmp_path, total=28)

    first = harness.train(cfg, out=str(tmp_path / "a"))
    second = harness.train(cfg, out=str(tmp_path / "b"))

    with open(file=first.paths["metrics"], mode="rb") as a, open(file=second.paths["metrics"], mode="rb") as b:
        content = a.read()

        assert content == b.read()

    records = [json.loads(line) for line in content.decode("utf-8").splitlines()]

    assert [record["epoch"] for record in records] == [0, 1]
    assert all(record["wall_time_ms"] == 0 for record in records)
    assert all(0.0 <= record["eval_error_at_1"] <= 1.0 for record in records)
    assert records[0]["params_theta"] == 28


def test_train_baselines(tmp_path):

    cfg = experiment(tmp_path, total=28)

    plain = harness.train(cfg, out=str(tmp_path / "plain"), kind="plain")
    reduced = harness.train(cfg, out=str(tmp_path / "reduced"), kind="reduced")

    assert plain.mapping is None and "mapping" not in plain.paths
    assert plain.model.census().theta == 56
    assert reduced.model.census().theta <= 28
    assert harness.load_model(reduced.paths["checkpoint"])[1]["kind"] == "plain"

    with pytest.raises(exceptions.ArgumentError):
        harness.train(cfg, kind="huge")


def test_train_with_learned_mapping(tmp_path):

    path = tmp_path / "experiment.yaml"
    path.write_text(
        SMALL_MLP.format(total=40, mode="auto", seed=1).replace(
            "mapping: {mode: auto}",
            "mapping: {mode: auto, prelim_templates: 2, retain_preliminary: true}"
        ).replace("templates: 4", "templates: 4, groups: 2"),
        encoding="utf-8"
    )
    cfg = archspec.load_experiment(str(path))

    result = harness.train(cfg, out=str(tmp_path / "run"))

    assert result.mapping.provenance == "auto"
    assert os.path.exists(result.paths["preliminary"])
    assert checkpoints.load_checkpoint(result.paths["preliminary"]).meta["kind"] == "preliminary"


def test_check_census():

    net = dense_net((6, 5), (3, 6))
    model = models.SharedModel(net, types.BudgetSpec(total_params=30), types.GroupMapping({"fc1": 0, "fc2": 0}, 1, "single"))

    assert harness.check_census(model).total == 30 + model.census().overhead + 9

    model.budget = model.budget.replace(total_params=31)

    with pytest.raises(exceptions.ContractViolationError):
        harness.check_census(model)


def test_reference_cnn_report():

    cfg = archspec.load_experiment(config.PATH_REFERENCE_CNN)
    document = harness.report(cfg)

    assert document["regime"] == archspec.REGIME_LB
    assert document["budget"] == 518 and document["network_weights"] == 2072
    assert [layer["case"] for layer in document["layers"]] == ["downsample", "upsample", "upsample"]
    assert [layer["flops_weightgen"] for layer in document["layers"]] == [528, 58, 762]
    assert [layer["flops_forward"] for layer in document["layers"]] == [10584, 9216, 1280]

    flops = document["flops"]

    assert flops["weightgen"] == 1348 and flops["forward"] == 21080
    assert abs(flops["ratio_per_image"] - 1348 / 21080) <= 1e-12
    assert flops["batch_size"] == 64
    assert flops["ratio_per_batch"] == flops["ratio_per_image"] / 64

    assert document["overhead"] == {"coefficients": 24, "projections": 50, "masks": 18, "total": 92, "biases": 26}
    assert document["census"]["total"] == 518 + 92 + 26
    assert "Group 0: 86 of 518 parameters lie outside every template." in document["notes"]
    assert harness.format_report(document).startswith("regime: LB (budget 518 of 2072 weights)")

    amortized = harness.report(cfg, batch_size=8)["flops"]

    assert amortized["ratio_per_batch"] == amortized["ratio_per_image"] / 8


def test_exact_report_has_no_overhead(tmp_path):

    cfg = experiment(tmp_path, total=56)
    document = harness.report(cfg, mapping="single")

    assert document["regime"] == archspec.REGIME_EXACT
    assert [layer["templates"] for layer in document["layers"]] == [1, 2]

    one_layer = archspec.parse_experiment_config(
        """
        network:
          input_shape: [4]
          layers:
            - {id: fc, kind: dense, shape: [3, 4], activation: none}
        budget: {total_params: 12}
        mapping: {mode: single}
        """,
        base_dir=str(tmp_path)
    )
    document = harness.report(one_layer)

    assert document["regime"] == archspec.REGIME_EXACT
    assert document["overhead"]["total"] == 0
    assert document["flops"]["weightgen"] == 0 and document["flops"]["ratio_per_batch"] == 0.0
    assert document["layers"][0]["case"] == "identity"


def test_report_placeholder_mapping(tmp_path):

    cfg = experiment(tmp_path, total=28, mode="auto")
    cfg.budget = cfg.budget.replace(num_groups=2)

    document = harness.report(cfg)

    assert document["mapping"]["provenance"] == "random"
    assert any(note.startswith("No mapping given") for note in document["notes"])


def test_dump_weights(tmp_path):

    net = dense_net((6, 5), (3, 6))
    model = models.SharedModel(net, types.BudgetSpec(total_params=10, upsampler="inter"), types.GroupMapping({"fc1": 0, "fc2": 0}, 1, "single"), seed=2)

    paths = harness.dump_weights(model, str(tmp_path / "weights"))
    generated = model.generate_weights()

    assert [os.path.basename(path) for path in paths] == ["fc1.txt", "fc2.txt"]

    for layer, path in zip(net.layers, paths):
        numpy.testing.assert_array_equal(harness.read_weight_dump(path), generated[layer.id].data)


def test_reduced_baseline():

    cfg = archspec.load_experiment(config.PATH_BLOBS_MLP)
    baseline = harness.reduced_baseline(cfg.network, cfg.budget.total_params)

    assert baseline.network.total_weights <= cfg.budget.total_params
    assert 0.0 < baseline.factor < 1.0
    assert baseline.network.layers[-1].weight_shape[0] == 10
    assert harness.scale_widths(cfg.network, baseline.factor + 0.01).total_weights > cfg.budget.total_params
    assert harness.scale_widths(cfg.network, 1.0) == cfg.network

    with pytest.raises(exceptions.AllocationError):
        harness.reduced_baseline(cfg.network, 10)
