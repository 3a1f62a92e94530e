import logging
import typing

import numpy

from .. import types
from .. import exceptions
from .. import utils
from . import autodiff
from . import paramstore
from . import weightgen

log = logging.getLogger(__name__)


def forward(
    net: types.NetworkSpec,
    weights: typing.Dict[str, autodiff.Tensor],
    biases: typing.Dict[str, typing.Optional[autodiff.Tensor]],
    batch: autodiff.Tensor
) -> autodiff.Tensor:
    """
    Run a batch through the network's layers in declaration order.

    Dense layers flatten their input; a softmax activation on the last layer
    is left to the loss, so the returned logits are pre-softmax.
    """

    x = batch

    for layer in net.layers:
        weight = weights[layer.id]

        try:
            if layer.kind == "conv2d":
                x = autodiff.conv2d(x, weight, stride=layer.stride, padding=layer.padding)
            else:
                if x.ndim != 2:
                    x = autodiff.reshape(x, (x.shape[0], x.size // x.shape[0]))
                x = autodiff.matmul(x, autodiff.transpose(weight))

            bias = biases.get(layer.id)

            if bias is not None:
                x = autodiff.bias_add(x, bias)
        except exceptions.DimensionError as exception:
            raise exceptions.DimensionError(
                message=f"Forward pass failed: {exception.message}",
                subject=layer.id
            ) from exception

        if layer.activation == "relu":
            x = autodiff.relu(x)

    if x.ndim != 2:
        x = autodiff.reshape(x, (x.shape[0], x.size // x.shape[0]))

    return x


def _init_biases(net: types.NetworkSpec) -> typing.Dict[str, typing.Optional[autodiff.Tensor]]:

    return {
        layer.id: (
            autodiff.Tensor(numpy.zeros(layer.bias_count), requires_grad=True, name=f"bias/{layer.id}")
            if layer.has_bias else None
        )
        for layer in net.layers
    }


class Model:
    """
    Common surface of everything the training loop can optimize.
    """

    kind = "model"

    def __init__(self, net: types.NetworkSpec):
        self.net = net
        self.biases = _init_biases(net)


    def generate_weights(self, step_index: typing.Optional[int] = 0) -> typing.Dict[str, autodiff.Tensor]:
        raise NotImplementedError


    def named_parameters(self) -> typing.List[typing.Tuple[str, autodiff.Tensor]]:
        raise NotImplementedError


    def combiner_parameters(self) -> typing.List[autodiff.Tensor]:
        return []


    def census(self) -> types.Census:
        raise NotImplementedError


    def flop_counts(self) -> typing.Tuple[int, int]:
        """
        Forward and weight-generation multiply-adds per image.
        """

        return sum(weightgen.forward_flops(self.net).values()), 0


    def bias_parameters(self) -> typing.List[typing.Tuple[str, autodiff.Tensor]]:
        return [(bias.name, bias) for bias in self.biases.values() if bias is not None]


    def parameters(self) -> typing.List[autodiff.Tensor]:
        return [tensor for _, tensor in self.named_parameters()]


    def logits(self, batch: autodiff.Tensor, step_index: typing.Optional[int] = 0) -> autodiff.Tensor:
        return forward(self.net, self.generate_weights(step_index), self.biases, batch)


    def state_arrays(self) -> typing.Dict[str, numpy.ndarray]:
        return {name: tensor.data for name, tensor in self.named_parameters()}


    def load_state(self, arrays: typing.Dict[str, numpy.ndarray]) -> None:

        for name, tensor in self.named_parameters():
            if name not in arrays:
                raise exceptions.ContractViolationError(message="State lacks a parameter", subject=name)

            if arrays[name].shape != tensor.shape:
                raise exceptions.DimensionError(
                    message=f"Stored shape {arrays[name].shape} differs from {tensor.shape}",
                    subject=name
                )

            tensor.data = numpy.array(arrays[name], dtype=numpy.float64)


class SharedModel(Model):
    """
    A network whose weights are generated every forward pass from P shared
    parameter groups.

    Parameters:

        net (NetworkSpec):
            The target network.

        budget (BudgetSpec):
            Parameter budget and generation settings.

        mapping (GroupMapping):
            Layer to group assignment.

        seed (int | optional):
            Seed of θ and combiner initialization. Defaults to 0.
    """

    kind = "shared"

    def __init__(
        self,
        net: types.NetworkSpec,
        budget: types.BudgetSpec,
        mapping: types.GroupMapping,
        seed: typing.Optional[int] = 0
    ):
        super().__init__(net)

        self.budget = budget
        self.mapping = mapping
        self.groups = paramstore.allocate_groups(net, mapping, budget.total_params, seed=seed)
        self.state = weightgen.init_combiner_state(net, mapping, budget, rng_seed=seed)
        self.state.plans = weightgen.plan_generation(net, self.groups, budget)

        self._group_of = {layer_id: self.groups[group_id] for layer_id, group_id in mapping.assignment.items()}


    def generate(self, step_index: typing.Optional[int] = 0) -> typing.Dict[str, types.GeneratedWeights]:

        return {
            layer.id: weightgen.generate(layer, self._group_of[layer.id], self.state, step_index)
            for layer in self.net.layers
        }


    def generate_weights(self, step_index: typing.Optional[int] = 0) -> typing.Dict[str, autodiff.Tensor]:
        return {layer_id: generated.tensor for layer_id, generated in self.generate(step_index).items()}


    def named_parameters(self) -> typing.List[typing.Tuple[str, autodiff.Tensor]]:

        named = [(group.theta.name, group.theta) for group in self.groups]
        named.extend((tensor.name, tensor) for tensor in self.state.parameters())
        named.extend(self.bias_parameters())

        return named


    def combiner_parameters(self) -> typing.List[autodiff.Tensor]:
        return self.state.parameters()


    def flop_counts(self) -> typing.Tuple[int, int]:

        report = weightgen.weightgen_flops(self.net, self.mapping, self.budget)

        return report.forward, report.weightgen


    def census(self) -> types.Census:

        return types.Census(
            theta=sum(group.size for group in self.groups),
            overhead=sum(tensor.size for tensor in self.state.parameters()),
            biases=sum(tensor.size for _, tensor in self.bias_parameters())
        )


class PlainModel(Model):
    """
    Conventional network with one weight tensor per layer and no sharing.

    Layer i draws its weights from the same stream a one-layer group i would,
    so a SharedModel with the identity mapping starts from identical values.
    """

    kind = "plain"

    def __init__(self, net: types.NetworkSpec, seed: typing.Optional[int] = 0):

        super().__init__(net)

        self.weights = {}

        for index, layer in enumerate(net.layers):
            rng = utils.rng_for(seed, utils.STREAM_THETA, index)
            values = rng.standard_normal(layer.weight_count) * paramstore.init_scale(net, [layer.id])

            self.weights[layer.id] = autodiff.Tensor(
                values.reshape(layer.weight_shape),
                requires_grad=True,
                name=f"weight/{layer.id}"
            )


    def generate_weights(self, step_index: typing.Optional[int] = 0) -> typing.Dict[str, autodiff.Tensor]:
        return dict(self.weights)


    def named_parameters(self) -> typing.List[typing.Tuple[str, autodiff.Tensor]]:
        return [(tensor.name, tensor) for tensor in self.weights.values()] + self.bias_parameters()


    def census(self) -> types.Census:

        return types.Census(
            theta=sum(tensor.size for tensor in self.weights.values()),
            overhead=0,
            biases=sum(tensor.size for _, tensor in self.bias_parameters())
        )


class MaterializedModel(PlainModel):
    """
    Frozen per-layer weights, produced once from a trained model.
    """

    kind = "materialized"

    def __init__(
        self,
        net: types.NetworkSpec,
        weights: typing.Dict[str, numpy.ndarray],
        biases: typing.Dict[str, typing.Optional[numpy.ndarray]]
    ):
        Model.__init__(self, net)

        self.weights = {
            layer.id: autodiff.Tensor(weights[layer.id], name=f"weight/{layer.id}")
            for layer in net.layers
        }

        for layer in net.layers:
            if biases.get(layer.id) is not None:
                self.biases[layer.id] = autodiff.Tensor(biases[layer.id], name=f"bias/{layer.id}")
            else:
                self.biases[layer.id] = None


def materialize_model(model: Model) -> MaterializedModel:
    """
    Generate every layer's weights once, outside any tape.
    """

    weights = {layer_id: tensor.data.copy() for layer_id, tensor in model.generate_weights().items()}
    biases = {
        layer_id: (bias.data.copy() if bias is not None else None)
        for layer_id, bias in model.biases.items()
    }

    return MaterializedModel(model.net, weights, biases)
