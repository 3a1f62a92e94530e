import typing

from .objects import Dict, List
from ..utils import numeric


class LayerSpec(Dict):


    def __init__(
        self,
        id: str,
        kind: str,
        weight_shape: typing.List[int],
        has_bias: bool = True,
        activation: str = "relu",
        stride: int = 1,
        padding: int = 0
    ):
        self.id = id
        self.kind = kind
        self.weight_shape = list(weight_shape)
        self.has_bias = has_bias
        self.activation = activation
        self.stride = stride
        self.padding = padding


    @property
    def weight_count(self) -> int:
        return numeric.prod(self.weight_shape)


    @property
    def bias_count(self) -> int:
        return self.weight_shape[0] if self.has_bias else 0


    @property
    def fan_in(self) -> int:
        return numeric.prod(self.weight_shape[1:])


class Layers(List):


    def ids(self) -> typing.List[str]:
        return [layer.id for layer in self.base_list]


    def get(self, layer_id: str) -> LayerSpec:

        for layer in self.base_list:
            if layer.id == layer_id:
                return layer

        raise KeyError(layer_id)


class NetworkSpec(Dict):


    def __init__(
        self,
        layers: Layers,
        input_shape: typing.List[int],
        num_classes: int
    ):
        self.layers = layers
        self.input_shape = list(input_shape)
        self.num_classes = num_classes


    @property
    def weight_counts(self) -> typing.List[int]:
        return [layer.weight_count for layer in self.layers]


    @property
    def total_weights(self) -> int:
        return sum(self.weight_counts)


    @property
    def total_biases(self) -> int:
        return sum(layer.bias_count for layer in self.layers)
