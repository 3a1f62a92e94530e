import typing

from .objects import Dict, List


class GeneratedWeights(Dict):


    def __init__(
        self,
        layer_id: str,
        tensor: typing.Any,
        generation_kind: str
    ):
        self.layer_id = layer_id
        self.tensor = tensor
        self.generation_kind = generation_kind


class LayerRepresentation(Dict):


    def __init__(
        self,
        layer_id: str,
        vector: typing.Any
    ):
        self.layer_id = layer_id
        self.vector = vector


class MetricsRecord(Dict):


    def __init__(
        self,
        step: int,
        epoch: int,
        train_loss: float,
        eval_error_at_1: typing.Optional[float],
        eval_error_at_5: typing.Optional[float],
        wall_time_ms: int,
        params_total: int,
        params_theta: int,
        params_overhead: int,
        flops_forward: int,
        flops_weightgen: int
    ):
        self.step = step
        self.epoch = epoch
        self.train_loss = train_loss
        self.eval_error_at_1 = eval_error_at_1
        self.eval_error_at_5 = eval_error_at_5
        self.wall_time_ms = wall_time_ms
        self.params_total = params_total
        self.params_theta = params_theta
        self.params_overhead = params_overhead
        self.flops_forward = flops_forward
        self.flops_weightgen = flops_weightgen


class Metrics(List):


    def last(self) -> MetricsRecord:
        return self.base_list[-1]


class Census(Dict):


    def __init__(
        self,
        theta: int,
        overhead: int,
        biases: int
    ):
        self.theta = theta
        self.overhead = overhead
        self.biases = biases


    @property
    def total(self) -> int:
        return self.theta + self.overhead + self.biases


class OverheadReport(Dict):


    def __init__(
        self,
        coefficients: int,
        projections: int,
        masks: int,
        biases: int,
        per_layer: typing.Dict[str, int]
    ):
        self.coefficients = coefficients
        self.projections = projections
        self.masks = masks
        self.biases = biases
        self.per_layer = dict(per_layer)


    @property
    def total(self) -> int:
        return self.coefficients + self.projections + self.masks


class FlopReport(Dict):


    def __init__(
        self,
        forward: int,
        weightgen: int,
        per_layer: typing.Dict[str, int],
        ratio_per_image: float,
        ratio_per_batch: float,
        batch_size: int
    ):
        self.forward = forward
        self.weightgen = weightgen
        self.per_layer = dict(per_layer)
        self.ratio_per_image = ratio_per_image
        self.ratio_per_batch = ratio_per_batch
        self.batch_size = batch_size


class EvalResult(Dict):


    def __init__(
        self,
        loss: float,
        error_at_1: float,
        error_at_5: typing.Optional[float],
        samples: int
    ):
        self.loss = loss
        self.error_at_1 = error_at_1
        self.error_at_5 = error_at_5
        self.samples = samples


class Dataset(Dict):


    def __init__(
        self,
        name: str,
        features: typing.Any,
        labels: typing.Any
    ):
        self.name = name
        self.features = features
        self.labels = labels


    def __len__(self):
        return len(self.labels)
