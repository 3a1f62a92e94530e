import concurrent.futures
import json
import logging
import math
import time
import typing

import numpy
from tqdm import tqdm

from .. import types
from .. import config
from .. import exceptions
from .. import utils
from . import autodiff
from . import models

log = logging.getLogger(__name__)


class SGD:
    """
    Momentum SGD over a model's trainable parameters.

    Weight decay covers θ, plain weights and biases; combiner parameters
    (α, φ, W_j, b_j, masks) are only decayed when decay_combiner is set.
    """

    def __init__(self, model: models.Model, spec: types.TrainSpec):
        self.params = model.parameters()
        self.skip_decay = [] if spec.decay_combiner else model.combiner_parameters()
        self.lr = spec.lr
        self.momentum = spec.momentum
        self.weight_decay = spec.weight_decay
        self.velocities = {}


    def zero_grad(self) -> None:
        autodiff.zero_grads(self.params)


    def step(self) -> None:

        autodiff.sgd_step(
            self.params,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            velocities=self.velocities,
            skip_decay=self.skip_decay
        )


def error_at_k(logits: numpy.ndarray, labels: typing.Sequence[int], k: int) -> float:
    """
    Fraction of rows whose label is not among the k largest logits.
    """

    labels = numpy.asarray(labels)

    if k < 1:
        raise exceptions.ArgumentError(message="k must be positive", subject=k)

    if labels.size == 0:
        return 0.0

    return 1.0 - _hits(logits, labels, k) / labels.size


def _hits(logits: numpy.ndarray, labels: numpy.ndarray, k: int) -> int:

    top = numpy.argsort(-logits, axis=1, kind="stable")[:, :k]

    return int((top == labels[:, None]).any(axis=1).sum())


def _batches(indices: numpy.ndarray, batch_size: int) -> typing.List[numpy.ndarray]:
    return [indices[start:start + batch_size] for start in range(0, indices.size, batch_size)]


def evaluate(
    model: models.Model,
    dataset: types.Dataset,
    batch_size: typing.Optional[int] = None,
    threads: typing.Optional[int] = None
) -> types.EvalResult:
    """
    Loss and Error@1/Error@5 of a model on a dataset.

    Weights are generated once; batches may run on several threads but
    their partial sums are reduced in batch order.
    """

    batch_size = batch_size if batch_size is not None else config.EVAL_BATCH_SIZE
    threads = threads if threads is not None else config.eval_threads()

    weights = model.generate_weights()
    labels = numpy.asarray(dataset.labels, dtype=numpy.int64)
    top5 = model.net.num_classes >= 5

    def run(batch: numpy.ndarray) -> typing.Tuple[float, int, int]:

        logits = models.forward(model.net, weights, model.biases, autodiff.Tensor(dataset.features[batch]))
        loss = autodiff.softmax_cross_entropy(logits, labels[batch]).item() * batch.size

        return loss, _hits(logits.data, labels[batch], 1), (_hits(logits.data, labels[batch], 5) if top5 else 0)

    batches = _batches(numpy.arange(len(dataset)), batch_size)

    if threads > 1 and len(batches) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            partials = list(executor.map(run, batches))
    else:
        partials = [run(batch) for batch in batches]

    loss, hits1, hits5 = 0.0, 0, 0

    for partial_loss, partial1, partial5 in partials:
        loss += partial_loss
        hits1 += partial1
        hits5 += partial5

    samples = len(dataset)

    return types.EvalResult(
        loss=loss / samples,
        error_at_1=1.0 - hits1 / samples,
        error_at_5=(1.0 - hits5 / samples) if top5 else None,
        samples=samples
    )


def train_step(
    model: models.Model,
    optimizer: SGD,
    features: numpy.ndarray,
    labels: numpy.ndarray,
    step: int
) -> float:
    """
    Generate weights, run the batch, backpropagate and update once.
    """

    optimizer.zero_grad()

    with autodiff.Tape(seed=step) as tape:
        logits = model.logits(autodiff.Tensor(features), step_index=step)
        loss = autodiff.softmax_cross_entropy(logits, labels)

        value = loss.item()

        if not math.isfinite(value):
            raise exceptions.RunError(
                message=f"Training diverged: loss is {value}",
                subject=model.kind,
                step=step
            )

        autodiff.backward(loss, tape)

    optimizer.step()

    return value


def fit(
    model: models.Model,
    train_set: types.Dataset,
    spec: types.TrainSpec,
    epochs: typing.Optional[int] = None,
    eval_set: typing.Optional[types.Dataset] = None,
    metrics_path: typing.Optional[str] = None,
    progress: typing.Optional[bool] = False
) -> types.Metrics:
    """
    Train a model with momentum SGD and record one MetricsRecord per epoch.

    Parameters:

        model (Model):
            The model to optimize in place.

        train_set (Dataset):
            Training samples, shuffled every epoch from the seeded stream.

        spec (TrainSpec):
            Optimizer and loop settings.

        epochs (int | optional):
            Overrides spec.epochs.

        eval_set (Dataset | optional):
            Evaluated after each epoch when given.

        metrics_path (str | optional):
            JSONL file that receives each record as it is produced.

        progress (bool | optional):
            Show a progress bar per epoch.
    """

    epochs = epochs if epochs is not None else spec.epochs
    optimizer = SGD(model, spec)
    census = model.census()
    flops_forward, flops_weightgen = model.flop_counts()
    labels = numpy.asarray(train_set.labels, dtype=numpy.int64)
    metrics = types.Metrics()
    step = 0

    log.info(
        "Training %s model: %d epochs, census theta=%d overhead=%d biases=%d",
        model.kind, epochs, census.theta, census.overhead, census.biases
    )

    stream = open(file=metrics_path, mode="w", encoding="utf-8") if metrics_path else None

    try:
        for epoch in range(epochs):
            started = time.perf_counter()
            order = utils.rng_for(spec.seed, utils.STREAM_SHUFFLE, epoch).permutation(len(train_set))
            batches = _batches(order, spec.batch_size)
            total = 0.0

            for batch in tqdm(batches, desc=f"Epoch {epoch + 1}/{epochs}", leave=False, disable=not progress):
                total += train_step(model, optimizer, train_set.features[batch], labels[batch], step) * batch.size
                step += 1

            evaluation = evaluate(model, eval_set, batch_size=spec.eval_batch_size) if eval_set is not None else None
            elapsed = int((time.perf_counter() - started) * 1000) if spec.wall_time else 0

            record = types.MetricsRecord(
                step=step,
                epoch=epoch,
                train_loss=total / len(train_set),
                eval_error_at_1=evaluation.error_at_1 if evaluation else None,
                eval_error_at_5=evaluation.error_at_5 if evaluation else None,
                wall_time_ms=elapsed,
                params_total=census.total,
                params_theta=census.theta,
                params_overhead=census.overhead,
                flops_forward=flops_forward,
                flops_weightgen=flops_weightgen
            )

            metrics.append(record)

            if stream is not None:
                stream.write(json.dumps(record.to_dict()) + "\n")
                stream.flush()

            log.info(
                "Epoch %d/%d: train loss %.6f, eval error@1 %s",
                epoch + 1, epochs, record.train_loss, record.eval_error_at_1
            )
    finally:
        if stream is not None:
            stream.close()

    return metrics
