"""
    Learning which layers share a parameter group.

    A small single-group model (θ as large as the biggest layer, split into
    K' chunks that every layer resizes to its own weight count) is trained
    briefly; the α or φ each layer learns is then clustered with k-means into
    P groups.
"""
import csv
import logging
import math
import typing

import numpy

from .. import types
from .. import config
from .. import exceptions
from .. import utils
from . import archspec
from . import autodiff
from . import models
from . import paramstore
from . import training
from . import weightgen

log = logging.getLogger(__name__)


class PreliminaryModel(models.Model):
    """
    Single-group model used only to learn layer representations.

    Every layer combines the same K' chunks of θ, each linearly resized to the
    layer's weight count; no layer is ever upsampled.
    """

    kind = "preliminary"

    def __init__(self, net: types.NetworkSpec, prelim: types.PreliminaryConfig, seed: typing.Optional[int] = 0):

        super().__init__(net)

        self.prelim = prelim
        self.chunk = prelim.budget // prelim.templates

        rng = utils.rng_for(seed, utils.STREAM_THETA, 0)
        self.theta = autodiff.Tensor(
            rng.standard_normal(prelim.budget) * paramstore.init_scale(net, net.layers.ids()),
            requires_grad=True,
            name="theta/0"
        )

        rng = utils.rng_for(seed, utils.STREAM_COMBINER, 0)
        self.alphas, self.phis, self.projection = {}, {}, None

        if prelim.combiner == "wavg":
            rows = weightgen.orthogonal_rows(rng, len(net.layers), prelim.templates)

            for row, layer in zip(rows, net.layers):
                self.alphas[layer.id] = autodiff.Tensor(row, requires_grad=True, name=f"alpha/{layer.id}")
        else:
            scale = 1.0 / math.sqrt(prelim.emb_dim)

            for layer in net.layers:
                self.phis[layer.id] = autodiff.Tensor(
                    rng.standard_normal(prelim.emb_dim) * scale,
                    requires_grad=True,
                    name=f"phi/{layer.id}"
                )

            self.projection = (
                autodiff.Tensor(
                    rng.standard_normal((prelim.templates, prelim.emb_dim)) * scale,
                    requires_grad=True,
                    name="proj_w/0"
                ),
                autodiff.Tensor(numpy.zeros(prelim.templates), requires_grad=True, name="proj_b/0")
            )


    def templates(self, layer: types.LayerSpec) -> typing.List[autodiff.Tensor]:

        return [
            autodiff.reshape(
                autodiff.linear_resize_1d(autodiff.gather(self.theta, index * self.chunk, self.chunk), layer.weight_count),
                layer.weight_shape
            )
            for index in range(self.prelim.templates)
        ]


    def generate_weights(self, step_index: typing.Optional[int] = 0) -> typing.Dict[str, autodiff.Tensor]:

        weights = {}

        for layer in self.net.layers:
            templates = self.templates(layer)

            if self.prelim.combiner == "wavg":
                weights[layer.id] = weightgen.combine_wavg(templates, self.alphas[layer.id])
            else:
                weights[layer.id] = weightgen.combine_emb(
                    templates,
                    self.phis[layer.id],
                    *self.projection,
                    softmax=self.prelim.emb_softmax
                )

        return weights


    def combiner_parameters(self) -> typing.List[autodiff.Tensor]:

        params = list(self.alphas.values()) + list(self.phis.values())

        if self.projection is not None:
            params.extend(self.projection)

        return params


    def named_parameters(self) -> typing.List[typing.Tuple[str, autodiff.Tensor]]:

        named = [(self.theta.name, self.theta)]
        named.extend((tensor.name, tensor) for tensor in self.combiner_parameters())
        named.extend(self.bias_parameters())

        return named


    def census(self) -> types.Census:

        return types.Census(
            theta=self.theta.size,
            overhead=sum(tensor.size for tensor in self.combiner_parameters()),
            biases=sum(tensor.size for _, tensor in self.bias_parameters())
        )


    def representations(self) -> typing.List[types.LayerRepresentation]:

        vectors = self.alphas if self.prelim.combiner == "wavg" else self.phis

        return [
            types.LayerRepresentation(layer_id=layer.id, vector=vectors[layer.id].data.copy())
            for layer in self.net.layers
        ]


def preliminary_config(
    net: types.NetworkSpec,
    spec: typing.Optional[types.MappingSpec] = None,
    emb_dim: typing.Optional[int] = None
) -> types.PreliminaryConfig:

    spec = spec if spec is not None else types.MappingSpec()

    return types.PreliminaryConfig(
        budget=archspec.largest_layer_weights(net),
        templates=spec.prelim_templates,
        epochs_fraction=spec.epochs_fraction,
        combiner=spec.combiner,
        emb_dim=emb_dim if emb_dim is not None else config.DEFAULT_EMB_DIM
    )


def build_preliminary(
    net: types.NetworkSpec,
    prelim: types.PreliminaryConfig,
    seed: typing.Optional[int] = 0
) -> PreliminaryModel:

    if prelim.templates < 2:
        raise exceptions.ArgumentError(message="The preliminary split needs at least 2 templates", subject=prelim.templates)

    if prelim.budget < prelim.templates:
        raise exceptions.ArgumentError(
            message=f"A budget of {prelim.budget} cannot be split into {prelim.templates} templates",
            subject=prelim.budget
        )

    if prelim.combiner not in config.PRELIM_COMBINERS:
        raise exceptions.ArgumentError(message="The preliminary step combines with wavg or emb", subject=prelim.combiner)

    return PreliminaryModel(net, prelim, seed=seed)


def preliminary_epochs(epochs_fraction: float, epochs: int) -> int:
    """
    ceil(epochs_fraction · epochs), at least one epoch.
    """

    # rounding first keeps 0.1·30 at 3
    return max(1, math.ceil(round(epochs_fraction * epochs, 9)))


def run_preliminary(
    model: PreliminaryModel,
    train_set: types.Dataset,
    spec: types.TrainSpec,
    metrics_path: typing.Optional[str] = None,
    progress: typing.Optional[bool] = False
) -> typing.List[types.LayerRepresentation]:
    """
    Train the preliminary model for its share of the configured epochs at
    the main run's initial learning rate, then read off α_i or φ_i.
    """

    epochs = preliminary_epochs(model.prelim.epochs_fraction, spec.epochs)

    log.info("Preliminary run: %d of %d epochs, budget %d", epochs, spec.epochs, model.prelim.budget)

    training.fit(model, train_set, spec, epochs=epochs, metrics_path=metrics_path, progress=progress)

    return model.representations()


class Clustering(typing.NamedTuple):
    labels: numpy.ndarray
    centroids: numpy.ndarray
    sse: float
    iterations: int


def _squared_distances(points: numpy.ndarray, centroids: numpy.ndarray) -> numpy.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def cluster_sse(points: numpy.ndarray, labels: numpy.ndarray, centroids: numpy.ndarray) -> float:
    """
    Within-cluster sum of squared Euclidean distances.
    """

    return float(((points - centroids[labels]) ** 2).sum())


def _seed_centroids(points: numpy.ndarray, clusters: int, rng: numpy.random.Generator) -> numpy.ndarray:

    chosen = [int(rng.integers(points.shape[0]))]

    while len(chosen) < clusters:
        distances = _squared_distances(points, points[chosen]).min(axis=1)
        total = distances.sum()

        if total > 0:
            chosen.append(int(rng.choice(points.shape[0], p=distances / total)))
        else:
            # only duplicates of chosen points remain
            chosen.append(next(index for index in range(points.shape[0]) if index not in chosen))

    return points[chosen].copy()


def _repair_empty(
    points: numpy.ndarray,
    labels: numpy.ndarray,
    centroids: numpy.ndarray,
    clusters: int
) -> numpy.ndarray:

    labels = labels.copy()

    for cluster in range(clusters):
        if numpy.any(labels == cluster):
            continue

        counts = numpy.bincount(labels, minlength=clusters)
        distances = ((points - centroids[labels]) ** 2).sum(axis=1)
        distances[counts[labels] < 2] = -1.0
        farthest = int(numpy.argmax(distances))

        log.debug("k-means: cluster %d empty, taking point %d", cluster, farthest)

        labels[farthest] = cluster
        centroids[cluster] = points[farthest]

    return labels


def kmeans(
    points: typing.Sequence[typing.Sequence[float]],
    clusters: int,
    seed: typing.Optional[int] = 0,
    max_iter: typing.Optional[int] = None,
    tolerance: typing.Optional[float] = None
) -> Clustering:
    """
    Lloyd's algorithm from a k-means++ start.

    Stops after max_iter iterations or once no centroid moves by tolerance
    or more. A cluster left empty takes the point farthest from its own
    centroid among clusters with more than one point. The within-cluster SSE
    is checked not to grow between iterations.

    Parameters:

        points (list[list[float]]):
            The vectors to cluster, all of one dimension.

        clusters (int):
            Number of clusters P, 1 ≤ P ≤ len(points).

        seed (int | optional):
            Seed of the k-means++ draws. Defaults to 0.
    """

    max_iter = max_iter if max_iter is not None else config.KMEANS_MAX_ITER
    tolerance = tolerance if tolerance is not None else config.KMEANS_TOLERANCE

    points = numpy.asarray(points, dtype=numpy.float64)

    if points.ndim != 2 or points.shape[0] == 0:
        raise exceptions.ArgumentError(message="k-means needs a non-empty list of vectors", subject=points.shape)

    if not 1 <= clusters <= points.shape[0]:
        raise exceptions.ArgumentError(
            message=f"Cannot form {clusters} clusters from {points.shape[0]} points",
            subject=clusters
        )

    centroids = _seed_centroids(points, clusters, utils.rng_for(seed, utils.STREAM_KMEANS))
    previous = math.inf
    labels, sse, iteration = None, math.inf, 0

    for iteration in range(1, max_iter + 1):
        labels = numpy.argmin(_squared_distances(points, centroids), axis=1)
        labels = _repair_empty(points, labels, centroids, clusters)

        updated = numpy.array([points[labels == cluster].mean(axis=0) for cluster in range(clusters)])
        sse = cluster_sse(points, labels, updated)

        if sse > previous + 1e-9 * (1.0 + previous):
            raise exceptions.ContractViolationError(
                message=f"k-means SSE grew from {previous} to {sse}",
                subject=iteration
            )

        shift = float(numpy.abs(updated - centroids).max())
        centroids, previous = updated, sse

        log.debug("k-means iteration %d: SSE %.12g, shift %.3g", iteration, sse, shift)

        if shift < tolerance:
            break

    return Clustering(labels=labels, centroids=centroids, sse=sse, iterations=iteration)


def _relabel(labels: typing.Sequence[int]) -> typing.List[int]:

    order = {}

    for label in labels:
        order.setdefault(int(label), len(order))

    return [order[int(label)] for label in labels]


def derive_mapping(
    representations: typing.Sequence[types.LayerRepresentation],
    groups: int,
    seed: typing.Optional[int] = 0,
    normalize: typing.Optional[bool] = False
) -> types.GroupMapping:
    """
    Cluster layer representations into at most groups parameter groups.

    Group ids are renumbered by first appearance in layer order, so the
    first layer always lands in group 0.
    """

    vectors = numpy.array([numpy.asarray(rep.vector, dtype=numpy.float64) for rep in representations])

    if normalize:
        norms = numpy.linalg.norm(vectors, axis=1, keepdims=True)
        vectors = numpy.divide(vectors, norms, out=vectors.copy(), where=norms > 0)

    clustering = kmeans(vectors, groups, seed=seed)
    labels = _relabel(clustering.labels)

    return types.GroupMapping(
        assignment={rep.layer_id: label for rep, label in zip(representations, labels)},
        groups=max(labels) + 1,
        provenance="auto"
    )


def baseline_mappings(
    net: types.NetworkSpec,
    groups: int,
    seed: typing.Optional[int] = 0,
    kind: typing.Optional[str] = "single",
    path: typing.Optional[str] = None
) -> types.GroupMapping:
    """
    The non-learned mappings: single, random or manual (read from path).
    """

    layer_ids = net.layers.ids()

    if kind == "single":
        return types.GroupMapping(assignment={layer_id: 0 for layer_id in layer_ids}, groups=1, provenance="single")

    if kind == "manual":
        if path is None:
            raise exceptions.ArgumentError(message="A manual mapping needs a mapping file", subject=kind)

        return paramstore.load_mapping(path, net)

    if kind != "random":
        raise exceptions.ArgumentError(message="Unknown baseline mapping", subject=kind)

    if not 1 <= groups <= len(layer_ids):
        raise exceptions.ArgumentError(
            message=f"Cannot spread {len(layer_ids)} layers over {groups} nonempty groups",
            subject=groups
        )

    rng = utils.rng_for(seed, utils.STREAM_MAPPING)

    for _ in range(config.RANDOM_MAPPING_RETRIES):
        labels = rng.integers(groups, size=len(layer_ids))

        if numpy.unique(labels).size == groups:
            break
    else:
        labels = rng.permutation(numpy.arange(len(layer_ids)) % groups)

    return types.GroupMapping(
        assignment={layer_id: int(label) for layer_id, label in zip(layer_ids, labels)},
        groups=groups,
        provenance="random"
    )


class SearchResult(typing.NamedTuple):
    mapping: types.GroupMapping
    representations: typing.List[types.LayerRepresentation]
    model: PreliminaryModel
    epochs: int


def search_mapping(
    net: types.NetworkSpec,
    groups: int,
    train_set: types.Dataset,
    spec: types.TrainSpec,
    mapping_spec: typing.Optional[types.MappingSpec] = None,
    emb_dim: typing.Optional[int] = None,
    progress: typing.Optional[bool] = False
) -> SearchResult:
    """
    Build, train and cluster the preliminary model into a group mapping.
    """

    mapping_spec = mapping_spec if mapping_spec is not None else types.MappingSpec()

    prelim = preliminary_config(net, mapping_spec, emb_dim=emb_dim)
    model = build_preliminary(net, prelim, seed=spec.seed)
    representations = run_preliminary(model, train_set, spec, progress=progress)
    mapping = derive_mapping(representations, groups, seed=spec.seed, normalize=mapping_spec.normalize_reps)

    log.info("Derived mapping %s", mapping.assignment)

    return SearchResult(
        mapping=mapping,
        representations=representations,
        model=model,
        epochs=preliminary_epochs(prelim.epochs_fraction, spec.epochs)
    )


def write_representations(representations: typing.Sequence[types.LayerRepresentation], path: str) -> None:
    """
    CSV of layer_id followed by the vector components.
    """

    width = max((len(rep.vector) for rep in representations), default=0)

    with open(file=path, mode="w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["layer_id"] + [f"v{index}" for index in range(width)])

        for rep in representations:
            writer.writerow([rep.layer_id] + [config.FLOAT_FORMAT % value for value in rep.vector])
