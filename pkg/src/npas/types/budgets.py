import typing

from .objects import Dict
from .layers import NetworkSpec
from .. import config


class BudgetSpec(Dict):


    def __init__(
        self,
        total_params: int,
        num_groups: int = 1,
        max_templates: int = config.DEFAULT_TEMPLATES,
        combiner: str = config.DEFAULT_COMBINER,
        upsampler: str = config.DEFAULT_UPSAMPLER,
        mask_window: int = config.DEFAULT_MASK_WINDOW,
        emb_dim: int = config.DEFAULT_EMB_DIM,
        emb_softmax: bool = False
    ):
        self.total_params = total_params
        self.num_groups = num_groups
        self.max_templates = max_templates
        self.combiner = combiner
        self.upsampler = upsampler
        self.mask_window = mask_window
        self.emb_dim = emb_dim
        self.emb_softmax = emb_softmax


    def replace(self, **changes) -> "BudgetSpec":

        fields = dict(self)
        fields.update(changes)

        return BudgetSpec(**fields)


class TrainSpec(Dict):


    def __init__(
        self,
        epochs: int = config.TRAIN_EPOCHS,
        lr: float = config.TRAIN_LR,
        momentum: float = config.TRAIN_MOMENTUM,
        weight_decay: float = config.TRAIN_WEIGHT_DECAY,
        batch_size: int = config.TRAIN_BATCH_SIZE,
        seed: int = config.TRAIN_SEED,
        decay_combiner: bool = False,
        eval_batch_size: int = config.EVAL_BATCH_SIZE,
        wall_time: bool = False
    ):
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.seed = seed
        self.decay_combiner = decay_combiner
        self.eval_batch_size = eval_batch_size
        self.wall_time = wall_time


    def replace(self, **changes) -> "TrainSpec":

        fields = dict(self)
        fields.update(changes)

        return TrainSpec(**fields)


class DataSpec(Dict):


    def __init__(
        self,
        name: str,
        options: typing.Optional[typing.Dict[str, typing.Any]] = None,
        eval_fraction: float = config.DATA_EVAL_FRACTION
    ):
        self.name = name
        self.options = dict(options or {})
        self.eval_fraction = eval_fraction


class MappingSpec(Dict):


    def __init__(
        self,
        mode: str = "auto",
        file: typing.Optional[str] = None,
        prelim_templates: int = config.PRELIM_TEMPLATES,
        epochs_fraction: float = config.PRELIM_EPOCHS_FRACTION,
        combiner: str = "emb",
        normalize_reps: bool = False,
        retain_preliminary: bool = False
    ):
        self.mode = mode
        self.file = file
        self.prelim_templates = prelim_templates
        self.epochs_fraction = epochs_fraction
        self.combiner = combiner
        self.normalize_reps = normalize_reps
        self.retain_preliminary = retain_preliminary


class ExperimentConfig(Dict):


    def __init__(
        self,
        network: NetworkSpec,
        budget: BudgetSpec,
        train: TrainSpec,
        data: DataSpec,
        mapping: MappingSpec,
        output: str,
        seed: int,
        document: typing.Dict[str, typing.Any]
    ):
        self.network = network
        self.budget = budget
        self.train = train
        self.data = data
        self.mapping = mapping
        self.output = output
        self.seed = seed
        self.document = document


class PreliminaryConfig(Dict):
    """
    Settings of the single-group model trained to find the group mapping.

    budget is the size of its only θ, the largest layer's weight count.
    """


    def __init__(
        self,
        budget: int,
        templates: int = config.PRELIM_TEMPLATES,
        epochs_fraction: float = config.PRELIM_EPOCHS_FRACTION,
        combiner: str = "emb",
        emb_dim: int = config.DEFAULT_EMB_DIM,
        emb_softmax: bool = False
    ):
        self.budget = budget
        self.templates = templates
        self.epochs_fraction = epochs_fraction
        self.combiner = combiner
        self.emb_dim = emb_dim
        self.emb_softmax = emb_softmax
