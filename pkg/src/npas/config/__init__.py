from .defaults import (
    DEFAULT_TEMPLATES,
    DEFAULT_MASK_WINDOW,
    DEFAULT_EMB_DIM,
    DEFAULT_COMBINER,
    DEFAULT_UPSAMPLER,
    COMBINERS,
    UPSAMPLERS,
    LAYER_KINDS,
    ACTIVATIONS,
    TRAIN_EPOCHS,
    TRAIN_LR,
    TRAIN_MOMENTUM,
    TRAIN_WEIGHT_DECAY,
    TRAIN_BATCH_SIZE,
    TRAIN_SEED,
    EVAL_BATCH_SIZE,
    MAPPING_MODES,
    PRELIM_TEMPLATES,
    PRELIM_EPOCHS_FRACTION,
    PRELIM_COMBINERS,
    KMEANS_MAX_ITER,
    KMEANS_TOLERANCE,
    RANDOM_MAPPING_RETRIES,
    REPORT_BATCH_SIZE,
    DATA_EVAL_FRACTION,
    BLOBS_CENTER_SCALE,
    BLOBS_SPREAD,
    DATA_SAMPLES,
    SPIRALS_NOISE
)
from .formats import (
    CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
    WEIGHTS_MAGIC,
    IDX_MAGIC_LABELS,
    IDX_MAGIC_IMAGES,
    MAPPING_HEADER,
    FLOAT_FORMAT
)
from .paths import (
    PATH_PACKAGE_DATA,
    PATH_REFERENCE_CNN,
    PATH_BLOBS_MLP,
    CHECKPOINT_NAME,
    WEIGHTS_NAME,
    METRICS_NAME,
    MAPPING_NAME,
    REPRESENTATIONS_NAME,
    REPORT_NAME,
    EVAL_NAME,
    SWEEP_NAME,
    DUMP_DIRECTORY
)
from .env import ENV_THREADS, ENV_LOG_LEVEL, eval_threads, log_level

__all__ = [
    "DEFAULT_TEMPLATES",
    "DEFAULT_MASK_WINDOW",
    "DEFAULT_EMB_DIM",
    "DEFAULT_COMBINER",
    "DEFAULT_UPSAMPLER",
    "COMBINERS",
    "UPSAMPLERS",
    "LAYER_KINDS",
    "ACTIVATIONS",
    "TRAIN_EPOCHS",
    "TRAIN_LR",
    "TRAIN_MOMENTUM",
    "TRAIN_WEIGHT_DECAY",
    "TRAIN_BATCH_SIZE",
    "TRAIN_SEED",
    "EVAL_BATCH_SIZE",
    "MAPPING_MODES",
    "PRELIM_TEMPLATES",
    "PRELIM_EPOCHS_FRACTION",
    "PRELIM_COMBINERS",
    "KMEANS_MAX_ITER",
    "KMEANS_TOLERANCE",
    "RANDOM_MAPPING_RETRIES",
    "REPORT_BATCH_SIZE",
    "DATA_EVAL_FRACTION",
    "BLOBS_CENTER_SCALE",
    "BLOBS_SPREAD",
    "DATA_SAMPLES",
    "SPIRALS_NOISE",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
    "WEIGHTS_MAGIC",
    "IDX_MAGIC_LABELS",
    "IDX_MAGIC_IMAGES",
    "MAPPING_HEADER",
    "FLOAT_FORMAT",
    "PATH_PACKAGE_DATA",
    "PATH_REFERENCE_CNN",
    "PATH_BLOBS_MLP",
    "CHECKPOINT_NAME",
    "WEIGHTS_NAME",
    "METRICS_NAME",
    "MAPPING_NAME",
    "REPRESENTATIONS_NAME",
    "REPORT_NAME",
    "EVAL_NAME",
    "SWEEP_NAME",
    "DUMP_DIRECTORY",
    "ENV_THREADS",
    "ENV_LOG_LEVEL",
    "eval_threads",
    "log_level"
]

__locals = locals()

for __name in __all__:
    try:
        setattr(__locals[__name], "__module__", "npas.config")
    except (AttributeError, TypeError):
        pass
