# Budget
DEFAULT_TEMPLATES = 8

DEFAULT_MASK_WINDOW = 9

DEFAULT_EMB_DIM = 24

DEFAULT_COMBINER = "emb"

DEFAULT_UPSAMPLER = "mask"

COMBINERS = ("wavg", "emb", "rr", "avg")

UPSAMPLERS = ("repeat", "inter", "mask")

# Layers
LAYER_KINDS = ("dense", "conv2d")

ACTIVATIONS = ("relu", "none", "softmax")

# Training
TRAIN_EPOCHS = 10

TRAIN_LR = 0.05

TRAIN_MOMENTUM = 0.9

TRAIN_WEIGHT_DECAY = 5e-4

TRAIN_BATCH_SIZE = 64

TRAIN_SEED = 0

EVAL_BATCH_SIZE = 256

# Group mapping
MAPPING_MODES = ("auto", "single", "random", "manual")

PRELIM_TEMPLATES = 4

PRELIM_EPOCHS_FRACTION = 0.125

PRELIM_COMBINERS = ("wavg", "emb")

KMEANS_MAX_ITER = 100

KMEANS_TOLERANCE = 1e-9

RANDOM_MAPPING_RETRIES = 1000

# Reports
REPORT_BATCH_SIZE = 64

# Datasets
DATA_EVAL_FRACTION = 0.2

BLOBS_CENTER_SCALE = 1.0

BLOBS_SPREAD = 1.0

DATA_SAMPLES = 1000

SPIRALS_NOISE = 0.1
