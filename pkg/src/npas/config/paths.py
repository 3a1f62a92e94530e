import pathlib
import os.path


PATH_PACKAGE_DATA = os.path.join(pathlib.Path(__file__).parent.parent, "package_data")

PATH_REFERENCE_CNN = os.path.join(PATH_PACKAGE_DATA, "configs", "reference_cnn.yaml")

PATH_BLOBS_MLP = os.path.join(PATH_PACKAGE_DATA, "configs", "blobs_mlp.yaml")

CHECKPOINT_NAME = "checkpoint.npck"

WEIGHTS_NAME = "weights.npw"

METRICS_NAME = "metrics.jsonl"

MAPPING_NAME = "mapping.yaml"

REPRESENTATIONS_NAME = "representations.csv"

REPORT_NAME = "report.json"

EVAL_NAME = "eval.json"

SWEEP_NAME = "sweep.csv"

DUMP_DIRECTORY = "weights"
