CHECKPOINT_MAGIC = b"NPASCKPT"

CHECKPOINT_VERSION = 1

WEIGHTS_MAGIC = b"NPASWGT1"

# IDX type code 0x08 (unsigned byte) with 1 and 3 dimensions
IDX_MAGIC_LABELS = 0x00000801

IDX_MAGIC_IMAGES = 0x00000803

MAPPING_HEADER = "# npas group mapping"

FLOAT_FORMAT = "%.17g"
