import os


ENV_THREADS = "NPAS_THREADS"

ENV_LOG_LEVEL = "NPAS_LOG_LEVEL"


def eval_threads() -> int:

    value = os.environ.get(ENV_THREADS, "1")

    try:
        threads = int(value)
    except ValueError:
        return 1

    return max(1, threads)


def log_level() -> str:
    return os.environ.get(ENV_LOG_LEVEL, "WARNING").upper()
