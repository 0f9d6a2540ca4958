import os

DEFAULT_ETA = float(os.getenv("RLRT_ETA", 0.05))
DEFAULT_LAMBDA = float(os.getenv("RLRT_LAMBDA", 0.5))
DEFAULT_REPS = int(os.getenv("RLRT_REPS", 10_000))
DEFAULT_CHEN_REPS = int(os.getenv("RLRT_CHEN_REPS", 200))
DEFAULT_SEED = int(os.getenv("RLRT_SEED", 0))
DEFAULT_WORKERS = int(os.getenv("RLRT_WORKERS", 1))
CRITICAL_VALUE_REPS = int(os.getenv("RLRT_CRITICAL_REPS", 10_000))
MIN_CRITICAL_VALUE_REPS = 1000

QUAD_EPSABS = float(os.getenv("RLRT_QUAD_EPSABS", 1e-10))
QUAD_LIMIT = int(os.getenv("RLRT_QUAD_LIMIT", 200))

# replications handed to one worker task
BLOCK_SIZE = int(os.getenv("RLRT_BLOCK_SIZE", 250))

LOG_LEVEL = os.getenv("RLRT_LOG_LEVEL", "WARNING")
