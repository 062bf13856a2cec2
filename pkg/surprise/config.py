import os

from .models import Command, Family, ObjectiveKind, RunConfig

DEFAULT_RATE = 0.1
DEFAULT_LEVEL = 0.95
DEFAULT_TOL = 1e-8  # sup-norm of the normalised gradient
DEFAULT_MAX_ITER = 100
DEFAULT_EIGEN_FLOOR_RATIO = 1e-10
DEFAULT_SEPARATION_GUARD = 1e6
DEFAULT_CHUNK_SIZE = 65_536
DEFAULT_PILOT_SIZE = 1000
DEFAULT_SEED = 0
DEFAULT_ORACLE_SIZE = 10_000_000
DEFAULT_FOLDS = 10
MAX_FAILURE_RATE = 0.05
ARMIJO = 1e-4
MIN_STEP = 2.0**-40

DEFAULT_OUTPUT_DIR = "surprise_out"
DEFAULT_WORKERS = os.cpu_count() or 1

DEFAULT_RUN = RunConfig(
    command=Command.FIT,
    loss=Family.LOGISTIC,
    objective=ObjectiveKind.PREDICTION,
    rate=DEFAULT_RATE,
    pilot=None,
    pilot_size=None,
    seed=None,
    out=DEFAULT_OUTPUT_DIR,
    level=DEFAULT_LEVEL,
    folds=DEFAULT_FOLDS,
)
