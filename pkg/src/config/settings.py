from pathlib import Path

# The ROOT_DIR should represent the absolute path of the project root folder
ROOT_DIR = Path(__file__).absolute().parent.parent.parent
DATA_DIR = ROOT_DIR / "data"
CONFIG_DIR = ROOT_DIR / "config"
GRIDS_DIR = CONFIG_DIR / "grids"

# Constants
SEED = 42

# Per-stage seeds are derived from the single experiment seed by these offsets
SEED_OFFSETS = {"synth": 0, "als": 101, "bpr": 202}

# Text artifacts are written with this many significant digits
FLOAT_FORMAT = "%.9g"

# Artifact file names inside an output directory
MATRIX_FILENAME = "matrix.txt"
CANDIDATES_FILENAME = "candidates.csv"
MODEL_FILENAME = "model.txt"
CONFIG_FILENAME = "config.yaml"
REPORT_FILENAME = "report.json"
