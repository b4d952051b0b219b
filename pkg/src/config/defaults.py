from typing import Dict, Any
import os
APP_NAME = "Quasi-periodic Surface Builder"
APP_VERSION = "0.1.0"
CONFIG_FILENAME = "config.yaml"

# strip geometry
DEFAULT_ELL = 0.6
DEFAULT_GRID_H = 1.0 / 32.0
DEFAULT_ETA0_FRACTION = 0.75
# window margin around the handles, in units of x (keeps window ends even)
DEFAULT_WINDOW_MARGIN = 4
MIN_ELL = 0.0
MAX_ELL = 1.0
MAX_GRID_H = 0.5
# 1/h must be an integer up to this tolerance
GRID_ALIGNMENT_TOL = 1e-9

# maximal graph solver
DEFAULT_TOL_PDE = 1e-8
DEFAULT_MAX_NEWTON_ITER = 200
# eps_cap = factor * h^2
DEFAULT_EPS_CAP_FACTOR = 1.0
# boundary contraction eps_bdry = factor * h^2, must exceed eps_cap
DEFAULT_EPS_BDRY_FACTOR = 5.0
LINE_SEARCH_ARMIJO = 1e-4
LINE_SEARCH_MIN_STEP = 1e-12
LINE_SEARCH_SHRINK = 0.5
# relative energy slack accepted by the line search near round-off
LINE_SEARCH_ENERGY_SLACK = 1e-14
# initial guess: v <= slope * distance to every pinned zero
INITIAL_CONE_SLOPE = 0.9
MAX_REFINE_FACTOR = 8
# lightlike triangles this many cells from a corner (k, +-ell) of the tent data are tolerated
VERTEX_ZONE_CELLS = 4
# grids finer than this start Newton from the solution at twice the step
NESTED_START_BELOW_H = 0.03

# conjugation
DEFAULT_LOOP_RADIUS_CELLS = 4
EXCLUSION_RADIUS_FACTOR = 2

# periods
DEFAULT_F_THRESHOLD = 0.5
DEFAULT_TOL_F = 1e-3
DEFAULT_SAMPLES_PER_FACE = 3
# draws per requested face sample before falling back to the face centre
FACE_SAMPLE_ATTEMPTS = 20
DEFAULT_SCAN_RESOLUTION = 16
GUARD_BAND_FACTOR = 5.0
BRACKET_RESOLUTION_CELLS = 2
DEFAULT_MAX_SWEEPS = 8
DEFAULT_SEED = 20240601

# surface
DEFAULT_MESH_TOL_FACTOR = 10.0
DEFAULT_COPIES_X = 1
DEFAULT_COPIES_Z = 1
MESH_FORMATS = ["obj", "ply"]
DEFAULT_MESH_FORMAT = "obj"
DEFAULT_BASE_X = -1.0
MESH_TAGS = [
    "interior",
    "plane_x0",
    "plane_z0",
    "vertical_line_Ak",
    "truncation",
]
VERTICAL_PERIOD = 2.0

# diagnostics
DEFAULT_FLUX_TOL_FRACTION = 0.02
# ridge_eps = factor * eps_cap
DEFAULT_RIDGE_EPS_FACTOR = 10.0
MIN_RIDGE_CELLS = 3
# mean normal slope of the conjugate function above which an edge counts as divergent
DEFAULT_DIVERGENT_SLOPE = 1.0

# sequences
DEFAULT_SEQUENCE_WINDOW = (-2, 2)
GENERATORS = ["explicit", "beatty", "counting"]
DEFAULT_GENERATOR = "explicit"
DEFAULT_ALPHA = "sqrt2"
# convergent denominators stay below 2**53 so products are exact in floats too
MAX_CONVERGENT_DENOMINATOR = 2 ** 53
COUNTING_MAX_INDEX = 10 ** 6

# pipeline exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ADMISSIBILITY = 3
EXIT_SOLVER = 4
EXIT_PERIODS = 5
EXIT_MESH = 6

DEFAULT_OUTPUT_DIR = "output"
CSV_FLOAT_FORMAT = "{:.12e}"
DEFAULT_THREADS = min(4, os.cpu_count() or 1)
THREADS_ENV_VAR = "THREADS"


def get_default_config() -> Dict[str, Any]:
    return {
        "strip": {
            "ell": DEFAULT_ELL,
            "grid_h": DEFAULT_GRID_H,
            # None -> derived from the handle positions
            "x_window": None,
        },
        "handles": {
            "generator": DEFAULT_GENERATOR,
            "p_list": [0],
            "alpha": DEFAULT_ALPHA,
            "window": list(DEFAULT_SEQUENCE_WINDOW),
        },
        "solver": {
            "tol_pde": DEFAULT_TOL_PDE,
            "max_iter": DEFAULT_MAX_NEWTON_ITER,
            "eps_cap": None,
            "eps_bdry": None,
        },
        "periods": {
            # a number, or "calibrate"
            "eta0": None,
            "tol_f": DEFAULT_TOL_F,
            "f_threshold": DEFAULT_F_THRESHOLD,
            "loop_radius": None,
            "samples_per_face": DEFAULT_SAMPLES_PER_FACE,
            "scan_resolution": DEFAULT_SCAN_RESOLUTION,
            "max_sweeps": DEFAULT_MAX_SWEEPS,
            "seed": DEFAULT_SEED,
        },
        "mesh": {
            "copies_x": DEFAULT_COPIES_X,
            "copies_z": DEFAULT_COPIES_Z,
            "format": DEFAULT_MESH_FORMAT,
            "mesh_tol": None,
        },
        "diagnostics": {
            "flux_tol": DEFAULT_FLUX_TOL_FRACTION,
            "ridge_eps": None,
        },
        "output": {
            "dir": DEFAULT_OUTPUT_DIR,
            "threads": DEFAULT_THREADS,
        },
    }
