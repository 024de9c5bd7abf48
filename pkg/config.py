"""Configuration for the holographic teleportation simulator."""

import math
import os
from pathlib import Path
from typing import Final

from dotenv import load_dotenv

load_dotenv()

# Project paths
PROJECT_ROOT: Final[Path] = Path(__file__).parent
DATA_DIR: Final[Path] = PROJECT_ROOT / "data"
RUNS_DIR: Final[Path] = Path(os.getenv("HOLOTELE_OUT_DIR", str(DATA_DIR / "runs")))

# Worker threads for Monte Carlo batches (wall time only, never results)
DEFAULT_THREADS: Final[int] = int(os.getenv("HOLOTELE_THREADS", "1"))

# OPA model, dimensionless: q in 1/l_c, Omega in 1/T_c
DEFAULT_SIGMA: Final[float] = 3.0
DEFAULT_DELTA0: Final[float] = 0.0
DEFAULT_GVM: Final[float] = 1.0
DEFAULT_GVD: Final[float] = 0.0
DEFAULT_DIFFRACTION: Final[float] = 1.0
DEFAULT_PUMP_PHASE: Final[float] = math.pi

# Carrier frequencies, arbitrary units (omega1 + omega2 == omega_p)
DEFAULT_OMEGA1: Final[float] = 1.0
DEFAULT_OMEGA2: Final[float] = 1.5
DEFAULT_OMEGA_P: Final[float] = 2.5
ENERGY_CONSERVATION_RTOL: Final[float] = 1e-9

# Coarse-graining grid
DEFAULT_PIXEL_SIZE: Final[float] = 10.0
DEFAULT_T_WINDOW: Final[float] = 10.0

# Quadrature
DEFAULT_TOL: Final[float] = 1e-4
MAX_SUBDIVISIONS: Final[int] = 2**14
ABS_FLOOR: Final[float] = 1e-3  # target = tol * max(|C|, ABS_FLOOR)

# Monte Carlo
DEFAULT_SAMPLES: Final[int] = 10_000
DEFAULT_SEED: Final[int] = 20061
MIN_POINTS_PER_CELL: Final[int] = 8
LATTICE_MARGIN: Final[float] = 8.0  # coherence lengths / times kept around the pixel block
JACKKNIFE_BLOCKS: Final[int] = 20
BATCH_SIZE: Final[int] = 64

# Compensation optimizer
DEFAULT_COMP_DEGREE: Final[int] = 2
MAX_COMP_DEGREE: Final[int] = 4
DEFAULT_COMP_BUDGET: Final[int] = 200
SIMPLEX_STEP: Final[float] = 0.1
SIMPLEX_DIAMETER_TOL: Final[float] = 1e-6

# Scans (relative pixel sizes and observation times of the diagonal-noise figure)
SCAN_PIXEL_SIZES: Final[list[float]] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
SCAN_T_WINDOWS: Final[list[float]] = [10.0, 1.0, 0.1]
ELLIPSE_SCAN_RANGE: Final[tuple[float, float]] = (-12.0, 12.0)
ELLIPSE_SCAN_COUNT: Final[int] = 241

# Statistical gate for oracle comparisons
STDERR_GATE: Final[float] = 3.0

# PGM output
PGM_OUT_MAXVAL: Final[int] = 65535
DEFAULT_PHOTONS_PER_PIXEL: Final[float] = 4.0
