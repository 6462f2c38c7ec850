"""
Configuration defaults for confidence-set robust learning
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging (environment only changes verbosity, never results)
LOG_LEVEL = os.getenv("CTX_ROBUST_LOG_LEVEL", "INFO")
LOG_EVERY = int(os.getenv("CTX_ROBUST_LOG_EVERY", 5000))

# Confidence sets
DEFAULT_BETA = 0.99
EPS_SENTINEL_BITS = 1e6  # eps at or above this is treated as the full simplex

# Inner solver tolerances
DELTA_CLAMP_TOL = 1e-9
DEGENERATE_REL_TOL = 1e-12
TIE_TOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200

# Optimizer defaults
STEP_SIZE_LOGISTIC = 0.05
STEP_SIZE_DEFAULT = 0.01
MAX_ITERS = 50_000
GRAD_TOL = 1e-8
OBJ_REL_TOL = 1e-10
PATIENCE = 2_000

# Group-DRO baseline
GROUP_DRO_STEP_Q = 0.1
GROUP_DRO_STEP_THETA = 0.1
GROUP_DRO_ITERS = 20_000

# Loss defaults
NEWSVENDOR_PRICE = 10.0
NEWSVENDOR_THETA_MAX = 100.0
LOGIT_CLAMP = 35.0

# Stock experiment: mean unit costs span about 3 to 1240 across contexts
STOCK_PRICE = 100.0
STOCK_THETA_MAX = 1_000.0
STOCK_STEP_SIZE = 0.5

# Monte Carlo evaluation sizes
EVAL_M_RISK = 100_000
EVAL_M_ERROR = 10_000
EXPERIMENT_RUNS = 50
MIN_SUCCESS_FRACTION = 0.8

# Random streams
PRNG_NAME = "numpy.random.PCG64 (SeedSequence-derived streams)"
