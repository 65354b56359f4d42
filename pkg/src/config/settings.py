import os
from dotenv import load_dotenv

load_dotenv()

DEBUG = os.getenv("DEBUG", "False") == "True"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Numerical tolerances
ROW_SUM_TOL = float(os.getenv("RETRIAL_ROW_SUM_TOL", "1e-9"))
PROB_TOL = float(os.getenv("RETRIAL_PROB_TOL", "1e-12"))
RESIDUAL_TOL = float(os.getenv("RETRIAL_RESIDUAL_TOL", "1e-9"))
CLAMP_TOL = float(os.getenv("RETRIAL_CLAMP_TOL", "1e-12"))

# Size caps (entries per block, total states for the dense oracle)
DIMENSION_CAP = int(float(os.getenv("RETRIAL_DIMENSION_CAP", "2e6")))
DENSE_CAP = int(os.getenv("RETRIAL_DENSE_CAP", "5000"))

# Truncation
TRUNC_EPS = float(os.getenv("RETRIAL_TRUNC_EPS", "1e-5"))
M_CAP = int(os.getenv("RETRIAL_M_CAP", "60"))
M_MIN = int(os.getenv("RETRIAL_M_MIN", "1"))

# Simulation
SIM_BATCHES = int(os.getenv("RETRIAL_SIM_BATCHES", "20"))
SIM_WARMUP = float(os.getenv("RETRIAL_SIM_WARMUP", "0.2"))
SIM_RATE_BOUND = float(os.getenv("RETRIAL_SIM_RATE_BOUND", "1e9"))
SIM_MIN_HORIZON = int(os.getenv("RETRIAL_SIM_MIN_HORIZON", "10000"))

WORKERS = int(os.getenv("RETRIAL_WORKERS", "1"))
OUTPUT_DIR = os.getenv("RETRIAL_OUTPUT_DIR", "results")
