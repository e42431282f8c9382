import os

from dotenv import load_dotenv

load_dotenv()

# Logging
LOG_LEVEL = os.getenv("S2PMLP_LOG_LEVEL", "INFO").upper()

# Protocol defaults
DEFAULT_RHO = int(os.getenv("S2PMLP_RHO", "2"))
DEFAULT_VERIFY_ROUNDS = int(os.getenv("S2PMLP_VERIFY_ROUNDS", "10"))
DEFAULT_MASK_SCALE = float(os.getenv("S2PMLP_MASK_SCALE", "1e-2"))
DEFAULT_SEED = int(os.getenv("S2PMLP_SEED", "0"))
VERIFY_TOLERANCE = float(os.getenv("S2PMLP_VERIFY_TOLERANCE", "1e-9"))

# Runtime
RECV_TIMEOUT = float(os.getenv("S2PMLP_RECV_TIMEOUT", "5.0"))
MAX_WORKERS = int(os.getenv("S2PMLP_MAX_WORKERS", "4"))

# Service
API_KEY = os.getenv("API_KEY", "dev-key")
