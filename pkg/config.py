"""
config.py — Central configuration for pcpolar.

All constants and environment loading live here.
Other modules import from this file; never import dotenv elsewhere.
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# ── Load .env ─────────────────────────────────────────────────────────────────
load_dotenv()

TOOL_VERSION: str = "1.0.0"

# ── Base Paths ─────────────────────────────────────────────────────────────────
BASE_DIR = Path(__file__).parent.resolve()
RUNS_DIR = Path(os.getenv("PCP_RUNS_DIR", str(BASE_DIR / "runs")))

# Create directories if they don't exist
RUNS_DIR.mkdir(parents=True, exist_ok=True)

# Append-only run log (see audit.py)
AUDIT_DB: Path = RUNS_DIR / "audit.db"

# ── Reproducibility ───────────────────────────────────────────────────────────
DEFAULT_SEED: int = int(os.getenv("PCP_SEED", "2024"))
DEFAULT_THREADS: int = int(os.getenv("PCP_THREADS", "1"))

# Trials decoded together as one numpy batch. Results do not depend on it.
TRIAL_BATCH: int = int(os.getenv("PCP_TRIAL_BATCH", "256"))

# ── Numerics ──────────────────────────────────────────────────────────────────
# Magnitude given to observations that are certain (BSC(0), unerased BEC
# symbols), so LLRs fed to the SC decoder stay finite.
LLR_CLIP: float = float(os.getenv("PCP_LLR_CLIP", "500.0"))

# Gauss–Hermite nodes for the BIAWGN capacity integral (>= 31).
GH_NODES: int = max(31, int(os.getenv("PCP_GH_NODES", "64")))

# ── Code design ───────────────────────────────────────────────────────────────
# Genie-aided trials per BSC reliability profile
MC_DESIGN_TRIALS: int = int(os.getenv("PCP_MC_DESIGN_TRIALS", "4000"))
DESIGN_SEED: int = int(os.getenv("PCP_DESIGN_SEED", "7"))

# Largest mother length the exhaustive bit-channel oracle will enumerate
BRUTE_FORCE_MAX_NU: int = 8

# Maximum k * n̄_i entries assemble_generator will materialise
GENERATOR_LIMIT: int = int(os.getenv("PCP_GENERATOR_LIMIT", str(2 ** 20)))

SPEC_SCHEMA_VERSION: int = 1

# ── Published constructions ───────────────────────────────────────────────────
# Three-level construction with pinned lengths (rates 3/4, 1/2, ~1/3)
TABLE1_K: int = 192
TABLE1_LENGTHS: tuple[int, ...] = (256, 128, 195)

# Random-puncturing comparison: one mother code, punctured to higher rates
BASELINE_N_U: int = 512
BASELINE_K: int = 171
