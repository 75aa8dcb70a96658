import os
from typing import Dict
from dotenv import load_dotenv

load_dotenv()

# ---------------------------------------------------------------------------
# Tool identity
# ---------------------------------------------------------------------------
TOOL_NAME = "twistorkit"
VERSION = "0.4.0"
REPORT_SCHEMA = "twistorkit.report/1"


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        print(f"WARNING: {name}={raw!r} is not an integer, using {default}")
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = float(raw)
    except ValueError:
        print(f"WARNING: {name}={raw!r} is not a number, using {default}")
        return default
    return value if value > 0 else default


# ---------------------------------------------------------------------------
# Runtime settings
# TWISTORKIT_THREADS    worker threads for grid sweeps (values < 1 clamp to 1)
# TWISTORKIT_LOG_LEVEL  logging level name for the stderr handler
# TWISTORKIT_FD_STEP    stencil step for the mean curvature of the lift
# ---------------------------------------------------------------------------
THREADS = max(1, _int_env("TWISTORKIT_THREADS", 1))
LOG_LEVEL = os.getenv("TWISTORKIT_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"
FD_STEP = _float_env("TWISTORKIT_FD_STEP", 1e-4)

# ---------------------------------------------------------------------------
# Sweep defaults
# ---------------------------------------------------------------------------
DEFAULT_LAMBDAS = (0.5, 1.0, 2.0)
DEFAULT_SIGNS = ("+", "-")
DEFAULT_N_THETA = 16
DEFAULT_CHECKS = ("superminimal", "lagrangian", "minimal-L", "converse", "lie")
CHECK_ORDER = DEFAULT_CHECKS

# ---------------------------------------------------------------------------
# Tolerances
# Every defect in a report is compared against one of these keys; scenario
# files and --tolerance key=val override single entries.
# ---------------------------------------------------------------------------
DEFAULT_TOLERANCES: Dict[str, float] = {
    "vertical": 1e-6,
    "indicatrix": 1e-6,
    "holonomy": 1e-5,
    "vertical_fd": 1e-4,  # any finite-difference surface map in play
    "lagrangian": 1e-5,
    "negative_margin": 1e-2,
    "minimal_l": 1e-3,
    "containment": 1e-6,
    "lie": 1e-13,
    "mean_curvature_surface": 1e-5,
}


def merged_tolerances(overrides: Dict[str, float] = None) -> Dict[str, float]:
    """Defaults with overrides applied; unknown keys are rejected"""
    merged = dict(DEFAULT_TOLERANCES)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise KeyError(f"Unknown tolerance key '{key}'")
        merged[key] = float(value)
    return merged
