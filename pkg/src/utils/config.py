#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# ============================================================
# File: config.py
# Revision: Rev.1
# Purpose: Numeric tolerances, search limits and environment
#          overrides shared by every verifier module.
# ============================================================

import os
from dataclasses import dataclass
from typing import Optional

# ---------- TOLERANCES ----------
EPSILON = 1e-8             # strict sign tests and witness checks
OUTPUT_DELTA = 1e-6        # encoding of y > c as y >= c + delta
RELU_TOL = 1e-6            # check_success tolerance on f = max(0, b)
LP_FEASIBILITY_TOL = 1e-9
LP_PIVOT_TOL = 1e-9
LP_MAX_ITERATIONS = int(os.environ.get("RESINET_LP_MAX_ITER", "5000"))

# ---------- ORACLE ----------
ORACLE_MAX_RELUS = 20
GRID_MAX_DIM = 4

# ---------- SEARCH LIMITS ----------
DEFAULT_MAX_STATES = 100_000
DEFAULT_TIMEOUT = 600.0

# ---------- BENCH ----------
TIE_SECONDS = 5.0
GEN_MAX_WIDTH = 8
GEN_MAX_DEPTH = 4
GEN_MAX_RELUS = 10
GEN_WEIGHT_RANGE = 4.0

# ---------- LOGGING ----------
LOG_ENV_VAR = "RESINET_LOG"
DEFAULT_LOG_LEVEL = "INFO"


@dataclass(frozen=True)
class Limits:
    """Resource limits for one verification run.

    max_states caps visited search states per CEGAR iteration;
    wall_clock (seconds) is one budget shared by all iterations.
    """
    max_states: Optional[int] = DEFAULT_MAX_STATES
    wall_clock: Optional[float] = DEFAULT_TIMEOUT
