"""Numerical tolerances and run defaults shared across the package."""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-12
    positivity: float = 1e-10
    membership: float = 1e-10
    balance: float = 1e-10
    lorentz: float = 1e-10
    trace_one: float = 1e-12
    sphere_drift: float = 1e-9
    pole: float = 1e-14


TOL = Tolerances()

# Largest p+q accepted by Signature; 2**12 coefficients per multivector.
MAX_CLIFFORD_DIM = 12

# density_exact refuses when N**k exceeds this.
EXACT_COST_CAP = 10**8

DEFAULT_BURN_IN = 100

# Default full-sphere grids for density iteration, keyed by sphere dimension n.
DEFAULT_GRIDS = {1: (8192,), 2: (1024, 512), 3: (128, 128, 128)}


def default_threads() -> int:
    raw = os.environ.get("QFRACT_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)
