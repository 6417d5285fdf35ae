"""Shared numerical tolerances and the structured error type."""

from __future__ import annotations

import os

ZERO_TOL_ENV = "GRIDLODF_ZERO_TOL"
DEFAULT_ZERO_TOL = 1e-9


class GridError(Exception):
    """Error carrying a stable machine-readable code.

    Codes used across the package: SINGULAR_REDUCED, UNBALANCED_INJECTION,
    SLACK_EXCLUDED, CUT_SET, SINGULAR_OUTAGE, OVER_LIMIT, INVALID_PARTITION,
    SAME_EDGE, USE_CUTSET_OP, INVALID_ISLAND, BAD_ALPHA, DF_FORM_MISMATCH.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def zero_tol() -> float:
    """Base zero tolerance, overridable via the GRIDLODF_ZERO_TOL env var."""
    raw = os.environ.get(ZERO_TOL_ENV)
    if raw is None:
        return DEFAULT_ZERO_TOL
    return float(raw)


def zero_threshold(scale: float = 0.0) -> float:
    """Threshold below which an entry counts as numerically zero.

    ``scale`` is typically the infinity norm of the surrounding matrix, so
    the cutoff is uniform across the localization tests.
    """
    return zero_tol() * (1.0 + abs(scale))


def matrix_csv(matrix) -> str:
    """Row-major CSV with full double precision scientific notation."""
    return "\n".join(
        ",".join(format(float(x), ".17e") for x in row) for row in matrix
    ) + "\n"
