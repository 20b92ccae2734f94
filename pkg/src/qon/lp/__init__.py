"""Linear-program model, solvers and LP-format export.

All decision variables are continuous and nonnegative.  Tolerances are
fixed: feasibility 1e-7 on rows scaled by their largest coefficient,
reduced cost 1e-9.
"""

from __future__ import annotations

from .lpformat import export_lp_text
from .model import EQ, GE, LE, MAXIMIZE, MINIMIZE, LPModel, LPSolution, ModelError, Status
from .simplex import solve_highs, solve_simplex

BACKENDS = {"simplex": solve_simplex, "highs": solve_highs}


def solve(model: LPModel, backend: str = "simplex") -> LPSolution:
    """Solve ``model``; ``backend`` is ``"simplex"`` (bundled) or ``"highs"``."""
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    return fn(model)


__all__ = [
    "EQ",
    "GE",
    "LE",
    "MAXIMIZE",
    "MINIMIZE",
    "LPModel",
    "LPSolution",
    "ModelError",
    "Status",
    "export_lp_text",
    "solve",
    "solve_highs",
    "solve_simplex",
]
