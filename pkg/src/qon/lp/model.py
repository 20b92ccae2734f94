from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

# CPLEX LP-format identifier rules, minus characters that would need care
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]{}()!#$%&,;?@'~|]*$")

LE, GE, EQ = "<=", ">=", "="
MAXIMIZE, MINIMIZE = "maximize", "minimize"


class ModelError(ValueError):
    pass


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICALLY_UNSTABLE = "NumericallyUnstable"


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    rel: str
    rhs: float


class LPModel:
    """Continuous linear program over nonnegative variables.

    Variables are referred to by the index ``add_variable`` returns.  Each
    variable and constraint may carry an arbitrary ``tag`` for mapping
    solutions back to the problem that produced the model.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float | None] = []
        self.var_tags: list[Any] = []
        self._index: dict[str, int] = {}
        self.constraints: list[Constraint] = []
        self.con_tags: list[Any] = []
        self._con_names: set[str] = set()
        self.sense = MINIMIZE
        self.objective: dict[int, float] = {}
        self.meta: dict[str, Any] = {}

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def is_feasibility(self) -> bool:
        return not any(self.objective.values())

    def _check_name(self, name: str) -> None:
        if not _NAME_RE.match(name) or len(name) > 255:
            raise ModelError(f"illegal name {name!r}")
        if re.match(r"^[eE][0-9+-]", name):
            raise ModelError(f"name {name!r} reads as an exponent")

    def add_variable(
        self, name: str, lower: float = 0.0, upper: float | None = None, tag: Any = None
    ) -> int:
        self._check_name(name)
        if name in self._index:
            raise ModelError(f"duplicate variable {name!r}")
        if lower < 0 or not math.isfinite(lower):
            raise ModelError(f"lower bound of {name!r} must be finite and >= 0")
        if upper is not None and (math.isnan(upper) or upper < lower):
            raise ModelError(f"upper bound of {name!r} below its lower bound")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(None if upper is None or math.isinf(upper) else float(upper))
        self.var_tags.append(tag)
        self._index[name] = idx
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    def _clean(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]]) -> dict[int, float]:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        out: dict[int, float] = {}
        for i, c in items:
            if not (0 <= i < self.n_vars):
                raise ModelError(f"unknown variable index {i}")
            c = float(c)
            if not math.isfinite(c):
                raise ModelError(f"non-finite coefficient on {self.var_names[i]!r}")
            out[i] = out.get(i, 0.0) + c
        return {i: c for i, c in out.items() if c != 0.0}

    def add_constraint(
        self,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        rel: str,
        rhs: float,
        name: str | None = None,
        tag: Any = None,
    ) -> int:
        if rel not in (LE, GE, EQ):
            raise ModelError(f"unknown relation {rel!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError("right-hand side must be finite")
        name = name or f"c{len(self.constraints)}"
        self._check_name(name)
        if name in self._con_names:
            raise ModelError(f"duplicate constraint {name!r}")
        self._con_names.add(name)
        self.constraints.append(Constraint(name, self._clean(coeffs), rel, rhs))
        self.con_tags.append(tag)
        return len(self.constraints) - 1

    def set_objective(
        self, sense: str, coeffs: Mapping[int, float] | Iterable[tuple[int, float]] = ()
    ) -> None:
        if sense not in (MAXIMIZE, MINIMIZE):
            raise ModelError(f"unknown sense {sense!r}")
        self.sense = sense
        self.objective = self._clean(coeffs)

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, con in enumerate(self.constraints):
            for i, c in con.coeffs.items():
                rows.append(r)
                cols.append(i)
                vals.append(c)
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.n_constraints, self.n_vars), dtype=float
        )

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for i, v in self.objective.items():
            c[i] = v
        return c

    def evaluate(self, x: np.ndarray) -> float:
        return float(sum(c * x[i] for i, c in self.objective.items()))

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Violation of each row, scaled by the row's largest coefficient."""
        out = np.zeros(self.n_constraints)
        for r, con in enumerate(self.constraints):
            lhs = sum(c * x[i] for i, c in con.coeffs.items())
            scale = max([abs(c) for c in con.coeffs.values()] + [1e-300])
            if con.rel == LE:
                v = lhs - con.rhs
            elif con.rel == GE:
                v = con.rhs - lhs
            else:
                v = abs(lhs - con.rhs)
            out[r] = max(0.0, v) / scale if con.coeffs else max(0.0, v)
        return out


@dataclass
class LPSolution:
    status: Status
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float | None = None
    slacks: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, model: LPModel, name: str) -> float:
        return float(self.x[model.index(name)])
