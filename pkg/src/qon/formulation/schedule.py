"""Allocation schedules: extraction from LP solutions, independent audit,
storage-policy replay and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..lp import LPModel, LPSolution, Status, export_lp_text, solve
from .builder import FEASIBILITY, MAX_WEGR, MIN_DELAY, POLICIES, build_feasibility_multih, build_for
from .scenario import STORAGE, USER, Scenario, edge_capacity, storage_capacity

VALIDATION_TOL = 1e-6


class ScheduleError(RuntimeError):
    pass


@dataclass
class AllocationSchedule:
    """Solved rates and inventories indexed like the scenario.

    ``user_rates[k]`` has shape (paths of k, T); ``storage_rates[j]`` has
    shape (paths of j, T).  ``inventory[j]`` has shape (paths of j, T, A)
    where A is the number of age classes (1 unless the lifetime lies
    strictly between 1 and |T|); ``consumed[j]`` holds per-age consumption
    in that case and is None otherwise.
    """

    user_rates: list[np.ndarray]
    storage_rates: list[np.ndarray]
    inventory: list[np.ndarray]
    consumed: list[np.ndarray] | None
    objective: float
    status: Status
    objective_kind: str
    mode: str
    lifetime: int | None

    @property
    def n_intervals(self) -> int:
        if self.user_rates:
            return self.user_rates[0].shape[1]
        return self.inventory[0].shape[1] if self.inventory else 0

    def stored(self, j: int) -> np.ndarray:
        """Inventory of storage pair ``j`` summed over ages, shape (paths, T)."""
        return self.inventory[j].sum(axis=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["kind", "pair", "path", "interval", "age", "value"])
        for kind, arrays in (("w_user", self.user_rates), ("w_storage", self.storage_rates)):
            for owner, arr in enumerate(arrays):
                for (p, t), v in np.ndenumerate(arr):
                    wr.writerow([kind, owner, p, t, "", repr(float(v))])
        for kind, arrays in (("u", self.inventory), ("x", self.consumed or [])):
            for owner, arr in enumerate(arrays):
                aged = arr.shape[2] > 1 or self.mode == "age"
                for (p, t, a), v in np.ndenumerate(arr):
                    wr.writerow([kind, owner, p, t, a + 1 if aged else "", repr(float(v))])
        return buf.getvalue()


def extract_schedule(model: LPModel, sol: LPSolution, s: Scenario) -> AllocationSchedule:
    if sol.status is not Status.OPTIMAL or sol.x is None:
        raise ScheduleError(f"cannot extract a schedule from a {sol.status.value} solution")
    T = s.n_intervals
    mode = model.meta.get("mode", s.lifetime_mode)
    h = model.meta.get("lifetime")
    A = h if mode == "age" else 1
    user = [np.zeros((len(paths), T)) for paths in s.user_paths]
    store = [np.zeros((len(s.storage_paths(j)), T)) for j in range(len(s.storage_pairs))]
    inv = [np.zeros((len(s.storage_paths(j)), T, A)) for j in range(len(s.storage_pairs))]
    cons = [np.zeros_like(a) for a in inv] if mode == "age" else None
    for i, tag in enumerate(model.var_tags):
        if tag is None:
            continue
        v = max(0.0, float(sol.x[i]))
        if tag[0] == "w":
            _, kind, owner, p, t = tag
            (user if kind == USER else store)[owner][p, t] = v
        elif tag[0] == "u":
            _, j, p, t, a = tag
            inv[j][p, t, max(a - 1, 0)] = v
        elif tag[0] == "x":
            _, j, p, t, a = tag
            cons[j][p, t, a - 1] = v  # type: ignore[index]
    return AllocationSchedule(
        user_rates=user,
        storage_rates=store,
        inventory=inv,
        consumed=cons,
        objective=float(sol.objective),
        status=sol.status,
        objective_kind=model.meta.get("objective", FEASIBILITY),
        mode=mode,
        lifetime=h,
    )


# -- audit -------------------------------------------------------------------


@dataclass
class Violation:
    family: str
    where: tuple
    residual: float  # normalised by the row scale

    def __str__(self) -> str:
        return f"{self.family}{self.where}: {self.residual:.3e}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    max_residual: float = 0.0
    rows_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def check(self, family: str, where: tuple, terms, rhs: float, rel: str) -> None:
        """Record one row ``sum(coef * value) rel rhs``."""
        lhs = 0.0
        scale = abs(rhs)
        for coef, val in terms:
            lhs += coef * val
            scale = max(scale, abs(coef) * max(1.0, abs(val)))
        diff = lhs - rhs
        if rel == "<=":
            excess = max(0.0, diff)
        elif rel == ">=":
            excess = max(0.0, -diff)
        else:
            excess = abs(diff)
        r = excess / max(1.0, scale)
        self.rows_checked += 1
        self.max_residual = max(self.max_residual, r)
        if r > VALIDATION_TOL:
            self.violations.append(Violation(family, where, r))


def _consumption_terms(sch: AllocationSchedule, s: Scenario, j: int, p: int, t: int):
    out = []
    for kind, owner, q in s.consumers[(j, p)]:
        rate = (sch.user_rates if kind == USER else sch.storage_rates)[owner][q, t]
        g = s.cost(kind, owner, q, t)
        if math.isfinite(g):
            out.append((g * s.delta, rate))
    return out


def validate_schedule(sch: AllocationSchedule, s: Scenario) -> ValidationReport:
    """Re-evaluate every constraint family directly from schedule values.

    Independent of the LP matrix: rows are rebuilt from the scenario's path
    registries, purification costs and capacities.
    """
    rep = ValidationReport()
    T = s.n_intervals
    if len(sch.user_rates) != len(s.user_pairs) or len(sch.inventory) != len(s.storage_pairs):
        raise ScheduleError("schedule does not match the scenario")

    def prev(t):
        if t > 0:
            return t - 1
        return T - 1 if s.periodic else None

    # sign and unusable paths
    for kind, arrays in ((USER, sch.user_rates), (STORAGE, sch.storage_rates)):
        for owner, arr in enumerate(arrays):
            for (p, t), v in np.ndenumerate(arr):
                rep.check("sign", (kind, owner, p, t), [(-1.0, v)], 0.0, "<=")
                if not s.usable(kind, owner, p, t):
                    rep.check("unusable", (kind, owner, p, t), [(1.0, v)], 0.0, "=")
    for j, arr in enumerate(sch.inventory):
        for idx, v in np.ndenumerate(arr):
            rep.check("sign", ("u", j) + idx, [(-1.0, v)], 0.0, "<=")

    # demand
    if sch.objective_kind in (FEASIBILITY, MIN_DELAY) and s.demands is not None:
        for k, arr in enumerate(sch.user_rates):
            for t in range(T):
                rep.check("demand", (k, t), [(1.0, v) for v in arr[:, t]], float(s.demands[k, t]), "=")

    # inventories
    for j in range(len(s.storage_pairs)):
        inflow = sch.storage_rates[j]
        for p in range(len(s.storage_paths(j))):
            for t in range(T):
                cons_t = _consumption_terms(sch, s, j, p, t)
                tp = prev(t)
                if sch.mode == "age":
                    u = sch.inventory[j][p]
                    x = sch.consumed[j][p]  # type: ignore[index]
                    for a in range(u.shape[1]):
                        terms = [(1.0, u[t, a])]
                        if tp is not None:
                            if a == 0:
                                terms.append((-s.delta, inflow[p, tp]))
                            else:
                                terms += [(-1.0, u[tp, a - 1]), (1.0, x[tp, a - 1])]
                        rep.check("age", (j, p, t, a + 1), terms, 0.0, "=")
                        rep.check("age_use", (j, p, t, a + 1), [(1.0, x[t, a]), (-1.0, u[t, a])], 0.0, "<=")
                    rep.check("age_split", (j, p, t), cons_t + [(-1.0, v) for v in x[t]], 0.0, "=")
                else:
                    u = sch.inventory[j][p, :, 0]
                    terms = [(1.0, u[t])]
                    if tp is not None:
                        if sch.mode == "inf":
                            terms.append((-1.0, u[tp]))
                        terms += _consumption_terms(sch, s, j, p, tp)
                        terms.append((-s.delta, inflow[p, tp]))
                    rep.check("inventory", (j, p, t), terms, 0.0, "=")
                    rep.check("usage", (j, p, t), cons_t + [(-1.0, u[t])], 0.0, "<=")

    # edges: physical hops of every path, weighted by purification cost
    for key, users in s.edge_users.items():
        if not users:
            continue
        cap = edge_capacity(s, key)
        for t in range(T):
            terms = []
            for kind, owner, p in users:
                g = s.cost(kind, owner, p, t)
                if math.isfinite(g):
                    rate = (sch.user_rates if kind == USER else sch.storage_rates)[owner][p, t]
                    terms.append((g, rate))
            rep.check("edge", (key, t), terms, cap, "<=")

    # storage nodes
    for node, members in s.storage_members.items():
        cap = storage_capacity(s, node)
        for t in range(T):
            terms = [(1.0, float(sch.inventory[j][p, t].sum())) for j, p in members]
            rep.check("storage", (node, t), terms, cap, "<=")
    return rep


# -- storage policy replay ---------------------------------------------------


@dataclass
class ReplayReport:
    policy: str
    shortfall: float
    per_inventory: dict[tuple[int, int], np.ndarray]
    scale: float = 1.0  # largest single-interval draw, for the tolerance

    @property
    def ok(self) -> bool:
        return self.shortfall <= VALIDATION_TOL * max(1.0, self.scale)


def replay_policy(sch: AllocationSchedule, s: Scenario, policy: str) -> ReplayReport:
    """Replay the schedule's aggregate consumption against an age ledger.

    Pairs enter the ledger at age 1 one interval after they were generated
    and are discarded after ``lifetime`` intervals.  Each interval the
    required consumption is drawn by ``policy``: ``OldestFirst`` and
    ``NewestFirst`` drain age classes in order, ``Random`` draws from every
    class in proportion to what it holds (the expected outcome of a uniform
    draw), ``Free`` uses the per-age split chosen by the LP.  Consumption the
    ledger cannot cover is reported as shortfall, in pairs.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown storage policy {policy!r}")
    T = s.n_intervals
    h = sch.lifetime if sch.mode == "age" else (1 if sch.mode == "h1" else T)
    per: dict[tuple[int, int], np.ndarray] = {}
    total = 0.0
    scale = 1.0
    for j in range(len(s.storage_pairs)):
        for p in range(len(s.storage_paths(j))):
            short = np.zeros(T)
            ledger = np.zeros(h)  # ledger[a] holds pairs of age a + 1
            taken = np.zeros(h)
            for t in range(T):
                if t > 0 or s.periodic:
                    tp = (t - 1) % T
                    aged = np.zeros(h)
                    aged[1:] = (ledger - taken)[:-1]
                    aged[0] = s.delta * sch.storage_rates[j][p, tp]
                    ledger = np.maximum(aged, 0.0)
                need = sum(c * r for c, r in _consumption_terms(sch, s, j, p, t))
                scale = max(scale, need)
                taken = np.zeros(h)
                if policy == "Free" and sch.consumed is not None:
                    taken = np.minimum(sch.consumed[j][p, t], ledger)
                    short[t] = max(0.0, need - taken.sum())
                    continue
                if policy in ("Random", "Free"):
                    have = ledger.sum()
                    if have > 0:
                        taken = ledger * min(1.0, need / have)
                else:
                    order = range(h - 1, -1, -1) if policy == "OldestFirst" else range(h)
                    rest = need
                    for a in order:
                        d = min(rest, ledger[a])
                        taken[a] = d
                        rest -= d
                short[t] = max(0.0, need - taken.sum())
            per[(j, p)] = short
            total += float(short.sum())
    return ReplayReport(policy, total, per, scale)


# -- end-to-end --------------------------------------------------------------


@dataclass
class SolveResult:
    model: LPModel
    solution: LPSolution
    schedule: AllocationSchedule | None = None
    report: ValidationReport | None = None
    replay: ReplayReport | None = None

    @property
    def status(self) -> Status:
        return self.solution.status

    @property
    def feasible(self) -> bool:
        """Optimal, audited and (for a non-Free policy) replayed without shortfall."""
        if self.solution.status is not Status.OPTIMAL or self.report is None:
            return False
        return self.report.ok and (self.replay is None or self.replay.ok)


def solve_scenario(
    s: Scenario,
    objective: str = FEASIBILITY,
    policy: str = "Free",
    backend: str = "simplex",
    export_lp: str | None = None,
) -> SolveResult:
    """Build, solve, extract and audit one scenario."""
    if objective == FEASIBILITY and s.lifetime_mode == "age":
        model = build_feasibility_multih(s, policy)
    else:
        model = build_for(s, objective, policy)
    if export_lp:
        with open(export_lp, "w") as fh:
            fh.write(export_lp_text(model))
    sol = solve(model, backend)
    res = SolveResult(model, sol)
    if sol.status is Status.OPTIMAL:
        res.schedule = extract_schedule(model, sol, s)
        res.report = validate_schedule(res.schedule, s)
        if policy != "Free":
            res.replay = replay_policy(res.schedule, s, policy)
    return res


__all__ = [
    "AllocationSchedule",
    "ReplayReport",
    "ScheduleError",
    "SolveResult",
    "ValidationReport",
    "Violation",
    "extract_schedule",
    "replay_policy",
    "solve_scenario",
    "validate_schedule",
    "MAX_WEGR",
]
