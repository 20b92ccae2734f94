"""Scenario -> LP translation.

Notation in names: ``w_k{k}_p{p}_t{t}`` user-pair rate on path ``p``,
``w_j{j}_p{p}_t{t}`` storage-pair rate, ``u_j{j}_p{p}_t{t}`` stored pairs
(``_a{a}`` suffix per age class), ``x_j{j}_p{p}_t{t}_a{a}`` pairs of age
``a`` consumed from an inventory.  Intervals are 0-based; nothing is stored
before interval 0 unless the horizon is periodic.

Row families (tags on ``LPModel.con_tags``):

* ``inventory``  stored pairs carried to the next interval
  (h >= |T|: previous inventory - consumption + inflow; h = 1: inflow -
  consumption only)
* ``usage``      consumption during an interval <= inventory at its start
* ``age`` / ``age_use`` / ``age_split``  age-class bookkeeping for 1 < h < |T|
* ``demand``     sum of a user pair's path rates equals its demand
* ``edge``       purification-weighted rate over an edge <= its capacity
* ``storage``    stored pairs at a node <= its capacity

Sizes: at most |K|·|P|·|T| user-rate variables; inventory rows grow with
|T|·|J|·|P_j| and edge rows with |T|·|E|.  Everything is an LP; rates and
inventories are continuous.
"""

from __future__ import annotations

from collections import defaultdict
import numpy as np

from ..lp import EQ, LE, MAXIMIZE, MINIMIZE, LPModel
from .scenario import STORAGE, USER, Scenario, ScenarioError, edge_capacity, storage_capacity

FEASIBILITY, MAX_WEGR, MIN_DELAY = "feasibility", "max-wegr", "min-delay"
OBJECTIVES = (FEASIBILITY, MAX_WEGR, MIN_DELAY)
POLICIES = ("Free", "OldestFirst", "NewestFirst", "Random")


class _Builder:
    def __init__(self, s: Scenario, mode: str, objective: str, policy: str = "Free"):
        if mode not in ("inf", "h1", "age"):
            raise ValueError(f"unknown lifetime mode {mode!r}")
        self.s = s
        self.mode = mode
        self.objective = objective
        self.policy = policy
        self.T = s.n_intervals
        self.h = 1 if mode == "h1" else (s.lifetime or self.T) if mode == "age" else None
        self.m = LPModel(f"qon_{objective.replace('-', '_')}_{mode}")
        self.m.meta.update(objective=objective, mode=mode, lifetime=self.h, policy=policy)
        self.w: dict[tuple[str, int, int, int], int] = {}
        self.u: dict[tuple[int, int, int, int], int] = {}
        self.x: dict[tuple[int, int, int, int], int] = {}

    # -- variables ---------------------------------------------------------

    def add_rates(self) -> None:
        s = self.s
        for kind, owner, p, _ in s.all_paths():
            letter = "k" if kind == USER else "j"
            for t in range(self.T):
                if not s.usable(kind, owner, p, t):
                    continue
                self.w[(kind, owner, p, t)] = self.m.add_variable(
                    f"w_{letter}{owner}_p{p}_t{t}", tag=("w", kind, owner, p, t)
                )

    def add_inventories(self) -> None:
        s = self.s
        ages = range(1, self.h + 1) if self.mode == "age" else [0]
        for j in range(len(s.storage_pairs)):
            for p in range(len(s.storage_paths(j))):
                for t in range(self.T):
                    for a in ages:
                        suffix = f"_a{a}" if self.mode == "age" else ""
                        self.u[(j, p, t, a)] = self.m.add_variable(
                            f"u_j{j}_p{p}_t{t}{suffix}", tag=("u", j, p, t, a)
                        )
                        if self.mode == "age":
                            self.x[(j, p, t, a)] = self.m.add_variable(
                                f"x_j{j}_p{p}_t{t}_a{a}", tag=("x", j, p, t, a)
                            )

    # -- expressions -------------------------------------------------------

    def consumption(self, j: int, p: int, t: int, scale: float = 1.0) -> list[tuple[int, float]]:
        """g-weighted pairs drawn from inventory ``(j, p)`` during interval ``t``."""
        s = self.s
        out = []
        for kind, owner, q in s.consumers[(j, p)]:
            var = self.w.get((kind, owner, q, t))
            if var is not None:
                out.append((var, scale * s.cost(kind, owner, q, t) * s.delta))
        return out

    def prev(self, t: int) -> int | None:
        if t > 0:
            return t - 1
        return self.T - 1 if self.s.periodic else None

    # -- constraint families ----------------------------------------------

    def add_inventory_rows(self) -> None:
        s = self.s
        for (j, p, t, a), var in self.u.items():
            if self.mode == "age":
                continue
            terms: list[tuple[int, float]] = [(var, 1.0)]
            tp = self.prev(t)
            if tp is not None:
                if self.mode == "inf":
                    terms.append((self.u[(j, p, tp, 0)], -1.0))
                terms += self.consumption(j, p, tp)
                inflow = self.w.get((STORAGE, j, p, tp))
                if inflow is not None:
                    terms.append((inflow, -s.delta))
            self.m.add_constraint(terms, EQ, 0.0, f"inv_j{j}_p{p}_t{t}", ("inventory", j, p, t))
        for j, p, t, a in self.u:
            if a not in (0, 1):
                continue
            terms = self.consumption(j, p, t)
            if self.mode == "age":
                terms += [(self.x[(j, p, t, b)], -1.0) for b in range(1, self.h + 1)]
                self.m.add_constraint(terms, EQ, 0.0, f"split_j{j}_p{p}_t{t}", ("age_split", j, p, t))
            else:
                terms.append((self.u[(j, p, t, 0)], -1.0))
                self.m.add_constraint(terms, LE, 0.0, f"use_j{j}_p{p}_t{t}", ("usage", j, p, t))

    def add_age_rows(self) -> None:
        s = self.s
        for (j, p, t, a), var in self.u.items():
            terms: list[tuple[int, float]] = [(var, 1.0)]
            tp = self.prev(t)
            if tp is not None:
                if a == 1:
                    inflow = self.w.get((STORAGE, j, p, tp))
                    if inflow is not None:
                        terms.append((inflow, -s.delta))
                else:
                    terms += [(self.u[(j, p, tp, a - 1)], -1.0), (self.x[(j, p, tp, a - 1)], 1.0)]
            self.m.add_constraint(terms, EQ, 0.0, f"age_j{j}_p{p}_t{t}_a{a}", ("age", j, p, t, a))
            self.m.add_constraint(
                [(self.x[(j, p, t, a)], 1.0), (var, -1.0)],
                LE,
                0.0,
                f"ageuse_j{j}_p{p}_t{t}_a{a}",
                ("age_use", j, p, t, a),
            )

    def add_demand_rows(self) -> None:
        s = self.s
        if s.demands is None:
            raise ScenarioError(f"objective {self.objective!r} needs demands")
        for k in range(len(s.user_pairs)):
            for t in range(self.T):
                terms = [
                    (self.w[(USER, k, p, t)], 1.0)
                    for p in range(len(s.user_paths[k]))
                    if (USER, k, p, t) in self.w
                ]
                self.m.add_constraint(
                    terms, EQ, float(s.demands[k, t]), f"dem_k{k}_t{t}", ("demand", k, t)
                )

    def add_edge_rows(self) -> None:
        s = self.s
        for e_idx, (key, users) in enumerate(s.edge_users.items()):
            if not users:
                continue
            cap = edge_capacity(s, key)
            for t in range(self.T):
                terms = [
                    (self.w[(kind, owner, p, t)], s.cost(kind, owner, p, t))
                    for kind, owner, p in users
                    if (kind, owner, p, t) in self.w
                ]
                if terms:
                    self.m.add_constraint(terms, LE, cap, f"edge_e{e_idx}_t{t}", ("edge", key, t))

    def add_storage_rows(self) -> None:
        s = self.s
        by_inventory = defaultdict(list)
        for (j, p, t, _), var in self.u.items():
            by_inventory[(j, p, t)].append(var)
        for s_idx, (node, members) in enumerate(s.storage_members.items()):
            if not members:
                continue
            cap = storage_capacity(s, node)
            for t in range(self.T):
                terms = [(var, 1.0) for j, p in members for var in by_inventory[(j, p, t)]]
                self.m.add_constraint(terms, LE, cap, f"store_s{s_idx}_t{t}", ("storage", node, t))

    def add_objective(self) -> None:
        s = self.s
        if self.objective == FEASIBILITY:
            self.m.set_objective(MINIMIZE, ())
        elif self.objective == MAX_WEGR:
            if s.weights is None:
                raise ScenarioError("max-wegr needs weights")
            wts = np.asarray(s.weights)
            if np.any(wts < 0) or np.any(wts > 1):
                raise ScenarioError("weights must lie in [0, 1]")
            self.m.set_objective(
                MAXIMIZE,
                (
                    (var, wts[owner, t] / self.T)
                    for (kind, owner, p, t), var in self.w.items()
                    if kind == USER
                ),
            )
        elif self.objective == MIN_DELAY:
            self.m.set_objective(
                MINIMIZE,
                (
                    (var, float(s.user_paths[owner][p].hop_count))
                    for (kind, owner, p, t), var in self.w.items()
                    if kind == USER
                ),
            )
        else:
            raise ValueError(f"unknown objective {self.objective!r}")

    def build(self) -> LPModel:
        self.add_rates()
        self.add_inventories()
        self.add_inventory_rows()
        if self.mode == "age":
            self.add_age_rows()
        if self.objective in (FEASIBILITY, MIN_DELAY):
            self.add_demand_rows()
        self.add_edge_rows()
        self.add_storage_rows()
        self.add_objective()
        return self.m


def build(s: Scenario, objective: str = FEASIBILITY, mode: str | None = None, policy: str = "Free") -> LPModel:
    """Generic entry point; ``mode`` defaults to the scenario's lifetime mode."""
    if policy not in POLICIES:
        raise ValueError(f"unknown storage policy {policy!r}")
    return _Builder(s, mode or s.lifetime_mode, objective, policy).build()


def build_feasibility_inf(s: Scenario) -> LPModel:
    """Demand-spike feasibility LP for lifetimes h >= |T|."""
    if s.lifetime_mode != "inf":
        raise ScenarioError("build_feasibility_inf needs h >= |T|")
    return build(s, FEASIBILITY, "inf")


def build_feasibility_h1(s: Scenario) -> LPModel:
    """Demand-spike feasibility LP for single-interval lifetimes."""
    if s.lifetime != 1:
        raise ScenarioError("build_feasibility_h1 needs h = 1")
    return build(s, FEASIBILITY, "h1")


def build_feasibility_multih(s: Scenario, policy: str = "Free") -> LPModel:
    """Age-indexed feasibility LP for 1 <= h <= |T|.

    Only the ``Free`` policy (the LP picks which ages to consume) is a linear
    constraint set; other policies are checked afterwards with
    :func:`replay_policy`.
    """
    h = s.lifetime if s.lifetime is not None else s.n_intervals
    if not (1 <= h <= s.n_intervals):
        raise ScenarioError(f"lifetime {h} outside [1, {s.n_intervals}]")
    if policy not in POLICIES:
        raise ValueError(f"unknown storage policy {policy!r}")
    # a single age class is exactly the one-interval inventory rule
    mode = "h1" if h == 1 else "age"
    return _Builder(s.with_(lifetime=h), mode, FEASIBILITY, policy).build()


def build_max_wegr(s: Scenario, weights=None) -> LPModel:
    """Maximise the time-averaged weighted user rate under the lifetime variant of ``s``."""
    if weights is not None:
        from .scenario import _grid

        s = s.with_(weights=_grid(weights, len(s.user_pairs), s.n_intervals, "weights"))
    return build(s, MAX_WEGR)


def build_min_delay(s: Scenario) -> LPModel:
    """Minimise total swap-weighted user rate subject to meeting every demand."""
    return build(s, MIN_DELAY)


def build_for(s: Scenario, objective: str, policy: str = "Free") -> LPModel:
    if objective == FEASIBILITY:
        return build(s, FEASIBILITY, policy=policy)
    if objective == MAX_WEGR:
        return build_max_wegr(s)
    if objective == MIN_DELAY:
        return build_min_delay(s)
    raise ValueError(f"unknown objective {objective!r}")


def nonzero_paths(model: LPModel, x: np.ndarray, tol: float = 1e-9) -> dict:
    """Debug helper: variables with value above ``tol`` grouped by tag kind."""
    out = defaultdict(list)
    for i, tag in enumerate(model.var_tags):
        if tag is not None and x[i] > tol:
            out[tag[0]].append((model.var_names[i], float(x[i])))
    return dict(out)
