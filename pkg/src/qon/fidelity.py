"""Werner-state fidelity arithmetic and DEJMPS purification cost.

Swaps are noise-free: two Werner states with parameters ``w1`` and ``w2``
(``w = (4F - 1) / 3``) swap into a Werner state with parameter ``w1 * w2``.
Purification follows the DEJMPS recurrence on two identical Bell-diagonal
copies; the cost of reaching a target fidelity is the expected number of
base pairs consumed per delivered pair, ``prod(2 / p_k)`` over the rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

WERNER_MIN = 0.25
NORM_TOL = 1e-12
TARGET_TOL = 1e-12
MAX_ROUNDS = 64


class FidelityError(ValueError):
    """Input fidelity outside the Werner domain."""


class UnpurifiableError(FidelityError):
    """Base fidelity at or below 1/2 cannot be raised by recurrence purification."""


class TargetUnreachableError(FidelityError):
    """Target fidelity not reached within ``MAX_ROUNDS`` rounds."""


def _check_fidelity(f: float, name: str = "fidelity", closed: bool = False) -> float:
    f = float(f)
    ok = (WERNER_MIN <= f <= 1.0) if closed else (WERNER_MIN < f <= 1.0)
    if not ok:
        raise FidelityError(f"{name}={f!r} outside {'[' if closed else '('}0.25, 1]")
    return f


def werner_parameter(f: float) -> float:
    return (4.0 * f - 1.0) / 3.0


def fidelity_from_parameter(w: float) -> float:
    return 0.25 + 0.75 * w


@dataclass(frozen=True)
class WernerState:
    fidelity: float

    def __post_init__(self) -> None:
        _check_fidelity(self.fidelity)

    def to_bell_diagonal(self) -> "BellDiagonalState":
        rest = (1.0 - self.fidelity) / 3.0
        return BellDiagonalState(self.fidelity, rest, rest, rest)


@dataclass(frozen=True)
class BellDiagonalState:
    """Bell-diagonal coefficients ordered (Phi+, Psi-, Psi+, Phi-).

    ``a`` is the weight on the target state Phi+, i.e. the fidelity.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        coeffs = (self.a, self.b, self.c, self.d)
        if min(coeffs) < -NORM_TOL:
            raise FidelityError(f"negative Bell coefficient in {coeffs}")
        if abs(sum(coeffs) - 1.0) > NORM_TOL * 10:
            raise FidelityError(f"Bell coefficients sum to {sum(coeffs)!r}, not 1")

    @property
    def fidelity(self) -> float:
        return self.a

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)


def swap_fidelity(f1: float, f2: float) -> float:
    """Fidelity after a noise-free swap of two Werner pairs."""
    f1 = _check_fidelity(f1, "f1", closed=True)
    f2 = _check_fidelity(f2, "f2", closed=True)
    return 0.25 + 0.75 * ((4.0 * f1 - 1.0) / 3.0) * ((4.0 * f2 - 1.0) / 3.0)


def path_fidelity(link_fidelities: Iterable[float]) -> float:
    """Basic fidelity of a chain of links swapped end to end.

    A fully depolarised link (F = 0.25) absorbs: the whole path is 0.25.
    """
    fids = [_check_fidelity(f, closed=True) for f in link_fidelities]
    if not fids:
        raise FidelityError("path_fidelity needs at least one link")
    w = 1.0
    for f in fids:
        w *= werner_parameter(f)
    return fidelity_from_parameter(w)


def dejmps_step(state: BellDiagonalState) -> tuple[BellDiagonalState, float]:
    """One DEJMPS round on two identical copies of ``state``.

    Returns:
        The post-selected output state and the success probability.
    """
    a, b, c, d = state.as_tuple()
    n = (a + b) ** 2 + (c + d) ** 2
    if n <= 0.0:
        raise FidelityError("DEJMPS success probability is zero")
    out = ((a * a + b * b) / n, 2.0 * c * d / n, (c * c + d * d) / n, 2.0 * a * b / n)
    s = sum(out)
    return BellDiagonalState(*(x / s for x in out)), n


@dataclass(frozen=True)
class PurificationPlan:
    base_fidelity: float
    target: float
    success_probabilities: tuple[float, ...]
    fidelities: tuple[float, ...]
    cost: float

    @property
    def rounds(self) -> int:
        return len(self.success_probabilities)

    @property
    def final_fidelity(self) -> float:
        return self.fidelities[-1] if self.fidelities else self.base_fidelity


def purification_plan(f: float, target: float, retwirl: bool = False) -> PurificationPlan:
    """Iterate DEJMPS from Werner fidelity ``f`` until ``target`` is met.

    With ``retwirl`` the state is projected back onto a Werner state after
    every round (sensitivity option; the default keeps the full
    Bell-diagonal recurrence).

    Raises:
        UnpurifiableError: ``f <= 0.5`` and below target.
        TargetUnreachableError: more than ``MAX_ROUNDS`` rounds needed.
    """
    f = _check_fidelity(f, "base fidelity")
    target = _check_fidelity(target, "target")
    if f >= target - TARGET_TOL:
        return PurificationPlan(f, target, (), (), 1.0)
    if f <= 0.5:
        raise UnpurifiableError(f"base fidelity {f} <= 0.5 cannot reach {target}")
    state = WernerState(f).to_bell_diagonal()
    probs: list[float] = []
    fids: list[float] = []
    while state.fidelity < target - TARGET_TOL:
        if len(probs) >= MAX_ROUNDS:
            raise TargetUnreachableError(
                f"target {target} not reached from {f} in {MAX_ROUNDS} rounds"
            )
        state, p = dejmps_step(state)
        if retwirl:
            state = WernerState(min(1.0, state.fidelity)).to_bell_diagonal()
        probs.append(p)
        fids.append(state.fidelity)
    cost = 1.0
    for p in probs:
        cost *= 2.0 / p
    return PurificationPlan(f, target, tuple(probs), tuple(fids), cost)


@lru_cache(maxsize=65536)
def _cached_cost(f_key: float, target: float, retwirl: bool) -> float:
    try:
        return purification_plan(f_key, target, retwirl).cost
    except FidelityError:
        return math.inf


def purification_cost(f: float, target: float, retwirl: bool = False) -> float:
    """``g(F, F_target)``; ``inf`` when the target is out of reach.

    Cached on ``F`` rounded to 1e-12. ``lru_cache`` is thread-safe.
    """
    return _cached_cost(round(float(f), 12), float(target), bool(retwirl))


def purify_table(
    fidelities: Sequence[float], targets: Sequence[float], retwirl: bool = False
) -> list[tuple[float, float, int | None, float]]:
    """Rows of ``(F, F_target, k_max, g)``; ``k_max`` is None when unreachable."""
    rows = []
    for f in fidelities:
        for t in targets:
            try:
                plan = purification_plan(f, t, retwirl)
                rows.append((f, t, plan.rounds, plan.cost))
            except FidelityError:
                rows.append((f, t, None, math.inf))
    return rows
