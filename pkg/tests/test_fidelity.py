import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dejmps_tensor, werner_coeffs
from qon.fidelity import (
    BellDiagonalState,
    FidelityError,
    TargetUnreachableError,
    UnpurifiableError,
    WernerState,
    dejmps_step,
    path_fidelity,
    purification_cost,
    purification_plan,
    purify_table,
    swap_fidelity,
)

fid = st.floats(min_value=0.2501, max_value=1.0, allow_nan=False)
purifiable = st.floats(min_value=0.5001, max_value=0.999, allow_nan=False)


def closed_form(f1, f2):
    return 0.25 + 0.75 * ((4 * f1 - 1) / 3) * ((4 * f2 - 1) / 3)


# -- swapping ------------------------------------------------------------------


def test_swap_perfect_states():
    assert swap_fidelity(1, 1) == 1


@pytest.mark.parametrize("f", [0.3, 0.75, 0.97])
def test_swap_identity_element(f):
    assert swap_fidelity(1.0, f) == pytest.approx(f, abs=1e-15)


def test_swap_example_value():
    assert swap_fidelity(0.97, 0.97) == pytest.approx(0.25 + 0.75 * 0.96**2, abs=1e-12)
    assert swap_fidelity(0.97, 0.97) == pytest.approx(0.9412, abs=1e-12)


def test_swap_rejects_out_of_domain():
    with pytest.raises(FidelityError):
        swap_fidelity(1.2, 0.9)
    with pytest.raises(FidelityError):
        swap_fidelity(0.9, 0.1)


def test_path_fidelity_examples():
    assert path_fidelity([0.93]) == 0.93
    assert path_fidelity([0.99, 0.99, 0.99]) == pytest.approx(0.25 + 0.75 * (2.96 / 3) ** 3, abs=1e-12)
    assert path_fidelity([0.99, 0.99, 0.99]) == pytest.approx(0.970398, abs=1e-6)
    assert path_fidelity([0.9, 0.25, 0.99]) == pytest.approx(0.25, abs=1e-15)


def test_path_fidelity_rejects_empty():
    with pytest.raises(FidelityError):
        path_fidelity([])


@given(fid, fid)
def test_swap_matches_closed_form(a, b):
    assert swap_fidelity(a, b) == pytest.approx(closed_form(a, b), abs=1e-12)


@given(fid, fid, fid)
def test_swap_commutative_associative(a, b, c):
    assert swap_fidelity(a, b) == pytest.approx(swap_fidelity(b, a), abs=1e-15)
    left = swap_fidelity(swap_fidelity(a, b), c)
    right = swap_fidelity(a, swap_fidelity(b, c))
    assert left == pytest.approx(right, abs=1e-12)
    assert 0.25 - 1e-15 <= left <= 1.0


@given(st.lists(fid, min_size=1, max_size=8), st.randoms())
def test_path_fidelity_permutation_invariant(fids, rnd):
    shuffled = list(fids)
    rnd.shuffle(shuffled)
    assert path_fidelity(fids) == pytest.approx(path_fidelity(shuffled), abs=1e-12)


@given(st.lists(st.floats(min_value=0.3, max_value=0.9999), min_size=1, max_size=8), fid)
def test_path_fidelity_strictly_decreasing_in_length(fids, extra):
    longer = fids + [min(extra, 0.9999)]
    assert path_fidelity(longer) < path_fidelity(fids)


# -- DEJMPS ----------------------------------------------------------------------


def test_dejmps_perfect_fixed_point():
    out, p = dejmps_step(BellDiagonalState(1.0, 0.0, 0.0, 0.0))
    assert out.fidelity == 1.0 and p == 1.0


def test_dejmps_maximally_mixed_fixed_point():
    out, p = dejmps_step(BellDiagonalState(0.25, 0.25, 0.25, 0.25))
    assert out.fidelity == pytest.approx(0.25, abs=1e-15)
    assert p == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("f", [0.55, 0.6, 0.7, 0.85, 0.95])
def test_dejmps_matches_tensor_oracle(f):
    out, p = dejmps_step(WernerState(f).to_bell_diagonal())
    f_ref, p_ref = dejmps_tensor(werner_coeffs(f))
    assert out.fidelity == pytest.approx(f_ref, abs=1e-10)
    assert p == pytest.approx(p_ref, abs=1e-10)


def test_dejmps_matches_oracle_on_non_werner_input():
    coeffs = (0.7, 0.05, 0.15, 0.1)
    out, p = dejmps_step(BellDiagonalState(*coeffs))
    f_ref, p_ref = dejmps_tensor(coeffs)
    assert (out.fidelity, p) == pytest.approx((f_ref, p_ref), abs=1e-10)


@given(purifiable)
def test_dejmps_normalised_and_improving(f):
    out, p = dejmps_step(WernerState(f).to_bell_diagonal())
    assert sum(out.as_tuple()) == pytest.approx(1.0, abs=1e-12)
    assert 0 < p <= 1
    assert out.fidelity > f


def test_bell_state_validates_normalisation():
    with pytest.raises(FidelityError):
        BellDiagonalState(0.5, 0.5, 0.5, 0.0)


# -- purification cost -------------------------------------------------------------


def test_plan_above_target_is_free():
    plan = purification_plan(0.9, 0.8)
    assert plan.rounds == 0 and plan.cost == 1.0


def test_cost_is_product_of_two_over_p():
    plan = purification_plan(0.9412, 0.98)
    assert plan.rounds >= 1
    assert plan.cost == math.prod(2 / p for p in plan.success_probabilities)
    assert plan.final_fidelity >= 0.98 - 1e-12


def test_plan_replays_recurrence():
    plan = purification_plan(0.9412, 0.98)
    state = WernerState(0.9412).to_bell_diagonal()
    for p_k, f_k in zip(plan.success_probabilities, plan.fidelities):
        state, p = dejmps_step(state)
        assert p == p_k and state.fidelity == f_k


def test_two_round_product_arithmetic():
    assert (2 / 0.8) * (2 / 0.9) == pytest.approx(50 / 9)


def test_unpurifiable_and_unreachable(monkeypatch):
    import qon.fidelity as fidelity

    with pytest.raises(UnpurifiableError):
        purification_plan(0.5, 0.9)
    monkeypatch.setattr(fidelity, "MAX_ROUNDS", 2)
    with pytest.raises(TargetUnreachableError):
        purification_plan(0.6, 0.99)
    monkeypatch.undo()
    assert purification_cost(0.45, 0.9) == math.inf
    assert purification_cost(0.45, 0.4) == 1.0


def test_retwirl_costs_at_least_as_much():
    for f in (0.7, 0.85, 0.93):
        assert purification_cost(f, 0.97, retwirl=True) >= purification_cost(f, 0.97) - 1e-12


GRID_F = [0.81, 0.85, 0.89, 0.93, 0.97, 0.99]
GRID_T = [0.8, 0.85, 0.9, 0.95]


def test_cost_monotone_over_grid():
    for t in GRID_T:
        costs = [purification_cost(f, t) for f in GRID_F]
        assert all(a >= b for a, b in zip(costs, costs[1:]))
    for f in GRID_F:
        costs = [purification_cost(f, t) for t in GRID_T]
        assert all(a <= b for a, b in zip(costs, costs[1:]))


@settings(max_examples=60)
@given(purifiable, st.floats(min_value=0.51, max_value=0.995))
def test_cost_at_least_two_to_the_rounds(f, t):
    plan = purification_plan(f, t)
    assert plan.cost >= 2**plan.rounds
    assert all(0 < p <= 1 for p in plan.success_probabilities)


def test_purify_table_rows():
    rows = purify_table([0.9, 0.5], [0.95])
    assert rows[0][2] >= 1 and np.isfinite(rows[0][3])
    assert rows[1][2] is None and rows[1][3] == math.inf
