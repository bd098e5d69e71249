import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esaic.env import (
    N_ACTIONS,
    Action,
    GridSpec,
    JointMdp,
    TerminalKind,
    discounted_return,
    initial_state,
    move,
    transition,
)
from esaic.errors import CapacityError, ContractViolation


def test_up_adds_side():
    assert move(4, Action.UP, 4) == 8


def test_left_at_origin_is_clamped():
    spec = GridSpec(3)
    out = transition((0, 1), (Action.LEFT, Action.STOP), spec)
    assert out.next_state == (0, 1)
    assert out.reward == 0.0 and out.kind is TerminalKind.NONE


def test_all_on_goal_is_full_reward():
    spec = GridSpec(3, goal=4)
    out = transition((3, 5), (Action.RIGHT, Action.LEFT), spec)
    assert out.next_state == (4, 4)
    assert out.reward == spec.reward_full and out.kind is TerminalKind.FULL and out.terminal


def test_one_on_goal_is_partial_reward():
    spec = GridSpec(3, goal=4)
    out = transition((3, 0), (Action.RIGHT, Action.STOP), spec)
    assert out.reward == spec.reward_partial and out.kind is TerminalKind.PARTIAL and out.terminal


def test_default_goal_is_center_and_cap():
    assert GridSpec(3).goal == 4
    assert GridSpec(8).goal == 36
    assert GridSpec(3).max_steps == 90


@pytest.mark.parametrize(
    "kwargs",
    [dict(side=0), dict(side=2, goal=4), dict(reward_partial=10, reward_full=1), dict(discount=1.5), dict(max_steps=0)],
)
def test_gridspec_rejects_bad_fields(kwargs):
    with pytest.raises(ContractViolation):
        GridSpec(**kwargs)


def test_transition_contract_errors():
    spec = GridSpec(3)
    with pytest.raises(ContractViolation):
        transition((0, 1), (Action.STOP,), spec)
    with pytest.raises(ContractViolation):
        transition((0, 9), (Action.STOP, Action.STOP), spec)
    with pytest.raises(ContractViolation):
        transition((4, 0), (Action.STOP, Action.STOP), spec)


def test_initial_state_support_and_determinism():
    spec = GridSpec(2, goal=3)
    draws = [initial_state(spec, 2, s) for s in range(200)]
    assert all(c in (0, 1, 2) for d in draws for c in d)
    assert initial_state(spec, 3, 7) == initial_state(spec, 3, 7)
    with pytest.raises(ContractViolation):
        initial_state(spec, 0, 0)


def test_initial_state_is_uniform():
    spec = GridSpec(3)
    rng = np.random.default_rng(0)
    cells = np.array([initial_state(spec, 1, rng)[0] for _ in range(100_000)])
    counts = np.bincount(cells, minlength=9)
    assert counts[spec.goal] == 0
    p = 1 / 8
    sigma = np.sqrt(100_000 * p * (1 - p))
    assert np.all(np.abs(np.delete(counts, spec.goal) - 100_000 * p) < 3 * sigma)


def test_discounted_return_examples():
    assert discounted_return([0, 0, 10], 1.0) == 10
    assert discounted_return([10], 0.9) == 10
    assert discounted_return([0, 1], 0.5) == 0.5
    with pytest.raises(ContractViolation):
        discounted_return([1], 1.1)


def test_codecs_round_trip():
    mdp = JointMdp(GridSpec(3), 3)
    for s in (0, 17, mdp.n_states - 1):
        assert mdp.encode_state(mdp.decode_state(s)) == s
    assert mdp.encode_state((1, 0, 0)) == 81
    assert mdp.encode_action((Action.STOP, Action.RIGHT, Action.RIGHT)) == 100
    assert mdp.decode_action(7) == (Action.RIGHT, Action.LEFT, Action.UP)


def test_tables_agree_with_transition():
    mdp = JointMdp(GridSpec(3, goal=2), 2)
    nxt, reward, terminal = mdp.tables()
    for s in range(mdp.n_states):
        assert terminal[s] == mdp.is_terminal(s)
        if terminal[s]:
            continue
        for a in range(mdp.n_joint_actions):
            s2, r, _ = mdp.step(s, a)
            assert nxt[s, a] == s2 and reward[s, a] == r


def test_tables_capacity_guard():
    with pytest.raises(CapacityError, match="2,025"):
        JointMdp(GridSpec(3), 2).tables(max_pairs=100)


side = st.integers(2, 6)


@given(side, st.data())
def test_moves_stay_on_grid_and_are_deterministic(n, data):
    spec = GridSpec(n)
    k = data.draw(st.integers(1, 3))
    cells = [c for c in range(n * n) if c != spec.goal]
    state = tuple(data.draw(st.sampled_from(cells)) for _ in range(k))
    acts = tuple(data.draw(st.sampled_from(list(Action))) for _ in range(k))
    a, b = transition(state, acts, spec), transition(state, acts, spec)
    assert a == b
    assert all(0 <= c < n * n for c in a.next_state)
    landed = sum(c == spec.goal for c in a.next_state)
    expected = {0: 0.0, k: spec.reward_full}.get(landed, spec.reward_partial)
    assert a.reward == expected
    assert a.terminal == (landed > 0)


@given(st.integers(3, 7), st.data())
def test_interior_moves_reverse(n, data):
    r = data.draw(st.integers(1, n - 2))
    c = data.draw(st.integers(1, n - 2))
    cell = r * n + c
    assert move(move(cell, Action.UP, n), Action.DOWN, n) == cell
    assert move(move(cell, Action.RIGHT, n), Action.LEFT, n) == cell
    assert move(cell, Action.STOP, n) == cell
    assert N_ACTIONS == 5
