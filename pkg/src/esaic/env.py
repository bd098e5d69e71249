"""Rendezvous grid world and the tabular joint-MDP wrapper used by the learners.

Cells are numbered row-major with ``Up`` adding ``side`` to the index, so on a
4x4 grid an agent in cell 4 that moves up lands in cell 8. Moves that would
leave the grid keep the agent where it is.

Joint states and joint actions are flattened in C order, agent 0 being the
most significant digit (the layout of :func:`numpy.ravel_multi_index`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ContractViolation

JointState = tuple[int, ...]


class Action(enum.IntEnum):
    RIGHT = 0
    LEFT = 1
    UP = 2
    DOWN = 3
    STOP = 4


N_ACTIONS = len(Action)


class TerminalKind(enum.Enum):
    NONE = "none"
    PARTIAL = "partial"
    FULL = "full"


@dataclass(frozen=True)
class GridSpec:
    """Rendezvous grid: ``side`` x ``side`` cells with one goal cell.

    ``goal`` defaults to the central cell (row and column ``side // 2``) and
    ``max_steps`` to ``10 * side**2``.
    """

    side: int = 3
    goal: int | None = None
    reward_partial: float = 1.0
    reward_full: float = 10.0
    discount: float = 0.9
    max_steps: int | None = None

    def __post_init__(self):
        if self.side < 1:
            raise ContractViolation(f"side must be positive, got {self.side}")
        if self.goal is None:
            object.__setattr__(self, "goal", (self.side // 2) * self.side + self.side // 2)
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", 10 * self.side * self.side)
        if not 0 <= self.goal < self.n_cells:
            raise ContractViolation(f"goal {self.goal} outside [0, {self.n_cells})")
        if not self.reward_partial < self.reward_full:
            raise ContractViolation("reward_partial must be smaller than reward_full")
        if not 0.0 <= self.discount <= 1.0:
            raise ContractViolation(f"discount {self.discount} outside [0, 1]")
        if self.max_steps < 1:
            raise ContractViolation("max_steps must be positive")

    @property
    def n_cells(self) -> int:
        return self.side * self.side

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "goal": self.goal,
            "reward_partial": self.reward_partial,
            "reward_full": self.reward_full,
            "discount": self.discount,
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class StepOutcome:
    next_state: JointState
    reward: float
    kind: TerminalKind

    @property
    def terminal(self) -> bool:
        return self.kind is not TerminalKind.NONE


def move(cell: int, action: Action | int, side: int) -> int:
    row, col = divmod(cell, side)
    action = Action(action)
    if action is Action.RIGHT and col + 1 < side:
        return cell + 1
    if action is Action.LEFT and col > 0:
        return cell - 1
    if action is Action.UP and row + 1 < side:
        return cell + side
    if action is Action.DOWN and row > 0:
        return cell - side
    return cell


def move_table(side: int) -> np.ndarray:
    """``table[cell, action]`` is the cell reached by one move."""
    table = np.empty((side * side, N_ACTIONS), dtype=np.int64)
    for cell in range(side * side):
        for a in Action:
            table[cell, a] = move(cell, a, side)
    return table


def _check_state(state: Sequence[int], spec: GridSpec) -> None:
    if len(state) == 0:
        raise ContractViolation("joint state must hold at least one agent")
    for cell in state:
        if not 0 <= int(cell) < spec.n_cells:
            raise ContractViolation(f"cell {cell} outside the {spec.side}x{spec.side} grid")


def reward_for(next_state: Sequence[int], spec: GridSpec) -> tuple[float, TerminalKind]:
    at_goal = sum(1 for cell in next_state if cell == spec.goal)
    if at_goal == 0:
        return 0.0, TerminalKind.NONE
    if at_goal == len(next_state):
        return float(spec.reward_full), TerminalKind.FULL
    return float(spec.reward_partial), TerminalKind.PARTIAL


def transition(state: Sequence[int], actions: Sequence[Action | int], spec: GridSpec) -> StepOutcome:
    """Move every agent one cell and score the landing position.

    The team earns ``reward_full`` when every agent lands on the goal,
    ``reward_partial`` when some but not all do, and 0 otherwise. Any agent
    on the goal ends the episode.
    """
    if len(actions) != len(state):
        raise ContractViolation(f"{len(actions)} actions for {len(state)} agents")
    _check_state(state, spec)
    if spec.goal in state:
        raise ContractViolation("transition called on a terminal state")
    nxt = tuple(move(int(c), a, spec.side) for c, a in zip(state, actions))
    reward, kind = reward_for(nxt, spec)
    return StepOutcome(nxt, reward, kind)


def initial_state(spec: GridSpec, n_agents: int, rng_seed: int | np.random.Generator | None = None) -> JointState:
    """Draw each agent's cell independently and uniformly from the non-goal cells."""
    if n_agents < 1:
        raise ContractViolation(f"n_agents must be >= 1, got {n_agents}")
    rng = np.random.default_rng(rng_seed)
    draws = rng.integers(0, spec.n_cells - 1, size=n_agents)
    draws = draws + (draws >= spec.goal)
    return tuple(int(c) for c in draws)


def discounted_return(rewards: Sequence[float], discount: float) -> float:
    if not 0.0 <= discount <= 1.0:
        raise ContractViolation(f"discount {discount} outside [0, 1]")
    total, weight = 0.0, 1.0
    for r in rewards:
        total += weight * r
        weight *= discount
    return total


@dataclass
class JointMdp:
    """Finite joint MDP of ``n_agents`` rendezvous agents on one grid.

    State and joint-action indices are flat C-order encodings of the per-agent
    cells and actions. The dense tables are built on demand.
    """

    spec: GridSpec
    n_agents: int
    moves: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_agents < 1:
            raise ContractViolation(f"n_agents must be >= 1, got {self.n_agents}")
        self.moves = move_table(self.spec.side)

    @property
    def n_cells(self) -> int:
        return self.spec.n_cells

    @property
    def n_states(self) -> int:
        return self.n_cells**self.n_agents

    @property
    def n_joint_actions(self) -> int:
        return N_ACTIONS**self.n_agents

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_joint_actions

    @property
    def state_dims(self) -> tuple[int, ...]:
        return (self.n_cells,) * self.n_agents

    @property
    def action_dims(self) -> tuple[int, ...]:
        return (N_ACTIONS,) * self.n_agents

    def encode_state(self, state: Sequence[int]) -> int:
        if len(state) != self.n_agents:
            raise ContractViolation(f"state has {len(state)} agents, MDP has {self.n_agents}")
        _check_state(state, self.spec)
        return int(np.ravel_multi_index(tuple(int(c) for c in state), self.state_dims))

    def decode_state(self, index: int) -> JointState:
        return tuple(int(c) for c in np.unravel_index(int(index), self.state_dims))

    def encode_action(self, actions: Sequence[Action | int]) -> int:
        if len(actions) != self.n_agents:
            raise ContractViolation(f"{len(actions)} actions for {self.n_agents} agents")
        return int(np.ravel_multi_index(tuple(int(a) for a in actions), self.action_dims))

    def decode_action(self, index: int) -> tuple[Action, ...]:
        return tuple(Action(int(a)) for a in np.unravel_index(int(index), self.action_dims))

    def is_terminal(self, index: int) -> bool:
        return self.spec.goal in self.decode_state(index)

    def step(self, state_index: int, action_index: int) -> tuple[int, float, bool]:
        out = transition(self.decode_state(state_index), self.decode_action(action_index), self.spec)
        return self.encode_state(out.next_state), out.reward, out.terminal

    def positions(self) -> np.ndarray:
        """``(n_states, n_agents)`` array of per-agent cells."""
        grids = np.unravel_index(np.arange(self.n_states), self.state_dims)
        return np.stack(grids, axis=1)

    def terminal_mask(self) -> np.ndarray:
        return (self.positions() == self.spec.goal).any(axis=1)

    def start_states(self) -> np.ndarray:
        """Indices of the joint states with no agent on the goal (the start support)."""
        return np.flatnonzero(~self.terminal_mask())

    def tables(self, max_pairs: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense ``(next_state, reward, terminal)`` tables.

        ``next_state`` and ``reward`` have shape ``(n_states, n_joint_actions)``;
        rows of terminal states are filled as if the agents could still move and
        must be masked by the caller.
        """
        if max_pairs is not None and self.n_pairs > max_pairs:
            raise CapacityError("joint transition table", self.n_pairs, max_pairs)
        pos = self.positions()
        acts = np.stack(np.unravel_index(np.arange(self.n_joint_actions), self.action_dims), axis=1)
        nxt = np.zeros((self.n_states, self.n_joint_actions), dtype=np.int64)
        at_goal = np.zeros((self.n_states, self.n_joint_actions), dtype=np.int16)
        for k in range(self.n_agents):
            landed = self.moves[pos[:, k][:, None], acts[:, k][None, :]]
            nxt += landed * self.n_cells ** (self.n_agents - 1 - k)
            at_goal += landed == self.spec.goal
        reward = np.where(
            at_goal == self.n_agents,
            self.spec.reward_full,
            np.where(at_goal > 0, self.spec.reward_partial, 0.0),
        )
        return nxt, reward, self.terminal_mask()
