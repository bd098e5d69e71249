"""Tabular Q-learning: joint-action (centralized) and per-agent (distributed).

The distributed learner gives every agent a table indexed by its own cell and
the codewords it receives from each peer. Codebooks stay fixed during training;
only environment actions are explored.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .env import N_ACTIONS, Action, JointMdp
from .errors import CapacityError, ConfigurationError, ContractViolation
from .tocd import Codebook

DEFAULT_MAX_ENTRIES = 50_000_000
EPISODES_PER_STATE = 200
EPISODES_PER_PAIR = 20


class UpdateRule(str, enum.Enum):
    STANDARD = "standard"
    OPTIMISTIC = "optimistic"


def epsilon(k: float, total: int) -> float:
    """Linear exploration schedule ``1 - 0.99 k / K``.

    Written as ``(100 K - 99 k) / (100 K)`` so integer arguments give the
    correctly rounded value (``epsilon(K, K)`` is exactly ``0.01``).
    """
    return (100 * total - 99 * k) / (100 * total)


@dataclass(frozen=True)
class EpsilonSchedule:
    total_episodes: int

    def __call__(self, k: int) -> float:
        if not 1 <= k <= self.total_episodes:
            raise ContractViolation(f"episode {k} outside [1, {self.total_episodes}]")
        return epsilon(k, self.total_episodes)


@dataclass(frozen=True)
class TrainConfig:
    """Q-learning hyperparameters.

    ``discount=None`` takes the grid's discount. ``episodes=None`` uses
    ``20 * n_pairs`` of the joint MDP for joint-action learning and
    ``200 * n_states`` for per-agent learning.
    """

    learning_rate: float = 0.1
    discount: float | None = None
    episodes: int | None = None
    seed: int = 0
    update_rule: UpdateRule = UpdateRule.STANDARD
    max_entries: int = DEFAULT_MAX_ENTRIES

    def __post_init__(self):
        object.__setattr__(self, "update_rule", UpdateRule(self.update_rule))
        if not 0.0 < self.learning_rate <= 1.0:
            raise ContractViolation(f"learning_rate {self.learning_rate} outside (0, 1]")
        if self.discount is not None and not 0.0 <= self.discount <= 1.0:
            raise ContractViolation(f"discount {self.discount} outside [0, 1]")
        if self.episodes is not None and self.episodes < 0:
            raise ContractViolation("episodes must be non-negative")

    def resolve(self, mdp: JointMdp, joint_actions: bool = True) -> tuple[float, int]:
        gamma = mdp.spec.discount if self.discount is None else self.discount
        if self.episodes is not None:
            episodes = self.episodes
        elif joint_actions:
            episodes = EPISODES_PER_PAIR * mdp.n_pairs
        else:
            episodes = EPISODES_PER_STATE * mdp.n_states
        return float(gamma), int(episodes)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "discount": self.discount,
            "episodes": self.episodes,
            "seed": self.seed,
            "update_rule": self.update_rule.value,
        }


@dataclass(eq=False)
class QTable:
    """Dense action-value table; rows and columns are C-order flattenings."""

    values: np.ndarray
    state_dims: tuple[int, ...]
    action_dims: tuple[int, ...]

    def __post_init__(self):
        self.state_dims = tuple(int(d) for d in self.state_dims)
        self.action_dims = tuple(int(d) for d in self.action_dims)
        expected = (int(np.prod(self.state_dims)), int(np.prod(self.action_dims)))
        if self.values.shape != expected:
            raise ContractViolation(f"table shape {self.values.shape} does not match dims {expected}")

    @classmethod
    def zeros(cls, state_dims: Sequence[int], action_dims: Sequence[int]) -> "QTable":
        shape = (int(np.prod(state_dims)), int(np.prod(action_dims)))
        return cls(np.zeros(shape), tuple(state_dims), tuple(action_dims))

    @property
    def n_entries(self) -> int:
        return self.values.size

    def row(self, components: Sequence[int]) -> int:
        if len(components) != len(self.state_dims):
            raise ContractViolation(f"{len(components)} state components, table has {len(self.state_dims)}")
        for c, d in zip(components, self.state_dims):
            if not 0 <= c < d:
                raise ContractViolation(f"state component {c} outside [0, {d})")
        return int(np.ravel_multi_index(tuple(int(c) for c in components), self.state_dims))

    def greedy(self) -> np.ndarray:
        """Greedy column per row; ``argmax`` already returns the first maximum."""
        return np.argmax(self.values, axis=1)

    def freeze(self) -> "QTable":
        self.values.setflags(write=False)
        return self

    def save(self, path: str | Path) -> None:
        """``.npy`` writes the raw matrix; anything else writes CSV with a dims header."""
        path = Path(path)
        if path.suffix == ".npy":
            np.save(path, self.values)
            return
        header = f"state_dims={','.join(map(str, self.state_dims))};action_dims={','.join(map(str, self.action_dims))}"
        np.savetxt(path, self.values, delimiter=",", header=header, fmt="%.17g")

    @classmethod
    def load_csv(cls, path: str | Path) -> "QTable":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().lstrip("# ").strip()
        dims = dict(part.split("=") for part in header.split(";"))
        sd = tuple(int(x) for x in dims["state_dims"].split(","))
        ad = tuple(int(x) for x in dims["action_dims"].split(","))
        values = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(values, sd, ad)


@dataclass(eq=False)
class CentralizedResult:
    q: QTable
    policy: np.ndarray
    returns: np.ndarray
    epsilons: np.ndarray


def centralized_q_learning(mdp: JointMdp, cfg: TrainConfig) -> CentralizedResult:
    """Epsilon-greedy Q-learning over joint actions with perfect state information."""
    if mdp.n_pairs > cfg.max_entries:
        raise CapacityError(f"{mdp.n_agents}-agent joint Q-table", mdp.n_pairs, cfg.max_entries)
    gamma, episodes = cfg.resolve(mdp)
    q = QTable.zeros(mdp.state_dims, mdp.action_dims)
    returns, eps = _kernels.train_centralized(
        q.values,
        mdp.moves,
        mdp.n_agents,
        mdp.spec.goal,
        float(mdp.spec.reward_partial),
        float(mdp.spec.reward_full),
        gamma,
        float(cfg.learning_rate),
        episodes,
        int(mdp.spec.max_steps),
        int(cfg.seed),
        cfg.update_rule is UpdateRule.OPTIMISTIC,
    )
    q.freeze()
    return CentralizedResult(q, q.greedy(), returns, eps)


def evaluate_joint_policy(q: QTable, mdp: JointMdp, starts: np.ndarray, discount: float | None = None) -> np.ndarray:
    """Discounted return of greedy joint play from each start (rows of cells)."""
    gamma = mdp.spec.discount if discount is None else discount
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    return _kernels.eval_centralized(
        q.values,
        mdp.moves,
        mdp.spec.goal,
        float(mdp.spec.reward_partial),
        float(mdp.spec.reward_full),
        float(gamma),
        int(mdp.spec.max_steps),
        starts,
    )


@dataclass(frozen=True)
class LocalContext:
    """What agent ``i`` sees: its own cell and one codeword per peer (peers in index order)."""

    own_obs: int
    inbound: tuple[int, ...]


@dataclass(eq=False)
class MessageLayout:
    """Packed description of who hears what, shared by training and evaluation."""

    n_agents: int
    sizes: np.ndarray  # sizes[j, i]: codebook size on link j -> i
    msg: np.ndarray  # msg[j, i, cell]: codeword j sends to i
    state_dims: list[tuple[int, ...]]
    offsets: np.ndarray
    strides: np.ndarray

    @classmethod
    def build(cls, n_agents: int, n_cells: int, codebooks: Mapping[tuple[int, int], Codebook]) -> "MessageLayout":
        sizes = np.ones((n_agents, n_agents), dtype=np.int64)
        msg = np.zeros((n_agents, n_agents, n_cells), dtype=np.int64)
        for j in range(n_agents):
            for i in range(n_agents):
                if i == j:
                    continue
                book = codebooks.get((j, i))
                if book is None:
                    raise ConfigurationError(f"no codebook for link {j} -> {i}")
                if book.n_observations != n_cells:
                    raise ContractViolation(
                        f"codebook for link {j} -> {i} covers {book.n_observations} cells, grid has {n_cells}"
                    )
                enc = book.encoder
                if enc.min() < 0 or enc.max() >= book.size:
                    raise ContractViolation(f"codeword out of range on link {j} -> {i}")
                sizes[j, i] = book.size
                msg[j, i] = enc
        state_dims = []
        strides = np.zeros((n_agents, n_agents), dtype=np.int64)
        offsets = np.zeros(n_agents, dtype=np.int64)
        row = 0
        for i in range(n_agents):
            peers = [j for j in range(n_agents) if j != i]
            dims = (n_cells, *(int(sizes[j, i]) for j in peers))
            state_dims.append(dims)
            # C-order strides: own cell is the most significant digit
            order = [i, *peers]
            acc = 1
            for slot in range(len(order) - 1, -1, -1):
                strides[i, order[slot]] = acc
                acc *= dims[slot]
            offsets[i] = row
            row += acc
        return cls(n_agents, sizes, msg, state_dims, offsets, strides)

    @property
    def total_rows(self) -> int:
        return int(sum(np.prod(d) for d in self.state_dims))

    def context(self, cells: Sequence[int], agent: int) -> LocalContext:
        inbound = tuple(int(self.msg[j, agent, cells[j]]) for j in range(self.n_agents) if j != agent)
        return LocalContext(int(cells[agent]), inbound)


@dataclass(eq=False)
class DistributedResult:
    tables: list[QTable]
    layout: MessageLayout
    returns: np.ndarray
    epsilons: np.ndarray
    _packed: np.ndarray = field(repr=False)

    def policy(self, agent: int) -> np.ndarray:
        """Greedy action for every (own cell, inbound codewords) row of ``agent``."""
        return self.tables[agent].greedy()

    def act(self, agent: int, ctx: LocalContext) -> Action:
        table = self.tables[agent]
        if len(ctx.inbound) != self.layout.n_agents - 1:
            raise ContractViolation(f"context has {len(ctx.inbound)} codewords, expected {self.layout.n_agents - 1}")
        row = table.row((ctx.own_obs, *ctx.inbound))
        return Action(int(np.argmax(table.values[row])))

    @property
    def n_entries(self) -> int:
        return sum(t.n_entries for t in self.tables)

    def evaluate(self, mdp: JointMdp, starts: np.ndarray, discount: float | None = None) -> np.ndarray:
        gamma = mdp.spec.discount if discount is None else discount
        lay = self.layout
        return _kernels.eval_distributed(
            self._packed,
            lay.offsets,
            lay.strides,
            lay.msg,
            mdp.moves,
            mdp.spec.goal,
            float(mdp.spec.reward_partial),
            float(mdp.spec.reward_full),
            float(gamma),
            int(mdp.spec.max_steps),
            np.ascontiguousarray(starts, dtype=np.int64),
        )


def distributed_q_learning(
    mdp: JointMdp, codebooks: Mapping[tuple[int, int], Codebook], cfg: TrainConfig
) -> DistributedResult:
    """Train one table per agent while messages flow through fixed codebooks."""
    layout = MessageLayout.build(mdp.n_agents, mdp.n_cells, codebooks)
    entries = layout.total_rows * N_ACTIONS
    if entries > cfg.max_entries:
        raise CapacityError("distributed Q-tables", entries, cfg.max_entries)
    gamma, episodes = cfg.resolve(mdp, joint_actions=False)
    packed = np.zeros((layout.total_rows, N_ACTIONS))
    returns, eps = _kernels.train_distributed(
        packed,
        layout.offsets,
        layout.strides,
        layout.msg,
        mdp.moves,
        mdp.spec.goal,
        float(mdp.spec.reward_partial),
        float(mdp.spec.reward_full),
        gamma,
        float(cfg.learning_rate),
        episodes,
        int(mdp.spec.max_steps),
        int(cfg.seed),
        cfg.update_rule is UpdateRule.OPTIMISTIC,
    )
    packed.setflags(write=False)
    tables = []
    for i, dims in enumerate(layout.state_dims):
        rows = int(np.prod(dims))
        view = packed[layout.offsets[i] : layout.offsets[i] + rows]
        tables.append(QTable(view, dims, (N_ACTIONS,)))
    return DistributedResult(tables, layout, returns, eps, packed)
