"""Value of a single agent's observation under a centralized policy.

For agent ``i`` the value of cell ``o`` is the expectation, over the peers'
cells, of ``Q(s, pi(s))`` where ``s`` places agent ``i`` at ``o``. Terminal
joint states contribute 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import JointMdp
from .errors import ContractViolation

EXACT_CAP = 1_000_000
MC_SAMPLES = 100_000


class PeerKind(str, enum.Enum):
    UNIFORM_NON_GOAL = "uniform_non_goal"
    EMPIRICAL = "empirical"


@dataclass(eq=False)
class PeerDistribution:
    """Law of the peers' cells.

    ``UNIFORM_NON_GOAL`` stores one marginal shared by independent peers;
    ``EMPIRICAL`` stores a full table over the peers' joint cells.
    """

    kind: PeerKind
    table: np.ndarray
    n_peers: int

    def __post_init__(self):
        self.kind = PeerKind(self.kind)
        self.table = np.asarray(self.table, dtype=float)
        if self.n_peers < 0:
            raise ContractViolation("n_peers must be non-negative")
        if self.kind is PeerKind.UNIFORM_NON_GOAL and self.table.ndim != 1:
            raise ContractViolation("factored distribution needs a 1-D marginal")
        if self.kind is PeerKind.EMPIRICAL and self.table.ndim != self.n_peers and self.n_peers > 0:
            raise ContractViolation(f"empirical table has {self.table.ndim} axes for {self.n_peers} peers")
        if abs(self.table.sum() - 1.0) > 1e-9 or (self.table < 0).any():
            raise ContractViolation("peer distribution must be a PMF")

    @classmethod
    def uniform_non_goal(cls, n_cells: int, goal: int, n_peers: int) -> "PeerDistribution":
        marginal = np.full(n_cells, 1.0 / (n_cells - 1))
        marginal[goal] = 0.0
        return cls(PeerKind.UNIFORM_NON_GOAL, marginal, n_peers)

    @classmethod
    def point_mass(cls, n_cells: int, cells: tuple[int, ...]) -> "PeerDistribution":
        table = np.zeros((n_cells,) * len(cells))
        table[cells] = 1.0
        return cls(PeerKind.EMPIRICAL, table, len(cells))

    @property
    def n_cells(self) -> int:
        return self.table.shape[0]

    def joint(self) -> np.ndarray:
        """Full PMF with one axis per peer."""
        if self.kind is PeerKind.EMPIRICAL:
            return self.table
        out = np.ones(())
        for _ in range(self.n_peers):
            out = np.multiply.outer(out, self.table)
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``(size, n_peers)`` array of peer cells."""
        if self.kind is PeerKind.UNIFORM_NON_GOAL:
            return rng.choice(self.n_cells, size=(size, self.n_peers), p=self.table)
        flat = rng.choice(self.table.size, size=size, p=self.table.ravel())
        return np.stack(np.unravel_index(flat, self.table.shape), axis=1)


@dataclass(eq=False)
class ValueTable:
    values: np.ndarray
    n_agents_trained: int
    peer_kind: PeerKind
    agent: int = 0
    std_error: np.ndarray | None = field(default=None, repr=False)
    # cells where this agent's presence always ends the episode; never transmitted
    inactive: tuple[int, ...] = ()

    def __getitem__(self, obs: int) -> float:
        return float(self.values[obs])

    def __len__(self) -> int:
        return len(self.values)

    def save(self, path: str | Path) -> None:
        inactive = ",".join(map(str, self.inactive))
        lines = [
            f"# n_agents_trained={self.n_agents_trained};peer_kind={self.peer_kind.value};"
            f"agent={self.agent};inactive={inactive}"
        ]
        lines.append("observation,value")
        lines += [f"{o},{v!r}" for o, v in enumerate(self.values.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ValueTable":
        text = Path(path).read_text().splitlines()
        meta = dict(kv.split("=") for kv in text[0].lstrip("# ").split(";"))
        rows = [line.split(",") for line in text[2:] if line]
        values = np.array([float(v) for _, v in rows])
        inactive = tuple(int(c) for c in meta.get("inactive", "").split(",") if c)
        return cls(
            values, int(meta["n_agents_trained"]), PeerKind(meta["peer_kind"]), int(meta["agent"]), inactive=inactive
        )


def _policy_values(q, policy) -> tuple[np.ndarray, tuple[int, ...]]:
    values = np.asarray(getattr(q, "values", q), dtype=float)
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (values.shape[0],):
        raise ContractViolation(f"policy covers {policy.shape} states, table has {values.shape[0]}")
    dims = getattr(q, "state_dims", None)
    return values[np.arange(values.shape[0]), policy], dims


def compute_values(
    q,
    policy,
    dist: PeerDistribution,
    agent: int = 0,
    terminal: np.ndarray | None = None,
    exact_cap: int = EXACT_CAP,
    mc_samples: int = MC_SAMPLES,
    seed: int = 0,
) -> ValueTable:
    """Expected ``Q(s, pi(s))`` over the peers for every cell of ``agent``.

    Sums are exact (``math.fsum``) when the peer space has at most
    ``exact_cap`` tuples; otherwise a Monte Carlo estimate is returned with its
    standard error. With a ``terminal`` mask over joint states, cells where the
    agent's presence is always terminal are listed in ``ValueTable.inactive``.
    """
    qpi, dims = _policy_values(q, policy)
    n_agents = dist.n_peers + 1
    n_cells = dist.n_cells
    if dims is None:
        dims = (n_cells,) * n_agents
    if len(dims) != n_agents or any(d != n_cells for d in dims) or qpi.size != n_cells**n_agents:
        raise ContractViolation(f"distribution over {dist.n_peers} peers does not match a table with dims {dims}")
    if not 0 <= agent < n_agents:
        raise ContractViolation(f"agent {agent} outside [0, {n_agents})")
    inactive: tuple[int, ...] = ()
    if terminal is not None:
        terminal = np.asarray(terminal, dtype=bool)
        qpi = np.where(terminal, 0.0, qpi)
        always = np.moveaxis(terminal.reshape(dims), agent, 0).reshape(n_cells, -1).all(axis=1)
        inactive = tuple(int(o) for o in np.flatnonzero(always))
    by_agent = np.moveaxis(qpi.reshape(dims), agent, 0).reshape(n_cells, -1)

    if n_cells**dist.n_peers <= exact_cap:
        w = dist.joint().ravel()
        nz = np.flatnonzero(w)
        values = np.array([math.fsum(by_agent[o, nz] * w[nz]) for o in range(n_cells)])
        return ValueTable(values, n_agents, dist.kind, agent, inactive=inactive)

    rng = np.random.default_rng(seed)
    peers = dist.sample(rng, mc_samples)
    cols = np.ravel_multi_index(tuple(peers.T), (n_cells,) * dist.n_peers)
    samples = by_agent[:, cols]
    values = samples.mean(axis=1)
    err = samples.std(axis=1, ddof=1) / math.sqrt(mc_samples)
    return ValueTable(values, n_agents, dist.kind, agent, std_error=err, inactive=inactive)


def empirical_peer_distribution(
    policy, mdp: JointMdp, rollouts: int, seed: int = 0, agent: int = 0
) -> PeerDistribution:
    """Peer-cell visitation frequencies under greedy joint play.

    Every decision step of every rollout (uniform non-goal starts, capped at
    ``max_steps``) adds one count for the peers' current cells.
    """
    if rollouts < 1:
        raise ContractViolation(f"rollouts must be >= 1, got {rollouts}")
    policy = np.asarray(policy, dtype=np.int64)
    nxt, _, terminal = mdp.tables()
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, mdp.n_cells - 1, size=(rollouts, mdp.n_agents))
    cells = cells + (cells >= mdp.spec.goal)
    s = np.ravel_multi_index(tuple(cells.T), mdp.state_dims)
    counts = np.zeros(mdp.n_states, dtype=np.int64)
    for _ in range(mdp.spec.max_steps):
        live = ~terminal[s]
        if not live.any():
            break
        counts += np.bincount(s[live], minlength=mdp.n_states)
        s = np.where(live, nxt[s, policy[s]], s)
    joint = counts.reshape(mdp.state_dims).sum(axis=agent).astype(float)
    return PeerDistribution(PeerKind.EMPIRICAL, joint / joint.sum(), mdp.n_agents - 1)
