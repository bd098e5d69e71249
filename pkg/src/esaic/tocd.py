"""Value-based codebook design for bit-budgeted links.

Observations are projected onto their value V(o), the values are clustered by
an exact one-dimensional k-median, and each value cluster becomes one codeword.
Two observations share a codeword exactly when their values share a cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ContractViolation

# relative slack used when comparing DP costs, so ties survive summation-order noise
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ValueClustering:
    """Optimal contiguous clustering of sorted distinct values.

    ``bounds[k]:bounds[k + 1]`` slices ``values``/``weights`` for cluster ``k``.
    """

    values: np.ndarray
    weights: np.ndarray
    bounds: tuple[int, ...]
    medians: tuple[float, ...]
    cost: float

    @property
    def n_clusters(self) -> int:
        return len(self.bounds) - 1

    def labels(self) -> np.ndarray:
        """Cluster id of each distinct value."""
        out = np.empty(len(self.values), dtype=np.int64)
        for k in range(self.n_clusters):
            out[self.bounds[k] : self.bounds[k + 1]] = k
        return out

    def assign(self, x: np.ndarray | Iterable[float]) -> np.ndarray:
        """Cluster id of each entry of ``x``; every entry must be one of ``values``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.values, x)
        ok = (idx < len(self.values)) & (self.values[np.minimum(idx, len(self.values) - 1)] == x)
        if not ok.all():
            raise ContractViolation("value not present in the clustering")
        return self.labels()[idx]


class _Costs:
    """O(1) weighted k-median cost of any contiguous run of sorted values."""

    def __init__(self, values: np.ndarray, weights: np.ndarray):
        self.values = values
        self.cw = np.concatenate([[0], np.cumsum(weights)])
        self.cwv = np.concatenate([[0.0], np.cumsum(weights * values)])

    def median_index(self, i: int, j: int) -> int:
        # lower median: the ceil(W/2)-th item of the run's multiset
        half = (self.cw[j] - self.cw[i] + 1) // 2
        return int(np.searchsorted(self.cw, self.cw[i] + half, side="left")) - 1

    def cost(self, i: int, j: int) -> float:
        m = self.median_index(i, j)
        mu = self.values[m]
        left = mu * (self.cw[m + 1] - self.cw[i]) - (self.cwv[m + 1] - self.cwv[i])
        right = (self.cwv[j] - self.cwv[m + 1]) - mu * (self.cw[j] - self.cw[m + 1])
        return float(left + right)


def kmedian_1d(values: Iterable[float], k: int) -> ValueClustering:
    """Globally optimal 1-D k-median of a multiset of reals.

    Optimal clusters are contiguous in sorted order, so a dynamic program over
    suffixes of the sorted distinct values is exact. Among equal-cost answers
    the one with the smallest boundary indices, read left to right, wins.
    Cluster medians are lower medians.
    """
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
    if arr.size == 0:
        raise ContractViolation("cannot cluster an empty multiset")
    if not np.isfinite(arr).all():
        raise ContractViolation("values must be finite")
    distinct, counts = np.unique(arr, return_counts=True)
    n = len(distinct)
    k = min(k, n)
    costs = _Costs(distinct, counts)

    # best[c][i]: optimal cost of splitting distinct[i:] into c clusters
    inf = float("inf")
    best = np.full((k + 1, n + 1), inf)
    cut = np.zeros((k + 1, n + 1), dtype=np.int64)
    best[0, n] = 0.0
    for i in range(n):
        best[1, i] = costs.cost(i, n)
        cut[1, i] = n
    for c in range(2, k + 1):
        for i in range(n - c, -1, -1):
            b, arg = inf, -1
            for j in range(i + 1, n - c + 2):
                v = costs.cost(i, j) + best[c - 1, j]
                if arg < 0 or v < b - _TIE_RTOL * max(1.0, abs(b)):
                    b, arg = v, j
            best[c, i] = b
            cut[c, i] = arg

    bounds = [0]
    i = 0
    for c in range(k, 0, -1):
        i = int(cut[c, i])
        bounds.append(i)
    medians = tuple(float(distinct[costs.median_index(bounds[q], bounds[q + 1])]) for q in range(k))
    total = sum(costs.cost(bounds[q], bounds[q + 1]) for q in range(k))
    return ValueClustering(distinct, counts, tuple(bounds), medians, float(total))


@dataclass(frozen=True, eq=False)
class BitBudgetMatrix:
    """``budgets[i, j]`` bits per step on the link from agent i to agent j."""

    budgets: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.budgets)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ContractViolation(f"budget matrix must be square, got shape {b.shape}")
        if not np.issubdtype(b.dtype, np.integer):
            if not np.all(b == np.round(b)):
                raise ContractViolation("bit budgets must be integers")
            b = b.astype(np.int64)
        off = ~np.eye(len(b), dtype=bool)
        if (b[off] < 0).any():
            raise ContractViolation("bit budgets must be non-negative")
        b = b.astype(np.int64).copy()
        b[~off] = 0
        b.setflags(write=False)
        object.__setattr__(self, "budgets", b)

    @classmethod
    def homogeneous(cls, n_agents: int, bits: int) -> "BitBudgetMatrix":
        return cls(np.full((n_agents, n_agents), bits, dtype=np.int64))

    @property
    def n_agents(self) -> int:
        return len(self.budgets)

    def links(self) -> list[tuple[int, int]]:
        n = self.n_agents
        return [(i, j) for i in range(n) for j in range(n) if i != j]

    def __getitem__(self, link: tuple[int, int]) -> int:
        return int(self.budgets[link])

    def to_list(self) -> list[list[int]]:
        return self.budgets.tolist()


@dataclass(frozen=True, eq=False)
class Codebook:
    """Observation partition for one sender at one bit budget.

    ``partition[o]`` is the cluster of observation ``o``; ``codewords[c]`` is
    the index transmitted for cluster ``c``. Codeword 0 carries the lowest
    cluster median.
    """

    partition: np.ndarray
    codewords: np.ndarray
    budget_bits: int
    medians: tuple[float, ...]
    cost: float
    sender: int | None = None
    _encoder: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        part = np.array(self.partition, dtype=np.int64)
        words = np.array(self.codewords, dtype=np.int64)
        if part.ndim != 1 or part.size == 0:
            raise ContractViolation("partition must be a non-empty vector")
        if part.min() < 0 or part.max() >= len(words):
            raise ContractViolation("partition refers to a cluster without a codeword")
        if len(words) > 2**self.budget_bits:
            raise ContractViolation(f"{len(words)} codewords exceed 2**{self.budget_bits}")
        if sorted(words.tolist()) != list(range(len(words))):
            raise ContractViolation("codewords must be a permutation of 0..B-1")
        for arr in (part, words):
            arr.setflags(write=False)
        object.__setattr__(self, "partition", part)
        object.__setattr__(self, "codewords", words)
        enc = words[part]
        enc.setflags(write=False)
        object.__setattr__(self, "_encoder", enc)

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def n_observations(self) -> int:
        return len(self.partition)

    @property
    def encoder(self) -> np.ndarray:
        """Codeword sent for each observation."""
        return self._encoder

    def encode(self, obs: int) -> int:
        if not 0 <= obs < self.n_observations:
            raise ContractViolation(f"observation {obs} outside [0, {self.n_observations})")
        return int(self._encoder[obs])

    def same_as(self, other: "Codebook") -> bool:
        return (
            self.budget_bits == other.budget_bits
            and np.array_equal(self.partition, other.partition)
            and np.array_equal(self.codewords, other.codewords)
        )

    def header(self) -> dict:
        return {
            "schema": "esaic.codebook/1",
            "sender": self.sender,
            "budget_bits": self.budget_bits,
            "size": self.size,
            "medians": list(self.medians),
            "cost": self.cost,
        }

    def save(self, csv_path: str | Path) -> None:
        """Write ``observation,cluster,codeword`` rows plus a ``.json`` header alongside."""
        csv_path = Path(csv_path)
        lines = ["observation,cluster,codeword"]
        lines += [f"{o},{c},{self.codewords[c]}" for o, c in enumerate(self.partition)]
        csv_path.write_text("\n".join(lines) + "\n")
        csv_path.with_suffix(".json").write_text(json.dumps(self.header(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path: str | Path) -> "Codebook":
        csv_path = Path(csv_path)
        head = json.loads(csv_path.with_suffix(".json").read_text())
        rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        part = rows[:, 1]
        words = np.empty(head["size"], dtype=np.int64)
        words[part] = rows[:, 2]
        return cls(part, words, head["budget_bits"], tuple(head["medians"]), head["cost"], head["sender"])


def design_quantizer(values, budget_bits: int, sender: int | None = None, fold_inactive: bool = True) -> Codebook:
    """Cluster observations by value into at most ``2**budget_bits`` codewords.

    ``values`` is a ValueTable or an array indexed by observation. Observations
    listed in ``values.inactive`` end the episode, so they are left out of the
    clustering and share the codeword whose median is nearest to their value.
    ``fold_inactive=False`` clusters every observation.
    """
    if budget_bits < 0:
        raise ContractViolation(f"budget must be non-negative, got {budget_bits}")
    v = np.asarray(getattr(values, "values", values), dtype=float)
    inactive = list(getattr(values, "inactive", ())) if fold_inactive else []
    active = np.ones(len(v), dtype=bool)
    active[inactive] = False
    if not active.any():
        active[:] = True
    clustering = kmedian_1d(v[active], 2**budget_bits)
    part = np.empty(len(v), dtype=np.int64)
    part[active] = clustering.assign(v[active])
    medians = np.asarray(clustering.medians)
    for o in np.flatnonzero(~active):
        part[o] = int(np.argmin(np.abs(medians - v[o])))
    # medians ascend with cluster id, so codeword == cluster id
    words = np.arange(clustering.n_clusters)
    return Codebook(part, words, budget_bits, clustering.medians, clustering.cost, sender)


def build_link_codebooks(
    values, budgets: BitBudgetMatrix, fold_inactive: bool = True
) -> dict[tuple[int, int], Codebook]:
    """One codebook per link, designed once per distinct budget of each sender.

    Links from the same sender with the same budget share one Codebook object.
    ``values`` is either a single ValueTable used by every sender or a sequence
    with one table per sender.
    """
    n = budgets.n_agents
    per_sender = values if isinstance(values, (list, tuple)) else [values] * n
    if len(per_sender) != n:
        raise ContractViolation(f"{len(per_sender)} value tables for {n} senders")
    books: dict[tuple[int, int], Codebook] = {}
    for i in range(n):
        designed: dict[int, Codebook] = {}
        for j in range(n):
            if j == i:
                continue
            bits = budgets[i, j]
            if bits not in designed:
                designed[bits] = design_quantizer(per_sender[i], bits, sender=i, fold_inactive=fold_inactive)
            books[i, j] = designed[bits]
    return books


def designs_per_sender(books: Mapping[tuple[int, int], Codebook]) -> dict[int, int]:
    """Number of distinct codebook objects each sender uses."""
    seen: dict[int, set[int]] = {}
    for (i, _), book in books.items():
        seen.setdefault(i, set()).add(id(book))
    return {i: len(ids) for i, ids in sorted(seen.items())}
