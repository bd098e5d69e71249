"""Brute-force ground truth and diagnostic checks.

Value iteration solves small joint MDPs exactly. The partition and affine-fit
checks compare the codebooks and value tables produced from a two-agent
solution against those from an N-agent solution.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .env import JointMdp
from .errors import CapacityError, ContractViolation, DivergenceError
from .tocd import Codebook

ORACLE_MAX_PAIRS = 1_000_000


@dataclass(eq=False)
class ExactSolution:
    v_star: np.ndarray
    q_star: np.ndarray
    policy: np.ndarray
    sweeps: int
    residual: float

    def value(self, mdp: JointMdp, state) -> float:
        return float(self.v_star[mdp.encode_state(state)])


def value_iteration(
    mdp: JointMdp,
    discount: float | None = None,
    tol: float = 1e-10,
    max_pairs: int = ORACLE_MAX_PAIRS,
) -> ExactSolution:
    """Jacobi value iteration; terminal states are pinned at 0.

    Rewards are collected on entry into a state, so ``Q(s, a) = r(s, a)`` when
    the successor is terminal and ``r + gamma V(s')`` otherwise. With
    ``discount == 1`` the sweep cap is ``|S| * |A|``; hitting it means some
    reward keeps accumulating along a cycle.
    """
    gamma = mdp.spec.discount if discount is None else discount
    if not 0.0 <= gamma <= 1.0:
        raise ContractViolation(f"discount {gamma} outside [0, 1]")
    if mdp.n_pairs > max_pairs:
        raise CapacityError(f"{mdp.n_agents}-agent oracle", mdp.n_pairs, max_pairs)
    nxt, reward, terminal = mdp.tables()
    live = ~terminal
    cont = gamma * (~terminal[nxt])
    v = np.zeros(mdp.n_states)
    cap = mdp.n_pairs if gamma >= 1.0 else max(mdp.n_pairs, 100_000)
    residual = np.inf
    sweeps = 0
    while sweeps < cap:
        q = reward + cont * v[nxt]
        new = np.where(live, q.max(axis=1), 0.0)
        residual = float(np.max(np.abs(new - v)))
        v = new
        sweeps += 1
        if residual <= tol:
            break
    else:
        worst = int(np.argmax(np.abs(reward + cont * v[nxt]).max(axis=1) * live))
        raise DivergenceError(
            f"no convergence after {sweeps} sweeps (residual {residual:.3g}); "
            f"state {mdp.decode_state(worst)} sits on a non-terminating reward cycle"
        )
    q = reward + cont * v[nxt]
    q[terminal] = 0.0
    return ExactSolution(v, q, np.argmax(q, axis=1), sweeps, residual)


def bellman_residual(solution: ExactSolution, mdp: JointMdp, discount: float | None = None) -> float:
    gamma = mdp.spec.discount if discount is None else discount
    nxt, reward, terminal = mdp.tables()
    q = reward + gamma * (~terminal[nxt]) * solution.v_star[nxt]
    target = np.where(terminal, 0.0, q.max(axis=1))
    return float(np.max(np.abs(target - solution.v_star)))


def kmedian_brute_force(values, k: int) -> tuple[float, tuple[int, ...]]:
    """Best cost over every split of the sorted multiset into at most ``k`` runs.

    Medians are taken directly with ``numpy.median`` (any point between the two
    middle items is optimal for absolute loss).
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    best = (np.inf, ())
    for c in range(1, min(k, n) + 1):
        for cuts in itertools.combinations(range(1, n), c - 1):
            bounds = (0, *cuts, n)
            cost = 0.0
            for a, b in zip(bounds, bounds[1:]):
                seg = v[a:b]
                cost += float(np.abs(seg - np.median(seg)).sum())
            if cost < best[0]:
                best = (cost, bounds)
    return best


@dataclass(frozen=True)
class PartitionReport:
    equal: bool
    witness: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {"equal": self.equal, "witness": list(self.witness) if self.witness else None}


def _labels(book) -> np.ndarray:
    return np.asarray(book.partition if isinstance(book, Codebook) else book, dtype=np.int64)


def check_c1(p2: Codebook | np.ndarray, pn: Codebook | np.ndarray) -> PartitionReport:
    """Compare two observation partitions as equivalence relations.

    The witness is the first pair (in lexicographic order) grouped together by
    one partition and separated by the other.
    """
    a, b = _labels(p2), _labels(pn)
    if a.shape != b.shape:
        raise ContractViolation(f"partitions cover {a.size} and {b.size} observations")
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    diff = np.argwhere(np.triu(same_a != same_b, k=1))
    if len(diff) == 0:
        return PartitionReport(True)
    i, j = diff[0]
    return PartitionReport(False, (int(i), int(j)))


@dataclass(frozen=True)
class AffineFitReport:
    tau: float | None
    zeta: float | None
    r_squared: float | None
    monotonic: bool | str
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def check_affine_relation(v2, vn) -> AffineFitReport:
    """Least-squares ``vn ~ tau * v2 + zeta`` plus an order-agreement flag.

    ``monotonic`` is True when the map from ``v2`` values to ``vn`` values is
    well defined and strictly increasing (both tables rank every pair of
    observations the same way, ties included), ``"weak"`` when the rankings
    differ only by ties, and False when some pair is ordered oppositely.
    """
    x = np.asarray(getattr(v2, "values", v2), dtype=float)
    y = np.asarray(getattr(vn, "values", vn), dtype=float)
    if x.shape != y.shape:
        raise ContractViolation(f"value tables cover {x.size} and {y.size} observations")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    if (dx * dy < 0).any():
        monotonic: bool | str = False
    elif np.array_equal(dx, dy):
        monotonic = True
    else:
        monotonic = "weak"
    if np.ptp(x) == 0:
        return AffineFitReport(None, None, None, monotonic, degenerate=True)
    tau, zeta = np.polyfit(x, y, 1)
    resid = y - (tau * x + zeta)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float((resid**2).sum()) / ss_tot
    return AffineFitReport(float(tau), float(zeta), float(min(max(r2, 0.0), 1.0)), monotonic)
