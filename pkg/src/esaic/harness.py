"""Experiment orchestration: scenarios, the three pipelines, accounting and artifacts.

A run trains a centralized joint-action learner, turns its greedy values into
per-link codebooks and trains decentralized learners that talk through those
codebooks. SAIC trains the centralized phase on all N agents, ESAIC on two.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .env import N_ACTIONS, GridSpec, JointMdp
from .errors import CapacityError, ConfigurationError, ContractViolation
from .oracle import (
    ORACLE_MAX_PAIRS,
    AffineFitReport,
    ExactSolution,
    PartitionReport,
    check_affine_relation,
    check_c1,
    value_iteration,
)
from .rl import (
    DEFAULT_MAX_ENTRIES,
    TrainConfig,
    centralized_q_learning,
    distributed_q_learning,
    evaluate_joint_policy,
)
from .tocd import BitBudgetMatrix, Codebook, build_link_codebooks, design_quantizer, designs_per_sender
from .voi import PeerDistribution, PeerKind, ValueTable, compute_values, empirical_peer_distribution

CURVE_SCHEMA = "esaic.curve/1"
RECORD_SCHEMA = "esaic.record/1"
SUMMARY_SCHEMA = "esaic.summary/1"
EVAL_EPISODES = 500
SMOOTHING_WINDOW = 100
NORMALIZED_TOL = 1e-6


class Pipeline(str, enum.Enum):
    CENTRALIZED = "centralized"
    SAIC = "saic"
    ESAIC = "esaic"


def centralized_entries(n_cells: int, n_agents: int) -> int:
    """Joint Q-table size ``(|cells| * |actions|) ** n_agents``, exact."""
    return (n_cells * N_ACTIONS) ** n_agents


def complexity_ratio(n_cells: int, n_agents: int) -> int:
    """How many times larger the N-agent centralized table is than the 2-agent one."""
    if n_agents < 2:
        raise ContractViolation("the ratio compares against a two-agent table; need n_agents >= 2")
    return (n_cells * N_ACTIONS) ** (n_agents - 2)


def smooth(returns: np.ndarray, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """``out[k]`` is the mean of the last ``min(k + 1, window)`` returns up to ``k``."""
    if window < 1:
        raise ContractViolation(f"window must be >= 1, got {window}")
    r = np.asarray(returns, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(r)])
    k = np.arange(1, len(r) + 1)
    lo = np.maximum(k - window, 0)
    return (c[k] - c[lo]) / (k - lo)


def phase_seeds(seed: int) -> tuple[int, int, int]:
    """Independent 32-bit seeds for the centralized phase, the decentralized phase and evaluation."""
    a, b, c = np.random.SeedSequence(seed).generate_state(3)
    return int(a), int(b), int(c)


def sample_starts(grid: GridSpec, n_agents: int, episodes: int, seed: int) -> np.ndarray:
    """``(episodes, n_agents)`` start cells, uniform over the non-goal cells."""
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, grid.n_cells - 1, size=(episodes, n_agents))
    return cells + (cells >= grid.goal)


def _train_config(data: Mapping[str, Any] | None) -> TrainConfig:
    data = dict(data or {})
    data.pop("seed", None)
    return TrainConfig(**data)


def _config_dict(cfg: TrainConfig) -> dict:
    out = cfg.to_dict()
    out.pop("seed")
    out["max_entries"] = cfg.max_entries
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """One experiment: grid, team size, link budgets, training settings and seeds."""

    grid: GridSpec = field(default_factory=GridSpec)
    n_agents: int = 2
    budgets: BitBudgetMatrix | None = None
    centralized: TrainConfig = field(default_factory=TrainConfig)
    decentralized: TrainConfig = field(default_factory=TrainConfig)
    pipelines: tuple[Pipeline, ...] = (Pipeline.ESAIC,)
    seeds: tuple[int, ...] = (0,)
    peer_dist: PeerKind = PeerKind.UNIFORM_NON_GOAL
    eval_episodes: int = EVAL_EPISODES
    smoothing_window: int = SMOOTHING_WINDOW
    empirical_rollouts: int = 10_000
    fold_inactive: bool = True
    oracle_max_pairs: int = ORACLE_MAX_PAIRS
    workers: int = 1

    def __post_init__(self):
        if self.n_agents < 1:
            raise ContractViolation(f"n_agents must be >= 1, got {self.n_agents}")
        budgets = self.budgets or BitBudgetMatrix.homogeneous(self.n_agents, 2)
        if budgets.n_agents != self.n_agents:
            raise ContractViolation(f"budget matrix covers {budgets.n_agents} agents, scenario has {self.n_agents}")
        object.__setattr__(self, "budgets", budgets)
        pipelines = tuple(Pipeline(p) for p in self.pipelines)
        if not pipelines:
            raise ConfigurationError("at least one pipeline is required")
        if self.n_agents < 2 and set(pipelines) - {Pipeline.CENTRALIZED}:
            raise ContractViolation("quantized pipelines need at least two agents")
        object.__setattr__(self, "pipelines", pipelines)
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigurationError("at least one seed is required")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "peer_dist", PeerKind(self.peer_dist))
        if self.eval_episodes < 1 or self.smoothing_window < 1 or self.empirical_rollouts < 1:
            raise ContractViolation("eval_episodes, smoothing_window and empirical_rollouts must be positive")
        if self.workers < 1:
            raise ContractViolation("workers must be >= 1")

    def centralized_agents(self, pipeline: Pipeline) -> int:
        return 2 if pipeline is Pipeline.ESAIC else self.n_agents

    def check_capacity(self, pipeline: Pipeline | None = None) -> None:
        """Refuse up front when a centralized phase would not fit the entry guard."""
        for p in (pipeline,) if pipeline else self.pipelines:
            need = centralized_entries(self.grid.n_cells, self.centralized_agents(p))
            if need > self.centralized.max_entries:
                raise CapacityError(f"{p.value} centralized phase", need, self.centralized.max_entries)

    def to_dict(self, with_seeds: bool = True) -> dict:
        out = {
            "grid": self.grid.to_dict(),
            "n_agents": self.n_agents,
            "budgets": self.budgets.to_list(),
            "centralized": _config_dict(self.centralized),
            "decentralized": _config_dict(self.decentralized),
            "pipelines": [p.value for p in self.pipelines],
            "peer_dist": self.peer_dist.value,
            "eval_episodes": self.eval_episodes,
            "smoothing_window": self.smoothing_window,
            "empirical_rollouts": self.empirical_rollouts,
            "fold_inactive": self.fold_inactive,
            "oracle_max_pairs": self.oracle_max_pairs,
        }
        if with_seeds:
            out["seeds"] = list(self.seeds)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__} | {"budget", "pipeline", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        grid = data.pop("grid", None)
        if isinstance(grid, int):
            grid = GridSpec(side=grid)
        elif grid is None or isinstance(grid, Mapping):
            grid = GridSpec(**(grid or {}))
        n_agents = int(data.pop("n_agents", 2))
        budget = data.pop("budget", None)
        budgets = data.pop("budgets", None)
        if budget is not None and budgets is not None:
            raise ConfigurationError("give either budget or budgets, not both")
        if budgets is not None and np.ndim(budgets) == 0:
            budget, budgets = budgets, None
        if budgets is not None:
            budgets = BitBudgetMatrix(np.asarray(budgets))
        elif budget is not None:
            budgets = BitBudgetMatrix.homogeneous(n_agents, int(budget))
        pipelines = data.pop("pipelines", None) or data.pop("pipeline", None) or [Pipeline.ESAIC]
        data.pop("pipeline", None)
        if isinstance(pipelines, str):
            pipelines = [pipelines]
        seeds = data.pop("seeds", None)
        seed = data.pop("seed", None)
        if seeds is None:
            seeds = [0] if seed is None else [seed]
        return cls(
            grid=grid,
            n_agents=n_agents,
            budgets=budgets,
            centralized=_train_config(data.pop("centralized", None)),
            decentralized=_train_config(data.pop("decentralized", None)),
            pipelines=tuple(pipelines),
            seeds=tuple(seeds),
            **data,
        )

    def hash(self) -> str:
        """SHA-256 of the canonical configuration without seeds."""
        blob = json.dumps(self.to_dict(with_seeds=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def fingerprint(self) -> str:
        """Git blob id of the canonical configuration including seeds."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()


def load_config(path: str | Path) -> dict:
    """Read a YAML scenario file into a plain dict (keys mirror Scenario fields)."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping")
    return data


@dataclass(eq=False)
class ExperimentRecord:
    """Everything one (pipeline, seed) run produced."""

    pipeline: Pipeline
    seed: int
    n_agents: int
    centralized_agents: int
    returns: np.ndarray
    smoothed: np.ndarray
    epsilons: np.ndarray
    eval_returns: np.ndarray
    mean_return: float
    oracle_return: float | None
    normalized_return: float | None
    table_entries: dict[str, int]
    wall_clock: dict[str, float]
    codebooks: dict[tuple[int, int], Codebook] = field(default_factory=dict)
    values: ValueTable | None = None
    q_tables: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        n = self.normalized_return
        if n is not None and not 0.0 <= n <= 1.0 + NORMALIZED_TOL:
            raise ContractViolation(f"normalized return {n} outside [0, 1 + {NORMALIZED_TOL}]")

    def codebook_summaries(self) -> list[dict]:
        out = []
        for (i, j), book in sorted(self.codebooks.items()):
            out.append(
                {
                    "link": [i, j],
                    "budget_bits": book.budget_bits,
                    "size": book.size,
                    "medians": list(book.medians),
                    "cost": book.cost,
                    "partition": book.partition.tolist(),
                }
            )
        return out

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "schema": RECORD_SCHEMA,
            "pipeline": self.pipeline.value,
            "seed": self.seed,
            "n_agents": self.n_agents,
            "centralized_agents": self.centralized_agents,
            "episodes": len(self.returns),
            "mean_return": self.mean_return,
            "oracle_return": self.oracle_return,
            "normalized_return": self.normalized_return,
            "table_entries": self.table_entries,
            "codebooks": self.codebook_summaries(),
            "designs_per_sender": {str(k): v for k, v in designs_per_sender(self.codebooks).items()},
        }
        if self.values is not None:
            out["values"] = self.values.values.tolist()
            out["inactive_observations"] = list(self.values.inactive)
        if timing:
            out["wall_clock"] = self.wall_clock
        return out


@functools.lru_cache(maxsize=16)
def _oracle(grid: GridSpec, n_agents: int, max_pairs: int) -> ExactSolution:
    return value_iteration(JointMdp(grid, n_agents), max_pairs=max_pairs)


def oracle_solution(grid: GridSpec, n_agents: int, max_pairs: int = ORACLE_MAX_PAIRS) -> ExactSolution | None:
    """Cached exact solution, or None when the joint space is over ``max_pairs``."""
    try:
        return _oracle(grid, n_agents, max_pairs)
    except CapacityError:
        return None


def _evaluate(scenario: Scenario, starts: np.ndarray, greedy: np.ndarray) -> tuple[float, float | None, float | None]:
    mean = float(np.mean(greedy))
    sol = oracle_solution(scenario.grid, scenario.n_agents, scenario.oracle_max_pairs)
    if sol is None:
        return mean, None, None
    idx = np.ravel_multi_index(tuple(starts.T), (scenario.grid.n_cells,) * scenario.n_agents)
    best = sol.v_star[idx]
    # paired normalization: same starts for the learner and the optimum
    return mean, float(np.mean(best)), float(np.sum(greedy) / np.sum(best))


def _peer_distribution(scenario: Scenario, mdp: JointMdp, policy: np.ndarray, seed: int) -> PeerDistribution:
    if scenario.peer_dist is PeerKind.EMPIRICAL:
        return empirical_peer_distribution(policy, mdp, scenario.empirical_rollouts, seed=seed)
    return PeerDistribution.uniform_non_goal(mdp.n_cells, mdp.spec.goal, mdp.n_agents - 1)


def run_centralized(scenario: Scenario, seed: int | None = None) -> ExperimentRecord:
    """Joint-action Q-learning on the full N-agent problem."""
    seed = scenario.seeds[0] if seed is None else seed
    scenario.check_capacity(Pipeline.CENTRALIZED)
    s_train, _, s_eval = phase_seeds(seed)
    mdp = JointMdp(scenario.grid, scenario.n_agents)
    clock = {}
    t0 = time.perf_counter()
    res = centralized_q_learning(mdp, replace(scenario.centralized, seed=s_train))
    clock["centralized"] = time.perf_counter() - t0
    starts = sample_starts(scenario.grid, scenario.n_agents, scenario.eval_episodes, s_eval)
    t0 = time.perf_counter()
    greedy = evaluate_joint_policy(res.q, mdp, starts)
    clock["evaluation"] = time.perf_counter() - t0
    mean, best, norm = _evaluate(scenario, starts, greedy)
    return ExperimentRecord(
        pipeline=Pipeline.CENTRALIZED,
        seed=seed,
        n_agents=scenario.n_agents,
        centralized_agents=scenario.n_agents,
        returns=res.returns,
        smoothed=smooth(res.returns, scenario.smoothing_window),
        epsilons=res.epsilons,
        eval_returns=greedy,
        mean_return=mean,
        oracle_return=best,
        normalized_return=norm,
        table_entries={"centralized": mdp.n_pairs},
        wall_clock=clock,
    )


def _quantized(scenario: Scenario, seed: int, pipeline: Pipeline) -> ExperimentRecord:
    scenario.check_capacity(pipeline)
    s_central, s_dist, s_eval = phase_seeds(seed)
    n_c = scenario.centralized_agents(pipeline)
    mdp_c = JointMdp(scenario.grid, n_c)
    mdp = JointMdp(scenario.grid, scenario.n_agents)
    clock = {}

    t0 = time.perf_counter()
    central = centralized_q_learning(mdp_c, replace(scenario.centralized, seed=s_central))
    clock["centralized"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dist = _peer_distribution(scenario, mdp_c, central.policy, s_central)
    # agents are exchangeable, so agent 0's values serve every sender
    values = compute_values(central.q, central.policy, dist, terminal=mdp_c.terminal_mask(), seed=s_central)
    clock["values"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    books = build_link_codebooks(values, scenario.budgets, fold_inactive=scenario.fold_inactive)
    clock["quantizer"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dec = distributed_q_learning(mdp, books, replace(scenario.decentralized, seed=s_dist))
    clock["decentralized"] = time.perf_counter() - t0

    starts = sample_starts(scenario.grid, scenario.n_agents, scenario.eval_episodes, s_eval)
    t0 = time.perf_counter()
    greedy = dec.evaluate(mdp, starts)
    clock["evaluation"] = time.perf_counter() - t0
    mean, best, norm = _evaluate(scenario, starts, greedy)
    return ExperimentRecord(
        pipeline=pipeline,
        seed=seed,
        n_agents=scenario.n_agents,
        centralized_agents=n_c,
        returns=dec.returns,
        smoothed=smooth(dec.returns, scenario.smoothing_window),
        epsilons=dec.epsilons,
        eval_returns=greedy,
        mean_return=mean,
        oracle_return=best,
        normalized_return=norm,
        table_entries={"centralized": mdp_c.n_pairs, "decentralized": dec.n_entries},
        wall_clock=clock,
        codebooks=books,
        values=values,
        q_tables=[np.array(t.values) for t in dec.tables],
    )


def run_saic(scenario: Scenario, seed: int | None = None) -> ExperimentRecord:
    """N-agent centralized phase, value codebooks, decentralized phase."""
    return _quantized(scenario, scenario.seeds[0] if seed is None else seed, Pipeline.SAIC)


def run_esaic(scenario: Scenario, seed: int | None = None) -> ExperimentRecord:
    """Two-agent centralized phase, value codebooks, N-agent decentralized phase."""
    return _quantized(scenario, scenario.seeds[0] if seed is None else seed, Pipeline.ESAIC)


RUNNERS = {Pipeline.CENTRALIZED: run_centralized, Pipeline.SAIC: run_saic, Pipeline.ESAIC: run_esaic}


def _run_one(task: tuple[Scenario, Pipeline, int]) -> ExperimentRecord:
    scenario, pipeline, seed = task
    return RUNNERS[pipeline](scenario, seed)


@dataclass(eq=False)
class RunSummary:
    scenario_hash: str
    fingerprint: str
    config: dict
    records: list[ExperimentRecord]
    aggregate: dict[str, dict]
    c1: list[dict] = field(default_factory=list)
    affine: list[dict] = field(default_factory=list)

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "schema": SUMMARY_SCHEMA,
            "scenario_hash": self.scenario_hash,
            "fingerprint": self.fingerprint,
            "config": self.config,
            "aggregate": self.aggregate,
            "runs": [
                {
                    "pipeline": r.pipeline.value,
                    "seed": r.seed,
                    "mean_return": r.mean_return,
                    "normalized_return": r.normalized_return,
                    "table_entries": r.table_entries,
                }
                for r in self.records
            ],
        }
        if self.c1:
            out["c1"] = self.c1
        if self.affine:
            out["affine"] = self.affine
        if timing:
            out["wall_clock"] = [{"pipeline": r.pipeline.value, "seed": r.seed, **r.wall_clock} for r in self.records]
        return out


def _stats(xs: Sequence[float | None]) -> dict:
    vals = [x for x in xs if x is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    arr = np.asarray(vals)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": len(vals)}


def compare_pipelines(saic: ExperimentRecord, esaic: ExperimentRecord) -> tuple[list[dict], dict]:
    """Per-link partition agreement and the value-table fit between two paired runs."""
    c1 = []
    for link in sorted(saic.codebooks):
        report = check_c1(esaic.codebooks[link], saic.codebooks[link])
        c1.append({"seed": saic.seed, "link": list(link), **report.to_dict()})
    fit = check_affine_relation(esaic.values, saic.values)
    return c1, {"seed": saic.seed, **fit.to_dict()}


def run_scenario(scenario: Scenario) -> RunSummary:
    """Every (pipeline, seed) of the scenario, merged in deterministic order."""
    for p in scenario.pipelines:
        scenario.check_capacity(p)
    tasks = [(scenario, p, s) for p in scenario.pipelines for s in scenario.seeds]
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as pool:
            records = list(pool.map(_run_one, tasks))
    else:
        records = [_run_one(t) for t in tasks]
    aggregate = {}
    for p in scenario.pipelines:
        mine = [r for r in records if r.pipeline is p]
        aggregate[p.value] = {
            "normalized_return": _stats([r.normalized_return for r in mine]),
            "mean_return": _stats([r.mean_return for r in mine]),
        }
    c1, affine = [], []
    if Pipeline.SAIC in scenario.pipelines and Pipeline.ESAIC in scenario.pipelines:
        by_key = {(r.pipeline, r.seed): r for r in records}
        for s in scenario.seeds:
            links, fit = compare_pipelines(by_key[Pipeline.SAIC, s], by_key[Pipeline.ESAIC, s])
            c1 += links
            affine.append(fit)
    return RunSummary(scenario.hash(), scenario.fingerprint(), scenario.to_dict(), records, aggregate, c1, affine)


@dataclass(frozen=True)
class OracleReports:
    v2: ValueTable
    vn: ValueTable
    affine: AffineFitReport
    c1: PartitionReport

    def to_dict(self) -> dict:
        return {
            "v2": self.v2.values.tolist(),
            "vn": self.vn.values.tolist(),
            "affine": self.affine.to_dict(),
            "c1": self.c1.to_dict(),
        }


def oracle_reports(
    grid: GridSpec, n_agents: int, budget_bits: int, max_pairs: int = ORACLE_MAX_PAIRS, fold_inactive: bool = True
) -> OracleReports:
    """Compare exact two-agent and N-agent values under uniform non-goal peers."""
    tables = []
    for n in (2, n_agents):
        mdp = JointMdp(grid, n)
        sol = value_iteration(mdp, max_pairs=max_pairs)
        dist = PeerDistribution.uniform_non_goal(grid.n_cells, grid.goal, n - 1)
        tables.append(compute_values(sol.q_star, sol.policy, dist, terminal=mdp.terminal_mask()))
    p2 = design_quantizer(tables[0], budget_bits, fold_inactive=fold_inactive)
    pn = design_quantizer(tables[1], budget_bits, fold_inactive=fold_inactive)
    return OracleReports(tables[0], tables[1], check_affine_relation(*tables), check_c1(p2, pn))


def bench(
    grid: GridSpec,
    agents: Iterable[int],
    episodes: int,
    repeats: int = 3,
    max_entries: int = DEFAULT_MAX_ENTRIES,
    seed: int = 0,
) -> list[dict]:
    """Centralized-phase size and time for both pipelines over a range of team sizes.

    Times are the fastest of ``repeats`` runs at a fixed episode budget. SAIC
    entries above ``max_entries`` are reported as refused instead of run.
    """
    cfg = TrainConfig(episodes=episodes, seed=seed, max_entries=max_entries)
    centralized_q_learning(JointMdp(grid, 2), replace(cfg, episodes=1))  # compile outside the clock

    def fastest(mdp: JointMdp) -> float:
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            centralized_q_learning(mdp, cfg)
            best = min(best, time.perf_counter() - t0)
        return float(best)

    rows = []
    for n in agents:
        saic = centralized_entries(grid.n_cells, n)
        row = {
            "n_agents": n,
            "esaic_entries": centralized_entries(grid.n_cells, 2),
            "saic_entries": saic,
            "ratio": complexity_ratio(grid.n_cells, n),
            "esaic_seconds": fastest(JointMdp(grid, 2)),
            "saic_seconds": None,
            "saic_refused": saic > max_entries,
        }
        if not row["saic_refused"]:
            row["saic_seconds"] = fastest(JointMdp(grid, n))
        rows.append(row)
    return rows


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def curve_csv(record: ExperimentRecord) -> str:
    lines = [
        f"# schema={CURVE_SCHEMA};pipeline={record.pipeline.value};seed={record.seed}",
        "episode,raw_return,smoothed_return,epsilon",
    ]
    for k, (r, s, e) in enumerate(zip(record.returns.tolist(), record.smoothed.tolist(), record.epsilons.tolist())):
        lines.append(f"{k + 1},{r!r},{s!r},{e!r}")
    return "\n".join(lines) + "\n"


def read_curve(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a curve CSV back into ``episode``, ``raw_return``, ``smoothed_return``, ``epsilon`` arrays."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith(f"# schema={CURVE_SCHEMA}"):
        raise ContractViolation(f"{path} is not a {CURVE_SCHEMA} file")
    cols = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    out = {}
    for i, name in enumerate(cols):
        raw = [row[i] for row in rows]
        out[name] = np.array([int(x) for x in raw]) if name == "episode" else np.array([float(x) for x in raw])
    return out


def _json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def emit(obj: ExperimentRecord | RunSummary | Mapping, fmt: str, path: str | Path, timing: bool = False) -> Path:
    """Persist a record (CSV curve or JSON), a summary (JSON or per-run CSV) or a report dict (JSON).

    Wall-clock figures are left out unless ``timing`` is set, so repeated runs
    produce byte-identical files.
    """
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown format {fmt!r}")
    if isinstance(obj, ExperimentRecord):
        text = curve_csv(obj) if fmt == "csv" else _json(obj.to_dict(timing))
    elif isinstance(obj, RunSummary):
        if fmt == "json":
            text = _json(obj.to_dict(timing))
        else:
            lines = [f"# schema={SUMMARY_SCHEMA};fingerprint={obj.fingerprint}", "pipeline,seed,mean_return,normalized_return"]
            for r in obj.records:
                norm = "" if r.normalized_return is None else repr(r.normalized_return)
                lines.append(f"{r.pipeline.value},{r.seed},{r.mean_return!r},{norm}")
            text = "\n".join(lines) + "\n"
    else:
        if fmt != "json":
            raise ConfigurationError("reports are written as JSON")
        text = _json(dict(obj))
    _write(path, text)
    return path


def write_run(summary: RunSummary, out: str | Path, fmt: str = "csv", timing: bool = False) -> list[Path]:
    """Write every curve and record of a run plus ``summary.json`` into ``out``."""
    out = Path(out)
    paths = []
    for r in summary.records:
        stem = out / f"{r.pipeline.value}_seed{r.seed}"
        paths.append(emit(r, "json", stem.with_suffix(".json"), timing))
        if fmt == "csv":
            paths.append(emit(r, "csv", stem.with_name(stem.name + "_curve.csv")))
    paths.append(emit(summary, "json", out / "summary.json", timing))
    if fmt == "csv":
        paths.append(emit(summary, "csv", out / "summary.csv"))
    return paths
