"""Command-line entry point.

Exit status: 0 on success, 2 when a capacity guard refuses the job, 1 on any
contract or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import harness
from .env import GridSpec, JointMdp
from .errors import CapacityError, ConfigurationError, ContractViolation, DivergenceError
from .oracle import kmedian_brute_force, value_iteration
from .rl import centralized_q_learning, distributed_q_learning, evaluate_joint_policy
from .tocd import BitBudgetMatrix, Codebook, build_link_codebooks, kmedian_1d
from .voi import PeerDistribution, PeerKind, ValueTable, compute_values, empirical_peer_distribution

log = logging.getLogger("esaic")

EXIT_OK, EXIT_CONTRACT, EXIT_CAPACITY = 0, 1, 2


def _budget_matrix(path: str) -> list[list[int]]:
    p = Path(path)
    try:
        if p.suffix in (".yaml", ".yml", ".json"):
            data = yaml.safe_load(p.read_text())
        else:
            data = np.loadtxt(p, delimiter=",", dtype=np.int64, ndmin=2).tolist()
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read budget matrix {p}: {exc}") from exc
    return data


def scenario_from_args(args: argparse.Namespace) -> harness.Scenario:
    """Config file values first, then whatever flags were given on the command line."""
    data = harness.load_config(args.config) if args.config else {}
    if args.grid is not None:
        grid = data.get("grid") or {}
        grid = {"side": grid} if isinstance(grid, int) else dict(grid)
        if grid.get("side") != args.grid:
            grid.pop("goal", None)
            grid.pop("max_steps", None)
        grid["side"] = args.grid
        data["grid"] = grid
    if args.agents is not None:
        data["n_agents"] = args.agents
    if args.budget is not None:
        data.pop("budgets", None)
        data["budget"] = args.budget
    if args.budget_matrix is not None:
        data.pop("budget", None)
        data["budgets"] = _budget_matrix(args.budget_matrix)
    if args.pipeline:
        data.pop("pipeline", None)
        data["pipelines"] = args.pipeline
    if args.seed:
        data.pop("seed", None)
        data["seeds"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    if args.episodes is not None:
        for phase in ("centralized", "decentralized"):
            data[phase] = {**(data.get(phase) or {}), "episodes": args.episodes}
    if "budget" not in data and "budgets" not in data:
        data["budget"] = 2
    return harness.Scenario.from_dict(data)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train_centralized(args) -> int:
    sc = scenario_from_args(args)
    seed = sc.seeds[0]
    s_train, _, s_eval = harness.phase_seeds(seed)
    mdp = JointMdp(sc.grid, sc.n_agents)
    res = centralized_q_learning(mdp, replace(sc.centralized, seed=s_train))
    out = _out(args)
    res.q.save(out / "q_table.csv")
    if sc.peer_dist is PeerKind.EMPIRICAL:
        dist = empirical_peer_distribution(res.policy, mdp, sc.empirical_rollouts, seed=s_train)
    else:
        dist = PeerDistribution.uniform_non_goal(mdp.n_cells, sc.grid.goal, sc.n_agents - 1)
    values = compute_values(res.q, res.policy, dist, terminal=mdp.terminal_mask(), seed=s_train)
    values.save(out / "values.csv")
    starts = harness.sample_starts(sc.grid, sc.n_agents, sc.eval_episodes, s_eval)
    greedy = evaluate_joint_policy(res.q, mdp, starts)
    mean, best, norm = harness._evaluate(sc, starts, greedy)
    record = harness.ExperimentRecord(
        harness.Pipeline.CENTRALIZED, seed, sc.n_agents, sc.n_agents, res.returns,
        harness.smooth(res.returns, sc.smoothing_window), res.epsilons, greedy, mean, best, norm,
        {"centralized": mdp.n_pairs}, {}, values=values,
    )
    harness.emit(record, "csv", out / "curve.csv")
    harness.emit(record, "json", out / "record.json")
    print(json.dumps({"mean_return": mean, "normalized_return": norm, "out": str(out)}))
    return EXIT_OK


def cmd_design_quantizer(args) -> int:
    if not args.values:
        raise ConfigurationError("design-quantizer needs --values PATH (a value table CSV)")
    values = ValueTable.load(args.values)
    if args.budget_matrix:
        budgets = BitBudgetMatrix(np.asarray(_budget_matrix(args.budget_matrix)))
    else:
        n = args.agents or 2
        budgets = BitBudgetMatrix.homogeneous(n, 2 if args.budget is None else args.budget)
    books = build_link_codebooks(values, budgets, fold_inactive=not args.no_fold)
    out = _out(args)
    files: dict[int, str] = {}
    links = {}
    for (i, j), book in sorted(books.items()):
        name = f"sender{i}_R{book.budget_bits}.csv"
        if id(book) not in files:
            book.save(out / name)
            files[id(book)] = name
        links[f"{i}->{j}"] = files[id(book)]
    harness.emit({"schema": "esaic.links/1", "budgets": budgets.to_list(), "links": links}, "json", out / "links.json")
    print(json.dumps({"codebooks": len(files), "links": len(links), "out": str(out)}))
    return EXIT_OK


def load_links(directory: str | Path) -> dict[tuple[int, int], Codebook]:
    directory = Path(directory)
    try:
        meta = json.loads((directory / "links.json").read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read {directory / 'links.json'}: {exc}") from exc
    cache: dict[str, Codebook] = {}
    books = {}
    for key, name in meta["links"].items():
        i, j = (int(x) for x in key.split("->"))
        if name not in cache:
            cache[name] = Codebook.load(directory / name)
        books[i, j] = cache[name]
    return books


def cmd_train_distributed(args) -> int:
    if not args.codebooks:
        raise ConfigurationError("train-distributed needs --codebooks DIR (output of design-quantizer)")
    books = load_links(args.codebooks)
    sc = scenario_from_args(args)
    seed = sc.seeds[0]
    _, s_dist, s_eval = harness.phase_seeds(seed)
    mdp = JointMdp(sc.grid, sc.n_agents)
    res = distributed_q_learning(mdp, books, replace(sc.decentralized, seed=s_dist))
    out = _out(args)
    for i, table in enumerate(res.tables):
        table.save(out / f"q_agent{i}.csv")
    starts = harness.sample_starts(sc.grid, sc.n_agents, sc.eval_episodes, s_eval)
    greedy = res.evaluate(mdp, starts)
    mean, best, norm = harness._evaluate(sc, starts, greedy)
    record = harness.ExperimentRecord(
        harness.Pipeline.ESAIC, seed, sc.n_agents, 0, res.returns,
        harness.smooth(res.returns, sc.smoothing_window), res.epsilons, greedy, mean, best, norm,
        {"decentralized": res.n_entries}, {}, codebooks=dict(books),
    )
    harness.emit(record, "csv", out / "curve.csv")
    harness.emit(record, "json", out / "record.json")
    print(json.dumps({"mean_return": mean, "normalized_return": norm, "out": str(out)}))
    return EXIT_OK


def cmd_run(args) -> int:
    config = harness.load_config(args.config) if args.config else {}
    if not args.seed and "seed" not in config and "seeds" not in config:
        raise ConfigurationError("run needs --seed (or seeds in the config) so results can be compared")
    sc = scenario_from_args(args)
    summary = harness.run_scenario(sc)
    harness.write_run(summary, _out(args), fmt=args.format, timing=args.timing)
    print(json.dumps(summary.aggregate, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    """Oracle suite: k-median DP against enumeration, learner against value iteration, value relation."""
    sc = scenario_from_args(args)
    rng = np.random.default_rng(sc.seeds[0])
    kmedian_ok = True
    for _ in range(args.instances):
        v = rng.integers(0, 20, size=rng.integers(1, 13)) / 4.0
        k = int(rng.integers(1, 5))
        cost = kmedian_1d(v, k).cost
        if not np.isclose(cost, kmedian_brute_force(v, k)[0], rtol=0, atol=1e-9):
            kmedian_ok = False

    mdp = JointMdp(sc.grid, 2)
    sol = value_iteration(mdp, max_pairs=sc.oracle_max_pairs)
    res = centralized_q_learning(mdp, replace(sc.centralized, seed=harness.phase_seeds(sc.seeds[0])[0]))
    starts = np.array([mdp.decode_state(s) for s in mdp.start_states()])
    greedy = evaluate_joint_policy(res.q, mdp, starts)
    gap = float(np.max(np.abs(greedy - sol.v_star[mdp.start_states()])))

    report = {
        "schema": "esaic.verify/1",
        "kmedian": {"instances": args.instances, "match": kmedian_ok},
        "centralized_vs_oracle": {"starts": len(starts), "max_gap": gap, "match": gap <= 1e-9},
    }
    n = max(sc.n_agents, 2)
    bits = int(sc.budgets[0, 1]) if sc.n_agents >= 2 else 2
    try:
        rel = harness.oracle_reports(sc.grid, n, bits, sc.oracle_max_pairs, sc.fold_inactive)
        report["value_relation"] = {"n_agents": n, "budget_bits": bits, **rel.to_dict()}
    except CapacityError as exc:
        report["value_relation"] = {"refused": str(exc)}
    out = _out(args)
    harness.emit(report, "json", out / "verify.json")
    print(json.dumps({k: v for k, v in report.items() if k != "value_relation"}, sort_keys=True))
    return EXIT_OK if kmedian_ok and gap <= 1e-9 else EXIT_CONTRACT


def cmd_bench(args) -> int:
    grid = GridSpec(side=args.grid or 3)
    top = args.agents or 6
    rows = harness.bench(grid, range(2, top + 1), args.episodes or 20_000, repeats=args.repeats)
    out = _out(args)
    if args.format == "json":
        harness.emit({"schema": "esaic.bench/1", "grid": grid.to_dict(), "rows": rows}, "json", out / "bench.json")
    else:
        cols = list(rows[0])
        lines = ["# schema=esaic.bench/1", ",".join(cols)]
        lines += [",".join("" if r[c] is None else str(r[c]) for c in cols) for r in rows]
        (out / "bench.csv").write_text("\n".join(lines) + "\n")
    for r in rows:
        print(json.dumps(r))
    return EXIT_OK


COMMANDS = {
    "train-centralized": cmd_train_centralized,
    "design-quantizer": cmd_design_quantizer,
    "train-distributed": cmd_train_distributed,
    "run": cmd_run,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file; flags override its values")
    common.add_argument("--pipeline", action="append", choices=[p.value for p in harness.Pipeline],
                        help="repeat to run several pipelines")
    common.add_argument("--agents", type=int, help="number of agents N")
    common.add_argument("--grid", type=int, help="grid side n (n x n cells)")
    budget = common.add_mutually_exclusive_group()
    budget.add_argument("--budget", type=int, help="homogeneous bits per link")
    budget.add_argument("--budget-matrix", help="CSV or YAML file with one row of bits per sender")
    common.add_argument("--seed", type=int, action="append", help="repeat for several seeds")
    common.add_argument("--episodes", type=int, help="episodes for every training phase")
    common.add_argument("--workers", type=int, help="processes for the seed fan-out")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", default="csv", choices=["csv", "json"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="esaic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train-centralized", parents=[common], help="joint-action Q-learning plus value table")
    p = sub.add_parser("design-quantizer", parents=[common], help="codebooks from a value table")
    p.add_argument("--values", help="value table CSV written by train-centralized")
    p.add_argument("--no-fold", action="store_true", help="cluster terminal observations too")
    p = sub.add_parser("train-distributed", parents=[common], help="per-agent Q-learning over fixed codebooks")
    p.add_argument("--codebooks", help="directory written by design-quantizer")
    p = sub.add_parser("run", parents=[common], help="full pipeline(s) for every seed")
    p.add_argument("--timing", action="store_true", help="include wall-clock figures in the JSON artifacts")
    p = sub.add_parser("verify", parents=[common], help="oracle checks")
    p.add_argument("--instances", type=int, default=200, help="random k-median instances")
    p = sub.add_parser("bench", parents=[common], help="centralized-phase size and time over N")
    p.add_argument("--repeats", type=int, default=3)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        log.error("refused: %s", exc)
        return EXIT_CAPACITY
    except (ContractViolation, ConfigurationError, DivergenceError) as exc:
        log.error("%s", exc)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
