import logging
import math
import time
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence

import networkx as nx
import numpy as np

import config
from logic import metrics_logic
from logic.metrics_logic import Graph
from utils.errors import ValidationError
from utils.helpers import format_float

logger = logging.getLogger(__name__)

TOLERANCES = {
    "degrees": 0.0,
    "betweenness": config.BETWEENNESS_TOLERANCE,
    "eigenvector": config.EIGENVECTOR_COSINE_TOLERANCE,
    "eigenvector_residual": config.EIGENVECTOR_RESIDUAL_TOLERANCE,
    "right_eigenvector": config.EIGENVECTOR_RESIDUAL_TOLERANCE,
    **{f"closeness[{mode}]": config.CLOSENESS_TOLERANCE for mode in config.CLOSENESS_MODES},
}


@dataclass
class OracleReport:
    seed: int
    trials: int
    graphs_checked: int = 0
    deviations: Dict[str, float] = field(default_factory=lambda: {k: 0.0 for k in TOLERANCES})
    first_failure: Dict[str, str] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def failed_metrics(self) -> List[str]:
        return sorted(k for k, v in self.deviations.items() if v > TOLERANCES[k])

    @property
    def passed(self) -> bool:
        return not self.failed_metrics

    def record(self, metric: str, deviation: float, g: Graph):
        if deviation > self.deviations[metric]:
            self.deviations[metric] = deviation
        if deviation > TOLERANCES[metric] and metric not in self.first_failure:
            self.first_failure[metric] = f"n={g.n} edges={g.edges()}"

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "graphs_checked": self.graphs_checked,
            "passed": self.passed,
            "failed_metrics": self.failed_metrics,
            "max_deviation": {k: self.deviations[k] for k in sorted(self.deviations)},
            "tolerance": {k: TOLERANCES[k] for k in sorted(TOLERANCES)},
            "first_failure": dict(sorted(self.first_failure.items())),
        }


# ----------------------------------------------------------------------
# Reference computations
# ----------------------------------------------------------------------

def to_networkx(g: Graph) -> nx.DiGraph:
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges())
    return G


def adjacency_matrix(g: Graph) -> np.ndarray:
    A = np.zeros((g.n, g.n))
    for u, v in g.edges():
        A[u, v] = 1.0
    return A


def oracle_degrees(g: Graph) -> List[tuple]:
    A = adjacency_matrix(g)
    indegree, outdegree = A.sum(axis=0), A.sum(axis=1)
    return [(int(i), int(o), int(i + o)) for i, o in zip(indegree, outdegree)]


def oracle_betweenness(g: Graph) -> List[float]:
    """Share of every geodesic credited to its interior nodes, by full enumeration."""
    G = to_networkx(g)
    scores = [0.0] * g.n
    for s in range(g.n):
        for t in range(g.n):
            if s == t or not nx.has_path(G, s, t):
                continue
            paths = list(nx.all_shortest_paths(G, s, t))
            for path in paths:
                for v in path[1:-1]:
                    scores[v] += 1.0 / len(paths)
    return scores


def oracle_closeness(g: Graph, mode: str) -> List[float]:
    n = g.n
    if n == 0:
        return []
    D = nx.floyd_warshall_numpy(to_networkx(g), nodelist=list(range(n)))
    values = []
    for v in range(n):
        reached = [int(D[v, u]) for u in range(n) if u != v and np.isfinite(D[v, u])]
        r, total = len(reached), sum(reached)
        if r == 0:
            values.append(0.0)
        elif mode == "wf":
            values.append((r / (n - 1)) * (r / total))
        elif mode == "classic":
            values.append((n - 1) / total if r == n - 1 else 0.0)
        else:
            values.append(math.fsum(1.0 / d for d in reached) / (n - 1))
    return values


def symmetric_matrix(g: Graph) -> np.ndarray:
    A = adjacency_matrix(g)
    return np.maximum(A, A.T)


def eigenvector_deviation(g: Graph, x: Sequence[float]) -> tuple:
    """(1 - cosine to the principal eigenspace, residual norm) for a candidate vector."""
    n = g.n
    vec = np.asarray(x, dtype=float)
    if n == 0:
        return 0.0, 0.0
    norm = np.linalg.norm(vec)
    if norm == 0.0 or np.any(vec < -1e-12):
        return 1.0, float("inf")
    vec = vec / norm
    M = symmetric_matrix(g)
    if not M.any():
        uniform = np.full(n, 1.0 / math.sqrt(n))
        return max(0.0, 1.0 - float(uniform @ vec)), 0.0

    w, V = np.linalg.eigh(M)
    basis = V[:, w >= w[-1] - 1e-9]
    cosine = float(np.linalg.norm(basis.T @ vec))
    lam = float(vec @ M @ vec)
    residual = float(np.linalg.norm(M @ vec - lam * vec))
    return max(0.0, 1.0 - cosine), residual


def right_eigenvector_deviation(g: Graph, iterate: Callable) -> float:
    """Residual of a right-mode power iteration against the Perron root from a dense solver.

    Stopping without convergence is accepted only when that root is repeated.
    """
    if g.edge_count == 0:
        return 0.0
    M = adjacency_matrix(g).T
    roots = np.linalg.eigvals(M)
    perron = float(np.max(roots.real))
    repeated = int(np.sum(np.abs(roots - perron) < config.ORACLE_ROOT_CLUSTER)) > 1
    cap = config.ORACLE_REPEATED_ROOT_ITERATIONS if repeated else config.EIGENVECTOR_MAX_ITERATIONS

    result = iterate(g, "right", max_iterations=cap)
    if not result.converged:
        return 0.0 if repeated else float("inf")
    x = np.asarray(result.values, dtype=float)
    if np.any(x < -1e-12):
        return float("inf")
    return float(np.linalg.norm(M @ x - perron * x))


# ----------------------------------------------------------------------
# Graph generators
# ----------------------------------------------------------------------

def random_digraph(rng: np.random.Generator, min_nodes: int = config.ORACLE_MIN_NODES,
                   max_nodes: int = config.ORACLE_MAX_NODES,
                   min_p: float = config.ORACLE_MIN_EDGE_PROBABILITY,
                   max_p: float = config.ORACLE_MAX_EDGE_PROBABILITY) -> Graph:
    n = int(rng.integers(min_nodes, max_nodes + 1))
    p = float(rng.uniform(min_p, max_p))
    mask = rng.random((n, n)) < p
    return Graph.from_edges(n, ((u, v) for u in range(n) for v in range(n) if u != v and mask[u, v]))


def nonisomorphic_digraphs(max_nodes: int = 4) -> Iterator[Graph]:
    """Every simple digraph with 1..max_nodes nodes, one per isomorphism class."""
    for n in range(1, max_nodes + 1):
        pairs = list(permutations(range(n), 2))
        buckets: Dict[str, List[nx.DiGraph]] = {}
        for mask in range(1 << len(pairs)):
            edges = [pair for bit, pair in enumerate(pairs) if mask >> bit & 1]
            G = nx.DiGraph()
            G.add_nodes_from(range(n))
            G.add_edges_from(edges)
            bucket = buckets.setdefault(nx.weisfeiler_lehman_graph_hash(G), [])
            if any(nx.is_isomorphic(G, H) for H in bucket):
                continue
            bucket.append(G)
            yield Graph.from_edges(n, edges)


# ----------------------------------------------------------------------
# Check
# ----------------------------------------------------------------------

def check_graph(g: Graph, report: OracleReport, implementations: Mapping[str, Callable]):
    got = implementations["degrees"](g)
    report.record("degrees", max((abs(a - b) for r, s in zip(got, oracle_degrees(g)) for a, b in zip(r, s)),
                                 default=0.0), g)

    got = implementations["betweenness"](g)
    report.record("betweenness", max((abs(a - b) for a, b in zip(got, oracle_betweenness(g))), default=0.0), g)

    for mode in config.CLOSENESS_MODES:
        got = implementations["closeness"](g, mode)
        report.record(f"closeness[{mode}]",
                      max((abs(a - b) for a, b in zip(got, oracle_closeness(g, mode))), default=0.0), g)

    cosine_gap, residual = eigenvector_deviation(g, implementations["eigenvector"](g))
    report.record("eigenvector", cosine_gap, g)
    report.record("eigenvector_residual", residual, g)
    report.record("right_eigenvector", right_eigenvector_deviation(g, implementations["power_iteration"]), g)
    report.graphs_checked += 1


def run_oracle_check(seed: int, trials: int, overrides: Optional[Mapping[str, Callable]] = None,
                     exhaustive_max_nodes: int = 4) -> OracleReport:
    """Compare every metric against its brute-force reference.

    Checks all non-isomorphic digraphs up to `exhaustive_max_nodes` nodes and
    `trials` seeded random digraphs. `overrides` replaces metric
    implementations by name, which is how a corrupted metric is shown to fail.
    """
    if trials < 1:
        raise ValidationError(f"trials must be at least 1, got {trials}")
    implementations = {
        "degrees": metrics_logic.degrees,
        "betweenness": metrics_logic.betweenness,
        "closeness": metrics_logic.closeness,
        "eigenvector": metrics_logic.eigenvector,
        "power_iteration": metrics_logic.power_iteration,
    }
    for name, fn in (overrides or {}).items():
        if name not in implementations:
            raise ValidationError(f"unknown metric override '{name}'")
        implementations[name] = fn

    started = time.perf_counter()
    report = OracleReport(seed=seed, trials=trials)
    if exhaustive_max_nodes > 0:
        for g in nonisomorphic_digraphs(exhaustive_max_nodes):
            check_graph(g, report, implementations)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        check_graph(random_digraph(rng), report, implementations)
    report.elapsed = time.perf_counter() - started

    logger.info("oracle check: %d graphs, failed metrics %s", report.graphs_checked, report.failed_metrics or "none")
    return report


def format_report(report: OracleReport) -> List[str]:
    lines = [f"oracle check seed={report.seed} trials={report.trials} graphs={report.graphs_checked}"]
    for metric in sorted(report.deviations):
        status = "FAIL" if metric in report.failed_metrics else "ok"
        lines.append(f"  {metric:<22} max deviation {format_float(report.deviations[metric]):<12g} "
                     f"tolerance {TOLERANCES[metric]:g}  {status}")
    lines.append("PASSED" if report.passed else "FAILED: " + ", ".join(report.failed_metrics))
    return lines
