import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

import config
from database.db import KnowledgeBase
from database.models import Entity, Var
from logic.network_logic import DerivedNetwork
from utils.errors import WriteBackError
from utils.helpers import format_float, mean

logger = logging.getLogger(__name__)


@dataclass
class Graph:
    nodes: List[Entity]
    adjacency: List[List[int]]  # sorted out-neighbours per node index

    @property
    def n(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]],
                   nodes: Optional[Sequence[Entity]] = None) -> "Graph":
        out = [set() for _ in range(n)]
        for u, v in edges:
            if u != v:
                out[u].add(v)
        names = list(nodes) if nodes is not None else [Entity(f"v{i}") for i in range(n)]
        return cls(names, [sorted(s) for s in out])

    @classmethod
    def from_network(cls, net: DerivedNetwork) -> "Graph":
        position = {m: i for i, m in enumerate(net.members)}
        return cls.from_edges(len(net.members), ((position[s], position[t]) for s, t in net.edges), net.members)

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u]]

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency)

    def to_networkx(self) -> nx.DiGraph:
        """Integer-labelled digraph; node i is self.nodes[i]."""
        G = nx.DiGraph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(self.edges())
        return G

    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v in self.edges():
            A[u, v] = 1.0
        return A


@dataclass
class ActorMetrics:
    id: Entity
    degree: int
    indegree: int
    outdegree: int
    betweenness: float
    closeness: float
    eigenvector: float


@dataclass
class NetworkMetrics:
    number_of_relations: int = 0
    number_of_actors: int = 0
    number_of_subject_actors: int = 0
    number_of_object_actors: int = 0
    number_of_actors_involved: int = 0
    isolates: int = 0
    density: float = 0.0
    average_degree: float = 0.0
    network_betweenness: float = 0.0
    network_closeness: float = 0.0
    network_degree: float = 0.0
    network_indegree: float = 0.0
    network_outdegree: float = 0.0
    network_eigenvector: float = 0.0
    eigenvector_degenerate: bool = False
    eigenvector_converged: bool = True


@dataclass
class EigenvectorResult:
    values: List[float]
    converged: bool
    iterations: int


@dataclass
class NetworkAnalysis:
    network: DerivedNetwork
    graph: Graph
    actors: List[ActorMetrics] = field(default_factory=list)
    summary: NetworkMetrics = field(default_factory=NetworkMetrics)


# ----------------------------------------------------------------------
# Per-actor indices
# ----------------------------------------------------------------------

def degrees(g: Graph) -> List[Tuple[int, int, int]]:
    """(indegree, outdegree, degree) per node."""
    G = g.to_networkx()
    return [(G.in_degree(v), G.out_degree(v), G.degree(v)) for v in range(g.n)]


def betweenness(g: Graph, normalized: bool = False) -> List[float]:
    """Shortest-path betweenness over ordered pairs.

    Raw geodesic shares by default; `normalized` divides by (n-1)(n-2).
    """
    scores = nx.betweenness_centrality(g.to_networkx(), normalized=normalized)
    return [float(scores[v]) for v in range(g.n)]


def closeness(g: Graph, mode: str = config.DEFAULT_CLOSENESS) -> List[float]:
    """Outgoing closeness.

    wf:       (r/(n-1)) * (r/sum of distances), r = nodes reachable from v
    classic:  (n-1)/sum of distances when v reaches everyone, else 0
    harmonic: sum of 1/distance over reachable nodes, divided by n-1
    """
    if mode not in config.CLOSENESS_MODES:
        raise ValueError(f"unknown closeness mode '{mode}'")
    n = g.n
    if n < 2:
        return [0.0] * n

    G = g.to_networkx()
    # networkx measures incoming distance on digraphs
    outgoing = G.reverse()
    if mode == "harmonic":
        scores = nx.harmonic_centrality(outgoing)
        return [float(scores[v]) / (n - 1) for v in range(n)]

    scores = nx.closeness_centrality(outgoing, wf_improved=True)
    if mode == "wf":
        return [float(scores[v]) for v in range(n)]
    return [float(scores[v]) if len(nx.descendants(G, v)) == n - 1 else 0.0 for v in range(n)]


def eigenvector_matrix(g: Graph, mode: str = config.DEFAULT_EIGENVECTOR) -> np.ndarray:
    """M[i, j] = 1 when node j's score flows into node i."""
    if mode not in config.EIGENVECTOR_MODES:
        raise ValueError(f"unknown eigenvector mode '{mode}'")
    A = g.adjacency_matrix()
    return np.maximum(A, A.T) if mode == "symmetrized" else A.T.copy()


def eigenvector_is_degenerate(g: Graph) -> bool:
    return g.edge_count == 0


def power_iteration(g: Graph, mode: str = config.DEFAULT_EIGENVECTOR,
                    tolerance: float = config.EIGENVECTOR_TOLERANCE,
                    max_iterations: int = config.EIGENVECTOR_MAX_ITERATIONS) -> EigenvectorResult:
    """Principal eigenvector by power iteration, L2-normalized, from the uniform vector.

    Iterates with M + I, which has the same eigenvectors as M but keeps
    bipartite graphs from oscillating. Stops once no entry moves by
    `tolerance`. Hitting `max_iterations` first returns the last iterate with
    converged=False; in right mode that happens when the dominant eigenvalue
    is repeated, as in acyclic graphs. A graph without edges returns the
    uniform vector.
    """
    if mode not in config.EIGENVECTOR_MODES:
        raise ValueError(f"unknown eigenvector mode '{mode}'")
    n = g.n
    if n == 0:
        return EigenvectorResult([], True, 0)
    x = np.full(n, 1.0 / math.sqrt(n))
    if eigenvector_is_degenerate(g):
        return EigenvectorResult(x.tolist(), True, 0)

    shifted = eigenvector_matrix(g, mode) + np.eye(n)
    for iteration in range(1, max_iterations + 1):
        y = shifted @ x
        y /= np.linalg.norm(y)
        change = float(np.max(np.abs(y - x)))
        x = y
        if change < tolerance:
            return EigenvectorResult(x.tolist(), True, iteration)
    logger.warning("%s eigenvector did not converge after %d iterations", mode, max_iterations)
    return EigenvectorResult(x.tolist(), False, max_iterations)


def eigenvector(g: Graph, mode: str = config.DEFAULT_EIGENVECTOR,
                tolerance: float = config.EIGENVECTOR_TOLERANCE,
                max_iterations: int = config.EIGENVECTOR_MAX_ITERATIONS) -> List[float]:
    return power_iteration(g, mode, tolerance, max_iterations).values


def actor_metrics(g: Graph, closeness_mode: str = config.DEFAULT_CLOSENESS,
                  eigenvector_mode: str = config.DEFAULT_EIGENVECTOR,
                  normalize_betweenness: bool = False,
                  eigen: Optional[EigenvectorResult] = None) -> List[ActorMetrics]:
    degree_rows = degrees(g)
    bw = betweenness(g, normalized=normalize_betweenness)
    cn = closeness(g, closeness_mode)
    ei = (eigen or power_iteration(g, eigenvector_mode)).values
    return [
        ActorMetrics(g.nodes[v], degree_rows[v][2], degree_rows[v][0], degree_rows[v][1], bw[v], cn[v], ei[v])
        for v in range(g.n)
    ]


# ----------------------------------------------------------------------
# Network level
# ----------------------------------------------------------------------

def network_centrality(values: Sequence[float]) -> float:
    """Network-level value of a per-actor index: the arithmetic mean."""
    return mean(values)


def network_summary(g: Graph, actors: Sequence[ActorMetrics],
                    eigenvector_converged: bool = True) -> NetworkMetrics:
    n, m = g.n, g.edge_count
    return NetworkMetrics(
        number_of_relations=m,
        number_of_actors=n,
        number_of_subject_actors=sum(1 for a in actors if a.outdegree > 0),
        number_of_object_actors=sum(1 for a in actors if a.indegree > 0),
        number_of_actors_involved=sum(1 for a in actors if a.degree > 0),
        isolates=sum(1 for a in actors if a.degree == 0),
        density=m / (n * (n - 1)) if n >= 2 else 0.0,
        average_degree=m / n if n else 0.0,
        network_betweenness=network_centrality([a.betweenness for a in actors]),
        network_closeness=network_centrality([a.closeness for a in actors]),
        network_degree=network_centrality([a.degree for a in actors]),
        network_indegree=network_centrality([a.indegree for a in actors]),
        network_outdegree=network_centrality([a.outdegree for a in actors]),
        network_eigenvector=network_centrality([a.eigenvector for a in actors]),
        eigenvector_degenerate=n > 0 and eigenvector_is_degenerate(g),
        eigenvector_converged=eigenvector_converged,
    )


def analyze_network(net: DerivedNetwork, closeness_mode: str = config.DEFAULT_CLOSENESS,
                    eigenvector_mode: str = config.DEFAULT_EIGENVECTOR,
                    normalize_betweenness: bool = False) -> NetworkAnalysis:
    g = Graph.from_network(net)
    eigen = power_iteration(g, eigenvector_mode)
    actors = actor_metrics(g, closeness_mode, eigenvector_mode, normalize_betweenness, eigen=eigen)
    summary = network_summary(g, actors, eigenvector_converged=eigen.converged)
    if summary.eigenvector_degenerate:
        logger.warning("network %s has no edges; eigenvector scores are uniform", net.network_id)
    if not eigen.converged:
        logger.warning("eigenvector scores of %s are the last iterate, not a converged vector", net.network_id)
    return NetworkAnalysis(net, g, actors, summary)


# ----------------------------------------------------------------------
# Write-back onto the index individuals
# ----------------------------------------------------------------------

# index class -> (person link, network link, actor field)
INDIVIDUAL_INDICES = (
    ("IndividualBetweenness", "isIndividualBetweennessOfPerson", "isIndividualBetweennessOfNetwork", "betweenness"),
    ("IndividualCloseness", "isIndividualClosenessOfPerson", "isIndividualClosenessOfNetwork", "closeness"),
    ("IndividualDegree", "isIndividualDegreeOfPerson", "isIndividualDegreeOfNetwork", "degree"),
    ("IndividualInDegree", "isIndividualInDegreeOfPerson", "isIndividualInDegreeOfNetwork", "indegree"),
    ("IndividualOutDegree", "isIndividualOutDegreeOfPerson", "isIndividualOutDegreeOfNetwork", "outdegree"),
    ("IndividualEigenvector", "isIndividualEigenvectorOfPerson", "isIndividualEigenvectorOfNetwork", "eigenvector"),
)

# index class -> (network link, summary field)
NETWORK_INDICES = (
    ("NetworkBetweenness", "hasNetworkBetweenness", "network_betweenness"),
    ("NetworkCloseness", "hasNetworkCloseness", "network_closeness"),
    ("NetworkDegree", "hasNetworkDegree", "network_degree"),
    ("NetworkInDegree", "hasNetworkInDegree", "network_indegree"),
    ("NetworkOutDegree", "hasNetworkOutDegree", "network_outdegree"),
    ("NetworkEigenvector", "hasNetworkEigenvector", "network_eigenvector"),
    ("NumberOfActors", "hasNumberOfActors", "number_of_actors"),
    ("NumberOfActorsInvolvedInARelation", "hasNumberOfActorsInvolvedInARelation", "number_of_actors_involved"),
    ("NumberOfObjectActors", "hasNumberOfObjectActors", "number_of_object_actors"),
    ("NumberOfSubjectActors", "hasNumberOfSubjectActors", "number_of_subject_actors"),
    ("NumberOfRelations", "hasNumberOfRelations", "number_of_relations"),
    ("DensityOfNetwork", "hasDensityOfNetwork", "density"),
)


def _set_value(kb: KnowledgeBase, indice: Entity, value: float):
    value = format_float(float(value))
    existing = kb.objects(indice, "has_SNA_Value")
    if existing and existing != [value]:
        raise WriteBackError(f"{indice} already carries has_SNA_Value {existing}, refusing to add {value}")
    kb.assert_triple(indice, "has_SNA_Value", value)


def write_back(kb: KnowledgeBase, analysis: NetworkAnalysis) -> int:
    """Attach has_SNA_Value to every index individual of the network; returns values written."""
    net = analysis.network.network_id
    written = 0

    for actor in analysis.actors:
        for class_name, person_link, network_link, attr in INDIVIDUAL_INDICES:
            indices = [row["x"] for row in kb.query_pattern([
                (Var("x"), person_link, actor.id),
                (Var("x"), network_link, net),
            ])]
            if not indices:
                raise WriteBackError(f"no {class_name} individual for {actor.id} in {net}; "
                                     "was saturation skipped?")
            for indice in indices:
                _set_value(kb, indice, getattr(actor, attr))
                written += 1

        if actor.degree == 0:
            isolate = kb.skolem("isolates", "iso", (actor.id, net))
            kb.add_instance(isolate, "SNAIsolate")
            kb.assert_triple(isolate, "isIsolateInstanceOfNetwork", net)
            kb.assert_triple(isolate, "isIsolateInstanceOfPerson", actor.id)

    for class_name, network_link, attr in NETWORK_INDICES:
        indices = kb.objects(net, network_link)
        if not indices:
            raise WriteBackError(f"no {class_name} individual for {net}; was saturation skipped?")
        for indice in indices:
            _set_value(kb, indice, getattr(analysis.summary, attr))
            written += 1

    logger.info("wrote %d index values for %s", written, net)
    return written


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------

def _rounded(value: Any) -> Any:
    return format_float(value) if isinstance(value, float) else value


def metrics_report(analysis: NetworkAnalysis) -> Dict[str, Any]:
    net = analysis.network
    actors = sorted(analysis.actors, key=lambda a: a.id)
    return {
        "network_id": net.network_id.name,
        "relation_type": net.relation_type,
        "qpe_id": net.qpe_id.name,
        "network": {k: _rounded(v) for k, v in asdict(analysis.summary).items()},
        "actors": [
            {f.name: (a.id.name if f.name == "id" else _rounded(getattr(a, f.name))) for f in fields(a)}
            for a in actors
        ],
    }
