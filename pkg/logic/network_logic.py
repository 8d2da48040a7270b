import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import pandas as pd

from database.db import KnowledgeBase
from database.models import Entity, Var
from logic.survey_logic import QuestionnaireDef, ResponseRecord
from utils.errors import NetworkError
from utils.helpers import id_label, sanitize_filename

logger = logging.getLogger(__name__)

Edge = Tuple[Entity, Entity]


@dataclass
class DerivedNetwork:
    network_id: Entity
    qpe_id: Entity
    relation_type: str
    members: List[Entity] = field(default_factory=list)
    edges: Set[Edge] = field(default_factory=set)

    @property
    def file_stem(self) -> str:
        return sanitize_filename(self.network_id.name)

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def sources(self) -> Set[Entity]:
        return {s for s, _ in self.edges}

    def targets(self) -> Set[Entity]:
        return {t for _, t in self.edges}

    def isolates(self) -> List[Entity]:
        involved = self.sources() | self.targets()
        return [m for m in self.members if m not in involved]

    def to_graph(self):
        from logic.metrics_logic import Graph
        return Graph.from_network(self)


def build_networks(kb: KnowledgeBase, qpe_id, symmetrize: bool = False) -> List[DerivedNetwork]:
    """One directed graph per network of the questionnaire event, read from a saturated KB."""
    qpe = qpe_id if isinstance(qpe_id, Entity) else Entity(str(qpe_id))
    if not kb.is_instance(qpe, "QuestionnairePastEvent"):
        raise NetworkError(f"unknown questionnaire event '{qpe.name}'")

    networks = []
    for net in kb.subjects("isNetworkOfQPE", qpe):
        if not kb.is_instance(net, "SNANetwork"):
            continue
        relation_type = kb.value(net, "isNetworkOfTypeOfRelation")
        derived = DerivedNetwork(
            network_id=net,
            qpe_id=qpe,
            relation_type=id_label(relation_type.name if relation_type else net.name),
            members=sorted(kb.objects(net, "hasMember")),
        )
        members = set(derived.members)

        rows = kb.query_pattern([
            (Var("rel"), "isRelationOfNetwork", net),
            (Var("rel"), "isRelationOfPerson", Var("p")),
            (Var("rel"), "isRelationWith", Var("q")),
        ])
        for row in rows:
            source, target = row["p"], row["q"]
            if source == target:
                continue
            if source not in members or target not in members:
                logger.warning("relation %s -> %s dropped from %s: endpoint is not a member",
                               source, target, net)
                continue
            derived.edges.add((source, target))
            if symmetrize:
                derived.edges.add((target, source))

        logger.info("network %s: %d members, %d edges", net, len(derived.members), len(derived.edges))
        networks.append(derived)
    return networks


def network_nesting_check(nets: Sequence[DerivedNetwork], order: Optional[Sequence[str]] = None) -> bool:
    """Whether the edge sets of each event's networks are nested.

    With `order` (relation type names, narrowest first) each network must be
    contained in the next one; without it the edge sets must form a chain
    under inclusion in some order.
    """
    by_qpe: Dict[Entity, List[DerivedNetwork]] = {}
    for net in nets:
        by_qpe.setdefault(net.qpe_id, []).append(net)

    for group in by_qpe.values():
        if order is not None:
            rank = {name: i for i, name in enumerate(order)}
            chain = sorted((n for n in group if n.relation_type in rank), key=lambda n: rank[n.relation_type])
        else:
            chain = sorted(group, key=lambda n: (len(n.edges), n.relation_type))
        for narrow, wide in zip(chain, chain[1:]):
            if not narrow.edges <= wide.edges:
                return False
    return True


def scan_response_edges(qdef: QuestionnaireDef, records: Sequence[ResponseRecord],
                        qpe_id: str) -> Dict[str, Set[Edge]]:
    """Edges per relation type straight from the response records, without the rule engine."""
    edges: Dict[str, Set[Edge]] = {r.name: set() for r in qdef.relation_types}
    roster = qdef.roster_question
    if roster is None or not records:
        return edges

    frame = pd.DataFrame([(r.qpe_id, r.respondent, r.question_id, r.target, r.label) for r in records],
                         columns=["qpe_id", "respondent", "question_id", "target", "label"])
    frame = frame[(frame["qpe_id"] == qpe_id) & (frame["question_id"] == roster.id)]
    frame = frame[frame["target"].notna() & (frame["target"] != frame["respondent"])]
    frame = frame.drop_duplicates(subset=["respondent", "target"], keep="last")
    values = {a.label: a.value for a in roster.answers}
    frame = frame.assign(value=frame["label"].map(values))

    for relation in qdef.relation_types:
        accepted = frame[frame["value"].isin(sorted(relation.accepted_values))]
        edges[relation.name] = {(Entity(s), Entity(t)) for s, t in zip(accepted["respondent"], accepted["target"])}
    return edges
