import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import pandas as pd

import config
from database.db import KnowledgeBase
from logic.metrics_logic import NetworkAnalysis
from logic.survey_logic import QuestionnaireDef, person_characteristics
from utils.helpers import format_float

logger = logging.getLogger(__name__)

RANKED_METRICS = ("degree", "indegree", "outdegree", "betweenness", "closeness", "eigenvector")
STATUSES = ("involved", "isolated")


@dataclass
class NetworkFindings:
    network_id: str
    relation_type: str
    top: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    isolates: List[str] = field(default_factory=list)
    composites: Dict[str, Dict[str, Dict[str, Any]]] = field(default_factory=dict)
    categorical: Dict[str, Dict[str, Dict[str, int]]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "network_id": self.network_id,
            "relation_type": self.relation_type,
            "top": self.top,
            "isolates": self.isolates,
            "composites": self.composites,
            "categorical": self.categorical,
        }


@dataclass
class FindingsReport:
    qpe_id: str
    top_k: int
    networks: List[NetworkFindings] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "qpe_id": self.qpe_id,
            "top_k": self.top_k,
            "networks": [n.to_dict() for n in self.networks],
        }


def top_actors(analysis: NetworkAnalysis, metric: str, k: int) -> List[Dict[str, Any]]:
    """Highest-scoring actors, ties broken by id ascending."""
    ranked = sorted(analysis.actors, key=lambda a: (-getattr(a, metric), a.id))
    return [{"id": a.id.name, "value": _number(getattr(a, metric))} for a in ranked[:k]]


def _number(value):
    return format_float(value) if isinstance(value, float) else value


def _status_frame(analysis: NetworkAnalysis, characteristics: Dict, name: str) -> pd.DataFrame:
    rows = []
    for actor in analysis.actors:
        value = characteristics.get(actor.id, {}).get(name)
        if value is not None:
            rows.append({"id": actor.id.name, "status": "involved" if actor.degree > 0 else "isolated",
                         "value": value})
    return pd.DataFrame(rows, columns=["id", "status", "value"])


def composite_crosstab(frame: pd.DataFrame) -> Dict[str, Dict[str, Any]]:
    result = {status: {"count": 0, "mean": None} for status in STATUSES}
    if frame.empty:
        return result
    scores = frame.assign(value=pd.to_numeric(frame["value"], errors="coerce")).dropna(subset=["value"])
    for status, group in scores.groupby("status"):
        result[status] = {"count": int(len(group)), "mean": format_float(float(group["value"].mean()))}
    return result


def categorical_crosstab(frame: pd.DataFrame, values: Sequence[str]) -> Dict[str, Dict[str, int]]:
    if frame.empty:
        return {status: {v: 0 for v in values} for status in STATUSES}
    table = pd.crosstab(frame["value"], frame["status"])
    table = table.reindex(index=list(values), columns=list(STATUSES), fill_value=0)
    return {status: {v: int(table.at[v, status]) for v in values} for status in STATUSES}


def build_findings(kb: KnowledgeBase, qdef: QuestionnaireDef, qpe_id: str,
                   analyses: Sequence[NetworkAnalysis], top_k: int = config.DEFAULT_TOP_K) -> FindingsReport:
    report = FindingsReport(qpe_id=qpe_id, top_k=top_k)
    for analysis in sorted(analyses, key=lambda a: a.network.network_id):
        net = analysis.network
        characteristics = person_characteristics(kb, net.network_id)
        findings = NetworkFindings(network_id=net.network_id.name, relation_type=net.relation_type)
        findings.top = {metric: top_actors(analysis, metric, top_k) for metric in RANKED_METRICS}
        findings.isolates = sorted(a.id.name for a in analysis.actors if a.degree == 0)

        for group in qdef.composite_groups():
            findings.composites[group] = composite_crosstab(_status_frame(analysis, characteristics, group))

        for question in sorted(qdef.characteristic_questions(), key=lambda q: q.characteristic.type_name):
            characteristic = question.characteristic
            values = sorted(set(characteristic.values.values()))
            frame = _status_frame(analysis, characteristics, characteristic.type_name)
            findings.categorical[characteristic.type_name] = categorical_crosstab(frame, values)

        report.networks.append(findings)
    logger.info("findings built for %d networks", len(report.networks))
    return report
