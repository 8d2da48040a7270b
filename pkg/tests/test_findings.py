import pandas as pd

from database.models import Entity
from logic.findings_logic import RANKED_METRICS, build_findings, categorical_crosstab, composite_crosstab, top_actors
from logic.metrics_logic import analyze_network
from logic.network_logic import DerivedNetwork


def _analysis(members, edges):
    net = DerivedNetwork(Entity("QPE01/Friendship"), Entity("QPE01"), "Friendship",
                         [Entity(m) for m in members], {(Entity(s), Entity(t)) for s, t in edges})
    return analyze_network(net)


def test_ties_are_broken_by_id():
    analysis = _analysis(["c", "a", "b"], [])
    assert [row["id"] for row in top_actors(analysis, "degree", 3)] == ["a", "b", "c"]


def test_top_actors_rank_by_value():
    analysis = _analysis(["hub", "x", "y", "z"], [("x", "hub"), ("y", "hub"), ("z", "hub"), ("hub", "x")])
    top = top_actors(analysis, "indegree", 2)
    assert top == [{"id": "hub", "value": 3}, {"id": "x", "value": 1}]
    assert top_actors(analysis, "betweenness", 1)[0]["id"] == "hub"


def test_crosstabs_of_empty_frames():
    empty = pd.DataFrame(columns=["id", "status", "value"])
    assert composite_crosstab(empty) == {"involved": {"count": 0, "mean": None},
                                         "isolated": {"count": 0, "mean": None}}
    assert categorical_crosstab(empty, ["female", "male"]) == {"involved": {"female": 0, "male": 0},
                                                               "isolated": {"female": 0, "male": 0}}


def test_crosstabs():
    frame = pd.DataFrame([("a", "involved", "4"), ("b", "involved", "6"), ("c", "isolated", "1")],
                         columns=["id", "status", "value"])
    assert composite_crosstab(frame) == {"involved": {"count": 2, "mean": 5.0},
                                         "isolated": {"count": 1, "mean": 1.0}}
    assert categorical_crosstab(frame, ["1", "4", "6", "9"]) == {
        "involved": {"1": 0, "4": 1, "6": 1, "9": 0},
        "isolated": {"1": 1, "4": 0, "6": 0, "9": 0},
    }


def test_class_findings(class38):
    report = build_findings(class38.kb, class38.survey, "QPE01", class38.analyses, top_k=3)
    data = report.to_dict()

    assert data["qpe_id"] == "QPE01"
    assert [n["relation_type"] for n in data["networks"]] == ["Acquaintance", "Friendship", "Workmate"]
    for findings, analysis in zip(data["networks"], sorted(class38.analyses, key=lambda a: a.network.network_id)):
        assert set(findings["top"]) == set(RANKED_METRICS)
        assert all(len(rows) == 3 for rows in findings["top"].values())
        assert findings["isolates"] == sorted(m.name for m in analysis.network.isolates())

        audit = findings["composites"]["AUDIT"]
        assert audit["involved"]["count"] + audit["isolated"]["count"] == 38
        gender = findings["categorical"]["Gender"]
        assert sorted(gender["involved"]) == ["female", "male", "undisclosed"]
        assert sum(gender["involved"].values()) + sum(gender["isolated"].values()) == 38
