import pytest
from hypothesis import given, settings

from database.db import KnowledgeBase
from database.models import Entity
from logic.network_logic import DerivedNetwork, build_networks, network_nesting_check, scan_response_edges
from logic.survey_logic import ingest_responses, network_entity, parse_questionnaire
from tests import factories
from tests.factories import ROSTER, record
from utils.errors import NetworkError

LAURA, JUAN = Entity("Laura"), Entity("Juan")
TABLE4_ORDER = ["Friendship", "Workmate", "Acquaintance"]


def _saturated(schema, engine, survey, records):
    kb = KnowledgeBase(schema)
    ingest_responses(kb, survey, survey.event(factories.QPE_ID), records)
    engine.saturate(kb)
    return kb


def _scanned_networks(survey, records):
    scanned = scan_response_edges(survey, records, factories.QPE_ID)
    return [DerivedNetwork(network_entity(factories.QPE_ID, name), Entity(factories.QPE_ID), name, edges=edges)
            for name, edges in scanned.items()]


def test_minimal_network(schema, engine, minimal_survey):
    kb = _saturated(schema, engine, minimal_survey, [record("Laura", ROSTER, "Always", target="Juan")])
    [net] = build_networks(kb, "QPE01")

    assert net.relation_type == "Friendship"
    assert net.members == [JUAN, LAURA]
    assert net.edges == {(LAURA, JUAN)}
    assert net.isolates() == []
    assert net.file_stem == "QPE01_Friendship"


def test_symmetrized_network(schema, engine, minimal_survey):
    kb = _saturated(schema, engine, minimal_survey, [record("Laura", ROSTER, "Always", target="Juan")])
    [net] = build_networks(kb, "QPE01", symmetrize=True)
    assert net.edges == {(LAURA, JUAN), (JUAN, LAURA)}


def test_unknown_event(schema, engine, minimal_survey):
    kb = _saturated(schema, engine, minimal_survey, [])
    with pytest.raises(NetworkError, match="QPE07"):
        build_networks(kb, "QPE07")


def test_event_without_answers_has_empty_networks(schema, engine, survey):
    kb = _saturated(schema, engine, survey, [])
    networks = build_networks(kb, Entity("QPE01"))
    assert sorted(n.relation_type for n in networks) == sorted(TABLE4_ORDER)
    assert all(n.members == [] and n.edges == set() for n in networks)


def test_rejected_answers_leave_isolates(schema, engine, survey):
    kb = _saturated(schema, engine, survey, [record("Laura", ROSTER, "Never", target="Juan")])
    for net in build_networks(kb, "QPE01"):
        assert net.edges == set()
        assert net.isolates() == [JUAN, LAURA]


def test_rule_edges_match_the_response_scan(class38):
    scanned = scan_response_edges(class38.survey, class38.records, factories.QPE_ID)
    for net in class38.networks:
        assert net.edges == scanned[net.relation_type]
        assert len(net.members) == 38


def test_class_networks_are_nested(class38):
    assert network_nesting_check(class38.networks, TABLE4_ORDER)
    assert network_nesting_check(class38.networks)
    sizes = [len(class38.network(name).edges) for name in TABLE4_ORDER]
    assert sizes == sorted(sizes)


def test_nesting_check_detects_crossing_sets():
    qpe = Entity("QPE01")
    a = DerivedNetwork(Entity("N1"), qpe, "Friendship", edges={(LAURA, JUAN)})
    b = DerivedNetwork(Entity("N2"), qpe, "Workmate", edges={(JUAN, LAURA)})
    assert not network_nesting_check([a, b])
    assert not network_nesting_check([a, b], ["Friendship", "Workmate"])

    c = DerivedNetwork(Entity("N3"), Entity("QPE02"), "Workmate", edges={(JUAN, LAURA)})
    assert network_nesting_check([a, c])


def test_nesting_respects_the_given_order():
    qpe = Entity("QPE01")
    narrow = DerivedNetwork(Entity("N1"), qpe, "Friendship", edges={(LAURA, JUAN)})
    wide = DerivedNetwork(Entity("N2"), qpe, "Workmate", edges={(LAURA, JUAN), (JUAN, LAURA)})
    assert network_nesting_check([narrow, wide], ["Friendship", "Workmate"])
    assert not network_nesting_check([narrow, wide], ["Workmate", "Friendship"])


@settings(max_examples=500, deadline=None)
@given(records=factories.roster_records(max_people=8))
def test_scanned_networks_are_nested(survey, records):
    assert network_nesting_check(_scanned_networks(survey, records), TABLE4_ORDER)


@settings(max_examples=500, deadline=None)
@given(records=factories.roster_records())
def test_rule_path_agrees_with_the_scan(schema, engine, survey, records):
    kb = _saturated(schema, engine, survey, records)
    networks = build_networks(kb, "QPE01")
    scanned = scan_response_edges(survey, records, "QPE01")

    assert {n.relation_type: n.edges for n in networks} == scanned
    assert network_nesting_check(networks, TABLE4_ORDER)
    for net in networks:
        assert all(s != t for s, t in net.edges)
        assert {p for edge in net.edges for p in edge} <= set(net.members)


def test_two_events_keep_their_networks_apart(schema, engine):
    doc = factories.minimal_questionnaire_doc()
    doc["events"] = [{"id": "QPE01"}, {"id": "QPE02"}]
    survey = parse_questionnaire(doc)
    records = factories.numbered([
        record("Laura", ROSTER, "Always", target="Juan"),
        record("Juan", ROSTER, "Always", target="Ana", qpe_id="QPE02"),
    ])
    kb = KnowledgeBase(schema)
    for qpe in ("QPE01", "QPE02"):
        ingest_responses(kb, survey, survey.event(qpe), records)
    engine.saturate(kb)

    first, second = build_networks(kb, "QPE01"), build_networks(kb, "QPE02")
    assert {n.network_id for n in first}.isdisjoint(n.network_id for n in second)
    assert [n.edges for n in first] == [{(LAURA, JUAN)}]
    assert [n.edges for n in second] == [{(JUAN, Entity("Ana"))}]
    for qpe, networks in (("QPE01", first), ("QPE02", second)):
        assert {n.relation_type: n.edges for n in networks} == scan_response_edges(survey, records, qpe)
    # membership is not scoped to the event
    assert first[0].members == second[0].members == sorted([Entity("Ana"), JUAN, LAURA])
