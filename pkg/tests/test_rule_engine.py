import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from database.db import KnowledgeBase
from database.models import IS_A, Entity, Var
from logic.rule_logic import RuleEngine, apply_rule, saturate
from logic.survey_logic import ingest_responses, network_entity, parse_questionnaire, relation_type_entity
from tests import factories
from utils.errors import SaturationLimitError
from utils.exporters import export_facts

LAURA, JUAN, QPE = Entity("Laura"), Entity("Juan"), Entity("QPE01")

INDIVIDUAL = [
    ("bw", "IndividualBetweenness"), ("cn", "IndividualCloseness"), ("dg", "IndividualDegree"),
    ("in", "IndividualInDegree"), ("ou", "IndividualOutDegree"), ("ei", "IndividualEigenvector"),
]
NETWORK = [
    ("bw", "NetworkBetweenness", "hasNetworkBetweenness"), ("cn", "NetworkCloseness", "hasNetworkCloseness"),
    ("dg", "NetworkDegree", "hasNetworkDegree"), ("in", "NetworkInDegree", "hasNetworkInDegree"),
    ("ou", "NetworkOutDegree", "hasNetworkOutDegree"), ("ei", "NetworkEigenvector", "hasNetworkEigenvector"),
    ("noa", "NumberOfActors", "hasNumberOfActors"),
    ("nosa", "NumberOfSubjectActors", "hasNumberOfSubjectActors"),
    ("nooa", "NumberOfObjectActors", "hasNumberOfObjectActors"),
    ("nor", "NumberOfRelations", "hasNumberOfRelations"),
    ("noair", "NumberOfActorsInvolvedInARelation", "hasNumberOfActorsInvolvedInARelation"),
    ("don", "DensityOfNetwork", "hasDensityOfNetwork"),
]


def _minimal_kb(schema, label="Always", relation_types=None):
    survey = parse_questionnaire(factories.minimal_questionnaire_doc(relation_types))
    kb = KnowledgeBase(schema)
    ingest_responses(kb, survey, survey.event("QPE01"),
                     [factories.record("Laura", factories.ROSTER, label, target="Juan")])
    return kb, survey


def _hand_instantiated(kb, survey):
    """Consequences of Rules 1, 2, 6 and 7 on the minimal survey, written out one by one."""
    net = network_entity("QPE01", "Friendship")
    tor = relation_type_entity(survey, "Friendship")
    triples = []

    for p in (LAURA, JUAN):
        triples += [(net, "hasMember", p), (p, "hasAnsweredToQuestionnairePastEvent", QPE)]

    rel = kb.skolem("Rule-2", "rel", (LAURA, JUAN, net, QPE, tor))
    triples += [(rel, "isRelationOfType", tor), (rel, "isRelationOfNetwork", net), (rel, "isRelationWith", JUAN),
                (rel, IS_A, "SNARelation"), (rel, "isRelationOfQPE", QPE), (rel, "isRelationOfPerson", LAURA)]

    for p in (LAURA, JUAN):
        for var, cls in INDIVIDUAL:
            x = kb.skolem("Rule-6", var, (p, net))
            link = cls.replace("Individual", "isIndividual")
            triples += [(x, IS_A, cls), (x, f"{link}OfPerson", p), (x, f"{link}OfNetwork", net)]

    for var, cls, link in NETWORK:
        x = kb.skolem("Rule-7", var, (QPE, net))
        triples += [(x, IS_A, cls), (net, link, x)]

    return {kb.normalize(*t) for t in triples}


def test_minimal_fixture_matches_hand_instantiation(schema, engine):
    kb, survey = _minimal_kb(schema)
    asserted = kb.fact_keys()

    started = time.perf_counter()
    engine.saturate(kb)
    assert time.perf_counter() - started < 1.0

    inferred = kb.fact_keys() - asserted
    assert inferred == _hand_instantiated(kb, survey)
    assert len(inferred) == 4 + 6 + 36 + 24
    assert len(kb.class_instances("SNARelation")) == 1
    assert len(kb.class_instances("SNAIndice")) == 2 * 6 + 12


def test_inferred_facts_carry_their_rule(schema, engine):
    kb, _ = _minimal_kb(schema)
    engine.saturate(kb)
    net = network_entity("QPE01", "Friendship")
    assert str(kb.provenance_of(net, "hasMember", LAURA)) == "inferred:Rule-1"
    assert str(kb.provenance_of(kb.skolem("Rule-7", "don", (QPE, net)), IS_A, "DensityOfNetwork")) == \
        "inferred:Rule-7"
    assert all(f.provenance.rule_id for f in kb.inferred_facts())


def test_member_query_through_inverse_after_rule1(schema, engine):
    kb, _ = _minimal_kb(schema)
    engine.saturate(kb)
    rows = kb.query_pattern([(LAURA, "isMemberOf", Var("n"))])
    assert rows == [{"n": network_entity("QPE01", "Friendship")}]


def test_one_answer_three_relation_types_gives_three_relations(schema, engine):
    kb, _ = _minimal_kb(schema, "Always", factories.TABLE4)
    engine.saturate(kb)
    relations = kb.class_instances("SNARelation")
    assert len(relations) == 3
    types = {kb.value(r, "isRelationOfType") for r in relations}
    assert len(types) == 3


def test_rule1_on_bare_facts(schema, engine):
    kb = KnowledgeBase(schema)
    kb.add_instance("Abott", "Person")
    kb.add_instance("Net1", "SNANetwork")
    kb.add_instance("A1", "AnswerOfPersonToQuestion")
    kb.assert_triple("A1", "isAnswerOfQuestionnairePastEvent", "QPE01")
    kb.assert_triple("QPE01", "hasNetwork", "Net1")

    new = apply_rule(kb, engine.ruleset.get("Rule-1"))
    assert {f.key for f in new} == {
        (Entity("Net1"), "hasMember", Entity("Abott")),
        (Entity("Abott"), "hasAnsweredToQuestionnairePastEvent", QPE),
    }


def test_self_nomination_is_blocked_by_different_from(schema, engine):
    kb = KnowledgeBase(schema)
    for fact in (("Laura", IS_A, "Person"), ("Net1", IS_A, "SNANetwork"), ("Net1", "isNetworkOfQPE", "QPE01"),
                 ("Friendship", "isTypeOfRelationOfNetwork", "Net1"), ("Always", "isAnswerOfTypeOfRelation", "Friendship"),
                 ("A1", "isAnswerOfPersonToQuestionOf", "Laura"), ("A1", "isAnAnswerRelatingTo", "Laura"),
                 ("A1", "isAnswerOfQuestionnairePastEvent", "QPE01"), ("A1", "hasAnswered", "Always")):
        kb.assert_triple(*fact)
    assert apply_rule(kb, engine.ruleset.get("Rule-2")) == set()

    kb.add_instance("Juan", "Person")
    kb.assert_triple("A2", "isAnswerOfPersonToQuestionOf", "Laura")
    kb.assert_triple("A2", "isAnAnswerRelatingTo", "Juan")
    kb.assert_triple("A2", "isAnswerOfQuestionnairePastEvent", "QPE01")
    kb.assert_triple("A2", "hasAnswered", "Always")
    assert len(apply_rule(kb, engine.ruleset.get("Rule-2"))) == 6


def test_rule7_mints_twelve_indices(schema, engine):
    kb = KnowledgeBase(schema)
    kb.add_instance("Net1", "SNANetwork")
    kb.assert_triple("Net1", "isNetworkOfQPE", "QPE01")
    new = apply_rule(kb, engine.ruleset.get("Rule-7"))
    minted = {f.subject for f in new if f.predicate == IS_A}
    assert len(minted) == 12
    assert len(new) == 24


def test_empty_kb_is_unchanged(schema, engine):
    kb = KnowledgeBase(schema)
    stats = engine.saturate(kb)
    assert len(kb) == 0
    assert stats.new_facts == 0
    assert stats.rounds == 1


def test_iteration_limit(schema):
    kb, _ = _minimal_kb(schema)
    engine = RuleEngine.from_file(schema, iteration_limit=1)
    with pytest.raises(SaturationLimitError):
        engine.saturate(kb)


def test_semi_naive_equals_naive(schema, engine, survey):
    records = factories.class38_records(survey)[:400]
    semi = KnowledgeBase(schema)
    ingest_responses(semi, survey, survey.event("QPE01"), records)
    naive = semi.copy()

    engine.saturate(semi)
    saturate(naive, engine.ruleset, naive=True)
    assert semi.fact_keys() == naive.fact_keys()


def test_saturation_is_deterministic(schema, engine, survey):
    records = factories.class38_records(survey)[:300]
    dumps = []
    for _ in range(2):
        kb = KnowledgeBase(schema)
        ingest_responses(kb, survey, survey.event("QPE01"), records)
        engine.saturate(kb)
        dumps.append([str(f) for f in kb.facts()])
    assert dumps[0] == dumps[1]


@settings(max_examples=100, deadline=None)
@given(records=factories.roster_records())
def test_saturation_and_ingestion_are_idempotent(schema, engine, survey, records):
    kb = KnowledgeBase(schema)
    qpe = survey.event("QPE01")
    ingest_responses(kb, survey, qpe, records)
    engine.saturate(kb)
    saturated = kb.fact_keys()

    assert engine.saturate(kb).new_facts == 0
    ingest_responses(kb, survey, qpe, records)
    assert kb.fact_keys() == saturated


@settings(max_examples=100, deadline=None)
@given(records=factories.roster_records())
def test_index_cardinalities(schema, engine, survey, records):
    kb = KnowledgeBase(schema)
    ingest_responses(kb, survey, survey.event("QPE01"), records)
    engine.saturate(kb)

    networks = kb.class_instances("SNANetwork")
    assert len(networks) == 3
    for net in networks:
        for member in kb.objects(net, "hasMember"):
            for var, cls in INDIVIDUAL:
                link = cls.replace("Individual", "isIndividual")
                rows = kb.query_pattern([(Var("x"), f"{link}OfPerson", member),
                                         (Var("x"), f"{link}OfNetwork", net),
                                         (Var("x"), IS_A, cls)])
                assert len(rows) == 1
        for _, cls, link in NETWORK:
            indices = kb.objects(net, link)
            assert len(indices) == 1
            assert kb.is_instance(indices[0], cls)


@settings(max_examples=100, deadline=None)
@given(records=factories.roster_records(unique=True), data=st.data())
def test_saturation_ignores_answer_order(schema, engine, survey, records, data):
    shuffled = data.draw(st.permutations(records))
    dumps = []
    for batch in (records, shuffled):
        kb = KnowledgeBase(schema)
        ingest_responses(kb, survey, survey.event("QPE01"), batch)
        engine.saturate(kb)
        dumps.append(export_facts(kb))
    assert dumps[0] == dumps[1]


@settings(max_examples=100, deadline=None)
@given(records=factories.roster_records())
def test_saturation_only_adds_facts(schema, engine, survey, records):
    kb = KnowledgeBase(schema)
    ingest_responses(kb, survey, survey.event("QPE01"), records)
    asserted = kb.fact_keys()
    engine.saturate(kb)
    assert asserted <= kb.fact_keys()
    assert {f.key for f in kb.asserted_facts()} == asserted


@settings(max_examples=100, deadline=None)
@given(records=factories.roster_records())
def test_resaturating_the_asserted_facts_gives_the_same_kb(schema, engine, survey, records):
    kb = KnowledgeBase(schema)
    ingest_responses(kb, survey, survey.event("QPE01"), records)
    engine.saturate(kb)

    plain = kb.without_inferred()
    engine.saturate(plain)
    assert export_facts(plain) == export_facts(kb)
