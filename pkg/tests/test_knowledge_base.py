from datetime import datetime

import pytest

from database.db import KnowledgeBase
from database.models import IS_A, Entity, Fact, Provenance, Var
from utils.errors import FactError, SchemaError

ABOTT, CLARCK = Entity("Abott"), Entity("Clarck")


def test_assert_is_set_semantics(kb):
    assert kb.add_instance(ABOTT, "Person") is True
    assert kb.add_instance(ABOTT, "Person") is False
    assert len(kb) == 1


def test_datatype_mismatch(kb):
    with pytest.raises(FactError, match="datatype mismatch"):
        kb.assert_triple("QPE01", "has_Event_Id", "x")


def test_string_property_accepts_network_name(kb):
    assert kb.assert_triple("Net1", "has_Network_Name", "Friendship relation")
    assert kb.value("Net1", "has_Network_Name") == "Friendship relation"


def test_bool_is_not_an_int(kb):
    with pytest.raises(FactError):
        kb.assert_triple("QPE01", "has_Event_Id", True)


def test_int_widens_for_float_range(kb):
    kb.assert_triple("Density1", "has_SNA_Value", 1)
    assert kb.objects("Density1", "has_SNA_Value") == [1.0]
    assert isinstance(kb.value("Density1", "has_SNA_Value"), float)


def test_datetime_values(kb):
    kb.assert_triple("QPE01", "has_Date_Start", datetime(2019, 2, 11))
    assert kb.value("QPE01", "has_Date_Start") == datetime(2019, 2, 11)


def test_unknown_predicate_and_class(kb):
    with pytest.raises(FactError, match="unknown predicate"):
        kb.assert_triple(ABOTT, "likes", CLARCK)
    with pytest.raises(FactError, match="unknown class"):
        kb.add_instance(ABOTT, "Unicorn")


def test_class_range_needs_an_entity(kb):
    with pytest.raises(FactError, match="range violation"):
        kb.assert_triple("Net1", "hasMember", 42)


def test_inverse_predicate_is_stored_canonically(kb):
    kb.assert_triple(ABOTT, "isMemberOf", "FriendshipNetwork")
    assert (Entity("FriendshipNetwork"), "hasMember", ABOTT) in kb.fact_keys()
    assert (ABOTT, "isMemberOf", Entity("FriendshipNetwork")) in kb
    assert kb.objects(ABOTT, "isMemberOf") == [Entity("FriendshipNetwork")]
    assert kb.subjects("hasMember", ABOTT) == []
    assert kb.objects("FriendshipNetwork", "hasMember") == [ABOTT]


def test_alias_is_normalized(kb):
    kb.add_instance("Aop1", "SNACaracteristic")
    assert kb.is_instance("Aop1", "SNACharacteristic")
    assert (Entity("Aop1"), IS_A, Entity("SNACharacteristic")) in kb.fact_keys()


def test_pattern_enumerates_persons(kb):
    kb.add_instance(CLARCK, "Person")
    kb.add_instance(ABOTT, "Person")
    assert kb.query_pattern([(Var("p"), IS_A, "Person")]) == [{"p": ABOTT}, {"p": CLARCK}]


def test_pattern_through_inverse_predicate(kb):
    kb.assert_triple("FriendshipNetwork", "hasMember", ABOTT)
    assert kb.query_pattern([(ABOTT, "isMemberOf", Var("n"))]) == [{"n": Entity("FriendshipNetwork")}]


def test_pattern_with_unknown_constant_is_empty(kb):
    kb.add_instance(ABOTT, "Person")
    assert kb.query_pattern([(Var("p"), IS_A, "Unicorn")]) == []
    assert kb.query_pattern([(Var("p"), "hasMember", "Nobody")]) == []


def test_conjunctive_pattern_matches_nested_loop_join(kb):
    for qpe, nets in (("QPE01", ["N1", "N2"]), ("QPE02", ["N3"])):
        kb.add_instance(qpe, "QuestionnairePastEvent")
        for net in nets:
            kb.assert_triple(net, "isNetworkOfQPE", qpe)
    answers = {"A1": "QPE01", "A2": "QPE01", "A3": "QPE02", "A4": "QPE03"}
    for answer, qpe in answers.items():
        kb.assert_triple(answer, "isAnswerOfQuestionnairePastEvent", qpe)

    rows = kb.query_pattern([
        (Var("a"), "isAnswerOfQuestionnairePastEvent", Var("qpe")),
        (Var("qpe"), "hasNetwork", Var("net")),
    ])

    expected = []
    for a, q in kb.match(None, "isAnswerOfQuestionnairePastEvent", None):
        for net, q2 in kb.match(None, "isNetworkOfQPE", None):
            if q == q2:
                expected.append((a.name, q.name, net.name))
    got = [(r["a"].name, r["qpe"].name, r["net"].name) for r in rows]
    assert got == sorted(expected)
    assert len(got) == 5


def test_class_instances_follow_subclasses(kb):
    assert kb.class_instances("Person") == set()
    kb.add_instance("Q1", "Question")
    kb.add_instance("Q2", "QuestionSNA")
    assert kb.class_instances("Question") == {Entity("Q1"), Entity("Q2")}
    assert kb.class_instances("QuestionSNA") == {Entity("Q2")}
    with pytest.raises(SchemaError):
        kb.class_instances("Unicorn")


def test_skolem_is_deterministic_and_order_sensitive(kb):
    laura, juan = Entity("Laura"), Entity("Juan")
    first = kb.skolem("Rule-2", "rel", (laura, juan))
    assert kb.skolem("Rule-2", "rel", (laura, juan)) == first
    assert kb.skolem("Rule-2", "rel", (juan, laura)) != first
    assert KnowledgeBase(kb.schema).skolem("Rule-2", "rel", (laura, juan)) == first
    assert first.name == "Rule-2/rel/Laura,Juan"


def test_skolem_escapes_separators(kb):
    a = kb.skolem("r", "x", ("a,b",))
    b = kb.skolem("r", "x", ("a", "b"))
    assert a != b


def test_skolem_keys_keep_the_datatype(kb):
    whole = kb.skolem("r", "x", (1,))
    real = kb.skolem("r", "x", (1.0,))
    assert whole != real
    assert (whole.name, real.name) == ("r/x/1", "r/x/1.0")
    assert kb.skolem("r", "x", (1,)) == whole


def test_skolem_needs_arguments(kb):
    with pytest.raises(FactError):
        kb.skolem("Rule-6", "bw", ())


def test_provenance_and_without_inferred(kb):
    kb.add_instance(ABOTT, "Person")
    kb.assert_fact(Fact(Entity("Net1"), "hasMember", ABOTT, Provenance.inferred("Rule-1")))
    assert str(kb.provenance_of("Net1", "hasMember", ABOTT)) == "inferred:Rule-1"
    assert [f.key for f in kb.inferred_facts()] == [(Entity("Net1"), "hasMember", ABOTT)]

    plain = kb.without_inferred()
    assert len(plain) == 1
    assert len(kb) == 2


def test_copy_is_independent(kb):
    kb.add_instance(ABOTT, "Person")
    clone = kb.copy()
    clone.add_instance(CLARCK, "Person")
    assert len(kb) == 1
    assert len(clone) == 2


def test_fact_dump_line_format():
    fact = Fact(Entity("Net1"), "has_Network_Name", "Friendship relation", Provenance.inferred("Rule-7"))
    assert str(fact) == 'Net1 has_Network_Name "Friendship relation" # inferred:Rule-7'
    assert str(Fact(ABOTT, IS_A, Entity("Person"))) == "Abott isA Person # asserted"
