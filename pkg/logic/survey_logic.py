import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import pandas as pd

from database.db import KnowledgeBase
from database.models import Entity, Var
from utils.errors import QuestionnaireError, ResponseError
from utils.helpers import make_id, read_json_file

logger = logging.getLogger(__name__)

RESPONSE_COLUMNS = ("qpe_id", "respondent", "question_id", "target", "label")


class QuestionKind(Enum):
    GENERIC = "generic"
    ROSTER = "roster"


@dataclass(frozen=True)
class AnswerLabelDef:
    label: str
    value: int


@dataclass
class CharacteristicDef:
    type_name: str
    values: Dict[str, str]  # answer label -> characteristic value


@dataclass
class QuestionDef:
    id: str
    text: str
    kind: QuestionKind = QuestionKind.GENERIC
    answers: List[AnswerLabelDef] = field(default_factory=list)
    characteristic: Optional[CharacteristicDef] = None
    composite_group: Optional[str] = None

    @property
    def is_roster(self) -> bool:
        return self.kind == QuestionKind.ROSTER

    def has_label(self, label: str) -> bool:
        return any(a.label == label for a in self.answers)

    def label_value(self, label: str) -> int:
        for answer in self.answers:
            if answer.label == label:
                return answer.value
        raise KeyError(label)


@dataclass
class RelationTypeDef:
    name: str
    accepted_values: FrozenSet[int]

    def accepts(self, value: int) -> bool:
        return value in self.accepted_values


@dataclass
class ClassOnSchoolDef:
    id: str
    school: Optional[str] = None
    course: Optional[str] = None
    course_level: Optional[str] = None
    group: Optional[str] = None
    academic_category: Optional[str] = None


@dataclass
class QpeDef:
    id: str
    questionnaire_id: str
    date_start: Optional[datetime] = None
    date_end: Optional[datetime] = None
    event_id: Optional[int] = None
    class_on_school: Optional[ClassOnSchoolDef] = None

    def __post_init__(self):
        if self.date_start and self.date_end and self.date_start > self.date_end:
            raise QuestionnaireError(f"questionnaire event '{self.id}' ends before it starts")


@dataclass
class QuestionnaireDef:
    id: str
    title: str = ""
    questions: List[QuestionDef] = field(default_factory=list)
    relation_types: List[RelationTypeDef] = field(default_factory=list)
    roster_question_id: Optional[str] = None
    events: List[QpeDef] = field(default_factory=list)

    def question(self, question_id: str) -> QuestionDef:
        for question in self.questions:
            if question.id == question_id:
                return question
        raise KeyError(question_id)

    def has_question(self, question_id: str) -> bool:
        return any(q.id == question_id for q in self.questions)

    @property
    def roster_question(self) -> Optional[QuestionDef]:
        return self.question(self.roster_question_id) if self.roster_question_id else None

    def composite_groups(self) -> Dict[str, List[QuestionDef]]:
        groups: Dict[str, List[QuestionDef]] = {}
        for question in self.questions:
            if question.composite_group:
                groups.setdefault(question.composite_group, []).append(question)
        return dict(sorted(groups.items()))

    def characteristic_questions(self) -> List[QuestionDef]:
        return [q for q in self.questions if q.characteristic]

    def event(self, qpe_id: str) -> QpeDef:
        for qpe in self.events:
            if qpe.id == qpe_id:
                return qpe
        raise KeyError(qpe_id)


@dataclass(frozen=True)
class ResponseRecord:
    qpe_id: str
    respondent: str
    question_id: str
    target: Optional[str]
    label: str
    row: int = field(default=0, compare=False)

    @property
    def key(self) -> Tuple[str, str, Optional[str], str]:
        return (self.respondent, self.question_id, self.target, self.qpe_id)


@dataclass
class IngestionReport:
    ingested: int = 0
    dropped_self: int = 0
    duplicates: int = 0
    skipped_other_qpe: int = 0
    partial_scores: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ingested": self.ingested,
            "dropped_self": self.dropped_self,
            "duplicates": self.duplicates,
            "skipped_other_qpe": self.skipped_other_qpe,
            "partial_scores": list(self.partial_scores),
        }


@dataclass
class CompositeScores:
    scores: Dict[Tuple[str, str], int] = field(default_factory=dict)  # (group, respondent) -> sum
    partial: List[Dict[str, Any]] = field(default_factory=list)

    def score(self, group: str, respondent: str) -> Optional[int]:
        return self.scores.get((group, respondent))


# ----------------------------------------------------------------------
# Individual ids
# ----------------------------------------------------------------------

def questionnaire_entity(qdef: QuestionnaireDef) -> Entity:
    return Entity(make_id(qdef.id))


def question_entity(qdef: QuestionnaireDef, question_id: str) -> Entity:
    return Entity(make_id(qdef.id, question_id))


def label_entity(qdef: QuestionnaireDef, question_id: str, label: str) -> Entity:
    return Entity(make_id(qdef.id, question_id, label))


def answer_set_entity(qdef: QuestionnaireDef, question_id: str) -> Entity:
    return Entity(make_id(qdef.id, question_id, "answers"))


def relation_type_entity(qdef: QuestionnaireDef, name: str) -> Entity:
    return Entity(make_id(qdef.id, name))


def network_entity(qpe_id: str, relation_type: str) -> Entity:
    return Entity(make_id(qpe_id, relation_type))


def characteristic_type_entity(qdef: QuestionnaireDef, type_name: str) -> Entity:
    return Entity(make_id(qdef.id, type_name))


def characteristic_value_entity(qdef: QuestionnaireDef, type_name: str, value: str) -> Entity:
    return Entity(make_id(qdef.id, type_name, value))


def composite_value_entity(qdef: QuestionnaireDef, group: str) -> Entity:
    return Entity(make_id(qdef.id, group, "score"))


def answer_entity(qpe_id: str, respondent: str, question_id: str, target: Optional[str] = None) -> Entity:
    parts = [qpe_id, respondent, question_id] + ([target] if target else [])
    return Entity(make_id(*parts))


# ----------------------------------------------------------------------
# Questionnaire definition
# ----------------------------------------------------------------------

def load_questionnaire(path: str) -> QuestionnaireDef:
    return parse_questionnaire(read_json_file(path), source=path)


def parse_questionnaire(doc: Any, source: Optional[str] = None) -> QuestionnaireDef:
    try:
        return _parse_questionnaire(doc)
    except QuestionnaireError as e:
        raise QuestionnaireError(e.message, source=source)


def _parse_questionnaire(doc: Any) -> QuestionnaireDef:
    if not isinstance(doc, dict):
        raise QuestionnaireError("questionnaire must be a JSON object")

    qdef = QuestionnaireDef(
        id=_text(doc, "id", "questionnaire"),
        title=str(doc.get("title", "")),
        roster_question_id=doc.get("roster_question_id") or None,
    )

    for i, raw in enumerate(_list(doc, "questions")):
        question = _parse_question(raw, f"questions[{i}]")
        if qdef.has_question(question.id):
            raise QuestionnaireError(f"duplicate question id '{question.id}'")
        qdef.questions.append(question)

    for i, raw in enumerate(_list(doc, "relation_types")):
        where = f"relation_types[{i}]"
        if not isinstance(raw, dict):
            raise QuestionnaireError(f"{where} must be an object")
        values = raw.get("accepted_values")
        if not isinstance(values, list) or not all(_is_int(v) for v in values):
            raise QuestionnaireError(f"{where}.accepted_values must be a list of integers")
        qdef.relation_types.append(RelationTypeDef(_text(raw, "name", where), frozenset(values)))

    for i, raw in enumerate(_list(doc, "events")):
        qdef.events.append(_parse_event(raw, qdef.id, f"events[{i}]"))

    _check_questionnaire(qdef)
    return qdef


def _parse_question(raw: Any, where: str) -> QuestionDef:
    if not isinstance(raw, dict):
        raise QuestionnaireError(f"{where} must be an object")
    question_id = _text(raw, "id", where)
    where = f"question '{question_id}'"

    try:
        kind = QuestionKind(raw.get("kind", "generic"))
    except ValueError:
        raise QuestionnaireError(f"{where}: kind must be 'generic' or 'roster'")

    answers = []
    for answer in _list(raw, "answers"):
        if not isinstance(answer, dict) or not _is_int(answer.get("value")):
            raise QuestionnaireError(f"{where}: every answer needs a label and an integer value")
        label = _text(answer, "label", where)
        if any(a.label == label for a in answers):
            raise QuestionnaireError(f"{where}: duplicate answer label '{label}'")
        answers.append(AnswerLabelDef(label, answer["value"]))

    characteristic = None
    if raw.get("characteristic") is not None:
        mapping = raw["characteristic"]
        if not isinstance(mapping, dict) or not isinstance(mapping.get("values"), dict):
            raise QuestionnaireError(f"{where}: characteristic needs a type and a label -> value map")
        characteristic = CharacteristicDef(_text(mapping, "type", where),
                                           {str(k): str(v) for k, v in mapping["values"].items()})
        unknown = sorted(set(characteristic.values) - {a.label for a in answers})
        if unknown:
            raise QuestionnaireError(f"{where}: characteristic maps unknown labels {unknown}")

    group = raw.get("composite_group") or None
    question = QuestionDef(question_id, str(raw.get("text", "")), kind, answers, characteristic, group)

    roles = sum(1 for flag in (question.is_roster, characteristic is not None, group is not None) if flag)
    if roles > 1:
        raise QuestionnaireError(
            f"{where}: a question is at most one of roster, characteristic-bearing or composite member"
        )
    return question


def _parse_event(raw: Any, questionnaire_id: str, where: str) -> QpeDef:
    if not isinstance(raw, dict):
        raise QuestionnaireError(f"{where} must be an object")
    qpe_id = _text(raw, "id", where)
    event_id = raw.get("event_id")
    if event_id is not None and not _is_int(event_id):
        raise QuestionnaireError(f"{where}.event_id must be an integer")

    cos = None
    if raw.get("class_on_school") is not None:
        placement = raw["class_on_school"]
        if not isinstance(placement, dict):
            raise QuestionnaireError(f"{where}.class_on_school must be an object")
        cos = ClassOnSchoolDef(
            _text(placement, "id", f"{where}.class_on_school"),
            **{k: str(placement[k]) for k in ("school", "course", "course_level", "group", "academic_category")
               if placement.get(k) is not None},
        )

    return QpeDef(
        id=qpe_id,
        questionnaire_id=str(raw.get("questionnaire_id", questionnaire_id)),
        date_start=_date(raw.get("date_start"), f"{where}.date_start"),
        date_end=_date(raw.get("date_end"), f"{where}.date_end"),
        event_id=event_id,
        class_on_school=cos,
    )


def _check_questionnaire(qdef: QuestionnaireDef):
    if qdef.roster_question_id:
        if not qdef.has_question(qdef.roster_question_id):
            raise QuestionnaireError(f"roster question '{qdef.roster_question_id}' is not defined")
        if not qdef.roster_question.is_roster:
            raise QuestionnaireError(f"question '{qdef.roster_question_id}' is not a roster question")
    elif qdef.relation_types:
        raise QuestionnaireError("relation types need a roster_question_id")

    names: Dict[str, str] = {}
    for kind, name in ([("question", q.id) for q in qdef.questions]
                       + [("relation type", r.name) for r in qdef.relation_types]
                       + [("characteristic", q.characteristic.type_name) for q in qdef.characteristic_questions()]
                       + [("composite group", g) for g in qdef.composite_groups()]):
        previous = names.setdefault(name, kind)
        if previous != kind:
            raise QuestionnaireError(f"name '{name}' is used for a {previous} and a {kind}")

    if qdef.relation_types:
        available = {a.value for a in qdef.roster_question.answers}
        for relation in qdef.relation_types:
            if not relation.accepted_values:
                raise QuestionnaireError(f"relation type '{relation.name}' accepts no values")
            missing = sorted(relation.accepted_values - available)
            if missing:
                raise QuestionnaireError(
                    f"relation type '{relation.name}' accepts values {missing} absent from the roster answer set"
                )
        if len({r.name for r in qdef.relation_types}) != len(qdef.relation_types):
            raise QuestionnaireError("duplicate relation type name")

    if len({e.id for e in qdef.events}) != len(qdef.events):
        raise QuestionnaireError("duplicate questionnaire event id")


def _text(doc: dict, key: str, where: str) -> str:
    value = doc.get(key)
    if not isinstance(value, (str, int)) or isinstance(value, bool) or str(value).strip() == "":
        raise QuestionnaireError(f"{where}: missing or empty '{key}'")
    return str(value).strip()


def _list(doc: dict, key: str) -> list:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise QuestionnaireError(f"'{key}' must be a list")
    return value


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _date(value: Any, where: str) -> Optional[datetime]:
    if value is None:
        return None
    try:
        return datetime.fromisoformat(str(value))
    except ValueError:
        raise QuestionnaireError(f"{where}: invalid ISO date {value!r}")


def question_count(qdef: QuestionnaireDef, n_respondents: int) -> int:
    """Items one respondent faces: every generic question plus each roster question once per peer."""
    if n_respondents < 0:
        raise ValueError("number of respondents cannot be negative")
    roster = sum(1 for q in qdef.questions if q.is_roster)
    return (len(qdef.questions) - roster) + roster * n_respondents


# ----------------------------------------------------------------------
# Responses
# ----------------------------------------------------------------------

def load_responses(path: str) -> List[ResponseRecord]:
    """Read response records from a CSV file (or a JSON array when the extension is .json)."""
    if os.path.splitext(path)[1].lower() == ".json":
        rows = read_json_file(path)
        if not isinstance(rows, list):
            raise ResponseError("responses must be a JSON array", source=path)
        return [_record(row, i + 1, path) for i, row in enumerate(rows)]

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as e:
        raise ResponseError(f"malformed CSV: {e}", source=path, line=_parser_error_line(str(e)))
    except (OSError, UnicodeDecodeError) as e:
        raise ResponseError(f"cannot read responses: {e}", source=path)

    missing = [c for c in RESPONSE_COLUMNS if c not in frame.columns]
    if missing:
        raise ResponseError(f"missing columns {missing}; expected header {','.join(RESPONSE_COLUMNS)}",
                            source=path, line=1)

    # header is line 1
    return [_record(row, line, path) for line, row in zip(range(2, len(frame) + 2),
                                                          frame.to_dict(orient="records"))]


def _parser_error_line(message: str) -> Optional[int]:
    # tokenizer messages say "line N" (1-based) or "row N" (lines read before it)
    match = re.search(r"\b(line|row) (\d+)", message)
    if not match:
        return None
    number = int(match.group(2))
    return number if match.group(1) == "line" else number + 1


def _record(row: Any, line: int, source: str) -> ResponseRecord:
    if not isinstance(row, dict):
        raise ResponseError("response must be an object", source=source, line=line)

    values = {}
    for column in RESPONSE_COLUMNS:
        value = row.get(column)
        if value is None or (isinstance(value, float) and pd.isna(value)):
            value = ""
        values[column] = str(value).strip()

    for column in ("qpe_id", "respondent", "question_id", "label"):
        if not values[column]:
            raise ResponseError(f"missing value for '{column}'", source=source, line=line)
    return ResponseRecord(values["qpe_id"], values["respondent"], values["question_id"],
                          values["target"] or None, values["label"], row=line)


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------

def assert_definition(kb: KnowledgeBase, qdef: QuestionnaireDef):
    """Questionnaire scaffolding: questions, answer sets, labels, relation and characteristic types."""
    questionnaire = questionnaire_entity(qdef)
    kb.add_instance(questionnaire, "Questionnaire")

    for question in qdef.questions:
        q = question_entity(qdef, question.id)
        kb.add_instance(q, "QuestionSNA" if question.is_roster else "Question")
        kb.assert_triple(questionnaire, "hasQuestion", q)
        if question.text:
            kb.assert_triple(q, "has_Question_Text", question.text)

        answer_set = answer_set_entity(qdef, question.id)
        kb.add_instance(answer_set, "AnswerSet")
        kb.assert_triple(q, "hasAnswerSet", answer_set)
        kb.assert_triple(answer_set, "has_Number_Of_Answers", len(question.answers))
        for answer in question.answers:
            label = label_entity(qdef, question.id, answer.label)
            kb.add_instance(label, "Answer_Label")
            kb.assert_triple(label, "has_Value", answer.label)
            kb.assert_triple(label, "has_Number_Of_Answer_Label", answer.value)
            kb.assert_triple(answer_set, "hasAnswer", label)

        if question.characteristic:
            _assert_characteristic(kb, qdef, question, q)

    roster = qdef.roster_question
    for relation in qdef.relation_types:
        tor = relation_type_entity(qdef, relation.name)
        kb.add_instance(tor, "SNATypeOfRelation")
        kb.assert_triple(question_entity(qdef, roster.id), "isQuestionOfTypeOfRelation", tor)
        for answer in roster.answers:
            if relation.accepts(answer.value):
                kb.assert_triple(label_entity(qdef, roster.id, answer.label), "isAnswerOfTypeOfRelation", tor)

    for group, questions in qdef.composite_groups().items():
        group_type = characteristic_type_entity(qdef, group)
        value = composite_value_entity(qdef, group)
        kb.add_instance(group_type, "SNATypeOfCharacteristic")
        kb.add_instance(value, "SNACharacteristicValueInteger")
        kb.assert_triple(value, "isPossibleCharacteristicValueOf", group_type)
        for question in questions:
            kb.assert_triple(group_type, "isCharacteristicOfQuestion", question_entity(qdef, question.id))


def _assert_characteristic(kb: KnowledgeBase, qdef: QuestionnaireDef, question: QuestionDef, q: Entity):
    characteristic = question.characteristic
    char_type = characteristic_type_entity(qdef, characteristic.type_name)
    kb.add_instance(char_type, "SNATypeOfCharacteristic")
    kb.assert_triple(char_type, "isCharacteristicOfQuestion", q)
    for label, value in sorted(characteristic.values.items()):
        value_entity = characteristic_value_entity(qdef, characteristic.type_name, value)
        kb.add_instance(value_entity, "SNACharacteristicValue")
        kb.assert_triple(value_entity, "isPossibleCharacteristicValueOf", char_type)
        kb.assert_triple(label_entity(qdef, question.id, label), "isAnswerOfCharacteristicValue", value_entity)


def assert_event(kb: KnowledgeBase, qdef: QuestionnaireDef, qpe: QpeDef):
    """Event scaffolding: the QPE itself and one network per relation type."""
    event = Entity(qpe.id)
    kb.add_instance(event, "QuestionnairePastEvent")
    kb.assert_triple(event, "hasQuestionnaire", questionnaire_entity(qdef))
    if qpe.date_start:
        kb.assert_triple(event, "has_Date_Start", qpe.date_start)
    if qpe.date_end:
        kb.assert_triple(event, "has_Date_End", qpe.date_end)
    if qpe.event_id is not None:
        kb.assert_triple(event, "has_Event_Id", qpe.event_id)

    for relation in qdef.relation_types:
        net = network_entity(qpe.id, relation.name)
        kb.add_instance(net, "SNANetwork")
        kb.assert_triple(net, "has_Network_Name", f"{relation.name} relation")
        if qpe.date_start:
            kb.assert_triple(net, "has_Date", qpe.date_start)
        kb.assert_triple(net, "isNetworkOfQPE", event)
        kb.assert_triple(net, "isNetworkOfTypeOfRelation", relation_type_entity(qdef, relation.name))

    cos = qpe.class_on_school
    if cos:
        kb.add_instance(cos.id, "ClassOnSchool")
        for attr, class_name, link in (("school", "School", "hasSchool"),
                                       ("course", "Course", "hasCourse"),
                                       ("course_level", "CourseLevel", "hasCourseLevel"),
                                       ("group", "GroupOfClass", "hasGroupOfClass"),
                                       ("academic_category", "AcademicCategory", "hasAcademicCategory")):
            name = getattr(cos, attr)
            if name:
                data = Entity(make_id(cos.id, attr))
                kb.add_instance(data, class_name)
                kb.assert_triple(data, "has_Data_Name", name)
                kb.assert_triple(cos.id, link, data)


def ingest_responses(kb: KnowledgeBase, qdef: QuestionnaireDef, qpe: QpeDef,
                     records: List[ResponseRecord]) -> IngestionReport:
    """Materialize survey responses of one questionnaire event as KB facts."""
    if qpe.questionnaire_id != qdef.id:
        raise QuestionnaireError(f"event '{qpe.id}' belongs to questionnaire '{qpe.questionnaire_id}', "
                                 f"not '{qdef.id}'")

    report = IngestionReport()
    latest: Dict[Tuple, ResponseRecord] = {}
    for record in records:
        if record.qpe_id != qpe.id:
            report.skipped_other_qpe += 1
            continue
        _check_record(qdef, record)
        if record.target == record.respondent:
            logger.warning("row %d: self-nomination of '%s' dropped", record.row, record.respondent)
            report.dropped_self += 1
            continue
        if record.key in latest:
            logger.warning("row %d: duplicate answer of '%s' to '%s' replaces row %d",
                           record.row, record.respondent, record.question_id, latest[record.key].row)
            report.duplicates += 1
        latest[record.key] = record

    if report.skipped_other_qpe:
        logger.warning("%d records of other questionnaire events skipped", report.skipped_other_qpe)

    assert_definition(kb, qdef)
    assert_event(kb, qdef, qpe)
    event = Entity(qpe.id)
    school_class = qpe.class_on_school.id if qpe.class_on_school else None

    for record in latest.values():
        person = _person(record.respondent, record)
        answer = answer_entity(qpe.id, record.respondent, record.question_id, record.target)
        kb.add_instance(person, "Person")
        kb.add_instance(answer, "AnswerOfPersonToQuestion")
        kb.assert_triple(answer, "isAnswerOfPersonToQuestionOf", person)
        kb.assert_triple(answer, "hasAnsweredTo", question_entity(qdef, record.question_id))
        kb.assert_triple(answer, "hasAnswered", label_entity(qdef, record.question_id, record.label))
        kb.assert_triple(answer, "isAnswerOfQuestionnairePastEvent", event)
        people = [person]
        if record.target:
            target = _person(record.target, record)
            kb.add_instance(target, "Person")
            kb.assert_triple(answer, "isAnAnswerRelatingTo", target)
            people.append(target)
        if school_class:
            for someone in people:
                kb.assert_triple(school_class, "hasStudent", someone)
        report.ingested += 1

    logger.info("ingested %d responses for %s (%d self-nominations dropped, %d duplicates)",
                report.ingested, qpe.id, report.dropped_self, report.duplicates)
    return report


def _check_record(qdef: QuestionnaireDef, record: ResponseRecord):
    if not qdef.has_question(record.question_id):
        raise ResponseError(f"unknown question id '{record.question_id}'", line=record.row)
    question = qdef.question(record.question_id)
    if not question.has_label(record.label):
        raise ResponseError(f"label '{record.label}' is not in the answer set of '{question.id}'",
                            line=record.row)
    if question.is_roster and not record.target:
        raise ResponseError(f"roster question '{question.id}' needs a target", line=record.row)
    if not question.is_roster and record.target:
        raise ResponseError(f"question '{question.id}' takes no target", line=record.row)


def _person(identifier: str, record: ResponseRecord) -> Entity:
    try:
        return Entity(identifier)
    except ValueError:
        raise ResponseError(f"invalid person id {identifier!r}", line=record.row)


# ----------------------------------------------------------------------
# Characteristics
# ----------------------------------------------------------------------

def _answer_values(kb: KnowledgeBase, qpe_id: str) -> List[Dict]:
    return kb.query_pattern([
        (Var("a"), "isAnswerOfQuestionnairePastEvent", Entity(qpe_id)),
        (Var("a"), "isAnswerOfPersonToQuestionOf", Var("p")),
        (Var("a"), "hasAnsweredTo", Var("q")),
        (Var("a"), "hasAnswered", Var("al")),
        (Var("al"), "has_Number_Of_Answer_Label", Var("v")),
    ])


def compute_composite_scores(kb: KnowledgeBase, qdef: QuestionnaireDef, qpe: QpeDef) -> CompositeScores:
    """Sum each respondent's answer values per composite group onto their characteristics."""
    result = CompositeScores()
    groups = qdef.composite_groups()
    if not groups:
        return result

    group_of = {question_entity(qdef, q.id): g for g, qs in groups.items() for q in qs}
    answered: Dict[Tuple[str, Entity], Dict[Entity, int]] = defaultdict(dict)
    respondents = set()
    for row in _answer_values(kb, qpe.id):
        respondents.add(row["p"])
        group = group_of.get(row["q"])
        if group:
            answered[(group, row["p"])][row["q"]] = row["v"]

    for group, questions in groups.items():
        group_type = characteristic_type_entity(qdef, group)
        for person in sorted(respondents):
            items = answered.get((group, person), {})
            total = sum(items.values())
            result.scores[(group, person.name)] = total
            if len(items) < len(questions):
                missing = sorted(q.id for q in questions if question_entity(qdef, q.id) not in items)
                logger.warning("partial %s score for %s: %d of %d items missing",
                               group, person, len(missing), len(questions))
                result.partial.append({"group": group, "respondent": person.name,
                                       "score": total, "missing": missing})

            characteristics = kb.query_pattern([
                (Var("aop"), "isCharacteristicOfPerson", person),
                (Var("aop"), "isCharacteristicOfType", group_type),
                (Var("aop"), "isCharacteristicOfQPE", Entity(qpe.id)),
            ])
            for row in characteristics:
                kb.assert_triple(row["aop"], "has_Characteristic_Name", group)
                kb.assert_triple(row["aop"], "has_Characteristic_Value", str(total))
    return result


def label_characteristics(kb: KnowledgeBase, qdef: QuestionnaireDef):
    """Name categorical characteristics and give them the mapped answer value."""
    for question in qdef.characteristic_questions():
        characteristic = question.characteristic
        char_type = characteristic_type_entity(qdef, characteristic.type_name)
        of_type = set(kb.objects(char_type, "isTypeOfCharacteristicOf"))
        for value in sorted(set(characteristic.values.values())):
            value_entity = characteristic_value_entity(qdef, characteristic.type_name, value)
            for aop in kb.objects(value_entity, "isCharacteristicValueOf"):
                if aop in of_type:
                    kb.assert_triple(aop, "has_Characteristic_Name", characteristic.type_name)
                    kb.assert_triple(aop, "has_Characteristic_Value", value)


def person_characteristics(kb: KnowledgeBase, network: Entity) -> Dict[Entity, Dict[str, str]]:
    """Named characteristic values of the people in one network."""
    rows = kb.query_pattern([
        (Var("aop"), "isCharacteristicOfNetwork", network),
        (Var("aop"), "isCharacteristicOfPerson", Var("p")),
        (Var("aop"), "has_Characteristic_Name", Var("name")),
        (Var("aop"), "has_Characteristic_Value", Var("value")),
    ])
    found: Dict[Entity, Dict[str, str]] = defaultdict(dict)
    for row in rows:
        found[row["p"]][row["name"]] = row["value"]
    return dict(found)
