import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from database.db import KnowledgeBase
from database.models import load_default_schema
from logic.rule_logic import RuleEngine
from logic.survey_logic import load_questionnaire, parse_questionnaire
from tests import factories


@pytest.fixture(scope="session")
def schema():
    return load_default_schema()


@pytest.fixture
def kb(schema):
    return KnowledgeBase(schema)


@pytest.fixture(scope="session")
def engine(schema):
    return RuleEngine.from_file(schema, config.DEFAULT_RULES_PATH)


@pytest.fixture(scope="session")
def survey():
    return load_questionnaire(config.DEFAULT_QUESTIONNAIRE_PATH)


@pytest.fixture
def minimal_survey():
    return parse_questionnaire(factories.minimal_questionnaire_doc())


@pytest.fixture(scope="session")
def class38(schema, engine, survey):
    """Saturated class38 KB with its records; shared read-only across tests."""
    return factories.build_pipeline(schema, engine, survey, factories.class38_records(survey))
