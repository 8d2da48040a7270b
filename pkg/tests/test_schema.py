import pytest

from database.models import PropertyKind, load_schema
from utils.errors import SchemaError


def test_bundled_schema_has_member_property(schema):
    sig = schema.get_property("hasMember")
    assert sig.range == "Person"
    assert sig.domain_class == "SNANetwork"
    assert sig.kind == PropertyKind.INFERRED


def test_empty_document_gives_empty_schema():
    schema = load_schema("")
    assert schema.classes == set()
    assert schema.properties == {}


def test_unknown_range_class():
    with pytest.raises(SchemaError, match="unknown range class"):
        load_schema("class Thing\nprop P asserted Thing Missing\n")


def test_duplicate_property_reports_line():
    doc = "class Thing\nprop p asserted Thing string\nprop p asserted Thing int\n"
    with pytest.raises(SchemaError) as err:
        load_schema(doc, source="dup.schema")
    assert err.value.line == 3
    assert "duplicate property" in str(err.value)
    assert str(err.value).startswith("dup.schema:3:")


def test_subclass_cycle():
    with pytest.raises(SchemaError, match="subclass cycle"):
        load_schema("class A < B\nclass B < A\n")


def test_unknown_parent_class():
    with pytest.raises(SchemaError, match="unknown parent class"):
        load_schema("class A < Nowhere\n")


def test_unknown_directive():
    with pytest.raises(SchemaError, match="unknown directive"):
        load_schema("klass A\n")


def test_datatype_property_cannot_have_inverse():
    doc = "class A\nprop name asserted A string\nprop eman asserted A string\ninverse name eman\n"
    with pytest.raises(SchemaError, match="cannot have an inverse"):
        load_schema(doc)


def test_alias_must_not_shadow_declared_name():
    with pytest.raises(SchemaError, match="shadows"):
        load_schema("class A\nclass B\nalias A B\n")


def test_comments_and_blank_lines_are_ignored():
    schema = load_schema("# header\n\nclass A  # trailing\nclass B < A\n")
    assert schema.subclasses("A") == {"A", "B"}


def test_printed_spellings_resolve_to_canonical_names(schema):
    assert schema.canonical("SNACaracteristic") == "SNACharacteristic"
    assert schema.canonical("NumerOfObjectActors") == "NumberOfObjectActors"
    assert schema.canonical("isTypeOfRleationOfNetwork") == "isTypeOfRelationOfNetwork"
    assert schema.has_class("SNACaracteristicValueInteger")


def test_inverse_pairs(schema):
    assert schema.inverse_of("isMemberOf") == "hasMember"
    assert schema.inverse_of("hasMember") is None
    assert schema.inverse_name("hasMember") == "isMemberOf"


def test_index_classes_are_eighteen_snaindice_subclasses(schema):
    assert len(schema.subclasses("SNAIndice")) == 19
    assert "SNAIndice" in schema.superclasses("DensityOfNetwork")
    assert "SNAConcept" in schema.superclasses("IndividualEigenvector")


def test_subclass_closure_matches_manual_transitive_closure(schema):
    for cls in sorted(schema.classes):
        manual = {cls}
        frontier = [cls]
        while frontier:
            parent = frontier.pop()
            for child in schema.hierarchy.successors(parent):
                if child not in manual:
                    manual.add(child)
                    frontier.append(child)
        assert schema.subclasses(cls) == manual


def test_unknown_class_lookup(schema):
    with pytest.raises(SchemaError):
        schema.subclasses("Unicorn")
