import json
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple, Union

import networkx as nx

from utils.errors import SchemaError

IS_A = "isA"
DATATYPES = ("string", "int", "float", "datetime")

_WHITESPACE = re.compile(r"\s")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


@dataclass(frozen=True, order=True)
class Entity:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name or _WHITESPACE.search(self.name):
            raise ValueError(f"Invalid entity id: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Value = Union[Entity, str, int, float, datetime]


def value_sort_key(value: Value) -> Tuple:
    if isinstance(value, Entity):
        return (0, value.name)
    if isinstance(value, str):
        return (1, value)
    if isinstance(value, (int, float)):
        return (2, float(value), 0 if isinstance(value, int) else 1)
    if isinstance(value, datetime):
        return (3, value.isoformat())
    return (4, repr(value))


def format_value(value: Value) -> str:
    if isinstance(value, Entity):
        return value.name
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, bool):
        raise TypeError("booleans are not fact values")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, datetime):
        return value.isoformat()
    raise TypeError(f"Unsupported value type: {type(value).__name__}")


def datatype_of(value: Value) -> Optional[str]:
    if isinstance(value, bool):
        return None
    if isinstance(value, str):
        return "string"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, datetime):
        return "datetime"
    return None


class ProvenanceKind(Enum):
    ASSERTED = "asserted"
    INFERRED = "inferred"


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    rule_id: Optional[str] = None

    @staticmethod
    def inferred(rule_id: str) -> "Provenance":
        return Provenance(ProvenanceKind.INFERRED, rule_id)

    @property
    def is_inferred(self) -> bool:
        return self.kind == ProvenanceKind.INFERRED

    def __str__(self) -> str:
        if self.is_inferred:
            return f"inferred:{self.rule_id}"
        return "asserted"


ASSERTED = Provenance(ProvenanceKind.ASSERTED)


@dataclass(frozen=True)
class Fact:
    subject: Entity
    predicate: str
    object: Value
    provenance: Provenance = ASSERTED

    @property
    def key(self) -> Tuple[Entity, str, Value]:
        return (self.subject, self.predicate, self.object)

    def sort_key(self) -> Tuple:
        return (self.subject.name, self.predicate, value_sort_key(self.object))

    def __str__(self) -> str:
        return f"{self.subject} {self.predicate} {format_value(self.object)} # {self.provenance}"


class PropertyKind(Enum):
    ASSERTED = "asserted"
    INFERRED = "inferred"


@dataclass(frozen=True)
class PropertySig:
    name: str
    kind: PropertyKind
    domain_class: str
    range: str

    @property
    def is_datatype(self) -> bool:
        return self.range in DATATYPES


# ----------------------------------------------------------------------
# Schema
# ----------------------------------------------------------------------

class Schema:
    """Classes with subclass edges, typed properties, spelling aliases and inverse pairs."""

    def __init__(self):
        self.hierarchy = nx.DiGraph()  # parent -> child
        self.properties: Dict[str, PropertySig] = {}
        self.aliases: Dict[str, str] = {}
        self.inverses: Dict[str, str] = {}  # inverse name -> canonical name
        self._canonical_inverse: Dict[str, str] = {}  # canonical name -> inverse name
        self._subclass_cache: Dict[str, frozenset] = {}

    @property
    def classes(self) -> Set[str]:
        return set(self.hierarchy.nodes)

    # ------------------------------------------------------------------
    # Building
    # ------------------------------------------------------------------

    def add_class(self, name: str, parent: Optional[str] = None):
        self.hierarchy.add_node(name)
        if parent:
            self.hierarchy.add_edge(parent, name)
        self._subclass_cache.clear()

    def add_property(self, sig: PropertySig):
        if sig.name in self.properties:
            raise SchemaError(f"duplicate property name '{sig.name}'")
        self.properties[sig.name] = sig

    def add_alias(self, alias: str, canonical: str):
        self.aliases[alias] = canonical

    def add_inverse(self, canonical: str, inverse: str):
        self.inverses[inverse] = canonical
        self._canonical_inverse[canonical] = inverse

    def check(self):
        """Resolve every reference; raises SchemaError on the first problem found."""
        if not nx.is_directed_acyclic_graph(self.hierarchy):
            cycle = " < ".join(u for u, _ in nx.find_cycle(self.hierarchy))
            raise SchemaError(f"subclass cycle: {cycle}")

        for sig in self.properties.values():
            if sig.domain_class not in self.hierarchy:
                raise SchemaError(f"unknown domain class '{sig.domain_class}' for property '{sig.name}'")
            if not sig.is_datatype and sig.range not in self.hierarchy:
                raise SchemaError(f"unknown range class '{sig.range}' for property '{sig.name}'")
            if sig.name in self.hierarchy:
                raise SchemaError(f"name '{sig.name}' is both a class and a property")

        for alias, target in self.aliases.items():
            if alias in self.properties or alias in self.hierarchy:
                raise SchemaError(f"alias '{alias}' shadows a declared name")
            if target not in self.properties and target not in self.hierarchy:
                raise SchemaError(f"alias '{alias}' targets unknown name '{target}'")

        for inverse, canonical in self.inverses.items():
            for name in (inverse, canonical):
                if name not in self.properties:
                    raise SchemaError(f"inverse pair names unknown property '{name}'")
                if self.properties[name].is_datatype:
                    raise SchemaError(f"datatype property '{name}' cannot have an inverse")
            if canonical in self.inverses or inverse in self._canonical_inverse:
                raise SchemaError(f"property '{canonical}' is in more than one inverse pair")

    # ------------------------------------------------------------------
    # Lookups
    # ------------------------------------------------------------------

    def canonical(self, name: str) -> str:
        return self.aliases.get(name, name)

    def has_class(self, name: str) -> bool:
        return self.canonical(name) in self.hierarchy

    def has_property(self, name: str) -> bool:
        return self.canonical(name) in self.properties

    def get_property(self, name: str) -> PropertySig:
        return self.properties[self.canonical(name)]

    def inverse_of(self, name: str) -> Optional[str]:
        """For an inverse-side property, the canonical property it flips to."""
        return self.inverses.get(self.canonical(name))

    def inverse_name(self, canonical: str) -> Optional[str]:
        return self._canonical_inverse.get(canonical)

    def subclasses(self, name: str) -> frozenset:
        """The class and all its transitive subclasses."""
        name = self.canonical(name)
        if name not in self._subclass_cache:
            if name not in self.hierarchy:
                raise SchemaError(f"unknown class '{name}'")
            self._subclass_cache[name] = frozenset({name} | nx.descendants(self.hierarchy, name))
        return self._subclass_cache[name]

    def superclasses(self, name: str) -> frozenset:
        name = self.canonical(name)
        if name not in self.hierarchy:
            raise SchemaError(f"unknown class '{name}'")
        return frozenset({name} | nx.ancestors(self.hierarchy, name))


# ----------------------------------------------------------------------
# Schema document loader
# ----------------------------------------------------------------------

def load_schema(schema_doc: str, source: Optional[str] = None) -> Schema:
    """Parse the line-oriented schema format.

    class <Name> [< <Parent>]
    prop <name> <asserted|inferred> <DomainClass> <RangeClassOrDatatype>
    alias <Alias> <Canonical>
    inverse <canonical> <inverse>
    """
    schema = Schema()
    pending_parents: List[Tuple[str, str, int]] = []
    declared: Dict[str, int] = {}

    for line_no, raw in enumerate(schema_doc.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        directive, args = tokens[0], tokens[1:]

        try:
            if directive == "class":
                if len(args) == 1:
                    name, parent = args[0], None
                elif len(args) == 3 and args[1] == "<":
                    name, parent = args[0], args[2]
                else:
                    raise SchemaError("expected 'class <Name> [< <Parent>]'")
                _check_name(name)
                schema.add_class(name)
                declared.setdefault(name, line_no)
                if parent:
                    pending_parents.append((name, parent, line_no))

            elif directive == "prop":
                if len(args) != 4:
                    raise SchemaError("expected 'prop <name> <asserted|inferred> <Domain> <Range>'")
                name, kind, domain, range_ = args
                _check_name(name)
                try:
                    prop_kind = PropertyKind(kind)
                except ValueError:
                    raise SchemaError(f"property kind must be asserted or inferred, got '{kind}'")
                schema.add_property(PropertySig(name, prop_kind, domain, range_))

            elif directive == "alias":
                if len(args) != 2:
                    raise SchemaError("expected 'alias <Alias> <Canonical>'")
                _check_name(args[0])
                schema.add_alias(args[0], args[1])

            elif directive == "inverse":
                if len(args) != 2:
                    raise SchemaError("expected 'inverse <canonical> <inverse>'")
                schema.add_inverse(args[0], args[1])

            else:
                raise SchemaError(f"unknown directive '{directive}'")
        except SchemaError as e:
            raise SchemaError(e.message, source=source, line=line_no)

    for name, parent, line_no in pending_parents:
        if parent not in schema.hierarchy:
            raise SchemaError(f"unknown parent class '{parent}'", source=source, line=line_no)
        schema.add_class(name, parent)

    try:
        schema.check()
    except SchemaError as e:
        raise SchemaError(e.message, source=source)
    return schema


def _check_name(name: str):
    if not _NAME.match(name):
        raise SchemaError(f"invalid name '{name}'")


_default_schema: Optional[Schema] = None


def load_default_schema() -> Schema:
    global _default_schema
    if _default_schema is None:
        import config
        from utils.helpers import read_text_file

        _default_schema = load_schema(read_text_file(config.DEFAULT_SCHEMA_PATH),
                                      source=config.DEFAULT_SCHEMA_PATH)
    return _default_schema
