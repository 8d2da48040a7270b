import copy
import logging
from collections import defaultdict
from datetime import datetime
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

from database.models import (
    ASSERTED, IS_A, Entity, Fact, Provenance, Schema, Value, Var,
    datatype_of, format_value, value_sort_key,
)
from utils.errors import FactError, SchemaError
from utils.helpers import escape_part

logger = logging.getLogger(__name__)

Term = Union[Var, Entity, str, int, float, datetime]
Triple = Tuple[Entity, str, Value]
Binding = Dict[str, Value]


class FactIndex:
    """Canonical facts with subject/predicate and predicate/object indexes."""

    def __init__(self):
        self._facts: Dict[Triple, Fact] = {}
        self._by_sp: Dict[Tuple[Entity, str], Set[Value]] = defaultdict(set)
        self._by_po: Dict[Tuple[str, Value], Set[Entity]] = defaultdict(set)
        self._by_p: Dict[str, Set[Tuple[Entity, Value]]] = defaultdict(set)

    def add(self, fact: Fact) -> bool:
        key = fact.key
        if key in self._facts:
            return False
        self._facts[key] = fact
        self._by_sp[(fact.subject, fact.predicate)].add(fact.object)
        self._by_po[(fact.predicate, fact.object)].add(fact.subject)
        self._by_p[fact.predicate].add((fact.subject, fact.object))
        return True

    def get(self, key: Triple) -> Optional[Fact]:
        return self._facts.get(key)

    def __contains__(self, key: Triple) -> bool:
        return key in self._facts

    def __len__(self) -> int:
        return len(self._facts)

    def __iter__(self) -> Iterator[Fact]:
        return iter(self._facts.values())

    def predicates(self) -> List[str]:
        return sorted(p for p, pairs in self._by_p.items() if pairs)

    def count(self, predicate: str, obj: Optional[Value] = None) -> int:
        if obj is None:
            return len(self._by_p.get(predicate, ()))
        return len(self._by_po.get((predicate, obj), ()))

    def match(self, subject: Optional[Entity], predicate: str,
              obj: Optional[Value]) -> Iterator[Tuple[Entity, Value]]:
        """Yield (subject, object) pairs under one predicate; None is a wildcard."""
        if subject is not None and obj is not None:
            if (subject, predicate, obj) in self._facts:
                yield subject, obj
        elif subject is not None:
            for o in self._by_sp.get((subject, predicate), ()):
                yield subject, o
        elif obj is not None:
            for s in self._by_po.get((predicate, obj), ()):
                yield s, obj
        else:
            yield from self._by_p.get(predicate, ())


def match_triple(index: FactIndex, schema: Schema, subject: Optional[Entity], predicate: str,
                 obj: Optional[Value]) -> Iterator[Tuple[Entity, Value]]:
    """Match a canonical triple template, expanding `isA` over the subclass closure.

    For a class-membership template the yielded object is the queried class,
    not the (sub)class the membership was asserted under.
    """
    if predicate != IS_A or not isinstance(obj, Entity):
        yield from index.match(subject, predicate, obj)
        return

    if not schema.has_class(obj.name):
        return
    seen: Set[Entity] = set()
    for cls in sorted(schema.subclasses(obj.name)):
        for s, _ in index.match(subject, IS_A, Entity(cls)):
            if s not in seen:
                seen.add(s)
                yield s, obj


def estimate_count(index: FactIndex, schema: Schema, predicate: str, obj: Optional[Value]) -> int:
    if predicate == IS_A and isinstance(obj, Entity) and schema.has_class(obj.name):
        return sum(index.count(IS_A, Entity(cls)) for cls in schema.subclasses(obj.name))
    return index.count(predicate, obj)


# ----------------------------------------------------------------------
# Knowledge base
# ----------------------------------------------------------------------

class KnowledgeBase:

    def __init__(self, schema: Schema):
        self.schema = schema
        self._index = FactIndex()
        self.skolem_registry: Dict[Tuple[str, str, Tuple[Value, ...]], Entity] = {}

    @property
    def index(self) -> FactIndex:
        return self._index

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def normalize(self, subject, predicate: str, obj) -> Triple:
        """Validate a triple and bring it into its stored form.

        Aliases resolve to canonical names, inverse-side predicates flip
        subject and object, and int objects widen to float for float ranges.
        """
        subject = _as_entity(subject, "subject")
        predicate = self.schema.canonical(predicate)

        if predicate == IS_A:
            class_name = obj.name if isinstance(obj, Entity) else obj
            if not isinstance(class_name, str) or not self.schema.has_class(class_name):
                raise FactError(f"unknown class {class_name!r} in class membership of {subject}")
            return subject, IS_A, Entity(self.schema.canonical(class_name))

        if not self.schema.has_property(predicate):
            raise FactError(f"unknown predicate '{predicate}'")

        sig = self.schema.get_property(predicate)
        if not sig.is_datatype and isinstance(obj, str):
            obj = _as_entity(obj, "object")

        canonical = self.schema.inverse_of(predicate)
        if canonical is not None:
            if not isinstance(obj, Entity):
                raise FactError(f"range violation: '{predicate}' expects an entity object, got {obj!r}")
            subject, obj, predicate = obj, subject, canonical

        sig = self.schema.get_property(predicate)
        if sig.is_datatype:
            found = datatype_of(obj)
            if found == "int" and sig.range == "float":
                obj = float(obj)
            elif found != sig.range:
                raise FactError(
                    f"datatype mismatch: '{predicate}' expects {sig.range}, got {type(obj).__name__} {obj!r}"
                )
        elif not isinstance(obj, Entity):
            raise FactError(f"range violation: '{predicate}' expects a {sig.range} entity, got {obj!r}")

        return subject, predicate, obj

    # ------------------------------------------------------------------
    # Assertion
    # ------------------------------------------------------------------

    def assert_fact(self, fact: Fact) -> bool:
        """Store a fact; False when an equal (subject, predicate, object) is already present."""
        subject, predicate, obj = self.normalize(fact.subject, fact.predicate, fact.object)
        return self._index.add(Fact(subject, predicate, obj, fact.provenance))

    def assert_triple(self, subject, predicate: str, obj, provenance: Provenance = ASSERTED) -> bool:
        subject, predicate, obj = self.normalize(subject, predicate, obj)
        return self._index.add(Fact(subject, predicate, obj, provenance))

    def add_instance(self, entity, class_name: str, provenance: Provenance = ASSERTED) -> bool:
        return self.assert_triple(entity, IS_A, class_name, provenance)

    def assert_all(self, facts: Iterable[Fact]) -> int:
        return sum(1 for fact in facts if self.assert_fact(fact))

    def __contains__(self, item) -> bool:
        triple = item.key if isinstance(item, Fact) else item
        try:
            return self.normalize(*triple) in self._index
        except ValueError:
            return False

    def __len__(self) -> int:
        return len(self._index)

    # ------------------------------------------------------------------
    # Reading
    # ------------------------------------------------------------------

    def facts(self) -> List[Fact]:
        return sorted(self._index, key=Fact.sort_key)

    def asserted_facts(self) -> List[Fact]:
        return [f for f in self.facts() if not f.provenance.is_inferred]

    def inferred_facts(self) -> List[Fact]:
        return [f for f in self.facts() if f.provenance.is_inferred]

    def provenance_of(self, subject, predicate: str, obj) -> Optional[Provenance]:
        fact = self._index.get(self.normalize(subject, predicate, obj))
        return fact.provenance if fact else None

    def objects(self, subject, predicate: str) -> List[Value]:
        subject = _as_entity(subject, "subject")
        predicate = self.schema.canonical(predicate)
        canonical = self.schema.inverse_of(predicate)
        if canonical is not None:
            found = [s for s, _ in self._index.match(None, canonical, subject)]
        else:
            found = [o for _, o in self._index.match(subject, predicate, None)]
        return sorted(found, key=value_sort_key)

    def subjects(self, predicate: str, obj) -> List[Entity]:
        predicate = self.schema.canonical(predicate)
        canonical = self.schema.inverse_of(predicate)
        if canonical is not None:
            found = [o for _, o in self._index.match(_as_entity(obj, "object"), canonical, None)]
        elif predicate == IS_A:
            found = [s for s, _ in match_triple(self._index, self.schema, None, IS_A,
                                                _as_entity(obj, "class"))]
        else:
            found = [s for s, _ in self._index.match(None, predicate, obj)]
        return sorted(found, key=value_sort_key)

    def value(self, subject, predicate: str) -> Optional[Value]:
        values = self.objects(subject, predicate)
        return values[0] if values else None

    def match(self, subject: Optional[Entity], predicate: str,
              obj: Optional[Value]) -> Iterator[Tuple[Entity, Value]]:
        return match_triple(self._index, self.schema, subject, predicate, obj)

    def is_instance(self, entity, class_name: str) -> bool:
        entity = _as_entity(entity, "subject")
        return any(True for _ in self.match(entity, IS_A, Entity(self.schema.canonical(class_name))))

    def class_instances(self, class_name: str) -> Set[Entity]:
        """Instances of the class and of all its subclasses."""
        if not self.schema.has_class(class_name):
            raise SchemaError(f"unknown class '{class_name}'")
        target = Entity(self.schema.canonical(class_name))
        return {s for s, _ in self.match(None, IS_A, target)}

    # ------------------------------------------------------------------
    # Pattern queries
    # ------------------------------------------------------------------

    def query_pattern(self, patterns: Sequence[Tuple[Term, Term, Term]]) -> List[Binding]:
        """Every binding of the pattern variables satisfying all triple templates.

        Templates are (subject, predicate, object) tuples whose terms are Var or
        constants; a predicate may itself be a Var. Results are sorted by the
        bound values, variables taken in name order.
        """
        atoms = [self._normalize_template(p) for p in patterns]
        if any(a is None for a in atoms):
            return []

        bindings: List[Binding] = [{}]
        remaining = list(atoms)
        while remaining and bindings:
            atom = min(remaining, key=lambda a: self._selectivity(a, bindings[0]))
            remaining.remove(atom)
            bindings = [b2 for b in bindings for b2 in self._extend(atom, b)]

        names = sorted({t.name for a in atoms for t in a if isinstance(t, Var)})
        unique = {tuple(b[n] for n in names): b for b in bindings}
        return [unique[k] for k in sorted(unique, key=lambda k: tuple(value_sort_key(v) for v in k))]

    def _normalize_template(self, pattern) -> Optional[Tuple[Term, Term, Term]]:
        subject, predicate, obj = pattern
        if isinstance(subject, str):
            subject = Entity(subject)
        if isinstance(predicate, Var):
            return subject, predicate, obj

        predicate = self.schema.canonical(predicate)
        if predicate == IS_A:
            if isinstance(obj, Var):
                return subject, IS_A, obj
            class_name = obj.name if isinstance(obj, Entity) else str(obj)
            if not self.schema.has_class(class_name):
                return None
            return subject, IS_A, Entity(self.schema.canonical(class_name))

        if not self.schema.has_property(predicate):
            raise FactError(f"unknown predicate '{predicate}' in pattern")
        canonical = self.schema.inverse_of(predicate)
        if canonical is not None:
            if isinstance(obj, str):
                obj = Entity(obj)
            return obj, canonical, subject

        sig = self.schema.get_property(predicate)
        if not sig.is_datatype and isinstance(obj, str):
            obj = Entity(obj)
        elif sig.range == "float" and datatype_of(obj) == "int":
            obj = float(obj)
        return subject, predicate, obj

    def _selectivity(self, atom, binding: Binding) -> Tuple[int, int]:
        subject, predicate, obj = (_resolve(t, binding) for t in atom)
        unbound = sum(1 for t in (subject, predicate, obj) if t is None)
        if predicate is None:
            return unbound, len(self._index)
        return unbound, estimate_count(self._index, self.schema, predicate, obj)

    def _extend(self, atom, binding: Binding) -> Iterator[Binding]:
        s_term, p_term, o_term = atom
        subject, predicate, obj = (_resolve(t, binding) for t in atom)
        if subject is not None and not isinstance(subject, Entity):
            return

        predicates = [predicate] if predicate is not None else self._index.predicates()
        for pred in predicates:
            for s, o in self.match(subject, pred, obj):
                extended = dict(binding)
                if not (_bind(extended, s_term, s) and _bind(extended, p_term, pred)
                        and _bind(extended, o_term, o)):
                    continue
                yield extended

    # ------------------------------------------------------------------
    # Skolem individuals
    # ------------------------------------------------------------------

    def skolem(self, rule_id: str, var_name: str, args: Sequence[Value]) -> Entity:
        """Deterministic individual for (rule id, variable, argument values).

        The id reads `rule_id/var_name/arg1,arg2,...` with every part
        percent-escaped, so distinct keys can never collide.
        """
        args = tuple(args)
        if not args:
            raise FactError(f"skolem key for {rule_id}/{var_name} needs at least one argument")
        key = (rule_id, var_name, tuple((datatype_of(a), a) for a in args))
        entity = self.skolem_registry.get(key)
        if entity is None:
            joined = ",".join(escape_part(format_value(a)) for a in args)
            entity = Entity(f"{escape_part(rule_id)}/{escape_part(var_name)}/{joined}")
            self.skolem_registry[key] = entity
        return entity

    # ------------------------------------------------------------------
    # Copies
    # ------------------------------------------------------------------

    def copy(self) -> "KnowledgeBase":
        clone = KnowledgeBase(self.schema)
        clone._index = copy.deepcopy(self._index)
        clone.skolem_registry = dict(self.skolem_registry)
        return clone

    def without_inferred(self) -> "KnowledgeBase":
        """A fresh KB holding only the asserted facts."""
        clone = KnowledgeBase(self.schema)
        for fact in self.asserted_facts():
            clone._index.add(fact)
        return clone

    def fact_keys(self) -> Set[Triple]:
        return {f.key for f in self._index}


def _as_entity(value, role: str) -> Entity:
    if isinstance(value, Entity):
        return value
    if isinstance(value, str):
        try:
            return Entity(value)
        except ValueError as e:
            raise FactError(str(e))
    raise FactError(f"{role} must be an entity, got {value!r}")


def _resolve(term, binding: Binding):
    if isinstance(term, Var):
        return binding.get(term.name)
    return term


def _bind(binding: Binding, term, value) -> bool:
    if not isinstance(term, Var):
        return True
    bound = binding.get(term.name)
    if bound is None:
        binding[term.name] = value
        return True
    return bound == value and type(bound) is type(value)
