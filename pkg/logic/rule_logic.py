import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import pyparsing as pp

import config
from database.db import FactIndex, KnowledgeBase, estimate_count, match_triple
from database.models import IS_A, Entity, Fact, Provenance, Schema, Value, Var, datatype_of
from utils.errors import RuleSyntaxError, RuleValidationError, SaturationLimitError
from utils.helpers import read_text_file

logger = logging.getLogger(__name__)

Term = Union[Var, Entity, str, int, float]
Binding = Dict[str, Value]

MAKE_OWL_THING = "makeOWLThing"
DIFFERENT_FROM = "differentFrom"
BUILTINS = (MAKE_OWL_THING, DIFFERENT_FROM)
BUILTIN_PREFIX = "swrlx:"


class AtomKind(Enum):
    CLASS = "class"
    PROPERTY = "property"
    BUILTIN = "builtin"


@dataclass(frozen=True)
class RuleAtom:
    kind: AtomKind
    name: str
    terms: Tuple[Term, ...]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def variables(self) -> List[str]:
        return [t.name for t in self.terms if isinstance(t, Var)]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(_term_text(t) for t in self.terms)})"


@dataclass
class Rule:
    id: str
    antecedent: List[RuleAtom]
    consequent: List[RuleAtom]
    line: int = 0

    @property
    def body_atoms(self) -> List[RuleAtom]:
        return [a for a in self.antecedent if a.kind != AtomKind.BUILTIN]

    @property
    def builtins(self) -> List[RuleAtom]:
        return [a for a in self.antecedent if a.kind == AtomKind.BUILTIN]

    @property
    def skolem_atoms(self) -> List[RuleAtom]:
        return [a for a in self.builtins if a.name == MAKE_OWL_THING]

    @property
    def created_variables(self) -> List[str]:
        return [a.terms[0].name for a in self.skolem_atoms if isinstance(a.terms[0], Var)]

    def bound_variables(self) -> Set[str]:
        return {v for a in self.body_atoms for v in a.variables()}

    def __str__(self) -> str:
        body = " ^ ".join(str(a) for a in self.antecedent)
        head = " ^ ".join(str(a) for a in self.consequent)
        return f"{self.id}: {body} -> {head}"


@dataclass
class RuleSet:
    rules: List[Rule] = field(default_factory=list)
    source: Optional[str] = None

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, rule_id: str) -> Rule:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        raise KeyError(rule_id)


@dataclass(frozen=True)
class Diagnostic:
    rule_id: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule_id}: [{self.code}] {self.message}"


@dataclass
class SaturationStats:
    rounds: int = 0
    new_facts: int = 0
    per_rule: Dict[str, int] = field(default_factory=dict)


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------

def _build_grammar() -> pp.ParserElement:
    lpar, rpar, comma, colon, caret = map(pp.Suppress, "(),:^")
    arrow = pp.Suppress("->")

    variable = pp.Regex(r"\?[A-Za-z][A-Za-z0-9_]*").set_parse_action(lambda t: Var(t[0][1:]))
    string = pp.QuotedString('"', esc_char="\\")
    number = pp.Regex(r"[+-]?\d+(\.\d+)?([eE][+-]?\d+)?").set_parse_action(
        lambda t: float(t[0]) if any(c in t[0] for c in ".eE") else int(t[0])
    )
    constant = pp.Regex(r"[A-Za-z_][A-Za-z0-9_\-]*").set_parse_action(lambda t: Entity(t[0]))
    term = variable | string | number | constant

    atom_name = pp.Regex(r"([A-Za-z_][A-Za-z0-9_]*:)?[A-Za-z_][A-Za-z0-9_]*")
    atom = (atom_name + lpar - pp.Group(pp.DelimitedList(term)) + rpar).set_parse_action(_make_atom)
    atoms = pp.Group(atom + pp.ZeroOrMore(caret - atom))

    rule_name = pp.Regex(r"[A-Za-z][A-Za-z0-9_\-]*")
    rule = (rule_name + colon - atoms + arrow - atoms).set_parse_action(_make_rule)

    grammar = pp.ZeroOrMore(rule) + pp.StringEnd()
    grammar.ignore(pp.python_style_comment)
    return grammar


def _make_atom(s: str, loc: int, toks) -> RuleAtom:
    name, terms = toks[0], tuple(toks[1])
    line, column = pp.lineno(loc, s), pp.col(loc, s)
    if ":" in name:
        prefix, local = name.split(":", 1)
        if prefix + ":" != BUILTIN_PREFIX or local not in BUILTINS:
            raise pp.ParseFatalException(s, loc, f"unknown prefixed name '{name}'")
        name = local
    if name in BUILTINS:
        kind = AtomKind.BUILTIN
    elif name[0].isupper():
        kind = AtomKind.CLASS
    else:
        kind = AtomKind.PROPERTY
    return RuleAtom(kind, name, terms, line, column)


def _make_rule(s: str, loc: int, toks) -> Rule:
    return Rule(toks[0], list(toks[1]), list(toks[2]), pp.lineno(loc, s))


_GRAMMAR: Optional[pp.ParserElement] = None


def parse_ruleset(text: str, source: Optional[str] = None) -> RuleSet:
    """Parse rule text: `name: atom ^ ... -> atom ^ ...`, `#` comments."""
    global _GRAMMAR
    if _GRAMMAR is None:
        _GRAMMAR = _build_grammar()

    try:
        parsed = _GRAMMAR.parse_string(text, parse_all=True)
    except pp.ParseBaseException as e:
        raise RuleSyntaxError(f"syntax error: {e.msg}", e.lineno, e.col, source=source)

    ruleset = RuleSet(list(parsed), source)
    seen: Set[str] = set()
    for rule in ruleset:
        if rule.id in seen:
            raise RuleSyntaxError(f"duplicate rule id '{rule.id}'", rule.line, 1, source=source)
        seen.add(rule.id)
        for atom in rule.antecedent + rule.consequent:
            _check_arity(atom, source)
    return ruleset


def _check_arity(atom: RuleAtom, source: Optional[str]):
    arity = len(atom.terms)
    if atom.kind == AtomKind.CLASS:
        expected, ok = "1", arity == 1
    elif atom.kind == AtomKind.PROPERTY or atom.name == DIFFERENT_FROM:
        expected, ok = "2", arity == 2
    else:
        expected, ok = "at least 2", arity >= 2
    if not ok:
        raise RuleSyntaxError(
            f"arity mismatch: {atom.kind.value} atom '{atom.name}' takes {expected} argument(s), got {arity}",
            atom.line, atom.column, source=source,
        )


def load_ruleset(path: str = config.DEFAULT_RULES_PATH) -> RuleSet:
    return parse_ruleset(read_text_file(path), source=path)


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------

def validate_rules(ruleset: RuleSet, schema: Schema) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []
    for rule in ruleset:
        diagnostics.extend(_check_names(rule, schema))
        diagnostics.extend(_check_safety(rule))
    diagnostics.extend(_check_stratification(ruleset, schema))
    return diagnostics


def _check_names(rule: Rule, schema: Schema) -> List[Diagnostic]:
    found = []
    for atom in rule.antecedent + rule.consequent:
        if atom.kind == AtomKind.CLASS and not schema.has_class(atom.name):
            found.append(Diagnostic(rule.id, "unknown-class", f"unknown class '{atom.name}' in {atom}"))
        elif atom.kind == AtomKind.PROPERTY and not schema.has_property(atom.name):
            found.append(Diagnostic(rule.id, "unknown-property", f"unknown property '{atom.name}' in {atom}"))
    return found


def _check_safety(rule: Rule) -> List[Diagnostic]:
    found = []
    bound = rule.bound_variables()
    created: Set[str] = set()

    for atom in rule.consequent:
        if atom.kind == AtomKind.BUILTIN:
            found.append(Diagnostic(rule.id, "builtin-in-consequent",
                                    f"builtin {atom} is only allowed in the antecedent"))

    for atom in rule.skolem_atoms:
        output = atom.terms[0]
        if not isinstance(output, Var):
            found.append(Diagnostic(rule.id, "skolem-output",
                                    f"first argument of {atom} must be a variable"))
            continue
        if output.name in bound or output.name in created:
            found.append(Diagnostic(rule.id, "skolem-output",
                                    f"?{output.name} in {atom} is already bound elsewhere in the antecedent"))
        created.add(output.name)
        for name in (t.name for t in atom.terms[1:] if isinstance(t, Var)):
            if name not in bound:
                found.append(Diagnostic(rule.id, "unsafe-variable",
                                        f"?{name} in {atom} is not bound by an antecedent atom"))

    for atom in rule.builtins:
        if atom.name == DIFFERENT_FROM:
            for name in atom.variables():
                if name not in bound:
                    found.append(Diagnostic(rule.id, "unsafe-variable",
                                            f"?{name} in {atom} is not bound by an antecedent atom"))

    for atom in rule.consequent:
        for name in atom.variables():
            if name not in bound and name not in created:
                found.append(Diagnostic(rule.id, "unsafe-variable",
                                        f"consequent variable ?{name} in {atom} is never bound"))
    return found


def _created_classes(rule: Rule, schema: Schema) -> Set[str]:
    created = set(rule.created_variables)
    classes: Set[str] = set()
    for atom in rule.consequent:
        if (atom.kind == AtomKind.CLASS and schema.has_class(atom.name)
                and isinstance(atom.terms[0], Var) and atom.terms[0].name in created):
            classes |= schema.superclasses(atom.name)
    return classes


def _check_stratification(ruleset: RuleSet, schema: Schema) -> List[Diagnostic]:
    """A class given only to minted individuals must not feed a minting rule's antecedent."""
    flow = nx.DiGraph()
    found = []
    creators = [r for r in ruleset if r.skolem_atoms]
    created = {r.id: _created_classes(r, schema) for r in creators}

    for consumer in creators:
        for atom in consumer.body_atoms:
            if atom.kind != AtomKind.CLASS or not schema.has_class(atom.name):
                continue
            cls = schema.canonical(atom.name)
            for producer in creators:
                if cls in created[producer.id]:
                    flow.add_edge(producer.id, consumer.id, cls=cls)

    cycles = list(nx.simple_cycles(flow))
    for producer, consumer, data in sorted(flow.edges(data=True)):
        message = (f"class '{data['cls']}' minted by {producer} feeds the antecedent "
                   f"of minting rule {consumer}")
        cycle = next((c for c in cycles if producer in c and consumer in c), None)
        if cycle:
            message += f" (cycle: {' -> '.join(cycle + [cycle[0]])})"
        found.append(Diagnostic(consumer, "stratification", message))
    return found


# ----------------------------------------------------------------------
# Compilation
# ----------------------------------------------------------------------

Template = Tuple[Term, str, Term]


@dataclass
class CompiledRule:
    rule: Rule
    body: List[Template]
    head: List[Template]
    different: List[Tuple[Term, Term]]
    skolems: List[Tuple[str, Tuple[Term, ...]]]
    frontier: List[str]
    components: List[List[int]]
    component_needs: List[Set[str]]

    @property
    def id(self) -> str:
        return self.rule.id


def _template(atom: RuleAtom, schema: Schema) -> Template:
    if atom.kind == AtomKind.CLASS:
        return atom.terms[0], IS_A, Entity(schema.canonical(atom.name))
    subject, obj = atom.terms
    predicate = schema.canonical(atom.name)
    canonical = schema.inverse_of(predicate)
    if canonical is not None:
        return obj, canonical, subject
    if schema.get_property(predicate).range == "float" and datatype_of(obj) == "int":
        obj = float(obj)
    return subject, predicate, obj


def _template_vars(template: Template) -> Set[str]:
    return {t.name for t in (template[0], template[2]) if isinstance(t, Var)}


def compile_rule(rule: Rule, schema: Schema) -> CompiledRule:
    body = [_template(a, schema) for a in rule.body_atoms]
    head = [_template(a, schema) for a in rule.consequent]
    different = [tuple(a.terms) for a in rule.builtins if a.name == DIFFERENT_FROM]
    skolems = [(a.terms[0].name, tuple(a.terms[1:])) for a in rule.skolem_atoms]

    created = {name for name, _ in skolems}
    head_vars = sorted({v for t in head for v in _template_vars(t)} - created)

    # The key of a minted individual is its listed arguments plus every other
    # consequent variable, so each distinct consequent binding gets its own individual.
    listed = {t.name for _, args in skolems for t in args if isinstance(t, Var)}
    frontier = [v for v in head_vars if v not in listed]

    needed = set(head_vars) | listed
    needed |= {t.name for pair in different for t in pair if isinstance(t, Var)}

    components = _connected_components(body)
    component_needs = [{v for i in comp for v in _template_vars(body[i])} & needed for comp in components]
    return CompiledRule(rule, body, head, different, skolems, frontier, components, component_needs)


def _connected_components(body: List[Template]) -> List[List[int]]:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(body)))
    for i, j in itertools.combinations(range(len(body)), 2):
        if _template_vars(body[i]) & _template_vars(body[j]):
            graph.add_edge(i, j)
    return sorted(sorted(c) for c in nx.connected_components(graph))


# ----------------------------------------------------------------------
# Evaluation
# ----------------------------------------------------------------------

def _resolve(term, binding: Binding):
    if isinstance(term, Var):
        return binding.get(term.name)
    return term


def _plan(body: List[Template], positions: List[int], first: Optional[int],
          sizes: Dict[int, int]) -> List[int]:
    """Greedy join order: the delta atom, then atoms sharing bound variables, fewest unbound first."""
    order: List[int] = []
    bound: Set[str] = set()
    remaining = list(positions)
    if first is not None:
        order.append(first)
        remaining.remove(first)
        bound |= _template_vars(body[first])

    while remaining:
        connected = [i for i in remaining if _template_vars(body[i]) & bound]
        if connected:
            pick = min(connected, key=lambda i: (len(_template_vars(body[i]) - bound), sizes[i], i))
        else:
            pick = min(remaining, key=lambda i: (sizes[i], len(_template_vars(body[i])), i))
        order.append(pick)
        remaining.remove(pick)
        bound |= _template_vars(body[pick])
    return order


def _evaluate_component(compiled: CompiledRule, schema: Schema, full: FactIndex, positions: List[int],
                        needs: Set[str], delta: Optional[FactIndex], delta_pos: Optional[int]) -> List[Binding]:
    body = compiled.body
    sizes = {i: estimate_count(full, schema, body[i][1], body[i][2]
                               if not isinstance(body[i][2], Var) else None) for i in positions}
    order = _plan(body, positions, delta_pos, sizes)

    rows: List[Binding] = [{}]
    for step, i in enumerate(order):
        s_term, predicate, o_term = body[i]
        index = delta if (delta is not None and i == delta_pos) else full

        keep = set(needs)
        for later in order[step + 1:]:
            keep |= _template_vars(body[later])

        unique: Dict[Tuple, Binding] = {}
        for binding in rows:
            subject, obj = _resolve(s_term, binding), _resolve(o_term, binding)
            if subject is not None and not isinstance(subject, Entity):
                continue
            # When every variable this atom introduces is projected away, one match is enough.
            exists_only = not ((_template_vars(body[i]) - binding.keys()) & keep)
            for s, o in match_triple(index, schema, subject, predicate, obj):
                row = dict(binding)
                if isinstance(s_term, Var):
                    row[s_term.name] = s
                if isinstance(o_term, Var):
                    if o_term.name in row and row[o_term.name] != o:
                        continue
                    row[o_term.name] = o
                projected = {k: v for k, v in row.items() if k in keep}
                unique.setdefault(tuple(sorted(projected.items(), key=lambda kv: kv[0])), projected)
                if exists_only:
                    break
        rows = list(unique.values())
        if not rows:
            break
    return rows


def _bindings(compiled: CompiledRule, kb: KnowledgeBase, delta: Optional[FactIndex],
              delta_pos: Optional[int]) -> Iterator[Binding]:
    parts: List[List[Binding]] = []
    for positions, needs in zip(compiled.components, compiled.component_needs):
        use_delta = delta_pos if delta_pos in positions else None
        rows = _evaluate_component(compiled, kb.schema, kb.index, positions, needs,
                                   delta if use_delta is not None else None, use_delta)
        if not rows:
            return
        parts.append(rows)

    for combo in itertools.product(*parts):
        binding: Binding = {}
        for part in combo:
            binding.update(part)
        if all(_resolve(a, binding) != _resolve(b, binding) for a, b in compiled.different):
            yield binding


def _derive(compiled: CompiledRule, kb: KnowledgeBase, delta: Optional[FactIndex] = None,
            delta_pos: Optional[int] = None) -> Iterator[Fact]:
    provenance = Provenance.inferred(compiled.id)
    for binding in _bindings(compiled, kb, delta, delta_pos):
        for output, args in compiled.skolems:
            key = [_resolve(a, binding) for a in args] + [binding[v] for v in compiled.frontier]
            binding[output] = kb.skolem(compiled.id, output, key)
        for s_term, predicate, o_term in compiled.head:
            triple = kb.normalize(_resolve(s_term, binding), predicate, _resolve(o_term, binding))
            yield Fact(*triple, provenance)


def apply_rule(kb: KnowledgeBase, rule: Rule) -> Set[Fact]:
    """One evaluation of a rule against the whole KB; only facts not yet in it are returned."""
    compiled = compile_rule(rule, kb.schema)
    return {f for f in _derive(compiled, kb) if f.key not in kb.index}


def _touches(template: Template, delta: FactIndex, schema: Schema) -> bool:
    predicate, obj = template[1], template[2]
    if predicate == IS_A and isinstance(obj, Entity):
        return any(delta.count(IS_A, Entity(c)) for c in schema.subclasses(obj.name))
    return delta.count(predicate) > 0


def saturate(kb: KnowledgeBase, ruleset: RuleSet, iteration_limit: int = config.DEFAULT_ITERATION_LIMIT,
             naive: bool = False) -> SaturationStats:
    """Forward-chain the rules until no new fact appears.

    The semi-naive pass evaluates each rule once per body atom with that
    atom restricted to the previous round's new facts; `naive=True`
    re-evaluates every rule on the whole KB each round. Both reach the same
    fixpoint. Within a round the first rule (in file order) deriving a fact
    owns its provenance.
    """
    compiled = [compile_rule(rule, kb.schema) for rule in ruleset]
    stats = SaturationStats(per_rule={c.id: 0 for c in compiled})
    delta: Optional[FactIndex] = None

    while True:
        if stats.rounds >= iteration_limit:
            raise SaturationLimitError(
                f"no fixpoint after {iteration_limit} rounds; the rule set is probably not stratified",
                source=ruleset.source,
            )
        stats.rounds += 1

        new: Dict[Tuple, Fact] = {}
        for rule in compiled:
            if naive or delta is None:
                derived = _derive(rule, kb)
            else:
                derived = itertools.chain.from_iterable(
                    _derive(rule, kb, delta, i)
                    for i, template in enumerate(rule.body) if _touches(template, delta, kb.schema)
                )
            for fact in derived:
                if fact.key not in kb.index and fact.key not in new:
                    new[fact.key] = fact
                    stats.per_rule[rule.id] += 1

        logger.debug("saturation round %d: %d new facts", stats.rounds, len(new))
        if not new:
            break

        delta = FactIndex()
        for fact in sorted(new.values(), key=Fact.sort_key):
            kb.index.add(fact)
            delta.add(fact)
        stats.new_facts += len(new)

    logger.info("saturation reached a fixpoint after %d rounds, %d new facts", stats.rounds, stats.new_facts)
    return stats


# ----------------------------------------------------------------------
# Engine
# ----------------------------------------------------------------------

class RuleEngine:

    def __init__(self, ruleset: RuleSet, schema: Schema,
                 iteration_limit: int = config.DEFAULT_ITERATION_LIMIT):
        self.ruleset = ruleset
        self.schema = schema
        self.iteration_limit = iteration_limit

    @classmethod
    def from_file(cls, schema: Schema, path: str = config.DEFAULT_RULES_PATH, **kwargs) -> "RuleEngine":
        return cls(load_ruleset(path), schema, **kwargs)

    def diagnostics(self) -> List[Diagnostic]:
        return validate_rules(self.ruleset, self.schema)

    def validate(self):
        diagnostics = self.diagnostics()
        if diagnostics:
            raise RuleValidationError(diagnostics, source=self.ruleset.source)

    def saturate(self, kb: KnowledgeBase, naive: bool = False) -> SaturationStats:
        self.validate()
        return saturate(kb, self.ruleset, self.iteration_limit, naive=naive)


def _term_text(term) -> str:
    if isinstance(term, (Var, Entity)):
        return str(term)
    if isinstance(term, str):
        return f'"{term}"'
    return repr(term)
