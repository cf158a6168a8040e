"""Self-join-free conjunctive queries: AST, parser and structural analysis.

Surface syntax::

    q(x, y) :- R(x, 'a'), S(x, y, s), s <= 5, n like '%red%'

Identifiers in atoms are variables; constants are quoted strings or
integers. Comparisons after the atoms are scan predicates on a variable.
"""

from __future__ import annotations

import itertools
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

from .constants import MARK_DISSOCIATED, MARK_ORIGINAL, MARK_PRESERVING
from .errors import AllDeterministicError, QueryError
from .model import Database, Value

logger = logging.getLogger(__name__)

_OPS = {"=": "=", "!=": "!=", "<>": "!=", "≠": "!=", "<": "<", "<=": "<=", "≤": "<=", ">": ">", ">=": ">=", "≥": ">=", "like": "like"}
_ORDERING_OPS = frozenset({"<", "<=", ">", ">="})


@dataclass(frozen=True, order=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: Value

    def __str__(self) -> str:
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "\\'") + "'"
        return str(self.value)


Term = Variable | Constant


def _like_regex(pattern: str) -> re.Pattern:
    parts = []
    for char in pattern:
        if char == "%":
            parts.append(".*")
        elif char == "_":
            parts.append(".")
        else:
            parts.append(re.escape(char))
    return re.compile("".join(parts), re.DOTALL)


@dataclass(frozen=True)
class Predicate:
    """Scan predicate ``args[position] op value``."""

    position: int
    op: str
    value: Value

    def __post_init__(self):
        if self.op not in _OPS.values():
            raise QueryError(f"unknown predicate operator {self.op!r}")
        if self.op in _ORDERING_OPS and not isinstance(self.value, int):
            raise QueryError(f"operator {self.op} needs an integer operand, got {self.value!r}")
        if self.op == "like" and not isinstance(self.value, str):
            raise QueryError(f"like needs a string pattern, got {self.value!r}")

    @cached_property
    def _pattern(self) -> re.Pattern:
        return _like_regex(self.value)

    def holds(self, value: Value) -> bool:
        """Evaluate the predicate; operands of the wrong type never match."""
        if self.op == "=":
            return value == self.value
        if self.op == "!=":
            return value != self.value
        if self.op == "like":
            return isinstance(value, str) and self._pattern.fullmatch(value) is not None
        if not isinstance(value, int) or isinstance(value, bool):
            return False
        if self.op == "<":
            return value < self.value
        if self.op == "<=":
            return value <= self.value
        if self.op == ">":
            return value > self.value
        return value >= self.value

    def render(self, atom: Atom) -> str:
        return f"{atom.args[self.position]} {self.op} {Constant(self.value)}"


@dataclass(frozen=True)
class Atom:
    """A relational atom (subgoal).

    ``dissociated`` lists the variables appended to ``args`` by a
    dissociation; they are ordinary arguments for every analysis.
    """

    relation: str
    args: tuple[Term, ...]
    predicates: tuple[Predicate, ...] = ()
    dissociated: frozenset[Variable] = frozenset()

    @cached_property
    def variables(self) -> frozenset[Variable]:
        return frozenset(t for t in self.args if isinstance(t, Variable))

    def extend(self, extra: Iterable[Variable], relation: str | None = None) -> Atom:
        """Return this atom with extra variables appended in name order."""
        new = sorted(set(extra) - self.variables)
        if not new and relation is None:
            return self
        return Atom(relation or self.relation, self.args + tuple(new), self.predicates, self.dissociated | frozenset(new))

    def render(self) -> str:
        text = f"{self.relation}({','.join(str(t) for t in self.args)})"
        if self.predicates:
            text += "[" + ", ".join(p.render(self) for p in self.predicates) + "]"
        return text

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Query:
    """A self-join-free conjunctive query ``name(head) :- atoms``."""

    head: tuple[Variable, ...]
    atoms: tuple[Atom, ...]
    name: str = "q"

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise QueryError("query has no atoms")
        relations = [a.relation for a in self.atoms]
        for relation in relations:
            if relations.count(relation) > 1:
                raise QueryError(f"self-join on relation {relation!r}")
        body = frozenset().union(*(a.variables for a in self.atoms))
        for var in self.head:
            if var not in body:
                raise QueryError(f"unsafe head variable {var}: not in any atom")
        if len(set(self.head)) != len(self.head):
            raise QueryError("repeated head variable")

    @cached_property
    def variables(self) -> frozenset[Variable]:
        return frozenset().union(*(a.variables for a in self.atoms))

    @cached_property
    def head_vars(self) -> frozenset[Variable]:
        return frozenset(self.head)

    @cached_property
    def existential_vars(self) -> frozenset[Variable]:
        return self.variables - self.head_vars

    @property
    def is_boolean(self) -> bool:
        return not self.head

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(a.relation for a in self.atoms)

    def atom(self, relation: str) -> Atom:
        for atom in self.atoms:
            if atom.relation == relation:
                return atom
        raise QueryError(f"query has no atom over {relation!r}")

    def with_head(self, extra: Iterable[Variable]) -> Query:
        """Return the query with more head variables (treated as constants)."""
        new = sorted(set(extra) - self.head_vars)
        if not new:
            return self
        return Query(self.head + tuple(new), self.atoms, self.name)

    def restrict(self, atoms: Iterable[Atom]) -> Query:
        """Sub-query over some atoms; head = HVar(q) ∩ Var(atoms)."""
        atoms = tuple(atoms)
        covered = frozenset().union(*(a.variables for a in atoms))
        return Query(tuple(v for v in self.head if v in covered), atoms, self.name)

    def with_atoms(self, atoms: Sequence[Atom]) -> Query:
        return Query(self.head, tuple(atoms), self.name)

    @property
    def key(self) -> tuple[frozenset[Atom], frozenset[Variable]]:
        """Identity of a sub-query regardless of atom and head order."""
        return frozenset(self.atoms), self.head_vars

    def __str__(self) -> str:
        return format_query(self)


def format_query(q: Query) -> str:
    """Render a query in surface syntax."""
    body = [f"{a.relation}({', '.join(str(t) for t in a.args)})" for a in q.atoms]
    emitted = set()
    for atom in q.atoms:
        for p in atom.predicates:
            text = p.render(atom)
            if text not in emitted:
                emitted.add(text)
                body.append(text)
    return f"{q.name}({', '.join(v.name for v in q.head)}) :- {', '.join(body)}"


# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>:-)
  | (?P<op><=|>=|!=|<>|≠|≤|≥|=|<|>)
  | (?P<number>-?\d+)
  | (?P<string>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        if not match:
            raise QueryError(f"unexpected character {text[position]!r}", position)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, match.group(), position))
        position = match.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


@dataclass
class _Parser:
    tokens: list[_Token]
    index: int = 0
    predicates: list[tuple[Variable, str, Value, int]] = field(default_factory=list)

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def expect(self, kind: str, text: str | None = None) -> _Token:
        token = self.current
        if token.kind != kind or (text is not None and token.text != text):
            wanted = text or kind
            raise QueryError(f"expected {wanted!r}, found {token.text or 'end of input'!r}", token.position)
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        token = self.current
        return token.kind == kind and (text is None or token.text == text)

    def constant(self) -> Value:
        token = self.current
        if token.kind == "number":
            self.advance()
            return int(token.text)
        if token.kind == "string":
            self.advance()
            return re.sub(r"\\(.)", r"\1", token.text[1:-1])
        raise QueryError(f"expected a constant, found {token.text or 'end of input'!r}", token.position)

    def term(self) -> Term:
        if self.at("name"):
            return Variable(self.advance().text)
        return Constant(self.constant())

    def parse(self) -> tuple[str, list[tuple[Variable, int]], list[tuple[str, list[Term], int]]]:
        name = self.expect("name").text
        self.expect("punct", "(")
        head: list[tuple[Variable, int]] = []
        if not self.at("punct", ")"):
            while True:
                token = self.expect("name")
                head.append((Variable(token.text), token.position))
                if not self.at("punct", ","):
                    break
                self.advance()
        self.expect("punct", ")")
        self.expect("arrow")
        atoms: list[tuple[str, list[Term], int]] = []
        while True:
            token = self.expect("name")
            if self.at("punct", "("):
                self.advance()
                args: list[Term] = []
                if not self.at("punct", ")"):
                    while True:
                        args.append(self.term())
                        if not self.at("punct", ","):
                            break
                        self.advance()
                self.expect("punct", ")")
                atoms.append((token.text, args, token.position))
            else:
                op_token = self.current
                if op_token.kind == "op":
                    op = _OPS[self.advance().text]
                elif op_token.kind == "name" and op_token.text.lower() == "like":
                    self.advance()
                    op = "like"
                else:
                    raise QueryError(f"expected '(' or a comparison after {token.text!r}", op_token.position)
                self.predicates.append((Variable(token.text), op, self.constant(), token.position))
            if not self.at("punct", ","):
                break
            self.advance()
        if self.at("punct", "."):
            self.advance()
        self.expect("eof")
        return name, head, atoms


def parse_query(text: str, schema: Database | None = None) -> Query:
    """Parse a query and check it against a schema.

    Args:
        text: Query text, e.g. ``q(x) :- R(x,y), S(x)``.
        schema: Database whose relations the atoms must match; when absent
            only syntactic and structural checks run.

    Returns:
        The parsed query.

    Raises:
        QueryError: On syntax errors, self-joins, unknown relations, arity
            mismatches, unsafe head variables or ill-typed predicates.
    """
    parser = _Parser(_tokenize(text))
    name, head, raw_atoms = parser.parse()
    seen: dict[str, int] = {}
    for relation, _, position in raw_atoms:
        if relation in seen:
            raise QueryError(f"self-join on relation {relation!r}", position)
        seen[relation] = position
    body_vars = {t for _, args, _ in raw_atoms for t in args if isinstance(t, Variable)}
    for var, position in head:
        if var not in body_vars:
            raise QueryError(f"unsafe head variable {var}: not in any atom", position)
    atoms = []
    for relation, args, position in raw_atoms:
        if schema is not None:
            if relation not in schema.relations:
                raise QueryError(f"unknown relation {relation!r}", position)
            arity = schema.relations[relation].arity
            if arity != len(args):
                raise QueryError(f"{relation} has arity {arity}, used with {len(args)} arguments", position)
        predicates = []
        for var, op, value, _ in parser.predicates:
            if var in args:
                predicates.append(Predicate(args.index(var), op, value))
        atoms.append(Atom(relation, tuple(args), tuple(predicates)))
    for var, _, _, position in parser.predicates:
        if var not in body_vars:
            raise QueryError(f"predicate on variable {var} that no atom binds", position)
    return Query(tuple(v for v, _ in head), tuple(atoms), name)


def validate_query(q: Query, db: Database) -> None:
    """Check that every atom names a relation of ``db`` with matching arity.

    Raises:
        QueryError: On unknown relations or arity mismatches.
    """
    for atom in q.atoms:
        if atom.relation not in db.relations:
            raise QueryError(f"unknown relation {atom.relation!r}")
        arity = db.relations[atom.relation].arity
        if arity != len(atom.args):
            raise QueryError(f"{atom.relation} has arity {arity}, used with {len(atom.args)} arguments")


# Structural analysis


def subgoals_of(q: Query, var: Variable) -> frozenset[int]:
    """sg(x): indices of the atoms containing a variable."""
    return frozenset(i for i, a in enumerate(q.atoms) if var in a.variables)


def is_hierarchical(q: Query) -> bool:
    """True iff the subgoal sets of any two existential variables are nested or disjoint."""
    groups = {x: subgoals_of(q, x) for x in q.existential_vars}
    for x, y in itertools.combinations(sorted(groups), 2):
        a, b = groups[x], groups[y]
        if a & b and not (a <= b or b <= a):
            return False
    return True


def connected_components(q: Query) -> list[Query]:
    """Split a query into components linked by existential variables.

    Each component's head is HVar(q) ∩ Var(component); components are
    ordered by their first atom.
    """
    parent = list(range(len(q.atoms)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for x in q.existential_vars:
        members = sorted(subgoals_of(q, x))
        for other in members[1:]:
            parent[find(other)] = find(members[0])
    groups: dict[int, list[Atom]] = {}
    for i, atom in enumerate(q.atoms):
        groups.setdefault(find(i), []).append(atom)
    if len(groups) == 1:
        return [q]
    return [q.restrict(atoms) for atoms in groups.values()]


def is_connected(q: Query) -> bool:
    return len(connected_components(q)) == 1


def top_sets(q: Query) -> list[frozenset[Variable]]:
    """Inclusion-minimal sets of existential variables whose removal disconnects q.

    Subsets are tried in increasing size; supersets of accepted sets are
    skipped. A single atom has the one top set EVar(q).
    """
    evars = sorted(q.existential_vars)
    if not evars:
        return []
    if len(q.atoms) == 1:
        return [frozenset(evars)]
    found: list[frozenset[Variable]] = []
    for size in range(1, len(evars) + 1):
        for combo in itertools.combinations(evars, size):
            candidate = frozenset(combo)
            if any(accepted <= candidate for accepted in found):
                continue
            if not is_connected(q.with_head(candidate)):
                found.append(candidate)
    return found


def is_deterministic_atom(atom: Atom, db: Database) -> bool:
    return db.relation(atom.relation).deterministic


def separator_vars(q: Query, db: Database) -> frozenset[Variable]:
    """Existential variables that occur in every probabilistic atom.

    Raises:
        AllDeterministicError: If every atom is deterministic; callers then
            use one multi-join followed by a single projection.
    """
    probabilistic = [a for a in q.atoms if not is_deterministic_atom(a, db)]
    if not probabilistic:
        raise AllDeterministicError("query has no probabilistic atom")
    common = q.existential_vars
    for atom in probabilistic:
        common = common & atom.variables
    return common


@dataclass(frozen=True)
class VariableFD:
    """A functional dependency bound to query variables of one atom."""

    atom: int
    determinant: frozenset[Variable]
    dependent: frozenset[Variable]


def bind_fds(q: Query, db: Database) -> list[VariableFD]:
    """Map attribute-level FDs onto the variables of the atoms they constrain.

    Constant positions drop out of the determinant (they are fixed) and out
    of the dependent (nothing to dissociate on).
    """
    bound = []
    for index, atom in enumerate(q.atoms):
        if atom.relation not in db.relations:
            continue
        relation = db.relation(atom.relation)
        for fd in db.fds_for(atom.relation):
            determinant = frozenset(
                atom.args[p] for p in map(relation.position, fd.determinant) if isinstance(atom.args[p], Variable)
            )
            dependent = frozenset(
                atom.args[p] for p in map(relation.position, fd.dependent) if isinstance(atom.args[p], Variable)
            )
            dependent -= determinant
            if dependent:
                bound.append(VariableFD(index, determinant, dependent))
    return bound


def render_incidence_matrix(q: Query, delta=None, starred: Iterable[tuple[int, Variable]] = ()) -> str:
    """Render the incidence matrix of a query and a dissociation.

    Args:
        q: The query.
        delta: Optional dissociation; its added variables are marked.
        starred: ``(atom index, variable)`` cells whose dissociation keeps
            the reliability, marked with a star instead of a dot.

    Returns:
        A text grid with one row per atom and one column per variable.
    """
    added = delta.added if delta is not None else tuple(frozenset() for _ in q.atoms)
    stars = set(starred)
    columns = list(q.head) + sorted(q.existential_vars)
    label_width = max(len(a.relation) for a in q.atoms)
    widths = [max(len(v.name), 1) for v in columns]
    header = " " * label_width + " | " + " ".join(v.name.rjust(w) for v, w in zip(columns, widths))
    lines = [header.rstrip(), "-" * len(header)]
    for index, atom in enumerate(q.atoms):
        cells = []
        for var, width in zip(columns, widths):
            if var in atom.variables:
                mark = MARK_ORIGINAL
            elif var in added[index]:
                mark = MARK_PRESERVING if (index, var) in stars else MARK_DISSOCIATED
            else:
                mark = " "
            cells.append(mark.rjust(width))
        lines.append((atom.relation.ljust(label_width) + " | " + " ".join(cells)).rstrip())
    return "\n".join(lines)
