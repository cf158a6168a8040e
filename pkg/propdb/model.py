"""In-memory tuple-independent probabilistic database.

A database is a set of named relations whose rows carry an independent
probability. Deterministic relations hold rows with probability one. The
module also reads and writes the on-disk format: a schema text file plus
one TSV file per relation.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Union

from .constants import (
    DATA_SUFFIX,
    KIND_DETERMINISTIC,
    KIND_PROBABILISTIC,
    PROB_COLUMN,
)
from .errors import DataError

logger = logging.getLogger(__name__)

Value = Union[str, int]

_INT_RE = re.compile(r"^-?\d+$")
_RELATION_LINE = re.compile(r"^(\w+)\s*\(([^)]*)\)\s+(\w+)$")
_FD_LINE = re.compile(r"^fd\s+(\w+)\s*:\s*([^-]*?)\s*->\s*(.*?)\s*$")
_INT64_MIN, _INT64_MAX = -(2**63), 2**63 - 1


def check_probability(value: float, source: str | None = None, line: int | None = None) -> float:
    """Validate a probability.

    Args:
        value: Candidate probability.
        source: Location used in the error message.
        line: Line used in the error message.

    Returns:
        The value unchanged.

    Raises:
        DataError: If the value lies outside [0, 1] or is not a number.
    """
    if not 0.0 <= value <= 1.0:
        raise DataError(f"probability {value!r} outside [0, 1]", source, line)
    return value


def value_sort_key(value: Value) -> tuple[bool, Value]:
    """Total order over mixed integer and string constants (integers first)."""
    return (isinstance(value, str), value)


def parse_constant(text: str) -> Value:
    """Parse a data cell as a 64-bit integer when it looks like one."""
    if _INT_RE.match(text):
        number = int(text)
        if _INT64_MIN <= number <= _INT64_MAX:
            return number
    return text


@dataclass(frozen=True)
class TupleRow:
    """One tuple of a relation."""

    id: int
    values: tuple[Value, ...]
    prob: float = 1.0


@dataclass(frozen=True)
class RelationDef:
    """A named relation with its rows.

    Attributes:
        name: Relation name.
        attributes: Ordered attribute names.
        deterministic: Whether every row is certain.
        rows: Rows in load order.
    """

    name: str
    attributes: tuple[str, ...]
    deterministic: bool = False
    rows: tuple[TupleRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "rows", tuple(self.rows))
        if len(set(self.attributes)) != len(self.attributes):
            raise DataError(f"duplicate attribute in {self.attributes}", self.name)
        seen: set[tuple[Value, ...]] = set()
        for row in self.rows:
            if len(row.values) != self.arity:
                raise DataError(
                    f"row {row.values} has {len(row.values)} values, expected {self.arity}",
                    self.name,
                )
            check_probability(row.prob, self.name)
            if self.deterministic and row.prob != 1.0:
                raise DataError(f"deterministic row {row.values} has probability {row.prob}", self.name)
            if row.values in seen:
                raise DataError(f"duplicate row {row.values}", self.name)
            seen.add(row.values)

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def position(self, attribute: str) -> int:
        """Return the column index of an attribute.

        Raises:
            DataError: If the attribute is unknown.
        """
        try:
            return self.attributes.index(attribute)
        except ValueError:
            raise DataError(f"unknown attribute {attribute!r}", self.name) from None

    def with_rows(self, rows: Iterable[TupleRow], name: str | None = None) -> RelationDef:
        """Copy this relation with other rows and optionally another name."""
        return RelationDef(name or self.name, self.attributes, self.deterministic, tuple(rows))


@dataclass(frozen=True)
class FunctionalDependency:
    """Attribute-level functional dependency ``determinant -> dependent``."""

    relation: str
    determinant: tuple[str, ...]
    dependent: tuple[str, ...]

    def __str__(self) -> str:
        return f"fd {self.relation}: {','.join(self.determinant)} -> {','.join(self.dependent)}"


def validate_fd(fd: FunctionalDependency, relation: RelationDef) -> None:
    """Check a functional dependency against the rows of its relation.

    Raises:
        DataError: If an attribute is unknown or two rows agree on the
            determinant but differ on the dependent.
    """
    lhs = [relation.position(a) for a in fd.determinant]
    rhs = [relation.position(a) for a in fd.dependent]
    seen: dict[tuple[Value, ...], tuple[Value, ...]] = {}
    for row in relation.rows:
        key = tuple(row.values[i] for i in lhs)
        dependent = tuple(row.values[i] for i in rhs)
        previous = seen.setdefault(key, dependent)
        if previous != dependent:
            raise DataError(
                f"FD {','.join(fd.determinant)} -> {','.join(fd.dependent)} violated: "
                f"{key} maps to both {previous} and {dependent}",
                relation.name,
            )


@dataclass(frozen=True)
class Database:
    """An immutable tuple-independent probabilistic database.

    The active domain is derived from the rows and recomputed on every
    construction, so it always equals the set of constants in the data.
    """

    relations: Mapping[str, RelationDef]
    fds: tuple[FunctionalDependency, ...] = ()
    active_domain: frozenset[Value] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "relations", MappingProxyType(dict(self.relations)))
        object.__setattr__(self, "fds", tuple(self.fds))
        domain: set[Value] = set()
        index: dict[int, tuple[RelationDef, int]] = {}
        for name, relation in self.relations.items():
            if name != relation.name:
                raise DataError(f"relation registered under {name!r} is named {relation.name!r}")
            for position, row in enumerate(relation.rows):
                if row.id in index:
                    raise DataError(f"tuple id {row.id} used twice", name)
                index[row.id] = (relation, position)
                domain.update(row.values)
        for fd in self.fds:
            if fd.relation not in self.relations:
                raise DataError(f"FD on unknown relation {fd.relation!r}")
            validate_fd(fd, self.relations[fd.relation])
        object.__setattr__(self, "active_domain", frozenset(domain))
        object.__setattr__(self, "_index", index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        return dict(self.relations) == dict(other.relations) and self.fds == other.fds

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.relations)), self.fds))

    def relation(self, name: str) -> RelationDef:
        """Look up a relation by name.

        Raises:
            DataError: If no relation has that name.
        """
        try:
            return self.relations[name]
        except KeyError:
            raise DataError(f"unknown relation {name!r}") from None

    def is_deterministic(self, name: str) -> bool:
        return self.relation(name).deterministic

    def tuple_row(self, tuple_id: int) -> TupleRow:
        relation, position = self._index[tuple_id]
        return relation.rows[position]

    def relation_of(self, tuple_id: int) -> str:
        return self._index[tuple_id][0].name

    def tuple_label(self, tuple_id: int) -> str:
        """Label a tuple as lower-cased relation name plus 1-based row index, e.g. ``r1``."""
        relation, position = self._index[tuple_id]
        return f"{relation.name.lower()}{position + 1}"

    @property
    def next_tuple_id(self) -> int:
        return max(self._index, default=-1) + 1

    @property
    def sorted_domain(self) -> list[Value]:
        return sorted(self.active_domain, key=value_sort_key)

    def fds_for(self, name: str) -> list[FunctionalDependency]:
        return [fd for fd in self.fds if fd.relation == name]

    def with_relations(
        self,
        relations: Iterable[RelationDef],
        replace: bool = False,
        fds: Iterable[FunctionalDependency] | None = None,
    ) -> Database:
        """Derive a database with added or replaced relations.

        Args:
            relations: Relations to add, overriding same-named ones.
            replace: Drop every existing relation first.
            fds: Functional dependencies of the result; by default the
                existing ones whose relation survives.

        Returns:
            A new validated database.
        """
        merged = {} if replace else dict(self.relations)
        for relation in relations:
            merged[relation.name] = relation
        if fds is None:
            fds = [fd for fd in self.fds if fd.relation in merged]
        return Database(merged, tuple(fds))


def make_relation(
    name: str,
    attributes: Sequence[str],
    rows: Iterable[Sequence],
    deterministic: bool = False,
    first_id: int = 0,
) -> RelationDef:
    """Build a relation from flat row tuples.

    Probabilistic rows carry their probability as the last element;
    deterministic rows carry values only.
    """
    tuples = []
    for offset, row in enumerate(rows):
        row = tuple(row)
        if deterministic:
            values, prob = row, 1.0
        else:
            if len(row) != len(attributes) + 1:
                raise DataError(f"row {row} must end with a probability", name)
            values, prob = row[:-1], row[-1]
        tuples.append(TupleRow(first_id + offset, tuple(values), prob))
    return RelationDef(name, tuple(attributes), deterministic, tuple(tuples))


def build_database(
    tables: Mapping[str, tuple[Sequence[str], Iterable[Sequence]]],
    deterministic: Iterable[str] = (),
    fds: Iterable[FunctionalDependency] = (),
) -> Database:
    """Build a database in-process, assigning dense tuple ids in table order.

    Args:
        tables: Relation name to ``(attributes, rows)``; see ``make_relation``.
        deterministic: Names of deterministic relations.
        fds: Functional dependencies to validate.

    Returns:
        A validated database.
    """
    certain = set(deterministic)
    relations = []
    next_id = 0
    for name, (attributes, rows) in tables.items():
        relation = make_relation(name, attributes, rows, name in certain, next_id)
        next_id += len(relation.rows)
        relations.append(relation)
    return Database({r.name: r for r in relations}, tuple(fds))


def parse_schema(schema_text: str, source: str = "<schema>") -> tuple[list[tuple[str, tuple[str, ...], bool]], list[FunctionalDependency]]:
    """Parse schema text into relation headers and functional dependencies.

    Each non-empty line is ``name(attr,...) prob|det`` or
    ``fd name: attr,... -> attr,...``. Lines starting with ``#`` are comments.

    Raises:
        DataError: On syntax errors or duplicate relation names.
    """
    headers: list[tuple[str, tuple[str, ...], bool]] = []
    fds: list[FunctionalDependency] = []
    names: set[str] = set()
    for number, raw in enumerate(schema_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fd_match = _FD_LINE.match(line)
        if fd_match:
            relation, lhs, rhs = fd_match.groups()
            determinant = tuple(a.strip() for a in lhs.split(",") if a.strip())
            dependent = tuple(a.strip() for a in rhs.split(",") if a.strip())
            if not dependent:
                raise DataError("FD without dependent attributes", source, number)
            fds.append(FunctionalDependency(relation, determinant, dependent))
            continue
        match = _RELATION_LINE.match(line)
        if not match:
            raise DataError(f"cannot parse schema line {line!r}", source, number)
        name, attrs, kind = match.groups()
        if kind not in (KIND_PROBABILISTIC, KIND_DETERMINISTIC):
            raise DataError(f"relation kind must be prob or det, got {kind!r}", source, number)
        if name in names:
            raise DataError(f"duplicate relation {name!r}", source, number)
        names.add(name)
        attributes = tuple(a.strip() for a in attrs.split(",") if a.strip())
        if PROB_COLUMN in attributes:
            raise DataError(f"attribute name {PROB_COLUMN!r} is reserved", source, number)
        headers.append((name, attributes, kind == KIND_DETERMINISTIC))
    for fd in fds:
        if fd.relation not in names:
            raise DataError(f"FD on unknown relation {fd.relation!r}", source)
    return headers, fds


def _parse_rows(name: str, attributes: tuple[str, ...], deterministic: bool, text: str, first_id: int) -> list[TupleRow]:
    source = f"{name}{DATA_SUFFIX}"
    lines = text.splitlines()
    if not lines:
        raise DataError("missing header line", source, 1)
    header = tuple(cell.strip() for cell in lines[0].split("\t"))
    expected = attributes if deterministic else attributes + (PROB_COLUMN,)
    if header != expected:
        if deterministic and header == attributes + (PROB_COLUMN,):
            raise DataError("deterministic relation must not have a probability column", source, 1)
        raise DataError(f"header {header} does not match schema {expected}", source, 1)
    rows = []
    for number, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.rstrip("\r\n").split("\t")
        if len(cells) != len(expected):
            raise DataError(f"expected {len(expected)} columns, found {len(cells)}", source, number)
        values = tuple(parse_constant(cell) for cell in cells[: len(attributes)])
        prob = 1.0
        if not deterministic:
            try:
                prob = float(cells[-1])
            except ValueError:
                raise DataError(f"probability {cells[-1]!r} is not a number", source, number) from None
            check_probability(prob, source, number)
        rows.append(TupleRow(first_id + len(rows), values, prob))
    return rows


def load_database(schema_text: str, data_sources: Mapping[str, str], source: str = "<schema>") -> Database:
    """Load and validate a database from schema text and per-relation TSV text.

    Args:
        schema_text: Schema description, see ``parse_schema``.
        data_sources: Relation name to TSV text (header line first).
        source: Name of the schema used in error messages.

    Returns:
        The validated database. Tuple ids are dense, in schema order and
        then file order.

    Raises:
        DataError: On malformed rows, out-of-range probabilities, violated
            FDs, duplicate relations or mismatched data sources.
    """
    headers, fds = parse_schema(schema_text, source)
    unknown = set(data_sources) - {name for name, _, _ in headers}
    if unknown:
        raise DataError(f"data for unknown relations: {', '.join(sorted(unknown))}", source)
    relations = []
    next_id = 0
    for name, attributes, deterministic in headers:
        if name not in data_sources:
            raise DataError(f"no data for relation {name!r}", source)
        rows = _parse_rows(name, attributes, deterministic, data_sources[name], next_id)
        next_id += len(rows)
        relations.append(RelationDef(name, attributes, deterministic, tuple(rows)))
    db = Database({r.name: r for r in relations}, tuple(fds))
    logger.info(
        "Loaded %d relations, %d tuples, active domain of %d constants",
        len(db.relations),
        next_id,
        len(db.active_domain),
    )
    return db


def load_schema_only(schema_text: str, source: str = "<schema>") -> Database:
    """Load a schema with empty relations, for planning without data."""
    headers, fds = parse_schema(schema_text, source)
    return Database({name: RelationDef(name, attrs, det) for name, attrs, det in headers}, tuple(fds))


def load_database_dir(schema_path: Path, data_dir: Path) -> Database:
    """Load a database from a schema file and a directory of ``<name>.tsv`` files.

    Raises:
        DataError: If a file is missing or invalid.
    """
    try:
        schema_text = Path(schema_path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read schema: {e}", str(schema_path)) from e
    headers, _ = parse_schema(schema_text, str(schema_path))
    sources = {}
    for name, _, _ in headers:
        path = Path(data_dir) / f"{name}{DATA_SUFFIX}"
        try:
            sources[name] = path.read_text(encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read data: {e}", str(path)) from e
    return load_database(schema_text, sources, str(schema_path))


def format_schema(db: Database) -> str:
    """Render the schema text of a database."""
    lines = []
    for relation in db.relations.values():
        kind = KIND_DETERMINISTIC if relation.deterministic else KIND_PROBABILISTIC
        lines.append(f"{relation.name}({','.join(relation.attributes)}) {kind}")
    lines.extend(str(fd) for fd in db.fds)
    return "\n".join(lines) + "\n"


def format_relation(relation: RelationDef) -> str:
    """Render a relation as TSV; deterministic relations have no ``_p`` column."""
    header = list(relation.attributes)
    if not relation.deterministic:
        header.append(PROB_COLUMN)
    lines = ["\t".join(header)]
    for row in relation.rows:
        cells = [str(v) for v in row.values]
        if not relation.deterministic:
            cells.append(repr(float(row.prob)))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def dump_database(db: Database, directory: Path) -> None:
    """Write ``schema.txt`` and one TSV per relation into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "schema.txt").write_text(format_schema(db), encoding="utf-8")
    for relation in db.relations.values():
        (directory / f"{relation.name}{DATA_SUFFIX}").write_text(format_relation(relation), encoding="utf-8")


def scale_probabilities(db: Database, f: float) -> Database:
    """Multiply every probabilistic tuple's probability by ``f``.

    Deterministic relations and tuple ids are unchanged.

    Raises:
        DataError: If ``f`` is not in (0, 1].
    """
    if not 0.0 < f <= 1.0:
        raise DataError(f"scale factor {f!r} outside (0, 1]")
    if f == 1.0:
        return db
    scaled = [
        relation
        if relation.deterministic
        else relation.with_rows(TupleRow(row.id, row.values, row.prob * f) for row in relation.rows)
        for relation in db.relations.values()
    ]
    return Database({r.name: r for r in scaled}, db.fds)
