"""Extensional plan evaluation.

Joins multiply probabilities, projections combine the rows of a group with
independent-or, and min-nodes keep the smallest score per answer. Rows are
scanned in tuple-id order and every intermediate keeps insertion order, so
floating-point results do not depend on hashing or thread scheduling.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .constants import (
    OPT_ALL,
    OPT_NONE,
    OPT_SEMIJOIN,
    OPT_SINGLE,
    OPTS,
)
from .errors import DataError, PlanError, UsageError
from .model import Database, RelationDef, TupleRow, Value, value_sort_key
from .plan import Join, Min, Plan, Project, Scan, ViewRef
from .query import Atom, Constant, Query, Variable, validate_query

logger = logging.getLogger(__name__)


def ior(probs: Iterable[float]) -> float:
    """Independent-or: 1 − ∏(1 − p), summed in log space.

    Returns exactly 1.0 when any input is 1.0 and 0.0 for no inputs.

    Raises:
        DataError: If an input lies outside [0, 1].
    """
    logs = []
    saturated = False
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise DataError(f"probability {p!r} outside [0, 1]")
        if p == 1.0:
            saturated = True
        elif p > 0.0:
            logs.append(math.log1p(-p))
    if saturated:
        return 1.0
    if not logs:
        return 0.0
    if len(logs) == 1:
        return -math.expm1(logs[0])
    return -math.expm1(math.fsum(logs))


# Deterministic natural join


@dataclass(frozen=True)
class Witness:
    """One result of the natural join of all atoms."""

    binding: Mapping[Variable, Value]
    rows: tuple[TupleRow, ...]

    def answer(self, head: Sequence[Variable]) -> tuple[Value, ...]:
        return tuple(self.binding[v] for v in head)


def atom_columns(atom: Atom) -> tuple[Variable, ...]:
    """Distinct variables of an atom in order of first occurrence."""
    seen: dict[Variable, None] = {}
    for term in atom.args:
        if isinstance(term, Variable):
            seen.setdefault(term)
    return tuple(seen)


def scan(atom: Atom, relation: RelationDef) -> Iterator[tuple[tuple[Value, ...], TupleRow]]:
    """Rows of a relation that match an atom, projected onto its variables.

    Constants, repeated variables and scan predicates filter the rows.
    """
    if len(atom.args) != relation.arity:
        raise PlanError(f"{atom.relation} has arity {relation.arity}, atom has {len(atom.args)} arguments")
    first: dict[Variable, int] = {}
    constants: list[tuple[int, Value]] = []
    repeats: list[tuple[int, int]] = []
    for position, term in enumerate(atom.args):
        if isinstance(term, Constant):
            constants.append((position, term.value))
        elif term in first:
            repeats.append((position, first[term]))
        else:
            first[term] = position
    positions = tuple(first.values())
    for row in relation.rows:
        values = row.values
        if any(values[p] != v for p, v in constants):
            continue
        if any(values[p] != values[q] for p, q in repeats):
            continue
        if any(not pred.holds(values[pred.position]) for pred in atom.predicates):
            continue
        yield tuple(values[p] for p in positions), row


def _join_order(candidates: list[list]) -> list[int]:
    order: list[int] = []
    remaining = set(range(len(candidates)))
    bound: set[Variable] = set()
    while remaining:
        best = min(
            remaining,
            key=lambda i: (-len(bound & set(candidates[i][0])), len(candidates[i][1]), i),
        )
        order.append(best)
        remaining.remove(best)
        bound |= set(candidates[best][0])
    return order


def iter_witnesses(q: Query, db: Database) -> Iterator[Witness]:
    """Enumerate the deterministic natural join of all atoms of q.

    Each witness binds every variable and names the contributing row of
    each atom, aligned with ``q.atoms``.
    """
    validate_query(q, db)
    candidates = []
    for atom in q.atoms:
        columns = atom_columns(atom)
        candidates.append([columns, list(scan(atom, db.relation(atom.relation)))])
    order = _join_order(candidates)
    bound: set[Variable] = set()
    steps = []
    for index in order:
        columns, rows = candidates[index]
        keys = tuple(i for i, v in enumerate(columns) if v in bound)
        table: dict[tuple, list] = {}
        for values, row in rows:
            table.setdefault(tuple(values[i] for i in keys), []).append((values, row))
        steps.append((index, columns, tuple(columns[i] for i in keys), table))
        bound |= set(columns)

    chosen: list[TupleRow | None] = [None] * len(q.atoms)
    binding: dict[Variable, Value] = {}

    def extend(depth: int) -> Iterator[Witness]:
        if depth == len(steps):
            yield Witness(dict(binding), tuple(chosen))
            return
        index, columns, key_vars, table = steps[depth]
        for values, row in table.get(tuple(binding[v] for v in key_vars), ()):
            added = [v for v in columns if v not in binding]
            for var, value in zip(columns, values):
                binding[var] = value
            chosen[index] = row
            yield from extend(depth + 1)
            for var in added:
                del binding[var]

    yield from extend(0)


# Probabilistic evaluation


@dataclass
class _Table:
    columns: tuple[Variable, ...]
    rows: dict[tuple[Value, ...], float]

    def aligned(self, columns: tuple[Variable, ...]) -> dict[tuple[Value, ...], float]:
        if columns == self.columns:
            return self.rows
        positions = [self.columns.index(c) for c in columns]
        return {tuple(key[i] for i in positions): p for key, p in self.rows.items()}


@dataclass(frozen=True)
class AnswerTable:
    """Scores per answer tuple.

    Attributes:
        columns: Head variable names.
        rows: Answer value-tuple to probability.
    """

    columns: tuple[str, ...]
    rows: Mapping[tuple[Value, ...], float]

    def score(self, answer: tuple[Value, ...] = ()) -> float:
        return self.rows.get(tuple(answer), 0.0)

    @property
    def answers(self) -> frozenset[tuple[Value, ...]]:
        return frozenset(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def ranked(self) -> list[tuple[tuple[Value, ...], float]]:
        """Rows by descending score, ties by value tuple."""
        return sorted(
            self.rows.items(),
            key=lambda item: (-item[1], tuple(value_sort_key(v) for v in item[0])),
        )

    def reorder(self, columns: Sequence[str]) -> AnswerTable:
        columns = tuple(columns)
        if columns == self.columns:
            return self
        if sorted(columns) != sorted(self.columns):
            raise PlanError(f"cannot reorder columns {self.columns} as {columns}")
        positions = [self.columns.index(c) for c in columns]
        return AnswerTable(columns, {tuple(k[i] for i in positions): p for k, p in self.rows.items()})

    def to_tsv(self) -> str:
        """Head columns then ``score``, sorted by score descending."""
        lines = ["\t".join(self.columns + ("score",))]
        for answer, score in self.ranked():
            lines.append("\t".join([str(v) for v in answer] + [repr(float(score))]))
        return "\n".join(lines) + "\n"


class PlanEvaluator:
    """Evaluates plans over one database, with optional materialised views."""

    def __init__(self, db: Database, views: Mapping[str, _Table] | None = None):
        self.db = db
        self.views = dict(views or {})

    def evaluate(self, plan: Plan) -> _Table:
        if isinstance(plan, Scan):
            return self._scan(plan.atom)
        if isinstance(plan, Project):
            return self._project(plan.away, self.evaluate(plan.child))
        if isinstance(plan, Join):
            tables = [self.evaluate(c) for c in plan.nodes]
            result = tables[0]
            for table in tables[1:]:
                result = self._join(result, table)
            return result
        if isinstance(plan, Min):
            return self._min([self.evaluate(c) for c in plan.nodes])
        if isinstance(plan, ViewRef):
            try:
                return self.views[plan.name]
            except KeyError:
                raise PlanError(f"view {plan.name} is not materialised") from None
        raise PlanError(f"unknown plan node {type(plan).__name__}")

    def _scan(self, atom: Atom) -> _Table:
        relation = self.db.relation(atom.relation)
        rows: dict[tuple[Value, ...], float] = {}
        for values, row in scan(atom, relation):
            rows[values] = 1.0 if relation.deterministic else row.prob
        return _Table(atom_columns(atom), rows)

    @staticmethod
    def _join(left: _Table, right: _Table) -> _Table:
        shared = [c for c in left.columns if c in right.columns]
        right_keys = [right.columns.index(c) for c in shared]
        left_keys = [left.columns.index(c) for c in shared]
        extra = [i for i, c in enumerate(right.columns) if c not in left.columns]
        index: dict[tuple, list[tuple[tuple, float]]] = {}
        for values, p in right.rows.items():
            index.setdefault(tuple(values[i] for i in right_keys), []).append((values, p))
        rows: dict[tuple[Value, ...], float] = {}
        for values, p in left.rows.items():
            for other, q in index.get(tuple(values[i] for i in left_keys), ()):
                rows[values + tuple(other[i] for i in extra)] = p * q
        return _Table(left.columns + tuple(right.columns[i] for i in extra), rows)

    @staticmethod
    def _project(away: frozenset[Variable], child: _Table) -> _Table:
        keep = [i for i, c in enumerate(child.columns) if c not in away]
        groups: dict[tuple[Value, ...], list[float]] = {}
        for values, p in child.rows.items():
            groups.setdefault(tuple(values[i] for i in keep), []).append(p)
        rows = {key: probs[0] if len(probs) == 1 else ior(probs) for key, probs in groups.items()}
        return _Table(tuple(child.columns[i] for i in keep), rows)

    @staticmethod
    def _min(tables: list[_Table]) -> _Table:
        columns = tables[0].columns
        for table in tables[1:]:
            if set(table.columns) != set(columns):
                raise PlanError("min over tables with different head variables")
        aligned = [t.aligned(columns) for t in tables]
        keys: dict[tuple[Value, ...], None] = {}
        for rows in aligned:
            keys.update(dict.fromkeys(rows))
        result = {}
        for key in keys:
            scores = []
            for rows in aligned:
                if key not in rows:
                    logger.warning("Answer %s missing from one min alternative; scoring it 0", key)
                scores.append(rows.get(key, 0.0))
            result[key] = min(scores)
        return _Table(columns, result)


def as_answer_table(table: _Table) -> AnswerTable:
    columns = tuple(sorted(table.columns))
    rows = table.aligned(columns)
    if not columns and not rows:
        rows = {(): 0.0}
    return AnswerTable(tuple(c.name for c in columns), dict(rows))


def eval_plan(p: Plan, db: Database, views: Mapping[str, _Table] | None = None) -> AnswerTable:
    """Evaluate a plan bottom-up; columns come out in variable-name order.

    Boolean plans always produce the single row ``()``, scored 0 when the
    query has no witness.

    Raises:
        PlanError: On schema or head-variable mismatches.
        DataError: If a scanned relation does not exist.
    """
    return as_answer_table(PlanEvaluator(db, views).evaluate(p))


def evaluate_plans(plans: Sequence[Plan], db: Database, workers: int = 1) -> list[AnswerTable]:
    """Evaluate several plans, in order; ``workers > 1`` uses a thread pool."""
    if workers <= 1 or len(plans) <= 1:
        return [eval_plan(p, db) for p in plans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: eval_plan(p, db), plans))


def min_tables(tables: Sequence[AnswerTable]) -> AnswerTable:
    """Per-answer minimum over tables with the same columns; missing rows count as 0."""
    if not tables:
        raise PlanError("no tables to combine")
    columns = tables[0].columns
    aligned = [t.reorder(columns) for t in tables]
    keys: dict[tuple[Value, ...], None] = {}
    for table in aligned:
        keys.update(dict.fromkeys(table.rows))
    rows = {}
    for key in keys:
        if any(key not in t.rows for t in aligned):
            logger.warning("Answer %s missing from one plan; scoring it 0", key)
        rows[key] = min(t.score(key) for t in aligned)
    return AnswerTable(columns, rows)


def propagation_score(q: Query, db: Database, opt: str = OPT_NONE, workers: int = 1) -> AnswerTable:
    """Per-answer minimum over all minimal plans.

    Args:
        q: The query.
        db: The database; deterministic flags and FDs shape the plans.
        opt: Pipeline: ``none`` evaluates every minimal plan, ``single``
            one plan with min-nodes, ``views`` the same with shared
            sub-plans materialised once, ``semijoin`` reduces the input
            first, ``all`` combines the reduction with views.
        workers: Threads used to evaluate independent plans.

    Returns:
        Scores with columns in head order.
    """
    from .optimizer import common_subplans, evaluate_viewset, semijoin_reduce, single_plan
    from .planner import enumerate_plans_fd

    if opt not in OPTS:
        raise UsageError(f"unknown optimisation {opt!r}; choose from {', '.join(OPTS)}")
    validate_query(q, db)
    if opt in (OPT_SEMIJOIN, OPT_ALL):
        db, q = semijoin_reduce(q, db)
    if opt in (OPT_NONE, OPT_SEMIJOIN):
        plans = enumerate_plans_fd(q, db)
        table = min_tables(evaluate_plans(plans, db, workers))
    elif opt == OPT_SINGLE:
        table = eval_plan(single_plan(q, db), db)
    else:
        table = evaluate_viewset(common_subplans(q, db), db)
    return table.reorder(tuple(v.name for v in q.head))
