"""Dissociations: adding variables to atoms to reach a safe, upper-bounding query.

A dissociation lists, per atom, the variables it gains. Dissociations are
partially ordered by componentwise inclusion; the safe ones correspond
one-to-one to query plans.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass

from .constants import DISSOCIATED_SUFFIX
from .errors import DissociationError, PlanError
from .model import Database, RelationDef, TupleRow
from .plan import Join, Min, Plan, ViewRef, replace_atoms
from .query import Query, Variable, bind_fds, is_hierarchical, subgoals_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dissociation:
    """Per-atom sets of added variables, aligned with ``Query.atoms``."""

    added: tuple[frozenset[Variable], ...]

    def __post_init__(self):
        object.__setattr__(self, "added", tuple(frozenset(a) for a in self.added))

    @classmethod
    def empty(cls, q: Query) -> Dissociation:
        return cls(tuple(frozenset() for _ in q.atoms))

    @classmethod
    def of(cls, q: Query, added: Mapping[str, str | set]) -> Dissociation:
        """Build a dissociation from relation names to variable names.

        Example: ``Dissociation.of(q, {"R": "y"})`` or ``{"R": {"y", "z"}}``.
        """
        by_relation = {}
        for relation, names in added.items():
            q.atom(relation)
            names = [names] if isinstance(names, str) else names
            by_relation[relation] = frozenset(Variable(n) for n in names)
        return cls(tuple(by_relation.get(a.relation, frozenset()) for a in q.atoms))

    @property
    def rank(self) -> int:
        return sum(len(a) for a in self.added)

    @property
    def is_empty(self) -> bool:
        return self.rank == 0

    def validate(self, q: Query) -> None:
        """Check that this dissociation fits the query.

        Raises:
            DissociationError: On an atom-count mismatch, a variable the atom
                already has, or a variable outside Var(q).
        """
        if len(self.added) != len(q.atoms):
            raise DissociationError(f"dissociation has {len(self.added)} entries for {len(q.atoms)} atoms")
        for atom, extra in zip(q.atoms, self.added):
            overlap = extra & atom.variables
            if overlap:
                raise DissociationError(f"{atom.relation} already has {', '.join(sorted(v.name for v in overlap))}")
            foreign = extra - q.variables
            if foreign:
                raise DissociationError(f"{', '.join(sorted(v.name for v in foreign))} not in the query")

    def render(self, q: Query) -> str:
        parts = []
        for atom, extra in zip(q.atoms, self.added):
            names = ",".join(v.name for v in sorted(extra))
            parts.append(f"{atom.relation}:{{{names}}}")
        return "(" + ", ".join(parts) + ")"


def dissociate_query(q: Query, d: Dissociation) -> Query:
    """Apply a dissociation to a query.

    Atom i keeps its arguments, appends the added variables in name order
    and is renamed ``R~``; untouched atoms and the head are unchanged.

    Raises:
        DissociationError: If ``d`` does not fit ``q``.
    """
    d.validate(q)
    atoms = tuple(
        atom.extend(extra, f"{atom.relation}{DISSOCIATED_SUFFIX}") if extra else atom
        for atom, extra in zip(q.atoms, d.added)
    )
    return q.with_atoms(atoms)


def dissociate_table(rel: RelationDef, new_vars, db: Database, first_id: int | None = None) -> RelationDef:
    """Dissociate a table on new variables over the active domain.

    Each row is copied once per combination of domain constants for the new
    columns. Copies keep the row's probability but get fresh tuple ids, so
    they are independent events.

    Args:
        rel: Relation to dissociate.
        new_vars: Variables (or attribute names) to add as columns.
        db: Database supplying the active domain.
        first_id: First fresh tuple id; defaults to ``db.next_tuple_id``.

    Returns:
        The dissociated relation ``R~``, or ``rel`` itself for no new variables.
    """
    names = sorted(v.name if isinstance(v, Variable) else str(v) for v in new_vars)
    if not names:
        return rel
    clash = set(names) & set(rel.attributes)
    if clash:
        raise DissociationError(f"{rel.name} already has attributes {', '.join(sorted(clash))}")
    domain = db.sorted_domain
    next_id = db.next_tuple_id if first_id is None else first_id
    rows = []
    for row in rel.rows:
        for combo in itertools.product(domain, repeat=len(names)):
            rows.append(TupleRow(next_id, row.values + combo, row.prob))
            next_id += 1
    return RelationDef(f"{rel.name}{DISSOCIATED_SUFFIX}", rel.attributes + tuple(names), rel.deterministic, tuple(rows))


def dissociate_database(q: Query, d: Dissociation, db: Database, prune: bool = False) -> tuple[Query, Database]:
    """Dissociate a query together with the tables it reads.

    Args:
        q: The query.
        d: Dissociation valid for q.
        db: Source database.
        prune: Drop dissociated rows that take part in no join result.

    Returns:
        ``(q^Δ, D^Δ)``; D^Δ holds the original relations plus every ``R~``.
    """
    dq = dissociate_query(q, d)
    next_id = db.next_tuple_id
    tables = []
    for atom, extra in zip(q.atoms, d.added):
        if not extra:
            continue
        table = dissociate_table(db.relation(atom.relation), extra, db, next_id)
        next_id += len(table.rows)
        tables.append(table)
    ddb = db.with_relations(tables)
    if prune and tables:
        from .executor import iter_witnesses

        used: dict[str, set[int]] = {t.name: set() for t in tables}
        for witness in iter_witnesses(dq, ddb):
            for atom, row in zip(dq.atoms, witness.rows):
                if atom.relation in used:
                    used[atom.relation].add(row.id)
        pruned = [t.with_rows(r for r in t.rows if r.id in used[t.name]) for t in tables]
        ddb = db.with_relations(pruned)
        logger.debug(
            "Pruned dissociated tables to %d rows",
            sum(len(t.rows) for t in pruned),
        )
    return dq, ddb


def partial_order_leq(d1: Dissociation, d2: Dissociation) -> bool:
    """True iff every added set of ``d1`` is contained in the one of ``d2``.

    Raises:
        DissociationError: If the two have different atom counts.
    """
    if len(d1.added) != len(d2.added):
        raise DissociationError("dissociations of different queries are incomparable")
    return all(a <= b for a, b in zip(d1.added, d2.added))


def is_safe_dissociation(q: Query, d: Dissociation) -> bool:
    return is_hierarchical(dissociate_query(q, d))


def variable_hierarchy(q: Query, d: Dissociation) -> frozenset[tuple[Variable, Variable]]:
    """Pairs (x, y) of existential variables with sg(x) ⊆ sg(y) in q^Δ."""
    dq = dissociate_query(q, d)
    groups = {x: subgoals_of(dq, x) for x in dq.existential_vars}
    return frozenset((x, y) for x, y in itertools.permutations(sorted(groups), 2) if groups[x] <= groups[y])


def lattice_cells(q: Query) -> list[tuple[int, Variable]]:
    """The (atom, variable) pairs a dissociation may add: EVar(q) − Var(g_i)."""
    return [
        (index, var)
        for index, atom in enumerate(q.atoms)
        for var in sorted(q.existential_vars - atom.variables)
    ]


def lattice_size(q: Query) -> int:
    return 2 ** len(lattice_cells(q))


def iter_dissociations(q: Query) -> Iterator[Dissociation]:
    """Enumerate the dissociation lattice by increasing rank.

    Head variables act as constants and are never added.
    """
    cells = lattice_cells(q)
    for rank in range(len(cells) + 1):
        for chosen in itertools.combinations(cells, rank):
            added = [set() for _ in q.atoms]
            for index, var in chosen:
                added[index].add(var)
            yield Dissociation(tuple(frozenset(a) for a in added))


def fd_dissociation(q: Query, db: Database) -> Dissociation:
    """Eagerly dissociate on variables implied by functional dependencies.

    Every atom whose variables contain an FD's determinant gains the FD's
    dependent variables, repeated until nothing changes. Only existential
    variables are added.
    """
    fds = bind_fds(q, db)
    current = [set(atom.variables) for atom in q.atoms]
    changed = True
    while changed:
        changed = False
        for fd in fds:
            for index, held in enumerate(current):
                if fd.determinant <= held:
                    missing = (fd.dependent & q.existential_vars) - held
                    if missing:
                        held |= missing
                        changed = True
    return Dissociation(tuple(frozenset(held - atom.variables) for held, atom in zip(current, q.atoms)))


def reliability_preserving(q: Query, d: Dissociation, db: Database) -> frozenset[tuple[int, Variable]]:
    """Cells of ``d`` that leave the reliability unchanged.

    A cell qualifies when its atom is deterministic, or when some FD's
    determinant lies within the atom's variables and the FD implies the
    added variable.
    """
    fds = bind_fds(q, db)
    cells = set()
    for index, (atom, extra) in enumerate(zip(q.atoms, d.added)):
        deterministic = db.relation(atom.relation).deterministic
        for var in extra:
            if deterministic or any(fd.determinant <= atom.variables and var in fd.dependent for fd in fds):
                cells.add((index, var))
    return frozenset(cells)


def plan_to_dissociation(q: Query, p: Plan) -> Dissociation:
    """The dissociation whose reliability a plan computes.

    At every join, each atom below child j gains the join variables that
    child j does not expose. Head variables are constants and never added.

    Raises:
        PlanError: If ``p`` is not a plan over exactly q's atoms.
    """
    scans = [s.atom.relation for s in p.scans]
    if sorted(scans) != sorted(q.relations):
        raise PlanError(f"plan scans {sorted(scans)}, query has {sorted(q.relations)}")
    added: dict[str, set[Variable]] = {name: set() for name in q.relations}

    def visit(node: Plan) -> None:
        if isinstance(node, (Min, ViewRef)):
            raise PlanError(f"{type(node).__name__} nodes have no single dissociation")
        if isinstance(node, Join):
            join_vars = node.head_vars
            for child in node.nodes:
                missing = (join_vars - child.head_vars) & q.existential_vars
                for scan in child.scans:
                    added[scan.atom.relation] |= missing - scan.atom.variables
        for child in node.children:
            visit(child)

    visit(p)
    return Dissociation(tuple(frozenset(added[a.relation]) for a in q.atoms))


def dissociation_to_plan(q: Query, d: Dissociation) -> Plan:
    """The plan of a safe dissociation.

    Builds the unique safe plan of q^Δ and drops the added variables again:
    scans read the original atoms and projections keep only variables still
    present.

    Raises:
        DissociationError: If ``d`` is not safe.
    """
    from .planner import enumerate_minimal_plans

    dq = dissociate_query(q, d)
    if not is_hierarchical(dq):
        raise DissociationError(f"dissociation {d.render(q)} is not safe")
    (structural,) = enumerate_minimal_plans(dq)
    return replace_atoms(structural, dict(zip(dq.atoms, q.atoms)))


def plan_is_canonical_for(q: Query, p: Plan) -> bool:
    """True iff ``p`` round-trips through its dissociation unchanged."""
    return dissociation_to_plan(q, plan_to_dissociation(q, p)) == p

