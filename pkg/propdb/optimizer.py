"""Plan optimisations: a single plan with min-nodes, shared views, semi-join reduction.

All three compute the same scores as evaluating every minimal plan and
taking the per-answer minimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .constants import REDUCED_SUFFIX
from .executor import AnswerTable, PlanEvaluator, as_answer_table, iter_witnesses
from .model import Database, FunctionalDependency
from .plan import Join, Min, Plan, Project, Scan, ViewRef, replace_atoms
from .planner import PlanBuilder, fd_structure, separator_branches
from .query import Atom, Query, Variable

logger = logging.getLogger(__name__)


def _builder_and_structure(q: Query, db: Database | None) -> tuple[PlanBuilder, Query]:
    if db is None:
        return PlanBuilder(), q
    return PlanBuilder(separator_branches(db)), fd_structure(q, db)


def single_plan(q: Query, db: Database | None = None) -> Plan:
    """One plan whose min-nodes cover every minimal plan.

    Min-nodes sit as low as possible: a connected sub-query takes the
    minimum over its branches instead of multiplying out whole plans.

    Args:
        q: The query.
        db: Optional database for deterministic flags and FDs.
    """
    builder, structural = _builder_and_structure(q, db)
    plan = builder.single(structural)
    return replace_atoms(plan, dict(zip(structural.atoms, q.atoms)))


@dataclass(frozen=True)
class ViewSet:
    """Views materialised in order, then a main plan that reads them."""

    views: tuple[tuple[str, Plan], ...]
    main: Plan

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.views)

    def render(self) -> str:
        lines = []
        for name, body in self.views:
            head = ",".join(v.name for v in sorted(body.head_vars))
            lines.append(f"{name}({head}) = {body.render()}")
        lines.append(f"main = {self.main.render()}")
        return "\n".join(lines)


def _shared_nodes(plan: Plan) -> set[str]:
    """Renderings of sub-plans reached more than once, outermost first."""
    seen: set[str] = set()
    shared: set[str] = set()

    def visit(node: Plan) -> None:
        if isinstance(node, Scan):
            return
        key = node.render()
        if key in seen:
            shared.add(key)
            return
        seen.add(key)
        for child in node.children:
            visit(child)

    visit(plan)
    return shared


def _view_order(node: Plan) -> tuple:
    return len(node.scans), -len(node.head_vars), node.render()


def common_subplans(q: Query, db: Database | None = None) -> ViewSet:
    """Factor sub-plans shared between the branches of the single plan into views.

    A sub-plan reached twice is computed once as a view ``Vi``. Views are
    numbered by size, inner views before the views that read them.
    """
    builder, structural = _builder_and_structure(q, db)
    plan = builder.single(structural)
    shared = _shared_nodes(plan)
    bodies: dict[str, Plan] = {}
    for node in plan.walk():
        key = node.render() if not isinstance(node, Scan) else None
        if key in shared and key not in bodies:
            bodies[key] = node
    ordered = sorted(bodies.values(), key=_view_order)
    names = {node.render(): f"V{i}" for i, node in enumerate(ordered, start=1)}

    def with_refs(node: Plan, top: bool = False) -> Plan:
        if not isinstance(node, Scan) and not top and node.render() in names:
            return ViewRef(names[node.render()], node.head_vars, node.relations)
        if isinstance(node, Project):
            return Project(node.away, with_refs(node.child))
        if isinstance(node, Join):
            return Join(tuple(with_refs(c) for c in node.nodes))
        if isinstance(node, Min):
            return Min(tuple(with_refs(c) for c in node.nodes))
        return node

    mapping = dict(zip(structural.atoms, q.atoms))
    heads: dict[str, frozenset[Variable]] = {}
    views = []
    for node in ordered:
        name = names[node.render()]
        body = replace_atoms(with_refs(node, top=True), mapping, heads)
        heads[name] = body.head_vars
        views.append((name, body))
    main = replace_atoms(with_refs(plan), mapping, heads)
    logger.info("Factored %d shared views for %s", len(views), q.name)
    return ViewSet(tuple(views), main)


def evaluate_viewset(vs: ViewSet, db: Database) -> AnswerTable:
    """Materialise each view once, in order, then evaluate the main plan."""
    evaluator = PlanEvaluator(db)
    for name, body in vs.views:
        evaluator.views[name] = evaluator.evaluate(body)
        logger.debug("Materialised %s with %d rows", name, len(evaluator.views[name].rows))
    return as_answer_table(evaluator.evaluate(vs.main))


def semijoin_reduce(q: Query, db: Database) -> tuple[Database, Query]:
    """Keep only the tuples that contribute to some answer of q.

    Each relation ``R`` read by q becomes ``R*`` holding its contributing
    rows with their original ids, probabilities and deterministic flag; the
    query is retargeted to the reduced relations and FDs carry over.

    Returns:
        ``(reduced database, retargeted query)``.
    """
    used: list[set[int]] = [set() for _ in q.atoms]
    for witness in iter_witnesses(q, db):
        for index, row in enumerate(witness.rows):
            used[index].add(row.id)
    reduced = []
    atoms = []
    renamed: dict[str, str] = {}
    for atom, ids in zip(q.atoms, used):
        relation = db.relation(atom.relation)
        name = f"{relation.name}{REDUCED_SUFFIX}"
        renamed[relation.name] = name
        reduced.append(relation.with_rows((r for r in relation.rows if r.id in ids), name=name))
        atoms.append(Atom(name, atom.args, atom.predicates, atom.dissociated))
    fds = [FunctionalDependency(renamed[fd.relation], fd.determinant, fd.dependent) for fd in db.fds if fd.relation in renamed]
    logger.info(
        "Semi-join reduction kept %d of %d tuples",
        sum(len(r.rows) for r in reduced),
        sum(len(db.relation(a.relation).rows) for a in q.atoms),
    )
    return db.with_relations(reduced, replace=True, fds=fds), q.with_atoms(atoms)
