"""Query plans: scans, projections, joins, min-nodes and view references.

Plans are immutable trees in canonical form. The constructors
``make_join``, ``make_project`` and ``make_min`` flatten nested joins,
merge stacked projections and sort children, so two plans that differ
only in join order compare equal.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from functools import cached_property

from .errors import PlanError
from .query import Atom, Query, Variable


class Plan:
    """Base class for plan nodes."""

    @property
    def head_vars(self) -> frozenset[Variable]:
        raise NotImplementedError

    @property
    def children(self) -> tuple[Plan, ...]:
        return ()

    def render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.render()

    def walk(self) -> Iterator[Plan]:
        """Yield every node, parents before children."""
        yield self
        for child in self.children:
            yield from child.walk()

    @property
    def scans(self) -> list[Scan]:
        return [node for node in self.walk() if isinstance(node, Scan)]

    @property
    def relations(self) -> frozenset[str]:
        names = set()
        for node in self.walk():
            if isinstance(node, Scan):
                names.add(node.atom.relation)
            elif isinstance(node, ViewRef):
                names.update(node.relations)
        return frozenset(names)

    @property
    def root_vars(self) -> frozenset[Variable]:
        """Variables projected away by the root projection, if any."""
        return frozenset()

    @property
    def sort_key(self) -> tuple[tuple[str, ...], str]:
        return tuple(sorted(self.relations)), self.render()


def _vars(variables: Iterable[Variable]) -> str:
    return ",".join(v.name for v in sorted(variables))


@dataclass(frozen=True)
class Scan(Plan):
    atom: Atom

    @cached_property
    def head_vars(self) -> frozenset[Variable]:
        return self.atom.variables

    def render(self) -> str:
        return self.atom.render()


@dataclass(frozen=True)
class Project(Plan):
    """Projection that removes ``away`` from the child's head variables."""

    away: frozenset[Variable]
    child: Plan

    @cached_property
    def head_vars(self) -> frozenset[Variable]:
        return self.child.head_vars - self.away

    @property
    def children(self) -> tuple[Plan, ...]:
        return (self.child,)

    @property
    def root_vars(self) -> frozenset[Variable]:
        return self.away

    def render(self) -> str:
        return f"proj[{_vars(self.away)}] {self.child.render()}"


@dataclass(frozen=True)
class Join(Plan):
    nodes: tuple[Plan, ...]

    @cached_property
    def head_vars(self) -> frozenset[Variable]:
        return frozenset().union(*(c.head_vars for c in self.nodes))

    @property
    def children(self) -> tuple[Plan, ...]:
        return self.nodes

    def render(self) -> str:
        return f"join( {', '.join(c.render() for c in self.nodes)} )"


@dataclass(frozen=True)
class Min(Plan):
    """Per-answer minimum over alternative plans with equal head variables."""

    nodes: tuple[Plan, ...]

    @cached_property
    def head_vars(self) -> frozenset[Variable]:
        return self.nodes[0].head_vars

    @property
    def children(self) -> tuple[Plan, ...]:
        return self.nodes

    def render(self) -> str:
        return f"min( {', '.join(c.render() for c in self.nodes)} )"


@dataclass(frozen=True)
class ViewRef(Plan):
    """Leaf that reads a materialised view."""

    name: str
    head: frozenset[Variable]
    sources: frozenset[str]

    @property
    def head_vars(self) -> frozenset[Variable]:
        return self.head

    @property
    def relations(self) -> frozenset[str]:
        return self.sources

    def render(self) -> str:
        return f"{self.name}({_vars(self.head)})"


def make_join(*children: Plan) -> Plan:
    """Join plans, flattening nested joins and sorting children canonically."""
    flat: list[Plan] = []
    for child in children:
        if isinstance(child, Join):
            flat.extend(child.nodes)
        else:
            flat.append(child)
    if not flat:
        raise PlanError("join without children")
    if len(flat) == 1:
        return flat[0]
    return Join(tuple(sorted(flat, key=lambda p: p.sort_key)))


def make_project(away: Iterable[Variable], child: Plan) -> Plan:
    """Project variables away, merging with a projection directly below.

    Raises:
        PlanError: If a variable is not in the child's head.
    """
    away = frozenset(away)
    if not away:
        return child
    missing = away - child.head_vars
    if missing:
        raise PlanError(f"cannot project away {_vars(missing)}: not in {_vars(child.head_vars)}")
    if isinstance(child, Project):
        return Project(child.away | away, child.child)
    return Project(away, child)


def make_min(children: Iterable[Plan]) -> Plan:
    """Min over alternatives, deduplicated and sorted.

    Raises:
        PlanError: If the alternatives disagree on head variables.
    """
    unique = {c.render(): c for c in children}
    if not unique:
        raise PlanError("min without children")
    nodes = [unique[key] for key in sorted(unique)]
    heads = {c.head_vars for c in nodes}
    if len(heads) > 1:
        raise PlanError("min over plans with different head variables")
    if len(nodes) == 1:
        return nodes[0]
    return Min(tuple(nodes))


def is_safe_plan(plan: Plan) -> bool:
    """True iff every join's children share the same head variables."""
    for node in plan.walk():
        if isinstance(node, Join) and len({c.head_vars for c in node.nodes}) > 1:
            return False
    return True


def is_plan_for(plan: Plan, q: Query) -> bool:
    """True iff the plan scans each atom of q exactly once and has q's head."""
    scans = [s.atom.relation for s in plan.scans]
    return sorted(scans) == sorted(q.relations) and plan.head_vars == q.head_vars


def min_node_count(plan: Plan) -> int:
    return sum(1 for node in plan.walk() if isinstance(node, Min))


def replace_atoms(plan: Plan, mapping: dict[Atom, Atom], view_heads: dict[str, frozenset[Variable]] | None = None) -> Plan:
    """Rebuild a plan over other atoms, renormalising projections and joins.

    Projections keep only variables still present below them; view
    references take their heads from ``view_heads``.
    """
    if isinstance(plan, Scan):
        return Scan(mapping.get(plan.atom, plan.atom))
    if isinstance(plan, ViewRef):
        if view_heads and plan.name in view_heads:
            return ViewRef(plan.name, view_heads[plan.name], plan.sources)
        return plan
    if isinstance(plan, Project):
        child = replace_atoms(plan.child, mapping, view_heads)
        return make_project(plan.away & child.head_vars, child)
    if isinstance(plan, Join):
        return make_join(*(replace_atoms(c, mapping, view_heads) for c in plan.nodes))
    if isinstance(plan, Min):
        return make_min(replace_atoms(c, mapping, view_heads) for c in plan.nodes)
    raise PlanError(f"unknown plan node {type(plan).__name__}")
