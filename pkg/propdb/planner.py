"""Minimal query plan enumeration.

Plans come out of one recursion over sub-queries:

* a single atom is scanned and its existential variables projected away;
* a disconnected query joins the plans of its components;
* a connected query branches: each branch moves a set of existential
  variables into the head, plans the rest, and projects them away.

Which branches a connected query has decides the algorithm. Without
schema knowledge the branches are the top sets. With deterministic tables,
separator variables (present in every probabilistic atom) are projected
first. With functional dependencies, atoms are first dissociated on the
variables their determinants imply.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable
from functools import cache

from .constants import LATTICE_LIMIT
from .dissociation import (
    dissociation_to_plan,
    fd_dissociation,
    is_safe_dissociation,
    iter_dissociations,
    lattice_cells,
    variable_hierarchy,
)
from .errors import AllDeterministicError, PlanError
from .model import Database
from .plan import Plan, Scan, make_join, make_min, make_project, replace_atoms
from .query import Atom, Query, Variable, connected_components, is_connected, is_hierarchical, separator_vars, top_sets

logger = logging.getLogger(__name__)

Branch = tuple[frozenset[Variable], Query]
BranchRule = Callable[[Query], list[Branch]]


def top_set_branches(q: Query) -> list[Branch]:
    """One branch per top set."""
    return [(y, q.with_head(y)) for y in top_sets(q)]


def separator_branches(db: Database) -> BranchRule:
    """Branches that project separator variables first.

    If the separator variables alone disconnect the query there is one
    branch; otherwise each top set of the remainder extends them. A level
    without probabilistic atoms treats every existential variable as a
    separator, which yields a single multi-join.
    """

    def branches(q: Query) -> list[Branch]:
        try:
            separators = separator_vars(q, db)
        except AllDeterministicError:
            separators = q.existential_vars
        if not separators:
            return top_set_branches(q)
        rest = q.with_head(separators)
        if not is_connected(rest):
            return [(separators, rest)]
        return [(separators | y, rest.with_head(y)) for y in top_sets(rest)]

    return branches


class PlanBuilder:
    """Runs the plan recursion for one branch rule, memoised per sub-query."""

    def __init__(self, branches: BranchRule = top_set_branches):
        self.branches = branches
        self._plans = cache(self._enumerate)
        self._single = cache(self._single_plan)

    def leaf(self, q: Query) -> Plan:
        (atom,) = q.atoms
        return make_project(q.existential_vars, Scan(atom))

    def enumerate(self, q: Query) -> tuple[Plan, ...]:
        return self._plans(q)

    def _enumerate(self, q: Query) -> tuple[Plan, ...]:
        if len(q.atoms) == 1:
            return (self.leaf(q),)
        components = connected_components(q)
        if len(components) > 1:
            options = [self.enumerate(c) for c in components]
            plans = [make_join(*combo) for combo in itertools.product(*options)]
        else:
            plans = [
                make_project(away, sub_plan)
                for away, sub in self.branches(q)
                for sub_plan in self.enumerate(sub)
            ]
        unique = {p.render(): p for p in plans}
        return tuple(unique[key] for key in sorted(unique))

    def single(self, q: Query) -> Plan:
        return self._single(q)

    def _single_plan(self, q: Query) -> Plan:
        if len(q.atoms) == 1:
            return self.leaf(q)
        components = connected_components(q)
        if len(components) > 1:
            return make_join(*(self.single(c) for c in components))
        return make_min(make_project(away, self.single(sub)) for away, sub in self.branches(q))


def _strip(plans, structural: Query, q: Query):
    mapping: dict[Atom, Atom] = dict(zip(structural.atoms, q.atoms))
    return tuple(replace_atoms(p, mapping) for p in plans)


def _canonical(plans) -> tuple[Plan, ...]:
    unique = {p.render(): p for p in plans}
    return tuple(unique[key] for key in sorted(unique))


def safe_plan(q: Query) -> Plan | None:
    """The unique safe plan of a hierarchical query, else ``None``."""
    if not is_hierarchical(q):
        return None
    (plan,) = PlanBuilder().enumerate(q)
    return plan


def enumerate_minimal_plans(q: Query) -> tuple[Plan, ...]:
    """All minimal plans of q, canonical and sorted by rendered text."""
    plans = PlanBuilder().enumerate(q)
    logger.info("Enumerated %d minimal plans for %s", len(plans), q.name)
    return plans


def enumerate_plans_det(q: Query, db: Database) -> tuple[Plan, ...]:
    """Minimal plans when some tables are deterministic."""
    plans = PlanBuilder(separator_branches(db)).enumerate(q)
    logger.info("Enumerated %d minimal plans for %s with deterministic tables", len(plans), q.name)
    return plans


def fd_structure(q: Query, db: Database) -> Query:
    """The query after eager dissociation on FD-implied variables.

    Atoms keep their relation names so the planner still sees which tables
    are deterministic.
    """
    d = fd_dissociation(q, db)
    return q.with_atoms(tuple(atom.extend(extra) for atom, extra in zip(q.atoms, d.added)))


def enumerate_plans_fd(q: Query, db: Database) -> tuple[Plan, ...]:
    """Minimal plans with functional dependencies and deterministic tables.

    Plans scan the original atoms; the FD-implied variables only shape the
    recursion.
    """
    structural = fd_structure(q, db)
    plans = _canonical(_strip(PlanBuilder(separator_branches(db)).enumerate(structural), structural, q))
    logger.info("Enumerated %d minimal plans for %s with FDs", len(plans), q.name)
    return plans


def count_safe_dissociations(q: Query, limit: int = LATTICE_LIMIT) -> int:
    """Number of safe dissociations up to the variable hierarchy they induce.

    Safe dissociations that nest the existential variables the same way are
    counted once; for the k-star this is the number of weak orderings of k
    variables. Use ``safe_dissociations`` for every safe lattice element.

    Raises:
        PlanError: If the lattice has more than ``2**limit`` elements.
    """
    cells = len(lattice_cells(q))
    if cells > limit:
        raise PlanError(f"dissociation lattice has 2^{cells} elements, limit is 2^{limit}")
    return len({variable_hierarchy(q, d) for d in safe_dissociations(q)})


def count_minimal_plans(q: Query) -> int:
    return len(enumerate_minimal_plans(q))


def all_plans(q: Query, limit: int = LATTICE_LIMIT) -> tuple[Plan, ...]:
    """Plans of every safe dissociation, minimal or not."""
    cells = len(lattice_cells(q))
    if cells > limit:
        raise PlanError(f"dissociation lattice has 2^{cells} elements, limit is 2^{limit}")
    return _canonical(dissociation_to_plan(q, d) for d in iter_dissociations(q) if is_safe_dissociation(q, d))


def safe_dissociations(q: Query) -> list:
    return [d for d in iter_dissociations(q) if is_safe_dissociation(q, d)]


def chain_query(k: int) -> Query:
    """Boolean chain of k atoms: R1(x1), R2(x1,x2), ..., Rk(x_{k-1})."""
    if k < 1:
        raise PlanError("chain needs at least one atom")
    if k == 1:
        return Query((), (Atom("R1", (Variable("x1"),)),))
    xs = [Variable(f"x{i}") for i in range(1, k)]
    atoms = [Atom("R1", (xs[0],))]
    atoms += [Atom(f"R{i + 1}", (xs[i - 1], xs[i])) for i in range(1, k - 1)]
    atoms.append(Atom(f"R{k}", (xs[-1],)))
    return Query((), tuple(atoms))


def star_query(k: int) -> Query:
    """Boolean star: R1(x1), ..., Rk(xk), U(x1,...,xk)."""
    if k < 1:
        raise PlanError("star needs at least one arm")
    xs = [Variable(f"x{i}") for i in range(1, k + 1)]
    atoms = [Atom(f"R{i}", (x,)) for i, x in enumerate(xs, start=1)]
    atoms.append(Atom("U", tuple(xs)))
    return Query((), tuple(atoms))
