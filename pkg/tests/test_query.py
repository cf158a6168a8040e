"""Tests for query parsing and structural analysis."""

import itertools

import numpy as np
import pytest

from propdb.dissociation import Dissociation
from propdb.errors import AllDeterministicError, QueryError
from propdb.planner import enumerate_minimal_plans
from propdb.query import (
    Atom,
    Constant,
    Predicate,
    Query,
    Variable,
    bind_fds,
    connected_components,
    format_query,
    is_connected,
    is_hierarchical,
    parse_query,
    render_incidence_matrix,
    separator_vars,
    top_sets,
)

from .fixtures import DET_STAR_QUERY, PATH_QUERY, two_plan_db, fd_star_schema, schema_db, var


class TestParseQuery:
    """Test cases for parse_query."""

    @pytest.mark.unit
    def test_head_and_atoms(self):
        """Test a query with a head variable parses."""
        q = parse_query("q(x) :- R(x,y), S(x)")
        assert q.head == (Variable("x"),)
        assert q.relations == ("R", "S")
        assert q.existential_vars == var("y")

    @pytest.mark.unit
    def test_boolean_query(self):
        """Test an empty head makes a Boolean query."""
        q = parse_query("q() :- R(x), S(x)")
        assert q.is_boolean

    @pytest.mark.unit
    def test_self_join(self):
        """Test a relation used twice is rejected."""
        with pytest.raises(QueryError, match="self-join"):
            parse_query("q() :- R(x), R(y)")

    @pytest.mark.unit
    def test_unsafe_head(self):
        """Test a head variable missing from the body is rejected."""
        with pytest.raises(QueryError, match="unsafe head variable"):
            parse_query("q(z) :- R(x,y)")

    @pytest.mark.unit
    def test_syntax_error_position(self):
        """Test syntax errors carry the offending offset."""
        with pytest.raises(QueryError) as exc:
            parse_query("q() :- R(x,, y)")
        assert exc.value.position == 11

    @pytest.mark.unit
    def test_unknown_relation_and_arity(self):
        """Test schema checks for relation names and arity."""
        db = two_plan_db()
        with pytest.raises(QueryError, match="unknown relation"):
            parse_query("q() :- Z(x)", db)
        with pytest.raises(QueryError, match="arity"):
            parse_query("q() :- T(x)", db)

    @pytest.mark.unit
    def test_constants(self):
        """Test quoted strings and integers become constants."""
        q = parse_query("q(y) :- R('a b', y, -3)")
        assert q.atoms[0].args == (Constant("a b"), Variable("y"), Constant(-3))

    @pytest.mark.unit
    def test_predicates_attach_to_atoms(self):
        """Test comparisons become scan predicates on every atom binding the variable."""
        q = parse_query("q(x) :- R(x, s), S(x, n), s <= 5, n like '%red%'")
        assert q.atom("R").predicates == (Predicate(1, "<=", 5),)
        assert q.atom("S").predicates == (Predicate(1, "like", "%red%"),)

    @pytest.mark.unit
    def test_predicate_typing(self):
        """Test ordering needs integers and like needs strings."""
        with pytest.raises(QueryError, match="integer"):
            parse_query("q() :- R(x), x < 'a'")
        with pytest.raises(QueryError, match="string"):
            parse_query("q() :- R(x), x like 3")

    @pytest.mark.unit
    def test_predicate_on_unbound_variable(self):
        """Test a predicate must constrain a body variable."""
        with pytest.raises(QueryError, match="no atom binds"):
            parse_query("q() :- R(x), z = 1")

    @pytest.mark.unit
    def test_format_round_trip(self):
        """Test formatting and re-parsing gives the same query."""
        text = "q(x) :- R(x, y, 'a'), S(x), y >= 2"
        q = parse_query(text)
        assert format_query(q) == text
        assert parse_query(format_query(q)) == q


class TestPredicates:
    """Test cases for scan predicate evaluation."""

    @pytest.mark.unit
    def test_like(self):
        """Test like matches the whole value with % and _ wildcards."""
        p = Predicate(0, "like", "%red_")
        assert p.holds("dark reds")
        assert not p.holds("red")
        assert not p.holds(7)

    @pytest.mark.unit
    def test_ordering_ignores_strings(self):
        """Test ordering predicates never match strings."""
        p = Predicate(0, "<", 5)
        assert p.holds(4)
        assert not p.holds("4")


class TestHierarchy:
    """Test cases for is_hierarchical."""

    @pytest.mark.unit
    def test_hierarchical(self):
        """Test nested subgoal sets are hierarchical."""
        assert is_hierarchical(parse_query("q() :- R(x,y), S(y,z), T(y,z,u)"))

    @pytest.mark.unit
    def test_not_hierarchical(self):
        """Test overlapping subgoal sets are not hierarchical."""
        assert not is_hierarchical(parse_query("q() :- R(x,y), S(y,z), T(z,u)"))

    @pytest.mark.unit
    def test_single_atom(self):
        """Test one atom is always hierarchical."""
        assert is_hierarchical(parse_query("q() :- R(x)"))

    @pytest.mark.unit
    def test_head_variables_are_constants(self):
        """Test only existential variables count."""
        assert not is_hierarchical(parse_query("q() :- R(x), S(x,y), T(y)"))
        assert is_hierarchical(parse_query("q(y) :- R(x), S(x,y), T(y)"))


class TestComponents:
    """Test cases for connected_components and top_sets."""

    BRANCHING_QUERY = "q(v) :- R(x,y,u), S(y,z,u,v), T(z,v)"

    @pytest.mark.unit
    def test_disjoint_variables(self):
        """Test atoms without shared variables split."""
        parts = connected_components(parse_query("q() :- R(x), S(y)"))
        assert [p.relations for p in parts] == [("R",), ("S",)]

    @pytest.mark.unit
    def test_connected(self):
        """Test a query linked through existential variables is one component."""
        assert is_connected(parse_query(self.BRANCHING_QUERY))

    @pytest.mark.unit
    def test_head_variable_splits(self):
        """Test moving z to the head splits off T with head = HVar ∩ Var."""
        q = parse_query(self.BRANCHING_QUERY).with_head(var("z"))
        parts = connected_components(q)
        assert [p.relations for p in parts] == [("R", "S"), ("T",)]
        assert parts[1].head_vars == var("z", "v")

    @pytest.mark.unit
    def test_top_sets_branching(self):
        """Test the two top sets {z} and {y,u}."""
        assert set(top_sets(parse_query(self.BRANCHING_QUERY))) == {var("z"), var("y", "u")}

    @pytest.mark.unit
    def test_top_sets_chain(self):
        """Test the chain R(x),S(x,y),T(y) has top sets {x} and {y}."""
        assert set(top_sets(parse_query("q() :- R(x), S(x,y), T(y)"))) == {var("x"), var("y")}

    @pytest.mark.unit
    def test_top_sets_three(self):
        """Test R(x),S(x,y),T(y,z),U(z) has three top sets."""
        assert set(top_sets(parse_query(PATH_QUERY))) == {var("x"), var("y"), var("z")}

    @pytest.mark.unit
    def test_single_atom_top_set(self):
        """Test one atom has EVar as its only top set."""
        assert top_sets(parse_query("q(x) :- R(x,y,z)")) == [var("y", "z")]

    @pytest.mark.unit
    def test_top_sets_are_minimal_separators(self):
        """Test every top set disconnects and none of its proper subsets does."""
        q = parse_query(DET_STAR_QUERY)
        found = top_sets(q)
        for a, b in itertools.permutations(found, 2):
            assert not a < b
        for y in found:
            assert not is_connected(q.with_head(y))
            for size in range(len(y)):
                for subset in itertools.combinations(sorted(y), size):
                    assert is_connected(q.with_head(subset))


class TestSeparatorVars:
    """Test cases for separator_vars."""

    @pytest.mark.unit
    def test_none_shared(self):
        """Test no variable occurs in every probabilistic atom of the chain."""
        q = parse_query("q() :- R(x), S(x), T(x,y), U(y)")
        assert separator_vars(q, two_plan_db()) == frozenset()

    @pytest.mark.unit
    def test_deterministic_atoms_ignored(self):
        """Test u is the only separator with R and T deterministic."""
        db = schema_db(
            {"R": ("A", "B"), "T": ("B",), "S": ("C", "D"), "U": ("D",), "M": ("A", "C", "B", "D")},
            deterministic=("R", "T"),
        )
        assert separator_vars(parse_query(DET_STAR_QUERY), db) == var("u")

    @pytest.mark.unit
    def test_universal_variable(self):
        """Test a variable in every atom is a separator."""
        db = schema_db({"R": ("A",), "S": ("A", "B")})
        assert separator_vars(parse_query("q() :- R(x), S(x,y)"), db) == var("x")

    @pytest.mark.unit
    def test_all_deterministic(self):
        """Test an all-deterministic query signals the caller."""
        db = schema_db({"R": ("A",)}, deterministic=("R",))
        with pytest.raises(AllDeterministicError):
            separator_vars(parse_query("q() :- R(x)"), db)


class TestBindFds:
    """Test cases for bind_fds."""

    @pytest.mark.unit
    def test_binds_to_variables(self):
        """Test attribute FDs map onto each atom's variables."""
        q = parse_query("q() :- R(x,z), S(y,u), T(z), U(u), M(x,y,z,u)")
        bound = bind_fds(q, fd_star_schema())
        assert [(fd.atom, fd.determinant, fd.dependent) for fd in bound] == [
            (0, var("z"), var("x")),
            (1, var("u"), var("y")),
        ]

    @pytest.mark.unit
    def test_constant_dependent_dropped(self):
        """Test an FD whose dependent is a constant binds nothing."""
        q = parse_query("q() :- R(1, z), S(y,u), T(z), U(u), M(1,y,z,u)")
        assert [fd.atom for fd in bind_fds(q, fd_star_schema())] == [1]


class TestIncidenceMatrix:
    """Test cases for render_incidence_matrix."""

    QUERY = "q() :- R(x), S(x,y), T(y)"

    @pytest.mark.unit
    def test_original(self):
        """Test a 3×2 grid of original occurrences."""
        text = render_incidence_matrix(parse_query(self.QUERY))
        lines = text.splitlines()
        assert lines[0].split() == ["|", "x", "y"]
        assert lines[2:] == ["R | ∘", "S | ∘ ∘", "T |   ∘"]

    @pytest.mark.unit
    def test_dissociated(self):
        """Test R dissociated on y gains a dot in column y."""
        q = parse_query(self.QUERY)
        text = render_incidence_matrix(q, Dissociation.of(q, {"R": "y"}))
        assert text.splitlines()[2] == "R | ∘ •"

    @pytest.mark.unit
    def test_starred(self):
        """Test reliability-preserving cells are marked with a star."""
        q = parse_query(self.QUERY)
        delta = Dissociation.of(q, {"R": "y"})
        text = render_incidence_matrix(q, delta, {(0, Variable("y"))})
        assert text.splitlines()[2] == "R | ∘ ⋆"

    @pytest.mark.unit
    def test_single_atom(self):
        """Test one atom renders one row."""
        assert len(render_incidence_matrix(parse_query("q() :- R(x)")).splitlines()) == 3


class TestDichotomy:
    """Test cases for hierarchical queries having exactly one minimal plan."""

    @pytest.mark.integration
    def test_random_queries(self):
        """Test random queries up to five atoms and five variables."""
        rng = np.random.default_rng(11)
        names = [Variable(f"v{i}") for i in range(5)]
        for _ in range(150):
            atoms = []
            for i in range(int(rng.integers(1, 6))):
                size = int(rng.integers(1, 4))
                chosen = sorted({names[int(j)] for j in rng.integers(0, 5, size=size)})
                atoms.append(Atom(f"R{i}", tuple(chosen)))
            q = Query((), tuple(atoms))
            assert is_hierarchical(q) == (len(enumerate_minimal_plans(q)) == 1)
