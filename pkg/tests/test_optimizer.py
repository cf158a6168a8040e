"""Tests for the single plan, shared views and semi-join reduction."""

import numpy as np
import pytest

from propdb.constants import OPT_ALL, OPT_NONE, OPTS
from propdb.executor import eval_plan, propagation_score
from propdb.model import build_database
from propdb.optimizer import common_subplans, evaluate_viewset, semijoin_reduce, single_plan
from propdb.plan import Min, ViewRef, min_node_count
from propdb.planner import chain_query, safe_plan, star_query
from propdb.query import parse_query

from .fixtures import (
    PLAN_X_OUTER,
    PLAN_Y_OUTER,
    TWO_PLAN_QUERY,
    PATH_QUERY,
    DET_STAR_QUERY,
    RANDOM_SHAPES,
    two_plan_db,
    path_db,
    random_instance,
)

DANGLING_QUERY = "q() :- R(x), S(x,y), T(y)"


def dangling_db():
    """R's 2 and T's 3 join nothing."""
    return build_database(
        {
            "R": (("A",), [(1, 0.5), (2, 0.5)]),
            "S": (("A", "B"), [(1, 1, 0.5)]),
            "T": (("B",), [(1, 0.5), (3, 0.5)]),
        }
    )


class TestSinglePlan:
    """Test cases for single_plan."""

    @pytest.mark.unit
    def test_two_plan_query(self):
        """Test the chain gets one min-node over both minimal plans."""
        plan = single_plan(parse_query(TWO_PLAN_QUERY))
        assert isinstance(plan, Min)
        assert sorted(c.render() for c in plan.nodes) == sorted([PLAN_X_OUTER, PLAN_Y_OUTER])

    @pytest.mark.unit
    def test_safe_query(self):
        """Test a hierarchical query's single plan is its safe plan."""
        q = parse_query("q() :- R(x,y), S(y,z), T(y,z,u)")
        assert single_plan(q) == safe_plan(q)
        assert min_node_count(single_plan(q)) == 0

    @pytest.mark.unit
    def test_mins_pushed_down(self):
        """Test the 4-star needs fewer min-nodes than it has minimal plans."""
        plan = single_plan(star_query(4))
        assert 1 <= min_node_count(plan) < 24

    @pytest.mark.unit
    def test_score_matches_two_plan_query(self):
        """Test the single plan scores 169/1024 on the chain instance."""
        assert eval_plan(single_plan(parse_query(TWO_PLAN_QUERY)), two_plan_db()).score() == pytest.approx(169 / 1024)

    @pytest.mark.unit
    def test_deterministic_table(self):
        """Test with T deterministic the chain R,S,T,U scores 21/64."""
        q = parse_query(PATH_QUERY)
        db = path_db()
        assert eval_plan(single_plan(q, db), db).score() == pytest.approx(21 / 64)


class TestCommonSubplans:
    """Test cases for common_subplans and evaluate_viewset."""

    @pytest.mark.unit
    def test_safe_query_has_no_views(self):
        """Test a safe query shares nothing."""
        vs = common_subplans(parse_query("q() :- R(x,y), S(x)"))
        assert vs.views == ()
        assert "main = " in vs.render()

    @pytest.mark.unit
    def test_two_plan_query_has_no_views(self):
        """Test the two chain plans share no sub-plan."""
        assert common_subplans(parse_query(TWO_PLAN_QUERY)).views == ()

    @pytest.mark.unit
    def test_chain4_shares(self):
        """Test the 4-chain computes the R3,R4 sub-plan once."""
        vs = common_subplans(chain_query(4))
        assert vs.names
        assert vs.names == tuple(f"V{i}" for i in range(1, len(vs.views) + 1))
        refs = {n.name for n in vs.main.walk() if isinstance(n, ViewRef)}
        for _, body in vs.views:
            refs |= {n.name for n in body.walk() if isinstance(n, ViewRef)}
        assert refs == set(vs.names)

    @pytest.mark.unit
    @pytest.mark.parametrize("k", [4, 5, 6])
    def test_views_in_dependency_order(self, k):
        """Test every view reads only views materialised before it."""
        vs = common_subplans(chain_query(k))
        for position, (name, body) in enumerate(vs.views):
            earlier = set(vs.names[:position])
            assert {n.name for n in body.walk() if isinstance(n, ViewRef)} <= earlier
            assert name not in earlier

    @pytest.mark.unit
    def test_viewset_scores(self):
        """Test the view pipeline scores like the plain plans."""
        q = chain_query(5)
        db = random_instance(q, np.random.default_rng(5))
        expected = propagation_score(q, db, OPT_NONE).score()
        assert evaluate_viewset(common_subplans(q, db), db).score() == pytest.approx(expected, abs=1e-12)

    @pytest.mark.unit
    def test_star_nested_views(self):
        """Test the 4-variable star shares both two-atom joins and the min-node reading them."""
        vs = common_subplans(parse_query(DET_STAR_QUERY))
        assert vs.names == ("V1", "V2", "V3")
        inner = dict(vs.views)
        for name in ("V1", "V2"):
            assert len(inner[name].scans) == 2
            assert not any(isinstance(n, ViewRef) for n in inner[name].walk())
        assert isinstance(inner["V3"], Min)
        assert {n.name for n in inner["V3"].walk() if isinstance(n, ViewRef)} == {"V1", "V2"}
        assert {n.name for n in vs.main.walk() if isinstance(n, ViewRef)} == {"V1", "V2", "V3"}

    @pytest.mark.integration
    def test_star_views_score(self):
        """Test the nested views score like the plain plans on the star query."""
        q = parse_query(DET_STAR_QUERY)
        rng = np.random.default_rng(23)
        for _ in range(5):
            db = random_instance(q, rng, domain=2)
            expected = propagation_score(q, db, OPT_NONE)
            actual = evaluate_viewset(common_subplans(q), db)
            for answer in expected.answers:
                assert actual.score(answer) == pytest.approx(expected.score(answer), abs=1e-12)


class TestSemijoinReduce:
    """Test cases for semijoin_reduce."""

    @pytest.mark.unit
    def test_drops_dangling_rows(self):
        """Test tuples in no witness are removed and ids are kept."""
        db = dangling_db()
        reduced, q = semijoin_reduce(parse_query(DANGLING_QUERY), db)
        assert q.relations == ("R*", "S*", "T*")
        assert [r.values for r in reduced.relation("R*").rows] == [(1,)]
        assert [r.values for r in reduced.relation("T*").rows] == [(1,)]
        assert reduced.relation("R*").rows[0].id == db.relation("R").rows[0].id

    @pytest.mark.unit
    def test_score_unchanged(self):
        """Test reduction leaves the propagation score alone."""
        db = dangling_db()
        q = parse_query(DANGLING_QUERY)
        reduced, rq = semijoin_reduce(q, db)
        assert propagation_score(rq, reduced).score() == pytest.approx(propagation_score(q, db).score())

    @pytest.mark.unit
    def test_deterministic_flag_carries(self):
        """Test reduced relations stay deterministic."""
        reduced, _ = semijoin_reduce(parse_query(PATH_QUERY), path_db())
        assert reduced.is_deterministic("T*")
        assert not reduced.is_deterministic("U*")

    @pytest.mark.unit
    def test_no_witnesses(self):
        """Test an instance without answers reduces to empty relations."""
        db = build_database({"R": (("A",), [(1, 0.5)]), "S": (("A",), [(2, 0.5)])})
        reduced, q = semijoin_reduce(parse_query("q() :- R(x), S(x)"), db)
        assert all(not reduced.relation(name).rows for name in q.relations)
        assert propagation_score(q, reduced).score() == 0.0


class TestPipelinesAgree:
    """Test cases for optimisations scoring like the plain minimum over plans."""

    @pytest.mark.integration
    @pytest.mark.parametrize("shape", RANDOM_SHAPES)
    def test_random_instances(self, shape):
        """Test all pipelines on 17 random instances per query shape."""
        q = parse_query(shape)
        rng = np.random.default_rng(17)
        for _ in range(17):
            db = random_instance(q, rng)
            expected = propagation_score(q, db, OPT_NONE)
            for opt in OPTS:
                table = propagation_score(q, db, opt)
                assert table.columns == expected.columns
                assert table.answers == expected.answers
                for answer in expected.answers:
                    assert table.score(answer) == pytest.approx(expected.score(answer), abs=1e-12)

    @pytest.mark.unit
    def test_all_on_two_plan_query(self):
        """Test the combined pipeline on the chain instance."""
        assert propagation_score(parse_query(TWO_PLAN_QUERY), two_plan_db(), OPT_ALL).score() == pytest.approx(
            169 / 1024
        )
