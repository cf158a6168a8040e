"""Instances and helpers shared by the test modules."""

import itertools
import math
from pathlib import Path

import numpy as np

from propdb.metrics import Ranking, textbook_ap
from propdb.model import Database, FunctionalDependency, RelationDef, build_database, dump_database
from propdb.oracle import KPartiteGraph
from propdb.query import Query, Variable

HALF = 0.5

TWO_PLAN_QUERY = "q() :- R(x), S(x), T(x,y), U(y)"
PLAN_X_OUTER = "proj[x] join( R(x), S(x), proj[y] join( T(x,y), U(y) ) )"
PLAN_Y_OUTER = "proj[y] join( proj[x] join( R(x), S(x), T(x,y) ), U(y) )"

PATH_QUERY = "q() :- R(x), S(x,y), T(y,z), U(z)"
DET_PATH_QUERY = "q() :- R(x), S(x,z), T(y,z), U(y)"
PREJOINED_QUERY = "q() :- R(x), N(x,y), U(y)"
DET_STAR_QUERY = "q() :- R(x,z), T(z), S(y,u), U(u), M(x,y,z,u)"
FD_QUERY = "q() :- R(x,y,z), S(x), U(x,z)"
FD_STAR_QUERY = "q() :- R(x,z), S(y,u), T(z), U(u), M(x,y,z,u)"
DET_CHAIN_QUERY = "q() :- R(x), S(x,y), T(y)"

# Shapes for randomised property checks: at most four atoms, three variables.
RANDOM_SHAPES = (
    "q() :- R(x), S(x,y), T(y)",
    "q() :- R(x), S(x), T(x,y), U(y)",
    "q(x) :- R(x), S(x,y), T(y)",
    "q() :- R(x,y), S(y,z), T(z,x)",
    "q(z) :- R(x), S(x,y), T(y,z)",
    "q() :- R(x,y), S(y), T(x)",
)


def two_plan_db(p: float = HALF) -> Database:
    """T={(1,1),(1,2),(2,2)} and R=S=U={1,2}, every tuple with probability ``p``."""
    return build_database(
        {
            "R": (("A",), [(1, p), (2, p)]),
            "S": (("A",), [(1, p), (2, p)]),
            "T": (("A", "B"), [(1, 1, p), (1, 2, p), (2, 2, p)]),
            "U": (("B",), [(1, p), (2, p)]),
        }
    )


def path_db(deterministic_t: bool = True) -> Database:
    t_rows = [("c", "e"), ("c", "f")] if deterministic_t else [("c", "e", HALF), ("c", "f", HALF)]
    return build_database(
        {
            "R": (("A",), [("a", HALF), ("b", HALF)]),
            "S": (("A", "B"), [("a", "c", HALF), ("b", "c", HALF)]),
            "T": (("B", "C"), t_rows),
            "U": (("C",), [("e", HALF), ("f", HALF)]),
        },
        deterministic=("T",) if deterministic_t else (),
    )


def det_path_db() -> Database:
    return build_database(
        {
            "R": (("A",), [("a", HALF), ("b", HALF)]),
            "S": (("A", "C"), [("a", "c"), ("b", "c")]),
            "T": (("B", "C"), [("e", "c"), ("f", "c")]),
            "U": (("B",), [("e", HALF), ("f", HALF)]),
        },
        deterministic=("S", "T"),
    )


def prejoined_db() -> Database:
    """The instance above with S and T joined into one deterministic table N."""
    return build_database(
        {
            "R": (("A",), [("a", HALF), ("b", HALF)]),
            "N": (("A", "B"), [("a", "e"), ("a", "f"), ("b", "e"), ("b", "f")]),
            "U": (("B",), [("e", HALF), ("f", HALF)]),
        },
        deterministic=("N",),
    )


def det_chain_db() -> Database:
    return build_database(
        {
            "R": (("A",), [("a", HALF)]),
            "S": (("A", "B"), [("a", "b"), ("a", "c")]),
            "T": (("B",), [("b", HALF), ("c", HALF)]),
        },
        deterministic=("S",),
    )


def schema_db(tables: dict[str, tuple[str, ...]], deterministic=(), fds=()) -> Database:
    """Relations without rows, for planning only."""
    return Database(
        {name: RelationDef(name, attrs, name in deterministic) for name, attrs in tables.items()},
        tuple(fds),
    )


FD_STAR_FDS = (
    FunctionalDependency("R", ("B",), ("A",)),
    FunctionalDependency("S", ("D",), ("C",)),
)
FD_STAR_TABLES = {
    "R": ("A", "B"),
    "S": ("C", "D"),
    "T": ("B",),
    "U": ("D",),
    "M": ("A", "C", "B", "D"),
}


def fd_star_schema(deterministic=()) -> Database:
    return schema_db(FD_STAR_TABLES, deterministic, FD_STAR_FDS)


def fd_star_random(rng: np.random.Generator, deterministic=(), domain: int = 2) -> Database:
    """Random data for the FD query where R's z determines x and S's u determines y."""
    values = list(range(domain))

    def prob() -> float:
        return float(1.0 - rng.random())

    def rows(name, candidates):
        kept = [c for c in candidates if rng.random() < 0.7]
        if name in deterministic:
            return kept
        return [(*c, prob()) for c in kept]

    x_of_z = {z: int(rng.integers(domain)) for z in values}
    y_of_u = {u: int(rng.integers(domain)) for u in values}
    tables = {
        "R": (("A", "B"), rows("R", [(x_of_z[z], z) for z in values])),
        "S": (("C", "D"), rows("S", [(y_of_u[u], u) for u in values])),
        "T": (("B",), rows("T", [(z,) for z in values])),
        "U": (("D",), rows("U", [(u,) for u in values])),
        "M": (("A", "C", "B", "D"), rows("M", [(x_of_z[z], y_of_u[u], z, u) for z in values for u in values])),
    }
    return build_database(tables, deterministic, FD_STAR_FDS)


def random_instance(
    q: Query,
    rng: np.random.Generator,
    domain: int = 3,
    density: float = 0.5,
    deterministic=(),
) -> Database:
    """Random rows over ``range(domain)`` for every relation of ``q``."""
    tables = {}
    for atom in q.atoms:
        arity = len(atom.args)
        rows = []
        for values in itertools.product(range(domain), repeat=arity):
            if rng.random() < density:
                if atom.relation in deterministic:
                    rows.append(values)
                else:
                    rows.append((*values, float(1.0 - rng.random())))
        tables[atom.relation] = (tuple(f"A{i}" for i in range(arity)), rows)
    return build_database(tables, deterministic)


def diamond_graph(p: float = HALF) -> KPartiteGraph:
    """s→a, a→b, a→c, b→t, c→t."""
    return KPartiteGraph.from_edges(
        [["s"], ["a"], ["b", "c"], ["t"]],
        [("s", "a", p), ("a", "b", p), ("a", "c", p), ("b", "t", p), ("c", "t", p)],
    )


def write_instance(db: Database, directory: Path) -> tuple[Path, Path]:
    """Dump a database; returns ``(schema file, data directory)``."""
    dump_database(db, directory)
    return directory / "schema.txt", directory


def var(*names: str) -> frozenset[Variable]:
    return frozenset(Variable(n) for n in names)


def permutation_ap(rk: Ranking, k: int) -> float:
    """Mean textbook AP@k over every order that breaks the ranking's ties."""
    groups = rk.tie_groups()
    total = 0.0
    count = 0
    for orders in itertools.product(*(itertools.permutations(g) for g in groups)):
        flat = [a for order in orders for a in order]
        total += textbook_ap([a in rk.relevant for a in flat], len(rk.relevant), k)
        count += 1
    return total / count


def sampled_ap(rk: Ranking, k: int, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Mean and standard error of AP@k over randomly broken ties."""
    groups = rk.tie_groups()
    values = []
    for _ in range(samples):
        flat = [a for g in groups for a in (g[i] for i in rng.permutation(len(g)))]
        values.append(textbook_ap([a in rk.relevant for a in flat], len(rk.relevant), k))
    mean = math.fsum(values) / samples
    variance = math.fsum((v - mean) ** 2 for v in values) / (samples - 1)
    return mean, math.sqrt(variance / samples)

