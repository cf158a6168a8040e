"""Reference probabilities: lineage, exact inference, Monte Carlo, k-partite reliability.

Lineage formulas are monotone DNFs over tuple ids. Exact inference
splits a formula into independent components and Shannon-expands each on
its most frequent variable. Monte Carlo draws independent worlds in
fixed-size blocks, each block seeded from its own child of the seed
sequence, so estimates do not depend on the number of worker threads.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .constants import BRUTE_FORCE_LIMIT, DEFAULT_SEED, MC_BLOCK_SIZE, ORACLE_VARIABLE_LIMIT
from .errors import DataError, OracleError, OracleInfeasibleError
from .executor import ior, iter_witnesses
from .model import Database, RelationDef, TupleRow, Value, check_probability, value_sort_key
from .plan import Plan, Scan, make_join, make_project
from .query import Atom, Constant, Query, Variable

logger = logging.getLogger(__name__)

Clauses = frozenset[frozenset[int]]


def minimize_clauses(clauses: Iterable[Iterable[int]]) -> Clauses:
    """Drop clauses that contain another clause."""
    kept: list[frozenset[int]] = []
    for clause in sorted({frozenset(c) for c in clauses}, key=lambda c: (len(c), sorted(c))):
        if not any(other <= clause for other in kept):
            kept.append(clause)
    return frozenset(kept)


@dataclass(frozen=True)
class LineageDNF:
    """A monotone DNF over independent tuple events.

    Attributes:
        clauses: Sets of tuple ids; the formula is the OR of their ANDs.
        probs: Probability of every tuple id that occurs in a clause.
        partition: Relation name of each tuple id, when known.
    """

    clauses: Clauses
    probs: Mapping[int, float] = field(default_factory=dict)
    partition: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "clauses", frozenset(frozenset(c) for c in self.clauses))
        missing = self.variables - set(self.probs)
        if missing:
            raise OracleError(f"no probability for variables {sorted(missing)}")

    @property
    def variables(self) -> frozenset[int]:
        return frozenset().union(*self.clauses) if self.clauses else frozenset()

    @property
    def is_tautology(self) -> bool:
        return frozenset() in self.clauses

    def __len__(self) -> int:
        return len(self.clauses)

    def without_deterministic(self) -> LineageDNF:
        """Substitute variables of probability 1 and minimise."""
        certain = {v for v, p in self.probs.items() if p == 1.0}
        clauses = minimize_clauses(c - certain for c in self.clauses)
        kept = frozenset().union(*clauses) if clauses else frozenset()
        return LineageDNF(
            clauses,
            {v: p for v, p in self.probs.items() if v in kept},
            {v: r for v, r in self.partition.items() if v in kept},
        )

    def render(self, db: Database | None = None) -> str:
        """Clauses joined by ``∨``; with a database, ids print as labels like ``r1s2``."""
        if not self.clauses:
            return "false"
        parts = []
        for clause in sorted(self.clauses, key=lambda c: (len(c), sorted(c))):
            if not clause:
                parts.append("true")
            elif db is not None:
                parts.append("".join(db.tuple_label(v) for v in sorted(clause)))
            else:
                parts.append("·".join(str(v) for v in sorted(clause)))
        return " ∨ ".join(parts)


def lineage(q: Query, db: Database) -> dict[tuple[Value, ...], LineageDNF]:
    """Lineage of every answer of q, keyed by answer tuple in head order.

    Answers without a witness are absent; an empty database gives an empty map.
    """
    clauses: dict[tuple[Value, ...], set[frozenset[int]]] = {}
    probs: dict[int, float] = {}
    for witness in iter_witnesses(q, db):
        clause = frozenset(row.id for row in witness.rows)
        for row in witness.rows:
            probs[row.id] = row.prob
        clauses.setdefault(witness.answer(q.head), set()).add(clause)
    result = {}
    for answer, found in clauses.items():
        used = frozenset().union(*found) if found else frozenset()
        result[answer] = LineageDNF(
            frozenset(found),
            {v: probs[v] for v in sorted(used)},
            {v: db.relation_of(v) for v in sorted(used)},
        )
    return result


# Exact inference


def _components(clauses: Clauses) -> list[Clauses]:
    parent: dict[int, int] = {}

    def find(v: int) -> int:
        parent.setdefault(v, v)
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for clause in clauses:
        members = sorted(clause)
        for other in members[1:]:
            parent[find(other)] = find(members[0])
    groups: dict[int, set[frozenset[int]]] = {}
    for clause in sorted(clauses, key=lambda c: sorted(c)):
        groups.setdefault(find(min(clause)), set()).add(clause)
    return [frozenset(g) for g in groups.values()]


class _ShannonExpander:
    def __init__(self, probs: Mapping[int, float]):
        self.probs = probs
        self.memo: dict[Clauses, float] = {}

    def prob(self, clauses: Clauses):
        if not clauses:
            return 0
        if frozenset() in clauses:
            return 1
        if clauses in self.memo:
            return self.memo[clauses]
        if len(clauses) == 1:
            (clause,) = clauses
            result = math.prod(self.probs[v] for v in sorted(clause))
        else:
            parts = _components(clauses)
            if len(parts) > 1:
                result = 1 - math.prod(1 - self.prob(part) for part in parts)
            else:
                counts = Counter(v for clause in clauses for v in clause)
                var = min(counts, key=lambda v: (-counts[v], v))
                positive = minimize_clauses(c - {var} for c in clauses)
                negative = frozenset(c for c in clauses if var not in c)
                p = self.probs[var]
                result = p * self.prob(positive) + (1 - p) * self.prob(negative)
        self.memo[clauses] = result
        return result


def exact_prob(dnf: LineageDNF, limit: int = ORACLE_VARIABLE_LIMIT):
    """Exact probability of a lineage formula.

    Works with any numeric probability type; ``Fraction`` inputs give an
    exact ``Fraction``.

    Args:
        dnf: The formula.
        limit: Largest number of variables allowed in one independent
            component after simplification.

    Raises:
        OracleInfeasibleError: If a component has more than ``limit`` variables.
    """
    probs = dict(dnf.probs)
    impossible = {v for v, p in probs.items() if p == 0}
    certain = {v for v, p in probs.items() if p == 1}
    clauses = minimize_clauses(c - certain for c in dnf.clauses if not c & impossible)
    if not clauses:
        return 0
    if frozenset() in clauses:
        return 1
    parts = _components(clauses)
    for part in parts:
        size = len(frozenset().union(*part))
        if size > limit:
            raise OracleInfeasibleError(
                f"lineage component has {size} variables, limit is {limit}", variables=size, limit=limit
            )
    expander = _ShannonExpander(probs)
    result = 1 - math.prod(1 - expander.prob(part) for part in parts)
    logger.debug("Exact inference over %d components, %d memo entries", len(parts), len(expander.memo))
    return result


def brute_force_prob(dnf: LineageDNF, limit: int = BRUTE_FORCE_LIMIT):
    """Probability by summing over every possible world.

    Raises:
        OracleInfeasibleError: If the formula has more than ``limit`` variables.
    """
    variables = sorted(dnf.variables)
    if len(variables) > limit:
        raise OracleInfeasibleError(
            f"{len(variables)} variables exceed the brute-force limit {limit}", variables=len(variables), limit=limit
        )
    if dnf.is_tautology:
        return 1
    total = 0
    for world in itertools.product((False, True), repeat=len(variables)):
        present = {v for v, on in zip(variables, world) if on}
        if any(clause <= present for clause in dnf.clauses):
            weight = 1
            for v, on in zip(variables, world):
                weight *= dnf.probs[v] if on else 1 - dnf.probs[v]
            total += weight
    return total


# Monte Carlo


def _count_block(
    clause_columns: list[np.ndarray],
    p: np.ndarray,
    size: int,
    seed: np.random.SeedSequence,
) -> int:
    rng = np.random.Generator(np.random.Philox(seed))
    world = rng.random((size, p.shape[0])) < p
    hit = np.zeros(size, dtype=bool)
    for columns in clause_columns:
        hit |= world[:, columns].all(axis=1)
    return int(hit.sum())


def mc_estimate(
    dnf: LineageDNF,
    samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    block_size: int = MC_BLOCK_SIZE,
) -> float:
    """Monte Carlo estimate of a lineage formula's probability.

    Samples are drawn in blocks of ``block_size``; block ``b`` uses the
    ``b``-th child of ``SeedSequence(seed)`` as a Philox key, so the estimate depends only
    on ``seed``, ``samples`` and ``block_size``.

    Raises:
        OracleError: If ``samples`` or ``block_size`` is below 1.
    """
    if samples < 1:
        raise OracleError(f"samples must be at least 1, got {samples}")
    if block_size < 1:
        raise OracleError(f"block size must be at least 1, got {block_size}")
    if not dnf.clauses:
        return 0.0
    if dnf.is_tautology:
        return 1.0
    variables = sorted(dnf.variables)
    index = {v: i for i, v in enumerate(variables)}
    p = np.array([float(dnf.probs[v]) for v in variables])
    clause_columns = [np.array(sorted(index[v] for v in clause)) for clause in dnf.clauses]
    sizes = [min(block_size, samples - start) for start in range(0, samples, block_size)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if workers <= 1 or len(sizes) == 1:
        hits = [_count_block(clause_columns, p, n, s) for n, s in zip(sizes, seeds)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(lambda args: _count_block(clause_columns, p, *args), zip(sizes, seeds)))
    return sum(hits) / samples


# Text format


def format_dnf(dnf: LineageDNF, db: Database | None = None) -> str:
    """Serialise a formula: ``p <id> <prob> [relation]`` lines, then one clause per line."""
    lines = []
    for v in sorted(dnf.probs):
        line = f"p {v} {dnf.probs[v]!r}"
        if db is not None:
            line += f" {db.relation_of(v)}"
        lines.append(line)
    for clause in sorted(dnf.clauses, key=lambda c: (len(c), sorted(c))):
        lines.append(",".join(str(v) for v in sorted(clause)) if clause else "true")
    return "\n".join(lines) + "\n"


def parse_dnf(text: str, source: str = "<dnf>") -> LineageDNF:
    """Parse the format written by ``format_dnf``.

    Raises:
        DataError: On malformed lines or probabilities outside [0, 1].
    """
    probs: dict[int, float] = {}
    clauses = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("p "):
                parts = line.split()
                if len(parts) not in (3, 4):
                    raise DataError(f"expected 'p <id> <prob> [relation]', got {line!r}", source, number)
                probs[int(parts[1])] = check_probability(float(parts[2]), source, number)
            elif line == "true":
                clauses.append(frozenset())
            else:
                clauses.append(frozenset(int(v) for v in line.split(",")))
        except ValueError:
            raise DataError(f"cannot parse {line!r}", source, number) from None
    try:
        return LineageDNF(frozenset(clauses), probs)
    except OracleError as e:
        raise DataError(str(e), source) from e


# Two-terminal reliability on k-partite graphs


class KPartiteGraph:
    """A layered DAG from a single source to a single target.

    Layer 0 holds the source and layer k the target; every edge runs from
    layer i-1 to layer i and carries an independent probability ``p``.
    """

    def __init__(self, source: str = "s", target: str = "t", k: int = 1):
        if k < 1:
            raise DataError("a k-partite graph needs at least one edge layer")
        self.source = source
        self.target = target
        self.k = k
        self.graph = nx.DiGraph()
        self.graph.add_node(source, layer=0)
        self.graph.add_node(target, layer=k)

    @classmethod
    def from_edges(
        cls,
        layers: Sequence[Sequence[str]],
        edges: Iterable[tuple[str, str, float]],
    ) -> KPartiteGraph:
        """Build a graph from its layers (source first, target last) and weighted edges."""
        if len(layers) < 2 or len(layers[0]) != 1 or len(layers[-1]) != 1:
            raise DataError("first and last layers must hold exactly the source and the target")
        graph = cls(layers[0][0], layers[-1][0], len(layers) - 1)
        for i, nodes in enumerate(layers[1:-1], start=1):
            for node in nodes:
                graph.add_node(node, i)
        for u, v, p in edges:
            graph.add_edge(u, v, p)
        return graph

    def add_node(self, node: str, layer: int) -> None:
        if not 0 < layer < self.k:
            raise DataError(f"inner nodes belong to layers 1..{self.k - 1}, got {layer}")
        if node in self.graph and self.graph.nodes[node]["layer"] != layer:
            raise DataError(f"node {node!r} is already in layer {self.graph.nodes[node]['layer']}")
        self.graph.add_node(node, layer=layer)

    def layer_of(self, node: str) -> int:
        try:
            return self.graph.nodes[node]["layer"]
        except KeyError:
            raise DataError(f"unknown node {node!r}") from None

    def add_edge(self, u: str, v: str, p: float) -> None:
        """Add an edge between consecutive layers.

        Raises:
            DataError: If the nodes are unknown, the layers are not
                consecutive or ``p`` is outside [0, 1].
        """
        if self.layer_of(v) != self.layer_of(u) + 1:
            raise DataError(f"edge {u}->{v} does not join consecutive layers")
        self.graph.add_edge(u, v, p=check_probability(p))

    def nodes_in(self, layer: int) -> list[str]:
        return sorted((n for n, d in self.graph.nodes(data=True) if d["layer"] == layer), key=value_sort_key)

    def edge_layer(self, i: int) -> list[tuple[str, str, float]]:
        """Edges from layer i-1 to layer i, sorted by endpoints."""
        edges = [(u, v, d["p"]) for u, v, d in self.graph.edges(data=True) if self.layer_of(v) == i]
        return sorted(edges, key=lambda e: (value_sort_key(e[0]), value_sort_key(e[1])))

    def to_database(self) -> Database:
        """One probabilistic relation ``Ri(A,B)`` per edge layer."""
        relations = {}
        next_id = 0
        for i in range(1, self.k + 1):
            rows = []
            for u, v, p in self.edge_layer(i):
                rows.append(TupleRow(next_id, (u, v), p))
                next_id += 1
            relations[f"R{i}"] = RelationDef(f"R{i}", ("A", "B"), False, tuple(rows))
        return Database(relations)

    def query(self) -> Query:
        return chain_reliability_query(self.k, self.source, self.target)


def _chain_vars(k: int) -> list[Variable]:
    return [Variable(f"x{i}") for i in range(2, k + 1)]


def chain_reliability_query(k: int, source: str = "s", target: str = "t") -> Query:
    """``R1(s,x2), R2(x2,x3), ..., Rk(xk,t)``: is the target reachable?"""
    if k < 1:
        raise DataError("reliability query needs at least one edge layer")
    terms: list = [Constant(source), *_chain_vars(k), Constant(target)]
    atoms = tuple(Atom(f"R{i}", (terms[i - 1], terms[i])) for i in range(1, k + 1))
    return Query((), atoms, "reach")


def propagation_chain_plan(k: int, source: str = "s", target: str = "t") -> Plan:
    """The plan that propagates reachability forward, one layer at a time."""
    q = chain_reliability_query(k, source, target)
    plan: Plan = Scan(q.atoms[0])
    for atom in q.atoms[1:]:
        joined = make_join(plan, Scan(atom))
        plan = make_project(plan.head_vars, joined)
    return plan


def kpartite_reliability(graph: KPartiteGraph, limit: int = ORACLE_VARIABLE_LIMIT):
    """Exact probability that the target is reachable from the source."""
    if not nx.has_path(graph.graph, graph.source, graph.target):
        return 0.0
    dnf = lineage(graph.query(), graph.to_database()).get((), LineageDNF(frozenset()))
    return exact_prob(dnf, limit)


def kpartite_propagation(graph: KPartiteGraph) -> float:
    """Propagation score: ρ(source)=1, ρ(v) = ior over in-edges of ρ(u)·p(u,v)."""
    rho: dict[str, float] = {graph.source: 1.0}
    for i in range(1, graph.k + 1):
        incoming: dict[str, list[float]] = {}
        for u, v, p in graph.edge_layer(i):
            if u in rho:
                incoming.setdefault(v, []).append(rho[u] * p)
        for node, values in incoming.items():
            rho[node] = ior(values)
    return rho.get(graph.target, 0.0)


def random_layered_graph(
    rng: np.random.Generator,
    layer_sizes: Sequence[int],
    density: float = 1.0,
    low: float = 0.0,
    high: float = 1.0,
) -> KPartiteGraph:
    """A random k-partite graph with ``len(layer_sizes)`` inner layers.

    Args:
        rng: Random generator.
        layer_sizes: Number of nodes per inner layer.
        density: Probability that each possible edge is present.
        low: Lower bound of uniformly drawn edge probabilities.
        high: Upper bound of uniformly drawn edge probabilities.
    """
    layers = [["s"]] + [[f"v{i}_{j}" for j in range(n)] for i, n in enumerate(layer_sizes, start=1)] + [["t"]]
    edges = []
    for before, after in itertools.pairwise(layers):
        for u in before:
            for v in after:
                if rng.random() < density:
                    edges.append((u, v, float(rng.uniform(low, high))))
    return KPartiteGraph.from_edges(layers, edges)
