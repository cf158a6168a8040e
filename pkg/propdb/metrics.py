"""Ranking quality: tie-aware AP@k, MAP and baselines."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .constants import DEFAULT_AP_K
from .errors import MetricsError
from .model import Database, Value, value_sort_key
from .oracle import lineage
from .query import Query

Answer = tuple[Value, ...]


@dataclass(frozen=True)
class Ranking:
    """Scored answers plus the set of answers that count as relevant."""

    items: tuple[tuple[Answer, float], ...]
    relevant: frozenset[Answer] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((tuple(a), s) for a, s in self.items))
        object.__setattr__(self, "relevant", frozenset(tuple(a) for a in self.relevant))
        answers = [a for a, _ in self.items]
        if len(set(answers)) != len(answers):
            raise MetricsError("ranking lists an answer twice")
        for answer, score in self.items:
            if not math.isfinite(score):
                raise MetricsError(f"score of {answer} is not finite: {score!r}")

    def tie_groups(self) -> list[list[Answer]]:
        """Answers grouped by equal score, best group first."""
        ordered = sorted(self.items, key=lambda item: (-item[1], tuple(value_sort_key(v) for v in item[0])))
        return [[a for a, _ in group] for _, group in itertools.groupby(ordered, key=lambda item: item[1])]

    def with_relevant(self, relevant: Iterable[Answer]) -> Ranking:
        return Ranking(self.items, frozenset(relevant))


def textbook_ap(relevance: Sequence[bool], n_relevant: int, k: int = DEFAULT_AP_K) -> float:
    """AP@k of one fixed order: sum of P@i over relevant positions i ≤ k, over min(k, n_relevant)."""
    if n_relevant < 1:
        raise MetricsError("AP needs at least one relevant answer")
    if k < 1:
        raise MetricsError(f"k must be at least 1, got {k}")
    hits = 0
    total = 0.0
    for i, is_relevant in enumerate(relevance[:k], start=1):
        if is_relevant:
            hits += 1
            total += hits / i
    return total / min(k, n_relevant)


def ap_at_k(rk: Ranking, k: int = DEFAULT_AP_K) -> float:
    """Expected AP@k when tied answers are ordered uniformly at random.

    Inside a tie group of size g with r relevant answers, position j is
    relevant with probability r/g, and given that, the j-1 positions before
    it in the group hold (j-1)(r-1)/(g-1) relevant answers on average.

    Raises:
        MetricsError: If nothing is relevant or ``k`` is below 1.
    """
    if not rk.relevant:
        raise MetricsError("AP needs at least one relevant answer")
    if k < 1:
        raise MetricsError(f"k must be at least 1, got {k}")
    total = 0.0
    position = 0
    before = 0
    for group in rk.tie_groups():
        if position >= k:
            break
        g = len(group)
        r = sum(1 for a in group if a in rk.relevant)
        if r:
            for j in range(1, min(g, k - position) + 1):
                earlier = (j - 1) * (r - 1) / (g - 1) if g > 1 else 0.0
                total += (r / g) * (before + 1 + earlier) / (position + j)
        position += g
        before += r
    return total / min(k, len(rk.relevant))


def map_over(rankings: Sequence[Ranking], k: int = DEFAULT_AP_K) -> float:
    """Mean AP@k over rankings.

    Raises:
        MetricsError: If ``rankings`` is empty.
    """
    if not rankings:
        raise MetricsError("MAP over an empty list of rankings")
    return math.fsum(ap_at_k(rk, k) for rk in rankings) / len(rankings)


def random_ap(n_answers: int, n_relevant: int, k: int = DEFAULT_AP_K) -> float:
    """AP@k of a ranking that ties every answer: the random-order baseline."""
    if not 0 < n_relevant <= n_answers:
        raise MetricsError(f"need 0 < relevant ≤ answers, got {n_relevant} of {n_answers}")
    items = tuple(((i,), 0.0) for i in range(n_answers))
    return ap_at_k(Ranking(items, frozenset((i,) for i in range(n_relevant))), k)


def ground_truth_relevant(scores: Mapping[Answer, float], k: int = DEFAULT_AP_K) -> frozenset[Answer]:
    """The top-k answers by score, plus every answer tied with the k-th."""
    if k < 1:
        raise MetricsError(f"k must be at least 1, got {k}")
    ordered = sorted(scores.items(), key=lambda item: -item[1])
    if len(ordered) <= k:
        return frozenset(a for a, _ in ordered)
    boundary = ordered[k - 1][1]
    return frozenset(a for a, s in ordered if s >= boundary)


def ranking_from_scores(scores: Mapping[Answer, float], relevant: Iterable[Answer] = ()) -> Ranking:
    return Ranking(tuple(scores.items()), frozenset(relevant))


def rank_by_lineage_size(q: Query, db: Database, relevant: Iterable[Answer] = ()) -> Ranking:
    """Score each answer by the number of clauses in its lineage."""
    return Ranking(
        tuple((answer, float(len(dnf))) for answer, dnf in lineage(q, db).items()),
        frozenset(relevant),
    )


def relative_error(rho: float, r: float) -> float:
    """(ρ − r) / r for a score ρ and the reliability r it approximates.

    Raises:
        MetricsError: If ``r`` is 0.
    """
    if r == 0:
        raise MetricsError("relative error against a zero reliability")
    return (rho - r) / r
