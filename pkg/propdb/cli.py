"""Command-line front end: ``propdb plans|eval|compare|dissociate``."""

from __future__ import annotations

import argparse
import io
import logging
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from .constants import (
    APP_NAME,
    DEFAULT_AP_K,
    DEFAULT_MC_SAMPLES,
    DEFAULT_SEED,
    EXIT_DATA,
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_ORACLE,
    EXIT_USAGE,
    LATTICE_LIMIT,
    METHOD_EXACT,
    METHOD_LINEAGE_RANK,
    METHOD_MC,
    METHOD_PLAN_PREFIX,
    METHOD_PROPAGATION,
    METHODS,
    MSG_SAFE,
    OPT_NONE,
    OPTS,
    ORACLE_VARIABLE_LIMIT,
    VERSION,
)
from .dissociation import lattice_cells, plan_to_dissociation, reliability_preserving
from .errors import DataError, OracleInfeasibleError, PropDBError, QueryError, UsageError
from .executor import AnswerTable, eval_plan, propagation_score
from .metrics import ap_at_k, ground_truth_relevant, map_over, ranking_from_scores
from .model import Database, TupleRow, load_database_dir, load_schema_only
from .optimizer import common_subplans
from .oracle import exact_prob, lineage, mc_estimate
from .planner import count_safe_dissociations, enumerate_plans_fd, safe_dissociations
from .query import Query, parse_query, render_incidence_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one CLI invocation."""

    command: str
    schema: Path
    query: str
    data: Path | None = None
    method: str = METHOD_PROPAGATION
    opt: str = OPT_NONE
    samples: int = DEFAULT_MC_SAMPLES
    seed: int = DEFAULT_SEED
    limit: int = ORACLE_VARIABLE_LIMIT
    workers: int = 1
    trials: int = 1
    k: int = DEFAULT_AP_K
    matrices: bool = False
    emit_views: bool = False
    timing: bool = True
    output: Path | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        """Build a configuration from parsed arguments and validate it."""
        cfg = cls(
            command=args.command,
            schema=Path(args.schema),
            query=args.query,
            data=Path(args.data) if args.data else None,
            method=getattr(args, "method", METHOD_PROPAGATION),
            opt=getattr(args, "opt", OPT_NONE),
            samples=getattr(args, "samples", DEFAULT_MC_SAMPLES),
            seed=getattr(args, "seed", DEFAULT_SEED),
            limit=getattr(args, "limit", ORACLE_VARIABLE_LIMIT),
            workers=getattr(args, "workers", 1),
            trials=getattr(args, "trials", 1),
            k=getattr(args, "k", DEFAULT_AP_K),
            matrices=getattr(args, "matrices", False),
            emit_views=getattr(args, "emit_views", False),
            timing=not getattr(args, "no_timing", False),
            output=Path(args.output) if getattr(args, "output", None) else None,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Check option combinations.

        Raises:
            UsageError: On an unknown method or pipeline, a pipeline with a
                method other than propagation, or a count below 1.
        """
        if self.method not in METHODS:
            suffix = self.method[len(METHOD_PLAN_PREFIX) :] if self.method.startswith(METHOD_PLAN_PREFIX) else ""
            if not (suffix.isdigit() and int(suffix) >= 1):
                raise UsageError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)} or plan:<i>")
        if self.opt not in OPTS:
            raise UsageError(f"unknown optimisation {self.opt!r}; choose from {', '.join(OPTS)}")
        if self.opt != OPT_NONE and self.method != METHOD_PROPAGATION:
            raise UsageError("--opt applies only to --method propagation")
        for name in ("samples", "limit", "workers", "trials", "k"):
            value = getattr(self, name)
            if value < 1:
                raise UsageError(f"--{name} must be at least 1, got {value}")
        if self.command in ("eval", "compare") and self.data is None:
            raise UsageError(f"{self.command} needs --data")


def read_query_text(value: str) -> str:
    """Accept query text or a path to a file holding it."""
    path = Path(value)
    if len(value) < 4096 and ":-" not in value and path.is_file():
        return path.read_text(encoding="utf-8").strip()
    return value


def load_inputs(cfg: RunConfig) -> tuple[Database, Query]:
    """Load the database (or only the schema) and parse the query against it."""
    if cfg.data is not None:
        db = load_database_dir(cfg.schema, cfg.data)
    else:
        try:
            text = cfg.schema.read_text(encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot read schema: {e}", str(cfg.schema)) from e
        db = load_schema_only(text, str(cfg.schema))
    return db, parse_query(read_query_text(cfg.query), db)


# Subcommands


def cmd_plans(cfg: RunConfig) -> str:
    """List the minimal plans, optionally with incidence matrices and views."""
    db, q = load_inputs(cfg)
    plans = enumerate_plans_fd(q, db)
    lines = [f"# {q}", f"# {len(plans)} minimal plan{'s' if len(plans) != 1 else ''}"]
    if len(plans) == 1:
        lines.append(MSG_SAFE)
    for i, plan in enumerate(plans, start=1):
        lines.append(f"{i}\t{plan.render()}")
        if cfg.matrices:
            delta = plan_to_dissociation(q, plan)
            lines.append(render_incidence_matrix(q, delta, reliability_preserving(q, delta, db)))
            lines.append("")
    if cfg.emit_views:
        lines.append("# views")
        lines.append(common_subplans(q, db).render())
    return "\n".join(lines).rstrip("\n") + "\n"


def _boolean_default(q: Query, rows: dict) -> dict:
    if q.is_boolean and not rows:
        return {(): 0.0}
    return rows


def score_answers(q: Query, db: Database, cfg: RunConfig, method: str | None = None) -> AnswerTable:
    """Score every answer of q with one method."""
    method = method or cfg.method
    columns = tuple(v.name for v in q.head)
    if method == METHOD_PROPAGATION:
        return propagation_score(q, db, cfg.opt, cfg.workers)
    if method.startswith(METHOD_PLAN_PREFIX):
        plans = enumerate_plans_fd(q, db)
        index = int(method[len(METHOD_PLAN_PREFIX) :])
        if index > len(plans):
            raise UsageError(f"query has {len(plans)} minimal plans, asked for plan {index}")
        return eval_plan(plans[index - 1], db).reorder(columns)
    formulas = lineage(q, db)
    if method == METHOD_EXACT:
        rows = {a: float(exact_prob(dnf, cfg.limit)) for a, dnf in formulas.items()}
    elif method == METHOD_MC:
        rows = {a: mc_estimate(dnf, cfg.samples, cfg.seed, cfg.workers) for a, dnf in formulas.items()}
    elif method == METHOD_LINEAGE_RANK:
        rows = {a: float(len(dnf)) for a, dnf in formulas.items()}
    else:
        raise UsageError(f"unknown method {method!r}")
    return AnswerTable(columns, _boolean_default(q, rows))


def _write_output(cfg: RunConfig, text: str) -> str:
    if cfg.output is not None:
        cfg.output.write_text(text, encoding="utf-8")
    return text


def cmd_eval(cfg: RunConfig) -> str:
    """Score the answers and return them as ranked TSV."""
    db, q = load_inputs(cfg)
    table = score_answers(q, db, cfg)
    logger.info("Scored %d answers with %s", len(table), cfg.method)
    return _write_output(cfg, table.to_tsv())


def randomize_probabilities(db: Database, rng: np.random.Generator) -> Database:
    """Redraw every probabilistic tuple's probability uniformly from (0, 1]."""
    relations = []
    for relation in db.relations.values():
        if relation.deterministic:
            relations.append(relation)
            continue
        probs = 1.0 - rng.random(len(relation.rows))
        rows = (TupleRow(row.id, row.values, float(p)) for row, p in zip(relation.rows, probs))
        relations.append(relation.with_rows(rows))
    return db.with_relations(relations)


COMPARED_METHODS = (METHOD_PROPAGATION, METHOD_MC, METHOD_LINEAGE_RANK)


def _timed(fn: Callable[[], AnswerTable]) -> tuple[AnswerTable, float]:
    start = time.perf_counter()
    table = fn()
    return table, (time.perf_counter() - start) * 1000.0


def cmd_compare(cfg: RunConfig) -> str:
    """Rank answers with each method and score them by AP@k against the exact ranking.

    With one trial the loaded probabilities are used; with more, every trial
    redraws them from a generator seeded with ``--seed``.
    """
    db, q = load_inputs(cfg)
    rng = np.random.default_rng(cfg.seed)
    rankings: dict[str, list] = {m: [] for m in COMPARED_METHODS}
    trial_lines = ["\t".join(["trial", "method", f"ap@{cfg.k}", "runtime_ms"])]
    first_scores: dict[str, AnswerTable] = {}
    for trial in range(cfg.trials):
        trial_db = db if cfg.trials == 1 else randomize_probabilities(db, rng)
        truth, truth_ms = _timed(lambda: score_answers(q, trial_db, cfg, METHOD_EXACT))
        relevant = ground_truth_relevant(dict(truth.rows), cfg.k)
        scores = {METHOD_EXACT: truth}
        timings = {METHOD_EXACT: truth_ms}
        for method in COMPARED_METHODS:
            scores[method], timings[method] = _timed(lambda m=method: score_answers(q, trial_db, cfg, m))
        for method in (METHOD_EXACT, *COMPARED_METHODS):
            ranking = ranking_from_scores(dict(scores[method].rows), relevant)
            if method in rankings:
                rankings[method].append(ranking)
            runtime = f"{timings[method]:.3f}" if cfg.timing else "-"
            trial_lines.append(f"{trial}\t{method}\t{ap_at_k(ranking, cfg.k)!r}\t{runtime}")
        if trial == 0:
            first_scores = scores
    summary = ["\t".join(["method", f"map@{cfg.k}"])]
    for method in COMPARED_METHODS:
        summary.append(f"{method}\t{map_over(rankings[method], cfg.k)!r}")
    truth = first_scores[METHOD_EXACT]
    methods = (METHOD_EXACT, *COMPARED_METHODS)
    answers = ["\t".join(truth.columns + methods)]
    for answer, _ in truth.ranked():
        cells = [str(v) for v in answer] + [repr(first_scores[m].score(answer)) for m in methods]
        answers.append("\t".join(cells))
    text = "\n".join(trial_lines) + "\n\n" + "\n".join(summary) + "\n\n" + "\n".join(answers) + "\n"
    return _write_output(cfg, text)


def cmd_dissociate(cfg: RunConfig) -> str:
    """Summarise the dissociation lattice: size, safe dissociations per rank and minimal plans."""
    db, q = load_inputs(cfg)
    cells = len(lattice_cells(q))
    hierarchies = count_safe_dissociations(q, LATTICE_LIMIT)
    safe = safe_dissociations(q)
    by_rank: dict[int, int] = {}
    for delta in safe:
        by_rank[delta.rank] = by_rank.get(delta.rank, 0) + 1
    table = Table(title=f"{q.name}: dissociation lattice")
    table.add_column("rank", justify="right")
    table.add_column("safe", justify="right")
    for rank in sorted(by_rank):
        table.add_row(str(rank), str(by_rank[rank]))
    buffer = io.StringIO()
    console = Console(file=buffer, width=80, color_system=None, force_terminal=False)
    console.print(f"cells: {cells}")
    console.print(f"lattice size: {2**cells}")
    console.print(f"safe dissociations: {len(safe)}")
    console.print(f"variable hierarchies: {hierarchies}")
    console.print(f"minimal plans: {len(enumerate_plans_fd(q, db))}")
    console.print(table)
    return buffer.getvalue()


COMMANDS: dict[str, Callable[[RunConfig], str]] = {
    "plans": cmd_plans,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "dissociate": cmd_dissociate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="propdb", description=f"{APP_NAME} command line")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--schema", required=True, help="schema file")
    common.add_argument("--data", help="directory with one <relation>.tsv per relation")
    common.add_argument("--query", required=True, help="query text or a file holding it")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    plans = sub.add_parser("plans", parents=[common], help="list minimal plans")
    plans.add_argument("--matrices", action="store_true", help="print incidence matrices")
    plans.add_argument("--emit-views", action="store_true", help="print shared views")

    evaluate = sub.add_parser("eval", parents=[common], help="score answers")
    evaluate.add_argument("--method", default=METHOD_PROPAGATION, help="propagation, exact, mc, lineage-rank or plan:<i>")
    evaluate.add_argument("--opt", default=OPT_NONE, choices=OPTS)
    evaluate.add_argument("--samples", type=int, default=DEFAULT_MC_SAMPLES)
    evaluate.add_argument("--seed", type=int, default=DEFAULT_SEED)
    evaluate.add_argument("--limit", type=int, default=ORACLE_VARIABLE_LIMIT, help="exact oracle variable limit")
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.add_argument("--output", help="also write the TSV here")

    compare = sub.add_parser("compare", parents=[common], help="AP of each method against the exact ranking")
    compare.add_argument("--trials", type=int, default=1)
    compare.add_argument("--seed", type=int, default=DEFAULT_SEED)
    compare.add_argument("--samples", type=int, default=DEFAULT_MC_SAMPLES)
    compare.add_argument("--limit", type=int, default=ORACLE_VARIABLE_LIMIT)
    compare.add_argument("--k", type=int, default=DEFAULT_AP_K)
    compare.add_argument("--no-timing", action="store_true", help="omit runtimes for byte-identical output")
    compare.add_argument("--output", help="also write the TSV here")

    sub.add_parser("dissociate", parents=[common], help="dissociation lattice statistics")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    errors = Console(stderr=True)
    try:
        cfg = RunConfig.from_args(args)
        text = COMMANDS[cfg.command](cfg)
    except UsageError as e:
        errors.print(f"[red]usage error:[/red] {escape(str(e))}")
        return EXIT_USAGE
    except (DataError, QueryError) as e:
        errors.print(f"[red]error:[/red] {escape(str(e))}")
        return EXIT_DATA
    except OracleInfeasibleError as e:
        errors.print(f"[red]oracle infeasible:[/red] {escape(str(e))}")
        return EXIT_ORACLE
    except PropDBError as e:
        errors.print(f"[red]error:[/red] {escape(str(e))}")
        return EXIT_FAILURE
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
