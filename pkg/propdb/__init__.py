"""Probabilistic query evaluation by dissociation."""

__version__ = "0.1.0"

__all__ = [
    "AnswerTable",
    "Database",
    "Dissociation",
    "LineageDNF",
    "Plan",
    "PropDBError",
    "Query",
    "dissociate_database",
    "enumerate_minimal_plans",
    "enumerate_plans_det",
    "enumerate_plans_fd",
    "eval_plan",
    "exact_prob",
    "lineage",
    "load_database",
    "load_database_dir",
    "parse_query",
    "propagation_score",
]

from .dissociation import Dissociation, dissociate_database
from .errors import PropDBError
from .executor import AnswerTable, eval_plan, propagation_score
from .model import Database, load_database, load_database_dir
from .oracle import LineageDNF, exact_prob, lineage
from .plan import Plan
from .planner import enumerate_minimal_plans, enumerate_plans_det, enumerate_plans_fd
from .query import Query, parse_query
