"""Constants for the propdb engine, CLI and explorer."""

# Application metadata
VERSION = "v0.1.0"
APP_NAME = "PropDB Explorer"

# Data format
PROB_COLUMN = "_p"
DATA_SUFFIX = ".tsv"
KIND_PROBABILISTIC = "prob"
KIND_DETERMINISTIC = "det"
DISSOCIATED_SUFFIX = "~"
REDUCED_SUFFIX = "*"

# Oracle limits
ORACLE_VARIABLE_LIMIT = 30
BRUTE_FORCE_LIMIT = 20
DEFAULT_MC_SAMPLES = 10_000
DEFAULT_SEED = 7
MC_BLOCK_SIZE = 4096

# Planner limits
LATTICE_LIMIT = 20

# Metrics
DEFAULT_AP_K = 10

# Evaluation methods and optimisation pipelines
METHOD_PROPAGATION = "propagation"
METHOD_EXACT = "exact"
METHOD_MC = "mc"
METHOD_LINEAGE_RANK = "lineage-rank"
METHOD_PLAN_PREFIX = "plan:"
METHODS = (METHOD_PROPAGATION, METHOD_EXACT, METHOD_MC, METHOD_LINEAGE_RANK)

OPT_NONE = "none"
OPT_SINGLE = "single"
OPT_VIEWS = "views"
OPT_SEMIJOIN = "semijoin"
OPT_ALL = "all"
OPTS = (OPT_NONE, OPT_SINGLE, OPT_VIEWS, OPT_SEMIJOIN, OPT_ALL)

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ORACLE = 4

# Incidence matrix marks
MARK_ORIGINAL = "∘"
MARK_DISSOCIATED = "•"
MARK_PRESERVING = "⋆"

# Button IDs
BUTTON_PLANS = "plans_button"
BUTTON_EVAL = "eval_button"
BUTTON_COMPARE = "compare_button"
BUTTON_DISSOCIATE = "dissociate_button"
BUTTON_RUN = "run_button"
BUTTON_BACK = "back_button"

# Messages
MSG_SAFE = "SAFE"
MSG_RUNNING = "Running..."
MSG_MISSING_SCHEMA = "Schema path is required"
MSG_MISSING_QUERY = "Query is required"
