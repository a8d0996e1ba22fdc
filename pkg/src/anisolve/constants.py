"""
Constants for anisolve

Centralized constants to avoid magic strings and numbers throughout the codebase.
"""

# Problem modes
MODE_ELLIPTIC = "elliptic"
MODE_PARABOLIC = "parabolic"
MODES = [MODE_ELLIPTIC, MODE_PARABOLIC]

# Nonlocal map kinds
B_GRAD_NORM = "grad_norm"
B_LQ_NORM = "lq_norm"
B_KINDS = [B_GRAD_NORM, B_LQ_NORM]

# Supported dimensions
SUPPORTED_DIMENSIONS = (1, 2)
MIN_CELLS = 2

# Operator exponents never go below this floor; Lebesgue exponents below 1
OPERATOR_EXPONENT_FLOOR = 2.0
LEBESGUE_EXPONENT_FLOOR = 1.0

# Condition labels (used in validation reports and messages)
CONDITION_P1 = "(p1)"
CONDITION_P2 = "(p2)"
CONDITION_F = "(f)"
CONDITION_F0 = "f(.,0)<0"
CONDITION_TIME = "time grid"
CONDITION_B = "nonlocal map"
CONDITION_U0 = "u0 Dirichlet"

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

# Environment
ENV_LOG_LEVEL = "ANISOLVE_LOG"
LOG_LEVELS = {"error": 40, "info": 20, "debug": 10}
DEFAULT_LOG_LEVEL = "info"
LOG_FORMAT = "%(asctime)s - %(name)s - %(message)s"

# CSV / JSON output
CSV_FLOAT_FORMAT = ".17g"  # 17 significant digits, bit-exact round trip
CSV_AXIS_COLUMNS = ("x", "y")
CSV_VALUE_COLUMN = "u"
SOLUTION_CSV = "solution.csv"
SNAPSHOT_CSV_TEMPLATE = "solution_t{time}.csv"
LEDGER_JSON = "ledger.json"
SUMMARY_JSON = "summary.json"
CONVERGENCE_CSV = "convergence.csv"
JSON_INDENT = 2

# File names
CASE_SCHEMA_FILENAME = "case_schema.json"

# Display settings
SEPARATOR_LINE = "=" * 80
SEPARATOR_SHORT = "-" * 80

# Emoji indicators (for console output)
EMOJI_ROCKET = "🚀"
EMOJI_CHART = "📊"
EMOJI_CHECK = "✅"
EMOJI_CROSS = "❌"
EMOJI_WARNING = "⚠️"
EMOJI_SEARCH = "🔍"

# Steklov average: composite Simpson weights over 4 panels, already divided by h
STEKLOV_PANELS = 4
STEKLOV_WEIGHTS = (1.0 / 12.0, 4.0 / 12.0, 2.0 / 12.0, 4.0 / 12.0, 1.0 / 12.0)
