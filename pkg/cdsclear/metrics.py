"""
Definition of the statuses, verdicts and report keys shared by all solvers and commands.
These constants should be used so that reports are named consistently across solvers.
"""

# solve statuses
STATUS_FOUND = "Found"
"""
A recovery vector was found and independently re-checked against the clearing definition
(exact clearing for iterate_F / enumerate_patterns, approximate clearing for solve_eps_approx).

Exit code: 0
"""

STATUS_NOT_FOUND = "NotFound"
"""
The search budget was exhausted without finding a recovery vector. This is a search failure,
not a certificate that no vector exists.

Exit code: 3
"""

STATUS_INFEASIBLE = "Infeasible"
"""
Every solvency pattern was refuted by interval bound propagation: a verified certificate that
no clearing recovery vector exists.

Exit code: 2
"""

STATUS_UNDECIDED = "Undecided"
"""
Pattern enumeration neither found a solution nor refuted every pattern.

Exit code: 3
"""

# pattern verdicts
VERDICT_SOLUTION = "solution-found"
"""
The pattern-restricted iteration converged to a vector whose branch conditions match the pattern exactly.
"""

VERDICT_INFEASIBLE = "provably-infeasible"
"""
Bound propagation over the pattern's constraints produced an empty interval.
"""

VERDICT_UNDECIDED = "undecided"
"""
Neither of the above.
"""

# report keys
KEY_STATUS = "status"
KEY_RECOVERY = "r"
KEY_RESIDUAL = "residual"
KEY_ITERATIONS = "iterations"
KEY_PATTERN_VERDICTS = "pattern_verdicts"
KEY_BANKS = "banks"
KEY_METHOD = "method"

# exit codes
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_FOUND = 3
EXIT_USAGE = 64
EXIT_PARSE = 65

STATUS_EXIT_CODES = {
    STATUS_FOUND: EXIT_OK,
    STATUS_INFEASIBLE: EXIT_INFEASIBLE,
    STATUS_NOT_FOUND: EXIT_NOT_FOUND,
    STATUS_UNDECIDED: EXIT_NOT_FOUND,
}
