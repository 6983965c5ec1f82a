# outcome codes shared by both run loops
STATIONARY = 0
ESCAPED = 1
TIMEOUT = 2
NONFINITE = 3

FORCE_CONSTANT = 0
FORCE_CYCLE = 1
FORCE_TABULATED = 2

BACKEND_PROX = 0
BACKEND_REGULARIZED = 1

# summary row columns
ROW_T, ROW_MEAN, ROW_MIN, ROW_MAX, ROW_EXCESS, ROW_ENERGY = range(6)
N_ROW = 6

REG_TOL = 1e-12
REG_MAXITER = 200

# kinds of per-node height segments: strength certified 0, certified 1, or
# evaluated from candidates
SEG_GAP, SEG_CORE, SEG_RAMP = 0, 1, 2
# segment ends are pushed this far (relative to rho + delta) to the safe side
SEG_MARGIN = 1e-5

# absolute slack for certifying that a fully pinned state stays pinned while
# the forcing drifts (covers rounding of the residual)
SKIP_SLACK = 1e-12
