DEGREE_OUT_OF_RANGE = "Degree p={p} is outside the supported range 1..20"
REGULARITY_OUT_OF_RANGE = "Regularity k={k} out of range for degree p={p}, expected 0 <= k <= p-1"
NO_ELEMENTS = "Number of elements must be at least 1, got {n}"
POINT_OUTSIDE_DOMAIN = "Evaluation point {x} is outside the parametric interval [0, 1]"
INVALID_WEIGHTS = "Weights must be {count} positive reals"
SINGULAR_MAP = "Affine map is singular, |det A| = {det:.3e}"
ZERO_TIME_STEP = "Time step must be positive, got dt={dt}"
INCONSISTENT_STEPS = "dt*N = {product} does not match T = {T}"
GAMMA_NOT_SECOND_ORDER = "gamma={gamma} differs from 0.5, the scheme is only first-order accurate"
SINGULAR_SYSTEM = "System matrix is singular for configuration {label}"
SINGULAR_MASS = "Mass matrix D0 is singular, initial data cannot be collocated"
UNSTABLE_RUN = "Solution diverged at step {step} (t={t:.6g}): max|u| = {norm:.3e}"
EIG_CAP_EXCEEDED = "d.o.f.={dof} exceeds the dense eigensolve cap of {cap}"
EIG_NOT_CONVERGED = "Dense eigensolve did not converge for a {dof}x{dof} matrix"
TOO_FEW_POINTS = "Scaling fit needs at least 3 points, got {count}"
NON_POSITIVE_DATA = "Scaling fit needs positive abscissae and condition numbers"
MALFORMED_CONFIG = "Malformed sweep file {path}: {msg} (line {line}, column {column})"
INVALID_REGULARITY_PAIRS = "Invalid (p, k) pairs: {pairs}"
EMPTY_LEDGER = "Ledger is empty, nothing to report"
UNKNOWN_ESTIMATE = "Unknown estimate {estimate}"
