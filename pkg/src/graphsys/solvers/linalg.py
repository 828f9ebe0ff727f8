"""Dense LU helpers (LAPACK getrf/getrs through scipy)."""
import numpy as np
import scipy.linalg as sla

from ..errors import Singular


def lu_factor(A, what="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{what} must be square, got shape {A.shape}")
    if A.shape[0] == 0:
        return None
    if not np.all(np.isfinite(A)):
        raise Singular(f"{what} has non-finite entries")
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    d = np.abs(np.diag(lu))
    scale = max(np.abs(A).max(), 1.0)
    if d.min() <= 1e-13 * scale:
        raise Singular(f"{what} is singular to working precision")
    return lu, piv


def lu_apply(fac, b):
    if fac is None:
        return np.zeros_like(np.asarray(b, dtype=float))
    return sla.lu_solve(fac, b, check_finite=False)


def lu_solve(A, b):
    """Solve Ax = b by LU with partial pivoting; raises Singular."""
    fac = lu_factor(A)
    return lu_apply(fac, np.asarray(b, dtype=float))
