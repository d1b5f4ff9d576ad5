"""Preconditioned conjugate gradients with an optional subspace projection.

scipy's ``cg`` offers neither a per-iterate projection nor a report of
non-positive curvature, both of which the solvers here rely on.
"""

import numpy as np

from .errors import IndefiniteForm, NoConvergence


def _dot(a, b):
    # pairwise summation keeps results bit-stable
    return float(np.sum(a * b))


def pcg(apply_A, b, apply_M=None, project=None, tol=1e-10, maxiter=500, x0=None, what="CG"):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    ``project`` maps onto the subspace on which ``A`` is definite; it is
    applied to the right-hand side, to every iterate and to every
    preconditioned residual.  Convergence means ``||b - A x|| <= tol * ||b||``.

    Returns ``(x, iterations, residual_norm)``.
    """
    P = project if project is not None else (lambda v: v)
    M = apply_M if apply_M is not None else (lambda v: v)
    b = P(b)
    bnorm = np.sqrt(_dot(b, b))
    x = np.zeros_like(b) if x0 is None else P(np.array(x0, dtype=b.dtype))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    r = b - P(apply_A(x))
    rnorm = np.sqrt(_dot(r, r))
    if rnorm <= tol * bnorm:
        return x, 0, rnorm
    z = P(M(r))
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, maxiter + 1):
        Ap = P(apply_A(p))
        pAp = _dot(p, Ap)
        if not pAp > 0.0:
            raise IndefiniteForm(f"{what}: non-positive curvature p.Ap = {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x = P(x + alpha * p)
        r = r - alpha * Ap
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= tol * bnorm:
            # guard against drift of the recursive residual
            r_true = b - P(apply_A(x))
            rnorm = np.sqrt(_dot(r_true, r_true))
            if rnorm <= tol * bnorm:
                return x, it, rnorm
            r = r_true
        z = P(M(r))
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(maxiter, rnorm / bnorm, what=what)
