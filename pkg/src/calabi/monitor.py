"""Per-state bounds that control compactness of the flow.

Everything here is a direct grid quadrature or maximum; no constants are
estimated.  ``F = log det h`` is the log volume ratio.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import equivalence_constants, log_ratio_F, ricci, ricci_norm
from .grid import complex_hessian, holomorphic_hessian, laplace_flat

SOBOLEV_P = 8
HOLDER_ALPHA = 0.5


@dataclass(frozen=True)
class CompactnessReport:
    sup_phi: float
    sup_ric: float
    lam: float
    Lam: float
    sup_F: float
    inf_F: float
    mean_F: float
    sup_lap_phi: float
    sup_lap_F: float
    w2p_phi: float
    holder_h: float


def sobolev_w2p(grid, f, p=SOBOLEV_P):
    """Discrete ``||f||_{W^{2,p}}`` from ``f``, its complex gradient and both complex Hessians."""
    fh = grid.fft(f)
    terms = [np.abs(f)]
    terms += [np.abs(grid.ifft(grid.dz_symbol(j) * fh)) for j in range(grid.n)]
    terms += list(np.abs(complex_hessian(grid, f, fh)).reshape((-1,) + grid.shape))
    terms += list(np.abs(holomorphic_hessian(grid, f, fh)).reshape((-1,) + grid.shape))
    total = sum(float(np.sum(t**p)) for t in terms) * grid.weight
    return total ** (1.0 / p)


def holder_seminorm(grid, H, alpha=HOLDER_ALPHA):
    """Discrete ``C^alpha`` seminorm of a tensor field over dyadic axis shifts.

    Differences are measured in the Frobenius norm of the leading ``(n, n)``
    block and divided by ``(shift * spacing)^alpha``.
    """
    best = 0.0
    s = 1
    while s <= grid.N // 2:
        for ax in range(grid.ndim):
            d = np.roll(H, s, axis=2 + ax) - H
            mag = np.sqrt(np.sum(np.abs(d) ** 2, axis=(0, 1)))
            best = max(best, float(np.max(mag)) / (s * grid.spacing) ** alpha)
        s *= 2
    return best


def report(m, phi=None, ric=None):
    """Compactness quantities of the admissible metric ``m``."""
    g = m.grid
    phi = m.phi if phi is None else phi
    if ric is None:
        ric = ricci(m)
    lam, Lam = equivalence_constants(m)
    F = log_ratio_F(m)
    return CompactnessReport(
        sup_phi=float(np.max(np.abs(phi))),
        sup_ric=float(np.max(ricci_norm(m, ric))),
        lam=lam,
        Lam=Lam,
        sup_F=float(np.max(F)),
        inf_F=float(np.min(F)),
        mean_F=float(np.mean(F)),
        sup_lap_phi=float(np.max(np.abs(laplace_flat(g, phi)))),
        sup_lap_F=float(np.max(np.abs(laplace_flat(g, F)))),
        w2p_phi=sobolev_w2p(g, phi),
        holder_h=holder_seminorm(g, m.h),
    )


def jensen_check(m, tol=1e-10):
    """Check ``exp(mean F) <= mean exp(F)`` against the flat background measure.

    Returns ``(ok, margin)`` with ``margin = log(mean exp F) - mean F``, which
    is nonnegative by Jensen and vanishes only for constant ``F``.  For
    periodic potentials ``mean exp F`` is the volume ratio, equal to 1.
    """
    F = log_ratio_F(m)
    mean_F = float(np.mean(F))
    margin = float(np.log(np.mean(m.det))) - mean_F
    return margin >= -tol, margin

