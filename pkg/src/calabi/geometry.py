"""Pointwise Kähler tensor algebra on a flat torus.

From a potential ``phi`` the metric is ``h_{i jbar} = delta_ij + d_i dbar_j phi``,
stored as ``H[i, j]`` with shape ``(n, n) + grid.shape``.  ``inv`` is the
ordinary matrix inverse, so the contravariant metric is
``g^{i jbar} = inv[j, i]`` and contractions read ``g^{i jbar} T_{i jbar} = tr(inv @ T)``.

Volume convention: the volume density is ``det(h)`` against Lebesgue
measure in the real coordinates.  The constant ``2^n n!`` relating
``omega^n`` to that measure is dropped everywhere; every reported
quantity is stated in this convention.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonAdmissible
from .grid import _check_finite, complex_hessian, integrate

EPS_POS = 1e-8

VOLUME_CONVENTION = "det(h) dx (Lebesgue); the 2^n n! form-to-measure factor is omitted"


def _matmul(A, B):
    n = A.shape[0]
    return np.array([[sum(A[i, k] * B[k, j] for k in range(n)) for j in range(n)] for i in range(n)])


def _trace_product(A, B):
    """tr(A @ B) pointwise."""
    n = A.shape[0]
    return sum(A[i, j] * B[j, i] for i in range(n) for j in range(n))


@dataclass(frozen=True, eq=False)
class MetricField:
    """Hermitian metric field with inverse, determinant and eigenvalue caches."""

    grid: object
    phi: np.ndarray
    h: np.ndarray
    inv: np.ndarray
    det: np.ndarray
    eig_min: np.ndarray
    eig_max: np.ndarray

    @property
    def n(self):
        return self.grid.n

    @cached_property
    def log_det(self):
        return np.log(self.det)

    @cached_property
    def density(self):
        """Volume density ``det(h)`` times the quadrature weight."""
        return self.det * self.grid.weight

    @cached_property
    def dh(self):
        """``dh[a, b, c] = d_a h_{b cbar} = d_a d_b dbar_c phi``."""
        g = self.grid
        ph = g.fft(self.phi)
        n = g.n
        out = np.empty((n, n, n) + g.shape, dtype=complex)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    sym = g.dz_symbol(a) * g.dz_symbol(b) * g.dzbar_symbol(c)
                    out[a, b, c] = g.ifft(sym * ph)
        return out

    @cached_property
    def christoffel(self):
        """``Gamma[c, a, b] = g^{c dbar} d_a h_{b dbar}``."""
        n = self.n
        dh = self.dh
        out = np.zeros_like(dh)
        for c in range(n):
            for a in range(n):
                for b in range(a, n):
                    acc = sum(self.inv[d, c] * dh[a, b, d] for d in range(n))
                    out[c, a, b] = acc
                    out[c, b, a] = acc
        return out

    def mean(self, f):
        """Mean of ``f`` with respect to the volume density."""
        return float(np.sum(f * self.det) / np.sum(self.det))


def _closed_form(H, n):
    if n == 1:
        a = H[0, 0].real
        det = a.copy()
        inv = (1.0 / a)[None, None].astype(complex)
        return det, inv, a, a
    a = H[0, 0].real
    d = H[1, 1].real
    b = H[0, 1]
    det = a * d - np.abs(b) ** 2
    inv = np.empty_like(H)
    inv[0, 0] = d / det
    inv[1, 1] = a / det
    inv[0, 1] = -b / det
    inv[1, 0] = -H[1, 0] / det
    half = 0.5 * (a + d)
    rad = np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return det, inv, half - rad, half + rad


def assemble_metric(grid, phi, eps_pos=EPS_POS):
    """Metric of ``omega + i ddbar phi``; raises :class:`NonAdmissible` if not positive."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != grid.shape:
        raise ValueError(f"potential has shape {phi.shape}, grid expects {grid.shape}")
    _check_finite(phi, "potential")
    H = complex_hessian(grid, phi)
    for i in range(grid.n):
        H[i, i] += 1.0
    det, inv, lo, hi = _closed_form(H, grid.n)
    idx = np.unravel_index(np.argmin(lo), lo.shape)
    if lo[idx] <= eps_pos:
        loc = [grid.spacing * i for i in idx]
        raise NonAdmissible(lo[idx], loc)
    return MetricField(grid, phi, H, inv, det, lo, hi)


def ricci(m):
    """``R_{i jbar} = -d_i dbar_j log det h``."""
    return -complex_hessian(m.grid, m.log_det)


def scalar_curvature(m, ric=None):
    """``R = g^{i jbar} R_{i jbar}``."""
    if ric is None:
        ric = ricci(m)
    return _trace_product(m.inv, ric).real


def ricci_norm(m, ric):
    """Pointwise norm of the Ricci form measured with the metric."""
    A = _matmul(m.inv, ric)
    return np.sqrt(np.maximum(_trace_product(A, A).real, 0.0))


@dataclass(frozen=True)
class GlobalIntegrals:
    volume: float
    total_scalar: float
    mean_scalar: float
    calabi: float
    calabi_modified: float


def global_integrals(m, R):
    w = m.density
    V = float(np.sum(w))
    S = float(np.sum(R * w))
    Rbar = S / V
    return GlobalIntegrals(
        volume=V,
        total_scalar=S,
        mean_scalar=Rbar,
        calabi=float(np.sum(R * R * w)),
        calabi_modified=float(np.sum((R - Rbar) ** 2 * w)),
    )


def equivalence_constants(m):
    """Global (min, max) eigenvalue of the metric against the flat one."""
    return float(np.min(m.eig_min)), float(np.max(m.eig_max))


def log_ratio_F(m):
    """``F = log(omega_phi^n / omega^n) = log det h``."""
    return m.log_det.copy()
