"""Operators attached to a fixed admissible metric.

The fourth-order Lichnerowicz operator is assembled in weak form: with
``T = f_{,ab}`` the covariant holomorphic Hessian and
``S^{cbar dbar} = det(h) g^{a cbar} g^{b dbar} T_{ab}`` one has

    det(h) * D f = dbar_c dbar_d S^{cd} + dbar_e (S^{cd} conj(Gamma^e_{cd}))

which is the exact discrete adjoint of ``f -> T`` under grid summation,
because spectral derivatives are skew-adjoint there.  Hence

    sum (D f) g det(h) w = Re sum S_f conj(T_g) w

holds to roundoff: ``D`` is symmetric and nonnegative in ``L^2(det h)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .geometry import _trace_product, scalar_curvature
from .grid import _check_finite, complex_hessian, d_holo, holomorphic_hessian, remove_null
from .krylov import pcg


def laplace_phi(m, f):
    """``Lap_phi f = g^{i jbar} d_i dbar_j f`` (pointwise contraction)."""
    _check_finite(f)
    return _trace_product(m.inv, complex_hessian(m.grid, f)).real


def divergence_laplacian(m, f):
    """``sum_ij d_i(det(h) g^{i jbar} dbar_j f)``, symmetric under grid summation.

    Equals ``det(h) * laplace_phi(m, f)`` up to aliasing (exactly for n = 1).
    """
    g = m.grid
    fh = g.fft(f)
    coeff = m.det * m.inv  # coeff[j, i] = det * g^{i jbar}
    out = np.zeros(g.shape, dtype=complex)
    for i in range(g.n):
        flux = np.zeros(g.shape, dtype=complex)
        for j in range(g.n):
            flux += coeff[j, i] * g.ifft(g.dzbar_symbol(j) * fh)
        out += g.ifft(g.dz_symbol(i) * g.fft(flux))
    return out.real


def _flat_projector(grid):
    return lambda v: remove_null(grid, v)


@dataclass
class GreenSolution:
    F: np.ndarray
    residual_norm: float
    iterations: int


def green_solve(m, rho, tol=1e-9, maxiter=500):
    """Solve ``Lap_phi F = rho - mean(rho)`` with ``F`` of zero mean (both w.r.t. det h).

    Conjugate gradients on the divergence form, preconditioned by the flat
    inverse Laplacian.  ``residual_norm`` is relative to ``||det(h) rho||``.
    """
    _check_finite(rho, "right-hand side")
    g = m.grid
    rhs = m.det * (rho - m.mean(rho))
    scale = float(np.sqrt(np.sum((m.det * rho) ** 2)))
    if scale == 0.0 or not np.any(np.abs(rhs) > 1e-15 * scale):
        return GreenSolution(np.zeros(g.shape), 0.0, 0)
    lap = np.where(g.laplace_symbol == 0.0, -1.0, g.laplace_symbol)

    def precond(r):
        return g.ifft(g.fft(r) / (-lap)).real

    def apply(x):
        return -divergence_laplacian(m, x)

    # tol is relative to ||rhs||; rescale so the stop matches ||det rho||
    rel = tol * scale / float(np.sqrt(np.sum(rhs * rhs)))
    F, its, res = pcg(apply, -rhs, precond, _flat_projector(g), tol=rel, maxiter=maxiter, what="Green solve")
    F = F - m.mean(F)
    return GreenSolution(F, res / scale, its)


def covariant_hessian(m, f, fh=None):
    """``T[a, b] = d_a d_b f - Gamma^c_{ab} d_c f``."""
    g = m.grid
    if fh is None:
        fh = g.fft(f)
    T = holomorphic_hessian(g, f, fh)
    grad = np.array([g.ifft(g.dz_symbol(c) * fh) for c in range(g.n)])
    Gam = m.christoffel
    for a in range(g.n):
        for b in range(g.n):
            T[a, b] -= sum(Gam[c, a, b] * grad[c] for c in range(g.n))
    return T


def _raise_weighted(m, T):
    """``S[c, d] = det * g^{a cbar} g^{b dbar} T[a, b] = det * (inv T inv^T)[c, d]``."""
    n = m.n
    S = np.empty_like(T)
    for c in range(n):
        for d in range(c, n):
            acc = sum(m.inv[c, a] * T[a, b] * m.inv[d, b] for a in range(n) for b in range(n))
            S[c, d] = m.det * acc
            S[d, c] = S[c, d]  # T symmetric
    return S


def lichnerowicz_apply(m, f):
    """``D f = f_{,ab}^{,ab}`` in divergence form (see module docstring)."""
    _check_finite(f)
    g = m.grid
    T = covariant_hessian(m, f)
    S = _raise_weighted(m, T)
    acc = np.zeros(g.shape, dtype=complex)
    for c in range(g.n):
        for d in range(g.n):
            acc += g.ifft(g.dzbar_symbol(c) * g.dzbar_symbol(d) * g.fft(S[c, d]))
    Gam = m.christoffel
    for e in range(g.n):
        flux = sum(S[c, d] * np.conj(Gam[e, c, d]) for c in range(g.n) for d in range(g.n))
        acc += g.ifft(g.dzbar_symbol(e) * g.fft(flux))
    return acc.real / m.det


def hessian_pairing(m, f, k):
    """``Re int f_{,ab} conj(k_{,cd}) g^{a cbar} g^{b dbar} dmu``; equals ``int (D f) k dmu``."""
    S = _raise_weighted(m, covariant_hessian(m, f))
    Tk = covariant_hessian(m, k)
    return float(np.sum((S * np.conj(Tk)).real) * m.grid.weight)


def dissipation(m, R):
    """``int R_{,ab} R^{,ab} dmu``, nonnegative; the Calabi energy decays at twice this rate."""
    T = covariant_hessian(m, R)
    S = _raise_weighted(m, T)
    return float(np.sum((S * np.conj(T)).real) * m.grid.weight)


def l2_pairing(m, f, k):
    """``int f k dmu``."""
    return float(np.sum(f * k * m.det) * m.grid.weight)


def futaki(m, j, R=None, green=None, tol=1e-9):
    """Futaki character on the frame field d/dz_j: ``-int d_j F dmu`` with ``Lap_phi F = R - Rbar``."""
    if R is None:
        R = scalar_curvature(m)
    if green is None:
        green = green_solve(m, R, tol=tol)
    dF = d_holo(m.grid, green.F, j)
    return complex(-np.sum(dF * m.det) * m.grid.weight)


@dataclass
class EigenReport:
    eigenvalue: float
    eigenfield: np.ndarray
    rayleigh_residual: float
    iterations: int


def lowest_eigenvalue(m, tol=1e-6, maxiter=200, inner_tol=1e-7, seed=0):
    """Smallest nonzero eigenvalue of ``D`` by inverse iteration on mean-zero fields.

    Each step solves ``det*D u = det*v`` by conjugate gradients preconditioned
    with the flat ``(Id + Lap_c^2)^{-1}``.  Stops when
    ``||D u - lambda u|| <= tol ||u||`` in ``L^2(det h)``.
    """
    g = m.grid
    mu = g.laplace_symbol

    def mu_zero(v):
        return remove_null(g, v, m.det)

    def precond(r):
        return g.ifft(g.fft(r) / (1.0 + mu * mu)).real

    def apply(x):
        return m.det * lichnerowicz_apply(m, x)

    def norm(v):
        return np.sqrt(l2_pairing(m, v, v))

    rng = np.random.default_rng(seed)
    v = mu_zero(rng.standard_normal(g.shape))
    v /= norm(v)
    lam, res = np.nan, np.inf
    for it in range(1, maxiter + 1):
        u, _, _ = pcg(apply, m.det * v, precond, _flat_projector(g), tol=inner_tol, maxiter=2000,
                      what="Lichnerowicz solve")
        u = mu_zero(u)
        u /= norm(u)
        Du = lichnerowicz_apply(m, u)
        lam = l2_pairing(m, Du, u)
        res = norm(Du - lam * u)
        if res <= tol:
            return EigenReport(lam, u, res, it)
        v = u
    raise NoConvergence(maxiter, res, what="inverse iteration")
