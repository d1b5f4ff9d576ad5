"""Periodic grids on flat complex tori and Fourier-symbol calculus.

A :class:`TorusGrid` samples ``C^n / (2 pi Z)^{2n}`` uniformly with ``N``
points per real axis.  Fields are plain ``numpy`` arrays of shape
``grid.shape`` with axes ordered ``(x_1, y_1, ..., x_n, y_n)``.

With ``z_j = x_j + i y_j`` the complex derivatives are

    d/dz_j    = (d/dx_j - i d/dy_j) / 2      symbol  i (k_j - i l_j) / 2
    d/dzbar_j = (d/dx_j + i d/dy_j) / 2      symbol  i (k_j + i l_j) / 2

and the flat complex Laplacian ``sum_j d/dz_j d/dzbar_j`` has symbol
``-sum_j (k_j^2 + l_j^2) / 4``, a quarter of the real Laplacian.

Every derivative symbol uses the same wavenumber table in which the
Nyquist wavenumber is replaced by zero.  Odd-order derivatives of real
fields then stay real, and compositions of first-order symbols agree
exactly with the second-order ones, which is what makes the discrete
conservation laws hold to roundoff.  The Nyquist mode of a field is
therefore invisible to every differential operator.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

_workers = 1


def set_workers(k):
    """Set the number of threads used by the FFTs (deterministic for fixed k)."""
    global _workers
    _workers = max(1, int(k))


def _check_finite(f, name="field"):
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic lattice of period 2*pi on each of the 2n real axes."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"points per axis must be even and >= 8, got {self.N}")

    @property
    def ndim(self):
        return 2 * self.n

    @property
    def shape(self):
        return (self.N,) * self.ndim

    @property
    def size(self):
        return self.N**self.ndim

    @property
    def spacing(self):
        return 2 * np.pi / self.N

    @property
    def weight(self):
        """Quadrature weight of one grid point, (2 pi / N)^(2n)."""
        return self.spacing**self.ndim

    @property
    def volume(self):
        return (2 * np.pi) ** self.ndim

    def coords(self):
        """Real coordinate arrays ``[x_1, y_1, ...]``, each of shape ``self.shape``."""
        x = self.spacing * np.arange(self.N)
        return np.meshgrid(*([x] * self.ndim), indexing="ij")

    def _axis_view(self, v, axis):
        s = [1] * self.ndim
        s[axis] = self.N
        return v.reshape(s)

    @cached_property
    def wavenumbers(self):
        """Integer wavenumbers per axis in transform order, broadcastable."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        return [self._axis_view(k, a) for a in range(self.ndim)]

    @cached_property
    def _kd(self):
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        k[self.N // 2] = 0.0
        return [self._axis_view(k, a) for a in range(self.ndim)]

    def dz_symbol(self, j):
        kx, ky = self._kd[2 * j], self._kd[2 * j + 1]
        return 0.5j * (kx - 1j * ky)

    def dzbar_symbol(self, j):
        kx, ky = self._kd[2 * j], self._kd[2 * j + 1]
        return 0.5j * (kx + 1j * ky)

    @cached_property
    def laplace_symbol(self):
        return -0.25 * sum(k * k for k in self._kd)

    @cached_property
    def max_abs_wavenumber(self):
        m = np.abs(self.wavenumbers[0])
        for k in self.wavenumbers[1:]:
            m = np.maximum(m, np.abs(k))
        return m

    @cached_property
    def null_patterns(self):
        """Real +-1 patterns spanning the kernel of every derivative symbol.

        These are the 2^(2n) modes whose wavenumber on each axis is 0 or N/2
        (the constant plus the grid checkerboards).
        """
        m = np.arange(self.N)
        per_axis = [np.ones(self.N), (-1.0) ** m]
        out = []
        for bits in np.ndindex(*([2] * self.ndim)):
            p = np.ones(self.shape)
            for a, b in enumerate(bits):
                p = p * self._axis_view(per_axis[b], a)
            out.append(p)
        return np.array(out)

    def fft(self, f):
        return scipy.fft.fftn(f, workers=_workers)

    def ifft(self, fh):
        return scipy.fft.ifftn(fh, workers=_workers)


def _real_if(f, out):
    return out.real if np.isrealobj(f) else out


def _check_axis(grid, j):
    if not 0 <= j < grid.n:
        raise ValueError(f"complex axis index must be in [0, {grid.n}), got {j}")


def d_holo(grid, f, j):
    """d f / dz_j (complex valued)."""
    _check_finite(f)
    _check_axis(grid, j)
    return grid.ifft(grid.dz_symbol(j) * grid.fft(f))


def d_antiholo(grid, f, j):
    """d f / dzbar_j (complex valued)."""
    _check_finite(f)
    _check_axis(grid, j)
    return grid.ifft(grid.dzbar_symbol(j) * grid.fft(f))


def laplace_flat(grid, f):
    """Flat complex Laplacian sum_j d_j dbar_j f, one quarter of the real one."""
    _check_finite(f)
    return _real_if(f, grid.ifft(grid.laplace_symbol * grid.fft(f)))


def complex_hessian(grid, f, fh=None):
    """Array ``H[i, j] = d_i dbar_j f`` of shape ``(n, n) + grid.shape``."""
    if fh is None:
        fh = grid.fft(f)
    n = grid.n
    real = np.isrealobj(f) if f is not None else False
    out = np.empty((n, n) + grid.shape, dtype=complex)
    for i in range(n):
        for j in range(n):
            if real and j < i:
                # Hermitian for real f
                out[i, j] = np.conj(out[j, i])
                continue
            out[i, j] = grid.ifft(grid.dz_symbol(i) * grid.dzbar_symbol(j) * fh)
            if real and i == j:
                out[i, j].imag = 0.0
    return out


def holomorphic_hessian(grid, f, fh=None):
    """Array ``H[a, b] = d_a d_b f`` (symmetric in a, b)."""
    if fh is None:
        fh = grid.fft(f)
    n = grid.n
    out = np.empty((n, n) + grid.shape, dtype=complex)
    for a in range(n):
        for b in range(a, n):
            out[a, b] = grid.ifft(grid.dz_symbol(a) * grid.dz_symbol(b) * fh)
            if b != a:
                out[b, a] = out[a, b]
    return out


def biharmonic_shift_solve(grid, f, sigma):
    """Solve ``(Id + sigma * Lap_c^2) u = f`` exactly, mode by mode."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    _check_finite(f)
    mu = grid.laplace_symbol
    return _real_if(f, grid.ifft(grid.fft(f) / (1.0 + sigma * mu * mu)))


def biharmonic_apply(grid, f, sigma):
    """``(Id + sigma * Lap_c^2) f``; the forward map of :func:`biharmonic_shift_solve`."""
    mu = grid.laplace_symbol
    return _real_if(f, grid.ifft(grid.fft(f) * (1.0 + sigma * mu * mu)))


def integrate(grid, f):
    """Rectangle-rule integral over the torus (pairwise summation)."""
    return np.sum(f) * grid.weight


def l2_norm(grid, f):
    return float(np.sqrt(integrate(grid, np.abs(f) ** 2)))


def mode_l2_norm(grid, fh, mask=None):
    """L2 norm of a field computed from its transform (Parseval)."""
    a = np.abs(fh) ** 2
    if mask is not None:
        a = a[mask]
    return float(np.sqrt(np.sum(a) * grid.weight / grid.size))


def spectral_tail_norm(grid, f, k_cut):
    """L2 norm of the Fourier modes whose largest |wavenumber| exceeds ``k_cut``."""
    if not 0 < k_cut < grid.N // 2:
        raise ValueError(f"k_cut must lie in (0, {grid.N // 2}), got {k_cut}")
    _check_finite(f)
    return mode_l2_norm(grid, grid.fft(f), grid.max_abs_wavenumber > k_cut)


def mode_field(grid, k, amplitude=1.0, phase=0.0):
    """``amplitude * cos(k . x + phase)`` for an integer wavevector of length 2n."""
    k = np.asarray(k)
    if k.shape != (grid.ndim,):
        raise ValueError(f"wavevector must have {grid.ndim} entries")
    arg = sum(int(kk) * x for kk, x in zip(k, grid.coords()))
    return amplitude * np.cos(arg + phase)


def random_spectrum_field(grid, decay, seed, amplitude, k_max=None):
    """Real field with random phases and ``|coefficient| ~ |k|^(-decay)``.

    The zero and Nyquist modes are empty.  The result is scaled so that
    ``max |f| == amplitude``.
    """
    rng = np.random.default_rng(seed)
    ksq = sum(k * k for k in grid.wavenumbers)
    mag = np.zeros(grid.shape)
    nz = ksq > 0
    mag[nz] = ksq[nz] ** (-0.5 * decay)
    if k_max is not None:
        mag[grid.max_abs_wavenumber > k_max] = 0.0
    mag[grid.max_abs_wavenumber >= grid.N // 2] = 0.0
    phase = rng.uniform(0.0, 2 * np.pi, size=grid.shape)
    f = grid.ifft(mag * np.exp(1j * phase)).real
    # real part halves the spectrum symmetrically; renormalise in physical space
    return amplitude * f / np.max(np.abs(f))


def sample_on_tensor(grid, f, xs, ys):
    """Evaluate the trigonometric interpolant of an n=1 field on ``xs x ys``.

    Exact at grid points.  The Nyquist column uses ``cos`` so the result is
    real for real data.
    """
    if grid.n != 1:
        raise ValueError("tensor sampling is only defined for n = 1")
    k = np.fft.fftfreq(grid.N, 1.0 / grid.N)

    def basis(t):
        E = np.exp(1j * np.outer(t, k))
        E[:, grid.N // 2] = np.cos(0.5 * grid.N * t)
        return E

    fh = grid.fft(f) / grid.size
    return (basis(np.asarray(xs)) @ fh @ basis(np.asarray(ys)).T).real


def remove_null(grid, v, weight=None):
    """Project out the derivative kernel, orthogonally in ``sum(u v weight)``.

    With ``weight=None`` the flat (grid-sum) inner product is used.
    """
    B = grid.null_patterns.reshape(len(grid.null_patterns), -1)
    vf = v.reshape(-1)
    if weight is None:
        c = (B @ vf) / grid.size
    else:
        wf = weight.reshape(-1)
        G = (B * wf) @ B.T
        c = np.linalg.solve(G, (B * wf) @ vf)
    return v - (c @ B).reshape(v.shape)
