"""Dirichlet problems and puncture removal on the unit disc (one complex dimension).

The disc is a masked Cartesian grid on ``[-1, 1]^2`` with cell-centred
nodes ``-1 + (m + 1/2) h``, ``h = 2 / N_d``, padded by one node on each
side.  Nodes with ``|z| < 1`` are *inside*; inside nodes with an outside
4-neighbour form the *band*, which carries Dirichlet data; the remaining
inside nodes are the unknowns.  For odd ``N_d`` the centre node sits at
``z = 0`` and is the puncture.

In one complex dimension ``a^{1 1bar} det(a) = 1`` for every coefficient
``a``, so the divergence-form operator ``-d_i(a^{i jbar} det(a) dbar_j u)``
is ``-d dbar u = -Lap u / 4`` whatever ``a`` is.  ``a`` only enters the
right-hand side ``Rbar * det(a)``.  The discrete operator is the 5-point
form, which satisfies a discrete maximum principle.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import EllipticityLost
from .grid import sample_on_tensor
from .krylov import pcg

# linear-term weight in I(u) = Dirichlet(u) + w * int Rbar u det(a) dx whose
# minimiser solves -d dbar u = Rbar det(a); the weight 1 gives the functional
# as usually displayed, whose minimiser solves the equation with -Rbar/2
PDE_LINEAR_WEIGHT = -2.0


@dataclass(frozen=True)
class DiscGrid:
    N: int
    puncture: bool = True

    def __post_init__(self):
        if self.N < 5:
            raise ValueError(f"disc grid needs N_d >= 5, got {self.N}")
        if self.puncture and self.N % 2 == 0:
            raise ValueError("a punctured disc grid needs odd N_d so that 0 is a node")

    @property
    def h(self):
        return 2.0 / self.N

    @property
    def shape(self):
        return (self.N + 2, self.N + 2)

    @cached_property
    def axis(self):
        return -1.0 + (np.arange(-1, self.N + 1) + 0.5) * self.h

    @cached_property
    def xy(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def z(self):
        x, y = self.xy
        return x + 1j * y

    @cached_property
    def inside(self):
        x, y = self.xy
        return x * x + y * y < 1.0

    @cached_property
    def band(self):
        ins = self.inside
        out = ~ins
        nb = np.zeros_like(ins)
        nb[1:, :] |= out[:-1, :]
        nb[:-1, :] |= out[1:, :]
        nb[:, 1:] |= out[:, :-1]
        nb[:, :-1] |= out[:, 1:]
        return ins & nb

    @cached_property
    def interior(self):
        return self.inside & ~self.band

    @property
    def centre(self):
        c = (self.N + 1) // 2
        return (c, c)

    @cached_property
    def puncture_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        if self.puncture:
            m[self.centre] = True
        return m

    def far_from_puncture(self, radius):
        """Inside nodes at distance greater than ``radius`` from the puncture."""
        if not self.puncture:
            return self.inside.copy()
        return self.inside & (np.abs(self.z) > radius)

    @cached_property
    def _numbering(self):
        idx = -np.ones(self.shape, dtype=np.int64)
        idx[self.interior] = np.arange(int(self.interior.sum()))
        return idx

    @cached_property
    def laplacian(self):
        """Sparse ``(4 u_i - sum_j u_j) / 4`` on the unknowns (band terms dropped).

        This is ``h^2`` times the discrete ``-Lap u / 4``.
        """
        idx = self._numbering
        rows, cols, vals = [], [], []
        ii, jj = np.nonzero(self.interior)
        me = idx[ii, jj]
        rows.append(me), cols.append(me), vals.append(np.ones(me.size))
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = idx[ii + di, jj + dj]
            keep = nb >= 0
            rows.append(me[keep]), cols.append(nb[keep]), vals.append(np.full(keep.sum(), -0.25))
        n = int(self.interior.sum())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )

    def band_coupling(self, u):
        """``sum`` over band neighbours of ``u / 4`` at each unknown."""
        ii, jj = np.nonzero(self.interior)
        acc = np.zeros(ii.size)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            on_band = self.band[ii + di, jj + dj]
            acc += np.where(on_band, 0.25 * u[ii + di, jj + dj], 0.0)
        return acc

    def five_point(self, u):
        """Discrete ``Lap u`` at every node with four neighbours in the array (NaN elsewhere)."""
        out = np.full(self.shape, np.nan)
        out[1:-1, 1:-1] = (
            u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]
        ) / self.h**2
        return out


@dataclass
class DiscProblem:
    """``-d dbar u = Rbar det(a)`` (or ``= source``) in the disc, ``u = boundary`` on the band."""

    grid: DiscGrid
    a: np.ndarray
    boundary: np.ndarray
    Rbar: float = 0.0
    source: np.ndarray | None = None

    def __post_init__(self):
        g = self.grid
        for name in ("a", "boundary"):
            if getattr(self, name).shape != g.shape:
                raise ValueError(f"{name} must have shape {g.shape}")
        vals = self.a[g.inside]
        bad = ~np.isfinite(vals) | (vals <= 0.0)
        if np.any(bad):
            nodes = np.argwhere(g.inside)
            k = int(np.argmax(bad))
            raise EllipticityLost(nodes[k], vals[k])
        if not np.all(np.isfinite(self.boundary[g.band])):
            raise ValueError("boundary data must be finite on the band")

    @property
    def ellipticity(self):
        """``(lambda_e, Lambda_e)`` over inside nodes."""
        v = self.a[self.grid.inside]
        return float(v.min()), float(v.max())

    def rhs_field(self):
        return self.source if self.source is not None else self.Rbar * self.a


def dirichlet_energy(p, u, linear_weight=1.0):
    """``sum |d_z u|^2 h^2 + linear_weight * sum Rbar u det(a) h^2`` over the disc.

    The gradient term is a sum over grid edges joining two inside nodes,
    ``(1/4) (u_i - u_j)^2`` each, so that its minimiser satisfies the
    5-point equation.  With a manufactured ``source`` the linear term uses
    it in place of ``Rbar det(a)``.
    """
    g = p.grid
    ins = g.inside
    e = 0.0
    for sl_a, sl_b in (((slice(1, None), slice(None)), (slice(None, -1), slice(None))),
                       ((slice(None), slice(1, None)), (slice(None), slice(None, -1)))):
        both = ins[sl_a] & ins[sl_b]
        d = (u[sl_a] - u[sl_b])[both]
        e += 0.25 * float(np.sum(d * d))
    lin = float(np.sum((p.rhs_field() * u)[ins])) * g.h**2
    return e + linear_weight * lin


@dataclass
class WeakSolution:
    u: np.ndarray
    energy: float
    residual: float
    iterations: int


def minimize_dirichlet(p, tol=1e-10, maxiter=20000):
    """Minimise the energy with band values pinned, by conjugate gradients.

    ``energy`` is evaluated with :data:`PDE_LINEAR_WEIGHT`, the functional
    actually minimised.  ``residual`` is ``||A u - b|| / ||b||`` (0 if b = 0).
    """
    g = p.grid
    A = g.laplacian
    b = g.h**2 * p.rhs_field()[g.interior] + g.band_coupling(p.boundary)
    x, its, res = pcg(lambda v: A @ v, b, tol=tol, maxiter=maxiter, what="disc Dirichlet solve")
    u = np.zeros(g.shape)
    u[g.band] = p.boundary[g.band]
    u[g.interior] = x
    bnorm = float(np.linalg.norm(b))
    rel = float(np.linalg.norm(A @ x - b)) / bnorm if bnorm > 0 else 0.0
    return WeakSolution(u, dirichlet_energy(p, u, PDE_LINEAR_WEIGHT), rel, its)


def coefficient_from_potential(grid, phi):
    """``a = 1 + Lap phi / 4`` by the 5-point stencil, with the puncture patched.

    Values whose stencil would touch the puncture are replaced by the mean of
    their defined 4-neighbours, and the puncture itself by the mean of its
    four (patched) neighbours.
    """
    a = 1.0 + 0.25 * grid.five_point(phi)
    if grid.puncture:
        ci, cj = grid.centre
        ring = [(ci + 1, cj), (ci - 1, cj), (ci, cj + 1), (ci, cj - 1)]
        for i, j in ring:
            nbs = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))]
            vals = [a[q] for q in nbs if q != (ci, cj) and q not in ring]
            a[i, j] = np.mean(vals)
        a[ci, cj] = np.mean([a[q] for q in ring])
    a[~grid.inside] = np.nan
    return a


@dataclass
class Desingularization:
    u0: np.ndarray
    v: np.ndarray
    sup_v: float
    solution: WeakSolution
    problem: DiscProblem


def desingularize(grid, phi, Rbar, tol=1e-10):
    """Solve for ``u0`` with data ``log det(a)`` and return ``v = log det(a) - u0``.

    ``phi`` is sampled on the full padded grid; its value at the puncture is
    ignored.  ``sup_v`` is taken over inside nodes farther than ``2 h`` from
    the puncture.  ``v`` vanishing up to discretisation error is the discrete
    statement that the metric extends across the puncture.
    """
    phi = np.array(phi, dtype=float)
    if phi.shape != grid.shape:
        raise ValueError(f"potential must have shape {grid.shape}")
    if grid.puncture:
        phi[grid.centre] = np.nan
    a = coefficient_from_potential(grid, phi)
    loga = np.where(grid.inside, np.log(np.where(a > 0, a, 1.0)), np.nan)
    p = DiscProblem(grid, a, np.where(grid.inside, loga, 0.0), Rbar)
    sol = minimize_dirichlet(p, tol=tol)
    v = np.where(grid.inside, loga - sol.u, np.nan)
    far = grid.far_from_puncture(2.0 * grid.h)
    return Desingularization(sol.u, v, float(np.max(np.abs(v[far]))), sol, p)


def barrier_bracket(a_inv, z, q, exclude_radius=0.0):
    """``|z|^2 sum_i a^{i ibar} + ((q - 2) / 2) Re(a^{i jbar} zbar_i z_j)`` per node.

    ``a_inv`` has shape ``(n, n) + S`` with ``a_inv[i, j] = a^{i jbar}`` and
    ``z`` has shape ``(n,) + S``.  Nodes with ``|z| <= exclude_radius`` are
    set to NaN and ignored by the returned minimum.
    """
    if not q < 0:
        raise ValueError(f"q must be negative, got {q}")
    a_inv = np.asarray(a_inv)
    z = np.asarray(z, dtype=complex)
    n = z.shape[0]
    r2 = np.sum(np.abs(z) ** 2, axis=0)
    tr = sum(a_inv[i, i] for i in range(n)).real
    quad = sum(a_inv[i, j] * np.conj(z[i]) * z[j] for i in range(n) for j in range(n)).real
    field = r2 * tr + 0.5 * (q - 2.0) * quad
    field = np.where(np.sqrt(r2) > exclude_radius, field, np.nan)
    return field, float(np.nanmin(field))


def chart_potential(torus_grid, phi, disc_grid, centre=(np.pi, np.pi)):
    """Restrict an ``n = 1`` torus potential to the unit-disc chart ``w = centre + z``.

    The chart has unit scale, so the disc coefficient ``1 + d dbar phi`` is
    the torus metric itself.  Values come from the trigonometric interpolant.
    """
    xs = centre[0] + disc_grid.axis
    ys = centre[1] + disc_grid.axis
    return sample_on_tensor(torus_grid, phi, xs, ys)
