"""Diagnostic records along a run and their post-hoc analysis."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData, NonPositiveEnergy
from .geometry import equivalence_constants, ricci, ricci_norm
from .grid import spectral_tail_norm
from .operators import dissipation

CSV_FIELDS = ("t", "Ca", "Cam", "V", "S", "dissip", "lam", "Lam", "sup_phi", "sup_ric", "sup_F", "tail", "dt")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    Ca: float
    Cam: float
    V: float
    S: float
    dissip: float
    lam: float
    Lam: float
    sup_phi: float
    sup_ric: float
    sup_F: float
    tail: float
    dt: float

    def as_row(self):
        return tuple(getattr(self, f) for f in CSV_FIELDS)

    def asdict(self):
        return asdict(self)


def diagnose(state, Rbar=None, k_cut=None):
    """Record for a flow state.  ``Rbar`` defaults to the state's own mean curvature."""
    m = state.metric
    g = m.grid
    lam, Lam = equivalence_constants(m)
    integ = state.integrals
    Rbar = integ.mean_scalar if Rbar is None else Rbar
    Rc = state.R - Rbar
    cam = float(np.sum(Rc * Rc * m.density))
    k_cut = g.N // 4 if k_cut is None else k_cut
    return DiagnosticsRecord(
        t=float(state.t),
        Ca=integ.calabi,
        Cam=cam,
        V=integ.volume,
        S=integ.total_scalar,
        dissip=dissipation(m, state.R),
        lam=lam,
        Lam=Lam,
        sup_phi=float(np.max(np.abs(state.phi))),
        sup_ric=float(np.max(ricci_norm(m, ricci(m)))),
        sup_F=float(np.max(np.abs(m.log_det))),
        tail=spectral_tail_norm(g, state.phi, k_cut),
        dt=float(state.last_dt),
    )


def decay_rate_fit(series, window=None, key="Ca"):
    """Least-squares fit ``log Ca ~ a - delta t`` over records with ``t`` in ``window``.

    Returns ``(delta, residual)`` with the root-mean-square residual of the
    fit in log space.  ``series`` is a list of records or a mapping of
    column arrays.
    """
    t, y = _columns(series, "t", key)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 10:
        raise InsufficientData(f"need at least 10 records in the window, got {len(t)}")
    if np.any(y <= 0.0):
        raise NonPositiveEnergy(f"{key} is not positive throughout the window")
    A = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    resid = np.log(y) - A @ coef
    return float(-coef[1]), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class IdentityCheck:
    defect: float
    degenerate: bool


def dissipation_identity_check(series, rtol_spacing=1e-9):
    """Largest defect of ``dCam/dt = -2 * dissipation`` over interior records.

    ``dCam/dt`` is a centred difference, so records must be uniformly
    spaced.  A run with identically vanishing energy and dissipation is
    reported as ``IdentityCheck(0.0, degenerate=True)``.
    """
    t, cam, dis = _columns(series, "t", "Cam", "dissip")
    if len(t) < 3:
        raise InsufficientData("need at least 3 records")
    dts = np.diff(t)
    if np.max(np.abs(dts - dts[0])) > rtol_spacing * max(1.0, abs(dts[0])):
        raise InsufficientData("records are not uniformly spaced")
    if not np.any(cam) and not np.any(dis):
        return IdentityCheck(0.0, True)
    rate = (cam[2:] - cam[:-2]) / (t[2:] - t[:-2])
    d = dis[1:-1]
    return IdentityCheck(float(np.max(np.abs(rate + 2 * d) / (1 + 2 * d))), False)


def _columns(series, *names):
    if isinstance(series, dict):
        return tuple(np.asarray(series[k], dtype=float) for k in names)
    return tuple(np.array([getattr(r, k) for r in series], dtype=float) for k in names)
