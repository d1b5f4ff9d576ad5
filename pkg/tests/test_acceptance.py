"""Acceptance criteria, one verdict line each (collected in the terminal summary)."""

import time

import numpy as np
import pytest

from calabi.diagnostics import decay_rate_fit, dissipation_identity_check
from calabi.disc import DiscGrid, DiscProblem, chart_potential, desingularize, minimize_dirichlet
from calabi.errors import NonAdmissible
from calabi.flow import IntegratorConfig, run
from calabi.geometry import assemble_metric, global_integrals, scalar_curvature
from calabi.grid import TorusGrid, random_spectrum_field
from calabi.operators import futaki, hessian_pairing, l2_pairing, lichnerowicz_apply, lowest_eigenvalue


def cos_x(g, eps):
    return eps * np.cos(g.coords()[0])


def admissible_random(g, decay, seed, amplitude, k_max=None):
    """Seeded random potential, amplitude halved until the metric is positive."""
    while True:
        phi = random_spectrum_field(g, decay, seed, amplitude, k_max)
        try:
            assemble_metric(g, phi)
            return phi
        except NonAdmissible:
            amplitude *= 0.5


def test_criterion_01_fixed_point_and_conservation(verdict):
    g = TorusGrid(1, 64)
    t0 = time.perf_counter()
    res = run(g, np.zeros(g.shape), IntegratorConfig(t_end=1.0, halt_on_stationary=False))
    elapsed = time.perf_counter() - t0
    r0 = res.records[0]
    ca = max(r.Ca for r in res.records)
    dV = max(abs(r.V - r0.V) for r in res.records) / r0.V
    dS = max(abs(r.S - r0.S) for r in res.records) / r0.V
    ok = res.cause == "t_end" and ca == 0.0 and dV <= 1e-10 and dS <= 1e-10 and elapsed < 5
    verdict("1", "fixed point & conservation", ok,
            f"max Ca={ca:.1e}, dV/V={dV:.1e}, dS/V={dS:.1e}, runtime {elapsed:.2f}s")


def test_criterion_02_curvature_oracle(verdict):
    g = TorusGrid(1, 64)
    x, _ = g.coords()
    parts, ok = [], True
    for eps in (1e-6, 1e-5):
        R = scalar_curvature(assemble_metric(g, eps * np.cos(x)))
        err = np.max(np.abs(R + eps * np.cos(x) / 16))
        ok &= err <= 5 * eps**2
        parts.append(f"eps={eps:g}: err={err:.2e} (bound {5 * eps**2:.0e})")
    verdict("2", "curvature oracle", ok, "; ".join(parts))


def test_criterion_03_monotonicity(verdict):
    worst, steps, bad = 0.0, 0, []
    for n, N, t_end in ((1, 32, 0.5), (2, 8, 0.2)):
        g = TorusGrid(n, N)
        for seed in range(10):
            phi = admissible_random(g, 2.5, seed, 0.5)
            res = run(g, phi, IntegratorConfig(t_end=t_end, rtol=1e-4, record_interval=0.05))
            steps += res.steps
            if res.violations or res.cause != "t_end":
                bad.append((n, seed, res.cause, len(res.violations)))
            cam0 = res.records[0].Cam
            worst = max([worst] + [v / cam0 for _, v in res.violations])
    verdict("3", "gradient-flow monotonicity", not bad,
            f"20 runs (10 with n=1, 10 with n=2), {steps} accepted steps, offending runs {bad}, "
            f"worst relative rise {worst:.1e}")


def test_criterion_04_dissipation_identity(verdict):
    g = TorusGrid(1, 64)
    defects = []
    for dt in (1e-2, 5e-3):
        cfg = IntegratorConfig(scheme="imex-cn", adaptive=False, dt_init=dt, dt_min=dt / 4, dt_max=dt,
                               t_end=2.0, record_interval=dt)
        res = run(g, cos_x(g, 1e-3), cfg)
        defects.append(dissipation_identity_check(res.records).defect)
    ratio = defects[0] / defects[1]
    ok = defects[0] <= 1e-3 and ratio >= 3.5
    verdict("4", "dissipation identity", ok,
            f"defect(dt=1e-2)={defects[0]:.3e}, defect(dt=5e-3)={defects[1]:.3e}, reduction {ratio:.2f}x")


def test_criterion_05_exponential_decay(verdict):
    g = TorusGrid(1, 64)
    t0 = time.perf_counter()
    res = run(g, cos_x(g, 1e-3), IntegratorConfig(scheme="imex-cn", t_end=32, record_interval=0.5))
    elapsed = time.perf_counter() - t0
    delta, resid = decay_rate_fit(res.records)
    rel = abs(delta - 1 / 8) / (1 / 8)
    verdict("5", "exponential decay", rel <= 0.02 and elapsed < 60,
            f"delta={delta:.6f} (rel err {rel:.1e}), fit residual {resid:.1e}, runtime {elapsed:.1f}s")


def test_criterion_06_lichnerowicz_spectrum(verdict):
    parts, ok = [], True
    for n in (1, 2):
        g = TorusGrid(n, 16)
        rep = lowest_eigenvalue(assemble_metric(g, np.zeros(g.shape)), tol=1e-6)
        good = abs(rep.eigenvalue - 1 / 16) <= 1e-6 and rep.rayleigh_residual <= 1e-6
        ok &= good
        parts.append(f"n={n}: lambda1={rep.eigenvalue:.12f}, residual {rep.rayleigh_residual:.1e}")
    verdict("6", "Lichnerowicz spectrum", ok, "; ".join(parts))


def test_criterion_07_futaki(verdict):
    g = TorusGrid(1, 32)
    vals, ratios = [], []
    for seed in range(10):
        m = assemble_metric(g, admissible_random(g, 2.0, seed, 0.3, k_max=4))
        R = scalar_curvature(m)
        integ = global_integrals(m, R)
        f = futaki(m, 0, R, tol=1e-11)
        vals.append(f)
        ratios.append(abs(f) / np.sqrt(integ.calabi * integ.volume))
    spread = max(abs(a - b) for a in vals for b in vals)
    ok = max(ratios) <= 1e-6 and spread <= 2e-6
    verdict("7", "Futaki character", ok,
            f"max |f|/sqrt(Ca V)={max(ratios):.1e} over 10 potentials, max pairwise difference {spread:.1e}")


def test_criterion_08_smoothing(verdict):
    g = TorusGrid(1, 128)
    phi = admissible_random(g, 4.6, 0, 0.1)
    res = run(g, phi, IntegratorConfig(scheme="imex-cn", t_end=0.1, rtol=1e-7, record_interval=0.1))
    before, after = res.records[0].tail, res.records[-1].tail
    verdict("8", "smoothing", before / after >= 1e4,
            f"tail above k=32: {before:.2e} -> {after:.2e} (reduction {before / after:.3g}x)")


def test_criterion_09_self_adjointness(verdict):
    g = TorusGrid(1, 64)
    worst_sym, worst_pos = 0.0, np.inf
    for i in range(20):
        m = assemble_metric(g, admissible_random(g, 2.0, 100 + i, 0.3, k_max=6))
        f = random_spectrum_field(g, 3.0, 200 + i, 1.0, k_max=12)
        k = random_spectrum_field(g, 3.0, 300 + i, 1.0, k_max=12)
        a = l2_pairing(m, lichnerowicz_apply(m, f), k)
        b = l2_pairing(m, f, lichnerowicz_apply(m, k))
        scale = np.sqrt(hessian_pairing(m, f, f) * hessian_pairing(m, k, k))
        worst_sym = max(worst_sym, abs(a - b) / scale)
        worst_pos = min(worst_pos, l2_pairing(m, lichnerowicz_apply(m, f), f) / hessian_pairing(m, f, f))
    ok = worst_sym <= 1e-6 and worst_pos >= -1e-10
    verdict("9", "self-adjointness & positivity", ok,
            f"max relative asymmetry {worst_sym:.1e}, min <Df,f>/|f_ab|^2 = {worst_pos:.6f}")


# -- singularity removal ---------------------------------------------------------------------------

def _manufactured(g):
    x, y = g.xy
    s = np.sin(np.pi * x) * np.sin(np.pi * y)
    q = 1 - x * x - y * y
    gsx = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    gsy = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    lap = -2 * np.pi**2 * s * q - 4 * (x * gsx + y * gsy) - 4 * s
    return s * q + x * y, -lap / 4


def _threshold(g, tol=1e-10):
    return 10 * (tol + g.h)


def test_criterion_10a_manufactured_order(verdict):
    errs = []
    for Nd in (65, 129, 257):
        g = DiscGrid(Nd)
        x, y = g.xy
        u, f = _manufactured(g)
        a = 1 + 0.3 * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        sol = minimize_dirichlet(DiscProblem(g, a, u, 0.0, f))
        errs.append(np.max(np.abs(sol.u - u)[g.inside]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    verdict("10a", "manufactured convergence order", bool(np.all(orders >= 1.5)),
            f"sup errors {', '.join(f'{e:.2e}' for e in errs)}; orders {', '.join(f'{o:.2f}' for o in orders)}")


def test_criterion_10b_flat_puncture(verdict):
    g = DiscGrid(129)
    res = desingularize(g, np.zeros(g.shape), 0.0)
    verdict("10b", "flat punctured disc", res.sup_v <= 1e-8, f"sup|v|={res.sup_v:.1e}")


def test_criterion_10c_near_cscK_chart(verdict):
    tg = TorusGrid(1, 64)
    x, y = tg.coords()
    res = run(tg, 0.3 * np.cos(x) + 0.2 * np.cos(x + y),
              IntegratorConfig(scheme="imex-cn", t_end=40, record_interval=5))
    g = DiscGrid(129)
    d = desingularize(g, chart_potential(tg, res.state.phi, g), 0.0)
    thr = _threshold(g)
    verdict("10c", "near-cscK chart", d.sup_v <= thr,
            f"flowed to Cam={res.records[-1].Cam:.1e}; sup|v|={d.sup_v:.2e} <= {thr:.3f}")


def test_criterion_10d_negative_control(verdict):
    g = DiscGrid(129)
    x, y = g.xy
    s = 1 + (x * x + y * y) / 4
    # exact curvature of a = 1 + |z|^2/4 is -1/(4 s^3); use its volume-weighted mean as the constant
    ins = g.inside
    Rbar = float(np.sum((-1 / (4 * s**3) * s)[ins]) / np.sum(s[ins]))
    d = desingularize(g, (x * x + y * y) ** 2 / 16, Rbar)
    thr = _threshold(g)
    verdict("10d", "negative control", d.sup_v >= 100 * thr,
            f"sup|v|={d.sup_v:.3e} vs required >= 100 x {thr:.4f} = {100 * thr:.2f} (Rbar={Rbar:.4f})")


def test_criterion_11_continuation_shadow(verdict):
    halts, correlated, lines = 0, 0, []
    for n, N in ((1, 32), (2, 8)):
        g = TorusGrid(n, N)
        for i, lam0 in enumerate((1e-1, 1e-2, 1e-3)):
            base = random_spectrum_field(g, 2.0, i, 1.0)
            lo, hi = 0.0, 100.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                try:
                    good = assemble_metric(g, mid * base).eig_min.min() > lam0
                except NonAdmissible:
                    good = False
                lo, hi = (mid, hi) if good else (lo, mid)
            res = run(g, lo * base, IntegratorConfig(t_end=0.5, dt_init=1e-8, dt_min=1e-12, rtol=1e-4))
            ric = np.array([r.sup_ric for r in res.records])
            if res.cause in ("non_admissible", "step_failure"):
                halts += 1
                correlated += bool(np.any(ric[-10:] > 10 * np.median(ric)))
            lines.append(f"n={n} lambda0={lam0:g}: {res.cause}")
    ok = correlated == halts
    note = " (vacuous: no run halted)" if halts == 0 else ""
    verdict("11", "continuation criterion shadow", ok,
            f"{halts} of 6 runs halted, {correlated} preceded by a Ricci spike{note}; " + ", ".join(lines))
