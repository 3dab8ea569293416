"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The disturbed-run fixtures are shared across criteria to keep the
whole suite inside the stated runtime budgets.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import dampedwave as dw
from dampedwave import analysis

SQUARE = dw.DomainSpec.rectangle(1, 1)
EIGEN = dw.InitialRule(dw.EigenmodeField(1, 1), 1.0)


def cfl_dt(h):
    return 0.9 * h / math.sqrt(2.0)


def lambda_h(h):
    return (4.0 / h**2) * math.sin(math.pi * h / 2.0) ** 2 * 2.0


def report(name, ok, detail):
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def zero_localization(grid):
    from dampedwave.geometry import LocalizationField

    z = np.zeros(grid.shape, dtype=bool)
    return LocalizationField(values=np.zeros(grid.shape), omega=z, a0=1.0,
                             profile="constant", band=0.0)


@pytest.fixture(scope="module")
def grid128():
    return dw.build_grid(SQUARE, 1.0 / 128.0)


@pytest.fixture(scope="module")
def grid64():
    return dw.build_grid(SQUARE, 1.0 / 64.0)


@pytest.fixture(scope="module")
def iss_setup(grid64):
    """Criterion-5 geometry: omega is the MGC neighborhood of top and right
    sides seen from x0 = (-1, -1) with eps = 0.25, saturating damping."""
    mgc = dw.build_mgc_region(grid64, (-1.0, -1.0), 0.25)
    loc = dw.build_localization(mgc.omega, 1.0, "constant", grid64)
    cutoffs = dw.build_cutoffs(grid64, mgc.gamma, dw.default_radii(0.25), (-1.0, -1.0))
    spec = dw.DisturbanceSpec(
        dw.Channel(dw.Pulse(0.0, 5.0), dw.GaussianBump((0.7, 0.7), 0.15), 1.0),
        dw.Channel(dw.Pulse(0.0, 5.0), dw.GaussianBump((0.3, 0.4), 0.2), 0.5),
    )
    return mgc, loc, cutoffs, spec


def _iss_config(grid, loc, spec, scale, dt=None):
    return dw.SimConfig(
        grid=grid, localization=loc, law=dw.saturating(),
        disturbance=spec.scaled(scale),
        dt=dt if dt is not None else cfl_dt(grid.h),
        horizon=30.0, record_stride=4, snapshot_every=8, u0=EIGEN,
    )


@pytest.fixture(scope="module")
def iss_disturbed(grid64, iss_setup):
    _, loc, _, spec = iss_setup
    return dw.run(_iss_config(grid64, loc, spec, 1.0))


@pytest.fixture(scope="module")
def iss_baseline(grid64, iss_setup):
    _, loc, _, spec = iss_setup
    return dw.run(_iss_config(grid64, loc, spec, 0.0))


@pytest.fixture(scope="module")
def iss_baseline_half_dt(grid64, iss_setup):
    _, loc, _, spec = iss_setup
    return dw.run(_iss_config(grid64, loc, spec, 0.0, dt=cfl_dt(grid64.h) / 2.0))


def test_criterion_1_conservation(grid128):
    started = time.perf_counter()
    cfg = dw.SimConfig(
        grid=grid128, localization=zero_localization(grid128), law=dw.saturating(),
        disturbance=dw.DisturbanceSpec.none(), dt=cfl_dt(grid128.h),
        horizon=10.0, record_stride=4, u0=EIGEN,
    )
    rec = dw.run(cfg)
    drift = float(np.max(np.abs(rec.E - rec.E[0])) / rec.E[0])
    elapsed = time.perf_counter() - started
    report(
        "criterion 1 conservation",
        drift <= 1e-3 and elapsed <= 60.0,
        f"relative drift {drift:.3e} <= 1e-3, {elapsed:.1f}s <= 60s",
    )


def test_criterion_2_linear_modal_rate(grid128):
    started = time.perf_counter()
    loc = dw.build_localization(grid128.interior, 0.5, "constant", grid128)
    cfg = dw.SimConfig(
        grid=grid128, localization=loc, law=dw.linear(1.0),
        disturbance=dw.DisturbanceSpec.none(), dt=cfl_dt(grid128.h),
        horizon=10.0, record_stride=4, u0=EIGEN,
    )
    rec = dw.run(cfg)
    fit = dw.fit_decay(dw.trace_of(rec))

    lam = lambda_h(grid128.h)
    sol = solve_ivp(
        lambda t, y: [y[1], -lam * y[0] - 0.5 * y[1]],
        (0.0, float(rec.times[-1])), [1.0, 0.0],
        t_eval=rec.times, rtol=1e-10, atol=1e-12,
    )
    E_ode = 0.5 * (lam * sol.y[0] ** 2 + sol.y[1] ** 2) * 0.25
    fit_ode = dw.fit_decay(analysis.EnergyTrace(times=rec.times, E=E_ode))
    rel = abs(fit.sigma_hat - fit_ode.sigma_hat) / fit_ode.sigma_hat
    elapsed = time.perf_counter() - started
    report(
        "criterion 2 linear modal rate",
        rel <= 0.10 and elapsed <= 60.0,
        f"pde {fit.sigma_hat:.4f} vs ode {fit_ode.sigma_hat:.4f}, "
        f"rel diff {rel:.2%} <= 10%, {elapsed:.1f}s <= 60s",
    )


def test_criterion_3_energy_identity_convergence(grid64):
    mgc = dw.build_mgc_region(grid64, (-1.0, -1.0), 0.25)
    loc = dw.build_localization(mgc.omega, 1.0, "constant", grid64)
    res = []
    for dt in (cfl_dt(grid64.h), cfl_dt(grid64.h) / 2.0):
        cfg = dw.SimConfig(
            grid=grid64, localization=loc, law=dw.saturating(),
            disturbance=dw.DisturbanceSpec.none(), dt=dt,
            horizon=2.0, record_stride=4, u0=EIGEN,
        )
        res.append(float(np.nanmax(dw.run(cfg).residual)))
    ratio = res[0] / res[1]
    report(
        "criterion 3 identity residual order",
        3.0 <= ratio <= 5.0,
        f"residuals {res[0]:.3e} -> {res[1]:.3e}, ratio {ratio:.2f} in [3, 5]",
    )


def test_criterion_4_discrete_dissipativity():
    grid = dw.build_grid(SQUARE, 1.0 / 32.0)
    mgc = dw.build_mgc_region(grid, (-1.0, -1.0), 0.25)
    loc = dw.build_localization(mgc.omega, 1.0, "constant", grid)
    worst = []
    for law in (dw.linear(1.0), dw.saturating(), dw.sublinear(), dw.cubic()):
        cfg = dw.SimConfig(
            grid=grid, localization=loc, law=law,
            disturbance=dw.DisturbanceSpec.none(), dt=cfl_dt(grid.h),
            horizon=3.0, record_stride=4, u0=EIGEN,
        )
        rec = dw.run(cfg)
        tol = float(np.diff(rec.times).max() * np.nanmax(rec.residual)) + 1e-12 * rec.E[0]
        excess = float(np.max(np.diff(rec.E)))
        worst.append((law.family, excess, tol))
    ok = all(excess <= tol for _, excess, tol in worst)
    detail = "; ".join(f"{fam}: dE_max {e:.2e} <= {t:.2e}" for fam, e, t in worst)
    report("criterion 4 dissipativity", ok, detail)


def test_criterion_5_iss_boundedness_and_recovery(grid64, iss_disturbed, iss_baseline):
    started = time.perf_counter()
    rec1, rec0 = iss_disturbed, iss_baseline
    e0 = float(rec0.E[0])
    cap = 10.0 * max(e0, 1.0)
    max_e = float(rec1.E.max())
    tail_fit = dw.fit_decay(dw.trace_of(rec1), (10.0, 30.0))
    base_fit = dw.fit_decay(dw.trace_of(rec0))
    ok = (
        math.isfinite(max_e) and max_e <= cap
        and tail_fit.sigma_hat > 0.0 and tail_fit.r2 >= 0.9
        and base_fit.sigma_hat > 0.0
    )
    elapsed = time.perf_counter() - started
    report(
        "criterion 5 iss boundedness and recovery",
        ok and elapsed <= 300.0,
        f"max E {max_e:.3f} <= {cap:.1f}; tail sigma {tail_fit.sigma_hat:.3f} "
        f"r2 {tail_fit.r2:.3f} >= 0.9; baseline sigma {base_fit.sigma_hat:.3f} > 0",
    )


def test_criterion_6_gain_monotonicity(grid64, iss_setup):
    _, loc, _, _ = iss_setup
    spec = dw.DisturbanceSpec(
        dw.Channel.zero(),
        dw.Channel(dw.ExpDecay(0.15), dw.GaussianBump((0.5, 0.5), 0.2), 1.0),
    )
    scales = (0.0, 0.5, 1.0, 2.0)
    traces = []
    budgets = []
    for s in scales:
        cfg = dw.SimConfig(
            grid=grid64, localization=loc, law=dw.saturating(),
            disturbance=spec.scaled(s), dt=cfl_dt(grid64.h),
            horizon=8.0, record_stride=4, u0=EIGEN,
        )
        traces.append(dw.trace_of(dw.run(cfg)))
        budgets.append(dw.compute_budgets(spec.scaled(s), dw.saturating(), 150.0, grid64))
    rep = dw.iss_report(scales, traces, budgets)
    report(
        "criterion 6 gain monotonicity",
        rep.gain_monotone,
        "Einf " + " -> ".join(f"{v:.4f}" for v in rep.E_inf),
    )


def test_criterion_7_poisson(grid64, grid128):
    errs = {}
    for grid in (grid64, grid128):
        rhs = np.where(
            grid.interior, np.sin(math.pi * grid.X) * np.sin(math.pi * grid.Y), 0.0
        )
        z = dw.solve_poisson(rhs, grid)
        exact = -rhs / (2.0 * math.pi**2)
        errs[grid.h] = grid.norm_l2(z - exact) / grid.norm_l2(exact)
    fine = errs[grid128.h]
    ratio = errs[grid64.h] / fine
    disk = dw.build_grid(dw.DomainSpec.disk(1.0), 1.0 / 128.0)
    rhs1 = np.where(disk.interior, 1.0, 0.0)
    z1 = dw.solve_poisson(rhs1, disk)
    exact1 = np.where(disk.interior, (disk.X**2 + disk.Y**2 - 1.0) / 4.0, 0.0)
    disk_err = disk.norm_l2(z1 - exact1) / disk.norm_l2(exact1)
    ok = fine <= 2e-3 and 3.0 <= ratio <= 5.0 and disk_err <= 0.02
    report(
        "criterion 7 poisson verification",
        ok,
        f"eigen err {fine:.2e} <= 0.2%, halving ratio {ratio:.2f} in [3,5], "
        f"disk err {disk_err:.2%} <= 2%",
    )


def test_criterion_8_appendix_verifiers():
    T = 1.5
    t = np.arange(0.0, 28.0 * T, 0.05)
    trace = analysis.EnergyTrace(times=t, E=4.0 * np.exp(-t / T))
    rep = dw.gronwall_check(trace, T, 0.0)
    gronwall_ok = (
        rep.verdict == "holds"
        and rep.worst_hypothesis_margin >= 0.0
        and rep.worst_conclusion_margin >= 0.0
    )
    passes, total = dw.self_test_generalized_gronwall(100, seed=0)
    theta = dw.gn_theta(2, 1, 2, 2, 4)
    ok = gronwall_ok and passes == total == 100 and theta == 0.5
    report(
        "criterion 8 appendix verifiers",
        ok,
        f"gronwall equality margins >= 0: {gronwall_ok}; "
        f"generalized bound {passes}/{total}; theta = {theta}",
    )


def test_criterion_9_trajectory_ratio_stability(iss_baseline, iss_baseline_half_dt):
    r_full, t_full = dw.gn_trajectory_ratio(iss_baseline, 4)
    r_half, t_half = dw.gn_trajectory_ratio(iss_baseline_half_dt, 4)
    variation = max(r_full, r_half) / min(r_full, r_half)
    ok = math.isfinite(r_full) and math.isfinite(r_half) and variation < 10.0
    report(
        "criterion 9 trajectory ratio stability",
        ok,
        f"ratio {r_full:.3f} (dt) vs {r_half:.3f} (dt/2), variation {variation:.3f}x < 10x",
    )


def test_criterion_10_multiplier_boundedness(iss_baseline, iss_setup):
    _, loc, cutoffs, _ = iss_setup
    rhos = []
    for T in (5.0, 10.0, 20.0, 30.0):
        diag = dw.multiplier_terms(iss_baseline, cutoffs, loc, 0.0, T)
        rhos.append(diag.rho)
    ok = all(math.isfinite(r) for r in rhos) and max(rhos) <= 2.0 * rhos[0]
    report(
        "criterion 10 multiplier diagnostic boundedness",
        ok,
        "rho " + " -> ".join(f"{r:.3f}" for r in rhos) + f", max <= 2*rho(5)={2*rhos[0]:.3f}",
    )
