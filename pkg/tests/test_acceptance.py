"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one ``[PASS]``/``[FAIL]`` line, collected in the terminal
summary. Informational lines report oracles that explain a failure.
"""
import numpy as np
import pytest

from acceptance_log import info, report
from fracddp.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsConfig,
    entropy_Ep,
    entropy_production_sign_probe,
    fit_decay_rate,
)
from fracddp.driftmatrix import check_and_decompose, compose
from fracddp.integrator import SolverConfig, initial_density, run
from fracddp.kernels import (
    closed_form_on_grid,
    heat_kernel,
    self_similarity_check,
    semigroup_error,
    time_difference_decay,
)
from fracddp.models import ModelSpec, RescaleMap, SpectralModel, distance_equivalence_check
from fracddp.spectral import Field, GridSpec

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

THETA, D, N, L, A = 0.8, 2, 256, 40.0, 0.5
DT, T_END, OUT_EVERY = 0.05, 20.0, 5


def ddp_run(dt, output_every, snapshots=False):
    grid = GridSpec(D, L, N)
    cfg = SolverConfig(dt=dt, t_end=T_END, output_every=output_every, store_snapshots=snapshots)
    return run(initial_density(grid, THETA, A), ModelSpec("ddp", THETA, D), cfg)


@pytest.fixture(scope="module")
def ddp():
    return ddp_run(DT, OUT_EVERY, snapshots=True)


@pytest.fixture(scope="module")
def ddp_half():
    return ddp_run(DT / 2, 2 * OUT_EVERY)


def window(traj, name, t1, t2):
    t = np.asarray(traj.times)
    sel = (t >= t1) & (t <= t2)
    return t[sel], traj.column(name)[sel]


# ----------------------------------------------------------------------------

def test_criterion_1_kernel_identities():
    worst = {"mass": 0.0, "closed": 0.0, "similarity": 0.0, "semigroup": 0.0}
    t = 1.0
    for theta in (0.8, 1.0, 1.5, 2.0):
        for d in (1, 2):
            grid = GridSpec(d, 20.0 * t ** (1.0 / theta), 256)
            G = heat_kernel(theta, t, grid)
            worst["mass"] = max(worst["mass"], abs(G.mass() - 1.0))
            if theta in (1.0, 2.0):
                ref = closed_form_on_grid(theta, t, grid)
                inner = grid.radius <= grid.L / 2
                rel = np.max(np.abs(G.values.values - ref)[inner] / ref[inner])
                worst["closed"] = max(worst["closed"], rel)
            for lam in (0.5, 2.0):
                worst["similarity"] = max(worst["similarity"], self_similarity_check(theta, t, lam, grid).l1_error)
            worst["semigroup"] = max(worst["semigroup"], semigroup_error(theta, 0.5 * t, 0.5 * t, grid))
    ok = (worst["mass"] <= 1e-6 and worst["closed"] <= 1e-4
          and worst["similarity"] <= 1e-3 and worst["semigroup"] <= 1e-8)
    report(1, ok, "worst |mass-1| {mass:.1e}, closed form {closed:.1e}, similarity L1 {similarity:.1e}, "
           "semigroup {semigroup:.1e}".format(**worst))
    assert ok


def test_criterion_2_time_difference_rates():
    s = np.geomspace(5.0, 50.0, 19)
    slopes, spreads = {}, {}
    for theta in (0.8, 1.0, 1.5, 2.0):
        table = time_difference_decay(theta, s)
        slopes[theta] = fit_decay_rate(table.s, table.D, (5.0, 50.0)).slope
        spreads[theta] = float(table.D_halfrate.max() / table.D_halfrate.min())
    slope_ok = all(-1.2 <= v <= -0.8 for v in slopes.values())
    spread_ok = all(v <= 3.0 for v in spreads.values())
    text = ", ".join(f"theta={k:g}: slope {slopes[k]:.3f} max/min {spreads[k]:.2f}" for k in slopes)
    report("2a", slope_ok, f"L1 time-difference slope in [-1.2, -0.8]; {text}")
    report("2b", spread_ok, "D(s)(1+theta s)^(1/2) max/min <= 3 on [5, 50]")
    if not spread_ok:
        # with D ~ s^-1 the product behaves like s^-1/2, so its spread over [5, 50] is near sqrt(10)
        info("2b", f"sqrt(50/5) = {np.sqrt(10):.3f} is the spread of s^(-1/2) on the window")
    assert slope_ok
    assert spread_ok


def test_criterion_3_conservation_positivity(ddp, ddp_half):
    mass = ddp.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    pos = min(float(np.min(f.values) / np.max(f.values)) for f in ddp.snapshots)
    assert np.allclose(ddp.times, ddp_half.times, rtol=0, atol=1e-12)
    changes = {}
    for name in CSV_COLUMNS[1:]:
        a, b = ddp.column(name), ddp_half.column(name)
        sel = np.isfinite(a) & np.isfinite(b)
        changes[name] = float(np.sum(np.abs(a[sel] - b[sel])) / np.sum(np.abs(b[sel])))
    worst = max(changes, key=changes.get)
    ok = drift <= 1e-10 and pos >= -1e-8 and changes[worst] <= 1e-4
    report(3, ok, f"mass drift {drift:.1e}, min rho/max rho {pos:.1e}, "
           f"dt-halving relative L1 change {changes[worst]:.1e} ({worst})")
    assert ok


def test_criterion_4_lp_decay(ddp):
    target_inf = -D / THETA
    target_2 = -(D / THETA) * 0.5
    s_inf = fit_decay_rate(*window(ddp, "linf", 5, 20), (5, 20)).slope
    s_2 = fit_decay_rate(*window(ddp, "l2", 5, 20), (5, 20)).slope
    ok_inf = target_inf * 1.15 <= s_inf <= target_inf * 0.85
    ok_2 = target_2 * 1.15 <= s_2 <= target_2 * 0.85
    report(4, ok_inf and ok_2, f"Linf slope {s_inf:.3f} (target {target_inf:.3f} +-15%), "
           f"L2 slope {s_2:.3f} (target {target_2:.3f} +-15%)")
    if not (ok_inf and ok_2):
        # pure heat flow at the same amplitude, run-box versus a box ten times wider
        for Lb, Nb in ((L, N), (10 * L, 2048)):
            g = GridSpec(D, Lb, Nb)
            ts = np.linspace(5, 20, 16)
            linf = [A * heat_kernel(THETA, t + 1.0, g).values.values.max() for t in ts]
            info(4, f"pure heat oracle L={Lb:g} N={Nb}: Linf slope {fit_decay_rate(ts, linf, (5, 20)).slope:.3f}")
    assert ok_inf and ok_2


def test_criterion_5_self_similar_distance(ddp):
    t, ratio = window(ddp, "dist_ratio", 2, 20)
    spread = float(ratio.max() / ratio.min())
    slope = fit_decay_rate(*window(ddp, "dist_selfsim", 2, 20), (2, 20)).slope
    ok_spread = spread <= 5.0
    ok_slope = slope <= -0.4
    report(5, ok_spread and ok_slope, f"dist*(1+theta t)^(1/2) max/min {spread:.2f} <= 5, "
           f"distance slope {slope:.3f} <= -0.4")
    if not ok_spread:
        for Lb, Nb in ((L, N), (10 * L, 2048)):
            g = GridSpec(D, Lb, Nb)
            ts = np.linspace(2, 20, 10)
            dist = np.array([A * g.integrate(np.abs(heat_kernel(THETA, s + 1.0, g).values.values
                                                    - heat_kernel(THETA, s, g).values.values)) for s in ts])
            r = dist * np.sqrt(1 + THETA * ts)
            info(5, f"pure heat oracle L={Lb:g} N={Nb}: ratio max/min {r.max() / r.min():.2f}, "
                    f"slope {fit_decay_rate(ts, dist, (2, 20)).slope:.3f}")
    assert ok_spread and ok_slope


def test_criterion_6_entropy(ddp):
    e_min = float(np.min(ddp.column("entropy_p")))
    ck_min = float(np.min(ddp.column("ck_residual")))
    grid = GridSpec(D, L, N)
    slopes = {}
    for theta in (0.8, 1.5):
        S = np.linspace(0.0, 20.0, 81)
        E = np.array([entropy_Ep(heat_kernel(theta, s + 1.0, grid).values, 1.0, theta, s) for s in S])
        tc = RescaleMap(theta, D, 1.0).confined_time(S)
        # beyond roundoff the entropy is pure noise; fit where it is resolved
        sel = (S > 0) & (E > 1e-10 * E.max())
        slopes[theta] = float(np.polyfit(tc[sel], np.log(E[sel]), 1)[0])
    ok_env = all(v <= -0.9 * th for th, v in slopes.items())
    ok = e_min >= -1e-8 and ck_min >= -1e-6 and ok_env
    text = ", ".join(f"theta={k:g}: {v:.2f} (<= {-0.9 * k:.2f})" for k, v in slopes.items())
    report(6, ok, f"min E_p {e_min:.1e}, min CK residual {ck_min:.1e}, heat-flow entropy slopes {text}")
    assert ok


def test_criterion_7_distance_equivalence(ddp):
    idx = np.linspace(1, len(ddp.times) - 1, 5).astype(int)
    gaps = []
    for i in idx:
        lhs, rhs = distance_equivalence_check(ddp.snapshots[i], ddp.mass, THETA, ddp.times[i])
        gaps.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    ok = max(gaps) <= 1e-3
    report(7, ok, f"max relative gap {max(gaps):.1e} at t = {[round(ddp.times[i], 2) for i in idx]}")
    assert ok


def test_criterion_8_bound_ratios(ddp):
    assert DiagnosticsConfig().moment_exponent(D, THETA) == 2 * D / THETA
    t = np.asarray(ddp.times)
    spreads = {}
    for name in ("grad_psi_ratio", "moment_ratio"):
        v = ddp.column(name)[t > 0]
        spreads[name] = float(v.max() / v.min())
    ok = all(v <= 5.0 for v in spreads.values())
    report(8, ok, ", ".join(f"{k} max/min {v:.2f}" for k, v in spreads.items()) + " (<= 5)")
    assert ok


def test_criterion_9_qg_and_burgers():
    grid = GridSpec(2, 40.0, 256)
    model = ModelSpec("qg", 1.5, 2)
    rho0 = initial_density(grid, 1.5, 0.5, perturbation=0.5, seed=0)
    qg = run(rho0, model, SolverConfig(dt=0.02, t_end=10.0, output_every=25))
    ps = sorted(qg.records[0].lp_norms)
    monotone = True
    for p in ps:
        v = np.array([r.lp_norms[p] for r in qg.records])
        monotone &= bool(np.all(np.diff(v) <= 1e-12 * v[:-1]))
    sm = SpectralModel(model, grid)
    idx = np.linspace(0, len(qg.times) - 1, 5).astype(int)
    ortho = 0.0
    for i in idx:
        rho = qg.snapshots[i].values
        Nf = grid.ifft(sm.nonlinear(grid.fft(rho))[0])
        for p in (2.0, 3.0):
            w = np.maximum(rho, 0.0) ** (p - 1)
            rel = abs(grid.integrate(w * Nf)) / np.sqrt(grid.integrate(w * w) * grid.integrate(Nf * Nf))
            ortho = max(ortho, rel)
    ok_qg = monotone and ortho <= 1e-8

    bgrid = GridSpec(1, 500.0, 8192)
    burgers = run(initial_density(bgrid, 1.5, 0.5), ModelSpec("burgers", 1.5, 1),
                  SolverConfig(dt=0.01, t_end=50.0, output_every=10, store_snapshots=False))
    mass = burgers.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    slope = fit_decay_rate(*window(burgers, "linf", 5, 50), (5, 50)).slope
    target = -1 / 1.5
    ok_b = drift <= 1e-10 and target * 1.2 <= slope <= target * 0.8
    report(9, ok_qg and ok_b, f"QG norms p={[float(p) for p in ps]} non-increasing: {monotone}, "
           f"orthogonality {ortho:.1e}; Burgers mass drift {drift:.1e}, Linf slope {slope:.3f} "
           f"(target {target:.3f} +-20%)")
    assert ok_qg and ok_b


def test_criterion_10_drift_matrices():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        a = float(rng.uniform(1e-3, 1e3))
        S = rng.normal(scale=rng.uniform(0, 10), size=(d, d))
        B = S - S.T
        v = check_and_decompose(compose(a, B))
        assert v.admissible
        worst = max(worst, abs(v.a - a) / max(1.0, a), np.max(np.abs(v.B - B)) / max(1.0, np.max(np.abs(B))))
    witnesses = 0
    for _ in range(200):
        d = int(rng.integers(2, 5))
        M = rng.normal(size=(d, d))
        v = check_and_decompose(M)
        if v.admissible or v.boundary or v.witness is None:
            continue
        x = v.witness
        assert x @ M @ x - np.trace(M) * (x @ x) / d > 0
        witnesses += 1

    grid = GridSpec(2, 10.0, 64)
    X, Y = grid.coords
    rho = Field(grid, np.exp(-(X - 0.5) ** 2 / 2 - (Y + 0.3) ** 2 / 1.3 - 0.3 * X * Y))
    probe_worst, trace_neg = 0.0, True
    for _ in range(20):
        a = float(rng.uniform(0.1, 3))
        b = float(rng.normal())
        out = entropy_production_sign_probe(rho, compose(a, [[0, b], [-b, 0]]), float(rng.uniform(1.1, 3)))
        probe_worst = max(probe_worst, abs(out["fluctuation_term"]) / abs(out["trace_term"]))
        trace_neg &= out["trace_term"] < 0
    ok = worst <= 1e-12 and witnesses > 0 and probe_worst <= 1e-8 and trace_neg
    report(10, ok, f"1000 round trips worst error {worst:.1e}, {witnesses} witnesses verified, "
           f"fluctuation/trace {probe_worst:.1e}, trace terms negative: {trace_neg}")
    assert ok
