"""Command line runner: ``fracddp {kernel,simulate,rates,driftcheck}``.

Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 failed
threshold in ``--self-check`` mode.
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import replace
import io
import json
import logging
from pathlib import Path
import sys

import numpy as np

from .config import load_config
from .diagnostics import (
    CK_SLACK, CSV_COLUMNS, ENTROPY_SLACK, fit_decay_rate, read_csv_columns, records_to_csv,
)
from .driftmatrix import check_and_decompose, read_matrix
from .exceptions import ConfigError, NumericalAbort
from .integrator import initial_density, run, write_snapshot
from .kernels import (
    closed_form_on_grid, gradient_bound_report, heat_kernel, pointwise_bounds_report,
    self_similarity_check, semigroup_error, time_difference_decay,
)
from .models import ModelKind

log = logging.getLogger("fracddp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SELF_CHECK = 4

PLOT_SCRIPT = '''\
"""Plot the diagnostics written by `fracddp simulate` (log-log)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for name in ("l2", "linf", "dist_selfsim"):
    axes[0].loglog(t[1:], [float(r[name]) for r in rows][1:], label=name)
for name in ("dist_ratio", "grad_psi_ratio", "moment_ratio"):
    axes[1].semilogx(t[1:], [float(r[name]) for r in rows][1:], label=name)
for ax in axes:
    ax.set_xlabel("t")
    ax.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
'''


class SelfCheck:
    def __init__(self):
        self.failures = []

    def require(self, ok, label):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}"
        print(line, file=sys.stderr)
        if not ok:
            self.failures.append(label)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# kernel

def cmd_kernel(cfg, out, checker=None):
    kc = cfg.kernel
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "d", "t", "L", "N", "quantity", "value"])
    summary = {}
    for theta in kc.thetas:
        grid = kc.grid(theta)
        G = heat_kernel(theta, kc.t, grid)
        row = lambda q, v: w.writerow([repr(theta), kc.d, repr(kc.t), repr(grid.L), grid.N, q, repr(float(v))])
        mass_err = abs(G.mass() - 1.0)
        row("G0", np.max(G.values.values))
        row("mass_error", mass_err)
        sg = semigroup_error(theta, 0.5 * kc.t, 0.5 * kc.t, grid)
        row("semigroup_error", sg)
        if theta in (1.0, 2.0) and kc.d <= 2:
            ref = closed_form_on_grid(theta, kc.t, grid)
            inner = grid.radius <= grid.L / 2
            rel = np.max(np.abs(G.values.values - ref)[inner] / ref[inner])
            row("closed_form_max_rel", rel)
            if checker:
                checker.require(rel <= 1e-4, f"kernel theta={theta:g}: closed form rel err {rel:.2e} <= 1e-4")
        for lam in kc.lambdas:
            rep = self_similarity_check(theta, kc.t, lam, grid)
            row(f"similarity_max_lambda_{lam:g}", rep.max_error)
            row(f"similarity_l1_lambda_{lam:g}", rep.l1_error)
            if checker:
                checker.require(rep.l1_error <= 1e-3,
                                f"kernel theta={theta:g}: self-similarity L1 err (lambda={lam:g}) {rep.l1_error:.2e} <= 1e-3")
        pb = pointwise_bounds_report(theta, kc.t, kc.K, grid)
        row("inner_ratio_min", pb["inner_ratio_range"][0])
        row("inner_ratio_max", pb["inner_ratio_range"][1])
        if pb["outer_ratio_range"] is not None:
            row("outer_ratio_min", pb["outer_ratio_range"][0])
            row("outer_ratio_max", pb["outer_ratio_range"][1])
        row("gradient_sup_ratio", gradient_bound_report(theta, kc.t, grid).sup_ratio)
        table = time_difference_decay(theta, kc.s_values)
        _write(out / f"time_difference_theta_{theta:g}.csv", table.to_csv())
        fit = fit_decay_rate(table.s, table.D, (kc.s_values[0], kc.s_values[-1]))
        row("time_difference_slope", fit.slope)
        summary[f"{theta:g}"] = {"mass_error": mass_err, "semigroup_error": sg, "time_difference_slope": fit.slope}
        if checker:
            checker.require(mass_err <= 1e-6, f"kernel theta={theta:g}: |mass - 1| {mass_err:.2e} <= 1e-6")
            checker.require(sg <= 1e-8, f"kernel theta={theta:g}: semigroup err {sg:.2e} <= 1e-8")
            checker.require(-1.2 <= fit.slope <= -0.8,
                            f"kernel theta={theta:g}: time-difference slope {fit.slope:.3f} in [-1.2, -0.8]")
    _write(out / "kernel.csv", buf.getvalue())
    return summary


# ----------------------------------------------------------------------------
# simulate

def _run_one(args):
    """Worker: one simulation, files written under ``run_dir``. Returns a summary dict."""
    cfg, run_dir = args
    run_dir = Path(run_dir)
    model = cfg.model
    grid = cfg.grid
    rho0 = initial_density(grid, model.theta, cfg.amplitude, perturbation=cfg.perturbation, seed=cfg.seed)
    snap_counter = [0]

    def on_output(n, t, f):
        if cfg.snapshot_every and snap_counter[0] % cfg.snapshot_every == 0:
            write_snapshot(run_dir / "snapshots" / f"snap_{snap_counter[0]:05d}", f, t, model)
        snap_counter[0] += 1

    if cfg.snapshot_every:
        (run_dir / "snapshots").mkdir(parents=True, exist_ok=True)
    solver = cfg.solver
    # snapshots are streamed to disk; the in-memory trajectory keeps records only
    traj = run(rho0, model, replace(solver, store_snapshots=False), cfg.diagnostics, callback=on_output)
    text = records_to_csv(traj.records)
    _write(run_dir / "diagnostics.csv", text)
    return {"csv": text, "mass": traj.mass, "steps": traj.steps}


def _fit_columns(cols, window, d, theta):
    t = cols["t"]
    predicted = {
        "l1": 0.0,
        "l2": -(d / theta) * 0.5,
        "linf": -(d / theta),
        "dist_selfsim": -0.5,
        "grad_psi_sup": -(d - 1) / theta,
    }
    out = {}
    for name, vals in cols.items():
        if name == "t":
            continue
        sel = (t >= window[0]) & (t <= window[1]) & np.isfinite(vals)
        if np.any(vals[sel] <= 0) or sel.sum() < 5:
            continue
        fit = fit_decay_rate(t[sel], vals[sel], window)
        entry = fit.to_dict()
        if name in predicted:
            entry["predicted"] = predicted[name]
        out[name] = entry
    return out


def _simulate_checks(checker, cfg, cols, label=""):
    chk = cfg.checks
    mass = cols["mass"]
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    checker.require(drift <= chk.mass_tol, f"{label}mass drift {drift:.2e} <= {chk.mass_tol:g}")
    emin = float(np.min(cols["entropy_p"]))
    checker.require(emin >= -ENTROPY_SLACK, f"{label}min entropy {emin:.2e} >= -{ENTROPY_SLACK:g}")
    ckmin = float(np.min(cols["ck_residual"]))
    checker.require(ckmin >= -CK_SLACK, f"{label}min CK residual {ckmin:.2e} >= -{CK_SLACK:g}")
    if cfg.model.kind in (ModelKind.DRIFT_DIFFUSION_POISSON, ModelKind.GENERAL_DRIFT):
        for name in ("grad_psi_ratio", "moment_ratio"):
            v = cols[name][cols["t"] > 0]
            r = float(v.max() / v.min())
            checker.require(r <= chk.ratio_max, f"{label}{name} max/min {r:.3f} <= {chk.ratio_max:g}")
    fw = cfg.diagnostics.fit_window
    if fw is not None and cfg.model.kind is not ModelKind.FRACTIONAL_BURGERS:
        d, theta = cfg.model.d, cfg.model.theta
        for name, target in (("linf", -d / theta), ("l2", -0.5 * d / theta)):
            s = fit_decay_rate(cols["t"], cols[name], fw).slope
            lo, hi = sorted((target * (1 + chk.slope_tol), target * (1 - chk.slope_tol)))
            checker.require(lo <= s <= hi, f"{label}{name} slope {s:.3f} in [{lo:.3f}, {hi:.3f}]")


def cmd_simulate(cfg, out, jobs=1, checker=None):
    runs = cfg.expand()
    single = len(runs) == 1 and not cfg.sweep
    dirs = [out if single else out / f"run_{i:03d}" for i in range(len(runs))]
    tasks = [(c, str(dr)) for (_, c), dr in zip(runs, dirs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    index = []
    merged = io.StringIO()
    mw = csv.writer(merged, lineterminator="\n")
    mw.writerow(("run",) + CSV_COLUMNS)
    for i, ((params, c), res) in enumerate(zip(runs, results)):
        cols = read_csv_columns(res["csv"])
        entry = {"run": i, "dir": str(dirs[i].relative_to(out)) if not single else ".",
                 "params": params, "mass": res["mass"], "steps": res["steps"]}
        if c.diagnostics.fit_window is not None:
            fits = _fit_columns(cols, c.diagnostics.fit_window, c.model.d, c.model.theta)
            entry["rates"] = fits
            _write(dirs[i] / "rates.json", json.dumps(fits, indent=2, sort_keys=True) + "\n")
        index.append(entry)
        for line in res["csv"].splitlines()[1:]:
            mw.writerow([i] + line.split(","))
        if checker:
            _simulate_checks(checker, c, cols, "" if single else f"run {i}: ")
    if not single:
        _write(out / "diagnostics_merged.csv", merged.getvalue())
        _write(out / "runs.json", json.dumps(index, indent=2, sort_keys=True) + "\n")
    _write(out / "plot_diagnostics.py", PLOT_SCRIPT.format(csv="diagnostics.csv"))
    return index


# ----------------------------------------------------------------------------
# rates / driftcheck

def cmd_rates(csv_path, window, theta=None, d=None):
    cols = read_csv_columns(csv_path)
    tname = next(iter(cols))
    t = cols[tname]
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 5:
        raise ConfigError(f"window {window} holds {int(sel.sum())} samples; need at least 5", "--window")
    out = {}
    for name, vals in cols.items():
        if name == tname:
            continue
        v = vals[sel]
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            continue
        entry = fit_decay_rate(t[sel], v, window).to_dict()
        pred = None
        if name == "D":
            pred = -1.0
        elif theta is not None and d is not None:
            pred = {"l1": 0.0, "l2": -0.5 * d / theta, "linf": -d / theta,
                    "dist_selfsim": -0.5, "grad_psi_sup": -(d - 1) / theta}.get(name)
        if pred is not None:
            entry["predicted"] = pred
        out[name] = entry
    if not out:
        raise ConfigError("no positive column to fit in the window", "--window")
    return {"time_column": tname, "window": list(window), "fits": out}


def cmd_driftcheck(path):
    try:
        D = read_matrix(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read drift matrix {path}: {exc}", "matrix") from None
    return check_and_decompose(D).to_dict()


# ----------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fracddp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", type=Path, help="experiment config file")
            sp.add_argument("--seed", type=int, help="override solver.seed")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--self-check", action="store_true", help="exit 4 if a threshold fails")

    k = sub.add_parser("kernel", help="heat-kernel identity suite")
    common(k)
    s = sub.add_parser("simulate", help="run the configured model (and sweep)")
    common(s)
    s.add_argument("--jobs", type=int, default=1, help="concurrent runs for sweeps")
    r = sub.add_parser("rates", help="log-log decay fits of a CSV")
    r.add_argument("csv", type=Path)
    r.add_argument("--window", type=float, nargs=2, required=True, metavar=("T1", "T2"))
    r.add_argument("--theta", type=float)
    r.add_argument("--dim", type=int)
    r.add_argument("--out", type=Path, help="also write the JSON here")
    dc = sub.add_parser("driftcheck", help="admissibility of a drift matrix")
    dc.add_argument("matrix", type=Path)
    dc.add_argument("--out", type=Path, help="also write the JSON here")
    dc.add_argument("--self-check", action="store_true", help="exit 4 if not admissible")
    return p


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if out is not None:
        _write(out, text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    checker = SelfCheck() if getattr(args, "self_check", False) else None
    try:
        if args.command in ("kernel", "simulate"):
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = cfg.with_seed(args.seed)
            args.out.mkdir(parents=True, exist_ok=True)
            if args.command == "kernel":
                cmd_kernel(cfg, args.out, checker)
            else:
                if args.jobs < 1:
                    raise ConfigError("--jobs must be >= 1", "--jobs")
                cmd_simulate(cfg, args.out, args.jobs, checker)
        elif args.command == "rates":
            if args.window[0] <= 0 or args.window[1] <= args.window[0]:
                raise ConfigError("window must satisfy 0 < T1 < T2", "--window")
            _emit_json(cmd_rates(args.csv, tuple(args.window), args.theta, args.dim), args.out)
        else:
            verdict = cmd_driftcheck(args.matrix)
            _emit_json(verdict, args.out)
            if checker:
                checker.require(verdict["admissible"], "drift matrix admissible")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        where = f" (step {exc.step})" if exc.step is not None else ""
        print(f"numerical abort{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if checker and checker.failures:
        print(f"{len(checker.failures)} self-check failure(s)", file=sys.stderr)
        return EXIT_SELF_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
