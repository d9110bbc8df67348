"""Norms, entropies, distances and decay-rate fits recorded along a run."""
import csv
from dataclasses import dataclass, field
import io
from typing import Dict, Optional, Tuple

import numpy as np

from ._validation import check_exponent, check_positive, check_theta
from .driftmatrix import as_matrix
from .kernels import heat_kernel
from .spectral import gradient, poisson_solve

__all__ = [
    "DiagnosticsConfig",
    "DiagnosticsRecord",
    "RateFit",
    "CSV_COLUMNS",
    "lp_norm",
    "distance_to_self_similar",
    "entropy_Ep",
    "csiszar_kullback_check",
    "weighted_moment_norm",
    "moment_ratio",
    "grad_psi_sup",
    "bregman_distance",
    "fit_decay_rate",
    "entropy_production_sign_probe",
    "compute_record",
    "records_to_csv",
    "read_csv_columns",
]

ENTROPY_SLACK = 1e-8
CK_SLACK = 1e-6

CSV_COLUMNS = (
    "t", "mass", "l1", "l2", "linf", "dist_selfsim", "dist_ratio", "entropy_p",
    "ck_residual", "grad_psi_sup", "grad_psi_ratio", "moment_q", "moment_ratio",
)


def lp_norm(f, p):
    """Rectangle-rule ``L^p`` norm; ``p = inf`` gives ``max |f|``."""
    p = check_exponent(p)
    v = np.abs(f.values)
    if np.isinf(p):
        return float(v.max())
    return float(f.grid.integrate(v ** p) ** (1.0 / p))


def distance_to_self_similar(rho, M, theta, t):
    """``||rho - M G_theta(t)||_{L^1}`` on the grid of ``rho``."""
    G = heat_kernel(theta, t, rho.grid).values.values
    return rho.grid.integrate(np.abs(rho.values - M * G))


def _nonneg(rho):
    return np.maximum(rho.values, 0.0)


def entropy_Ep(rho, M, theta, s, p=1.5):
    """Relative entropy of ``rho(s)`` against ``M G(s + 1/theta)``, original frame.

    ``M^{-p} int (rho/G)^p G dx - M^{-p} (int rho dx)^p`` with ``G = G_theta(s + 1/theta)``.
    Ringing-level negative samples of ``rho`` are clipped to zero.
    """
    p = check_exponent(p, low=1.0, high=2.0, closed_high=False)
    if p == 1.0:
        raise ValueError("p must lie in (1, 2)")
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    theta = check_theta(theta)
    M = check_positive(M, "M")
    grid = rho.grid
    G = heat_kernel(theta, s + 1.0 / theta, grid).values.values
    if np.min(G) <= 0:
        raise ValueError("reference kernel is not strictly positive on this grid")
    r = _nonneg(rho)
    first = grid.integrate((r / G) ** p * G)
    second = grid.integrate(r) ** p
    return float((first - second) / M ** p)


def csiszar_kullback_check(rho, M, theta, s, p=1.5):
    """``2/(p(p-1)) E_p - (||rho - M G(s + 1/theta)||_1 / M)^2``; nonnegative up to slack."""
    E = entropy_Ep(rho, M, theta, s, p)
    dist = distance_to_self_similar(rho, M, theta, s + 1.0 / theta) / M
    return float(2.0 / (p * (p - 1.0)) * E - dist ** 2)


def weighted_moment_norm(rho, q):
    """``|| |x|^d rho ||_{L^q}``."""
    q = check_exponent(q, "q")
    g = rho.grid
    w = g.radius ** g.d * np.abs(rho.values)
    if np.isinf(q):
        return float(w.max())
    return float(g.integrate(w ** q) ** (1.0 / q))


def moment_ratio(value, t, d, theta, q):
    return value * (1.0 + t) ** (-d / (theta * q))


def grad_psi_sup(rho, t=None, theta=None):
    """``sup |grad psi|`` with ``psi = poisson_solve(rho)``; with ``t`` and ``theta``
    also the ratio against ``(1 + t)^{-(d-1)/theta}``."""
    psi = poisson_solve(rho)
    sup = float(np.sqrt(np.max(sum(g.values ** 2 for g in gradient(psi)))))
    if t is None:
        return sup
    d = rho.grid.d
    return sup, sup * (1.0 + t) ** ((d - 1) / theta)


def bregman_distance(a, b, p):
    """``a^p + (p-1) b^p - p b^{p-1} a`` for ``a, b >= 0``."""
    p = check_exponent(p, low=1.0, high=2.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("Bregman distance needs nonnegative arguments")
    return a ** p + (p - 1.0) * b ** p - p * b ** (p - 1.0) * a


@dataclass(frozen=True)
class RateFit:
    window: Tuple[float, float]
    slope: float
    intercept: float
    rms_residual: float
    n: int

    def to_dict(self):
        return {
            "window": list(self.window),
            "slope": self.slope,
            "intercept": self.intercept,
            "rms_residual": self.rms_residual,
            "n": self.n,
        }


def fit_decay_rate(times, values, window):
    """Least squares ``log v = intercept + slope log t`` over ``window = (t1, t2)``."""
    t1, t2 = map(float, window)
    if not (0 < t1 < t2):
        raise ValueError(f"window must satisfy 0 < t1 < t2, got {window}")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= t1) & (times <= t2)
    if sel.sum() < 5:
        raise ValueError(f"need at least 5 samples in window {window}, got {int(sel.sum())}")
    v = values[sel]
    if np.any(v <= 0):
        raise ValueError("values in the fit window must be positive")
    X = np.log(times[sel])
    Y = np.log(v)
    A = np.vstack([X, np.ones_like(X)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - (slope * X + intercept)
    return RateFit((t1, t2), float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))), int(sel.sum()))


def entropy_production_sign_probe(rho, D, q):
    """Trace and Riesz-fluctuation parts of ``((q-1)/q) int rho^q div(D grad psi) dx``.

    ``div(D grad psi)`` has multiplier ``-(k . D k)/|k|^2``. Splitting off the
    trace, ``trace_term = -((q-1)/q)(tr D/d) int rho^{q+1}`` and the fluctuation
    term carries the traceless symmetric part, which vanishes for ``a I + B``.
    """
    D = as_matrix(D)
    g = rho.grid
    if D.shape != (g.d, g.d):
        raise ValueError(f"drift matrix must be {g.d}x{g.d}")
    q = check_exponent(q, "q", low=1.0, high=np.inf, closed_high=False)
    a = np.trace(D) / g.d
    A0 = 0.5 * (D + D.T) - a * np.eye(g.d)
    r = _nonneg(rho)
    fac = (q - 1.0) / q
    trace_term = -fac * a * g.integrate(r ** (q + 1.0))
    # the half spectrum holds k_d >= 0 only, so kvec carries the correct signs
    kv = [np.broadcast_to(k, g.spectral_shape) for k in g.kvec]
    quad = sum(A0[i, j] * kv[i] * kv[j] for i in range(g.d) for j in range(g.d))
    mult = np.zeros(g.spectral_shape)
    nz = g.nonzero_modes
    mult[nz] = -quad[nz] / g.kmag[nz] ** 2
    fluct_field = g.ifft(mult * g.fft(rho.values))
    fluct_term = fac * g.integrate(r ** q * fluct_field)
    return {"trace_term": float(trace_term), "fluctuation_term": float(fluct_term)}


# ----------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class DiagnosticsConfig:
    p_list: Tuple[float, ...] = (1.0, 2.0, np.inf)
    entropy_p: float = 1.5
    moment_q: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None

    def moment_exponent(self, d, theta):
        return self.moment_q if self.moment_q is not None else 2.0 * d / theta


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    lp_norms: Dict[float, float]
    dist_selfsim: float
    dist_ratio: float
    entropy_p: float
    ck_residual: float
    grad_psi_sup: float
    grad_psi_ratio: float
    moment_q: float
    moment_ratio: float
    background: float = 0.0
    min_value: float = 0.0
    extras: dict = field(default_factory=dict)

    def row(self):
        n = self.lp_norms
        return (
            self.t, self.mass, n.get(1.0, np.nan), n.get(2.0, np.nan), n.get(np.inf, np.nan),
            self.dist_selfsim, self.dist_ratio, self.entropy_p, self.ck_residual,
            self.grad_psi_sup, self.grad_psi_ratio, self.moment_q, self.moment_ratio,
        )


def compute_record(rho, t, M, theta, config=None):
    """All diagnostics of one output time, with ``t`` the original time."""
    config = config or DiagnosticsConfig()
    g = rho.grid
    d = g.d
    p_all = sorted(set(config.p_list) | {1.0, 2.0, np.inf})
    norms = {float(p): lp_norm(rho, p) for p in p_all}
    mass = rho.integral()
    if t > 0:
        dist = distance_to_self_similar(rho, M, theta, t)
    else:
        dist = np.nan
    ep = config.entropy_p
    E = entropy_Ep(rho, M, theta, t, ep)
    ck = csiszar_kullback_check(rho, M, theta, t, ep)
    gsup, gratio = grad_psi_sup(rho, t, theta)
    q = config.moment_exponent(d, theta)
    mom = weighted_moment_norm(rho, q)
    return DiagnosticsRecord(
        t=float(t),
        mass=mass,
        lp_norms=norms,
        dist_selfsim=dist,
        dist_ratio=dist * np.sqrt(1.0 + theta * t),
        entropy_p=E,
        ck_residual=ck,
        grad_psi_sup=gsup,
        grad_psi_ratio=gratio,
        moment_q=mom,
        moment_ratio=moment_ratio(mom, t, d, theta, q),
        background=M / g.volume,
        min_value=float(rho.values.min()),
    )


def records_to_csv(records, path_or_buf=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([repr(float(v)) for v in rec.row()])
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text


def read_csv_columns(path_or_text):
    """Parse a numeric CSV into ``{column: array}`` preserving header order."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        fh = io.StringIO(path_or_text)
    else:
        fh = open(path_or_text, newline="")
    with fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    cols = {}
    for i, name in enumerate(header):
        cols[name] = np.array([float(r[i]) for r in rows])
    return cols
