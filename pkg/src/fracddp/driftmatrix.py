"""Admissibility of constant drift matrices and their ``a I + B`` split.

A matrix ``D`` is admissible when ``x . D x <= tr(D) |x|^2 / d`` for all ``x``
and ``tr D > 0``. The quadratic condition only sees the symmetric part
``A = (D + D^T)/2`` and holds exactly when ``A`` is a multiple of the identity,
so admissible matrices are ``a I + B`` with ``a = tr(D)/d > 0`` and ``B`` skew.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["DriftMatrix", "as_matrix", "check_and_decompose", "compose", "read_matrix"]

REL_TOL = 1e-10


def as_matrix(D):
    D = np.array(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"drift matrix must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("drift matrix has non-finite entries")
    return D


@dataclass(frozen=True, eq=False)
class DriftMatrix:
    entries: np.ndarray
    admissible: bool
    a: Optional[float] = None
    B: Optional[np.ndarray] = None
    witness: Optional[np.ndarray] = None
    boundary: bool = False
    reason: str = ""

    @property
    def d(self):
        return self.entries.shape[0]

    def to_dict(self):
        out = {
            "d": int(self.d),
            "admissible": bool(self.admissible),
            "boundary": bool(self.boundary),
            "reason": self.reason,
        }
        if self.admissible:
            out["a"] = float(self.a)
            out["B"] = self.B.tolist()
        if self.witness is not None:
            x = self.witness
            out["witness"] = x.tolist()
            out["witness_excess"] = float(x @ self.entries @ x - np.trace(self.entries) / self.d)
        return out


def compose(a, B):
    B = as_matrix(B)
    return a * np.eye(B.shape[0]) + B


def check_and_decompose(D):
    """Classify ``D`` and return its decomposition or a violating direction."""
    D = as_matrix(D)
    d = D.shape[0]
    scale = float(np.max(np.abs(D))) if D.size else 0.0
    A = 0.5 * (D + D.T)
    a = float(np.trace(D)) / d
    dev = A - a * np.eye(d)
    if np.max(np.abs(dev)) > REL_TOL * scale:
        w, V = np.linalg.eigh(dev)
        # dev is traceless and nonzero, so its top eigenvalue is positive
        x = V[:, -1]
        return DriftMatrix(D, False, witness=x, reason="symmetric part is not a multiple of the identity")
    B = 0.5 * (D - D.T)
    if a > REL_TOL * scale:
        return DriftMatrix(D, True, a=a, B=B, reason="admissible")
    if abs(a) <= REL_TOL * scale:
        return DriftMatrix(D, False, boundary=True, reason="trace is zero (a = 0)")
    return DriftMatrix(D, False, reason="trace is negative (a < 0)")


def read_matrix(path):
    """Read rows of whitespace-separated numbers; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(v) for v in line.split()])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"{path}: expected a rectangular block of numbers")
    return as_matrix(rows)
