"""Input validation helpers used across the package."""
import numbers

import numpy as np


def check_theta(theta, *, allow_two=True):
    """Return ``theta`` as float after checking ``0 < theta <= 2``."""
    if not isinstance(theta, numbers.Real) or isinstance(theta, bool):
        raise TypeError(f"theta must be a real number, got {type(theta).__name__}")
    theta = float(theta)
    upper_ok = theta <= 2.0 if allow_two else theta < 2.0
    if not (np.isfinite(theta) and 0.0 < theta and upper_ok):
        bound = "(0, 2]" if allow_two else "(0, 2)"
        raise ValueError(f"theta must lie in {bound}, got {theta}")
    return theta


def check_positive(value, name):
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_finite_array(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_exponent(p, name="p", *, low=1.0, high=np.inf, closed_high=True):
    """Check ``low <= p`` and ``p <= high`` (or ``< high``); ``inf`` is allowed when ``high`` is."""
    p = float(p)
    ok = p >= low and (p <= high if closed_high else p < high)
    if not ok or np.isnan(p):
        raise ValueError(f"{name} must lie in [{low}, {high}{']' if closed_high else ')'}, got {p}")
    return p
