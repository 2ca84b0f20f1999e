"""Input validation helpers shared across the package.

Every public entry point funnels its scalar and array arguments through
these checks so that bad inputs fail loudly with a consistent message
instead of propagating NaNs into the estimators.
"""

import numbers

import numpy as np


def check_scalar(x, name, low=None, high=None, inclusive_low=True, inclusive_high=True):
    """Validate a real finite scalar, optionally against bounds. Returns float(x)."""
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if low is not None:
        if inclusive_low and x < low:
            raise ValueError(f"{name} must be >= {low}, got {x}")
        if not inclusive_low and x <= low:
            raise ValueError(f"{name} must be > {low}, got {x}")
    if high is not None:
        if inclusive_high and x > high:
            raise ValueError(f"{name} must be <= {high}, got {x}")
        if not inclusive_high and x >= high:
            raise ValueError(f"{name} must be < {high}, got {x}")
    return x


def check_efficiency(eta, name, allow_zero=False):
    """Detection efficiency: in (0, 1], or [0, 1] when allow_zero."""
    return check_scalar(eta, name, low=0.0, high=1.0, inclusive_low=allow_zero)


def check_unit_interval(x, name, inclusive_high=True):
    return check_scalar(x, name, low=0.0, high=1.0, inclusive_high=inclusive_high)


def check_positive(x, name):
    return check_scalar(x, name, low=0.0, inclusive_low=False)


def check_nonneg(x, name):
    return check_scalar(x, name, low=0.0)


def check_count(x, name):
    """Nonnegative integer-valued count (int or integral float)."""
    if isinstance(x, numbers.Real) and not isinstance(x, bool):
        if float(x) != int(x):
            raise ValueError(f"{name} must be an integer count, got {x}")
        x = int(x)
    else:
        raise TypeError(f"{name} must be an integer count, got {type(x).__name__}")
    if x < 0:
        raise ValueError(f"{name} must be >= 0, got {x}")
    return x


def as_float_array(x, name, ndim=1):
    """Coerce to a finite float64 array of the given dimensionality."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_tag_array(tags, name="tags"):
    """Coerce time tags to int64 picoseconds, sorted strictly increasing."""
    arr = np.asarray(tags)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise ValueError(f"{name} must hold integer picosecond timestamps")
    arr = arr.astype(np.int64, copy=False)
    if arr.size > 1 and np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be sorted strictly increasing")
    return arr


def check_probability_array(p, name):
    arr = as_float_array(p, name)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr
