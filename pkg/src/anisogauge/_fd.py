"""Central differences with per-coordinate steps and one Richardson level."""

import numpy as np

EPS_CBRT = np.finfo(float).eps ** (1.0 / 3.0)


def scaled_steps(x, base):
    """Step ``base * max(1, |x_i|)`` for every coordinate of every row."""
    return base * np.maximum(1.0, np.abs(x))


def gradient(f, x, base=EPS_CBRT):
    """Central-difference gradient of a row-wise scalar function ``f``."""
    x = np.atleast_2d(x)
    h = scaled_steps(x, base)
    out = np.empty_like(x)
    for i in range(x.shape[1]):
        xp = x.copy()
        xm = x.copy()
        xp[:, i] += h[:, i]
        xm[:, i] -= h[:, i]
        out[:, i] = (f(xp) - f(xm)) / (xp[:, i] - xm[:, i])
    return out


def _divergence(field, x, h):
    total = np.zeros(x.shape[0])
    for i in range(x.shape[1]):
        xp = x.copy()
        xm = x.copy()
        xp[:, i] += h[:, i]
        xm[:, i] -= h[:, i]
        # the realized spacing, not the nominal one, keeps O(h^2) exact
        total += (field(xp)[:, i] - field(xm)[:, i]) / (xp[:, i] - xm[:, i])
    return total


def divergence(field, x, base, richardson=True):
    """Divergence of a row-wise vector field by central differences.

    With ``richardson`` the estimates at steps ``h`` and ``h/2`` are combined
    as ``(4 D(h/2) - D(h)) / 3``, cancelling the O(h^2) term.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    h = scaled_steps(x, base)
    coarse = _divergence(field, x, h)
    if not richardson:
        return coarse
    fine = _divergence(field, x, h / 2)
    return (4.0 * fine - coarse) / 3.0
