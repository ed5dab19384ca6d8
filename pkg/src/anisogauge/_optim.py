"""Projected gradient ascent on a level set, batched over independent rows.

Every row of the iterate is its own problem (one multi-start of one target
point), so a single call solves many small constrained maximizations at once.
"""

from dataclasses import dataclass

import numpy as np

_ARMIJO = 0.5
_MIN_STEP = 1e-40
_FLAT = 64 * np.finfo(float).eps


@dataclass
class AscentResult:
    x: np.ndarray          # (S, d) final iterates, on the level set
    value: np.ndarray      # (S,) objective values
    residual: np.ndarray   # (S,) relative tangential gradient norm
    converged: np.ndarray  # (S,) bool
    iterations: int


def _tangential(grad, normal):
    nn = np.einsum("ij,ij->i", normal, normal)
    coef = np.einsum("ij,ij->i", grad, normal) / np.where(nn > 0, nn, 1.0)
    return grad - coef[:, None] * normal


def ascend(objective, retract, x0, tol=1e-10, max_iter=5000):
    """Maximize row-wise ``objective`` on the level set fixed by ``retract``.

    Parameters
    ----------
    objective : callable
        ``objective(x, rows) -> (value, grad, normal)`` where ``x`` holds the
        iterates of the problems numbered ``rows``; ``normal`` is the gradient
        of the constraint function at ``x``.
    retract : callable
        Maps arbitrary nonzero rows back onto the constraint set.
    x0 : ndarray of shape (S, d)
        Starting points (retracted before use).
    tol : float
        Stop a row once ``|P grad| <= tol * |grad|``, where ``P`` projects
        onto the tangent space. At such a point the objective is within
        O(tol**2) of a critical value.
    """
    x = retract(np.array(x0, dtype=float))
    f, g, n = objective(x, np.arange(x.shape[0]))
    v = _tangential(g, n)
    gnorm = np.linalg.norm(g, axis=1)
    scale = np.where(gnorm > 0, gnorm, 1.0)
    res = np.linalg.norm(v, axis=1) / scale
    step = 1.0 / scale
    active = res > tol
    it = 0
    while np.any(active) and it < max_iter:
        it += 1
        idx = np.flatnonzero(active)
        trial = retract(x[idx] + step[idx, None] * v[idx])
        ft, gt, nt = objective(trial, idx)
        vt = _tangential(gt, nt)
        gn = np.linalg.norm(gt, axis=1)
        rt = np.linalg.norm(vt, axis=1) / np.where(gn > 0, gn, 1.0)
        vv = np.einsum("ij,ij->i", v[idx], v[idx])
        fi = f[idx]
        gain = _ARMIJO * step[idx] * vv
        noise = _FLAT * np.abs(fi)
        # once the Armijo gain is below roundoff the value cannot rank
        # iterates; fall back to requiring a smaller tangential residual
        ok = np.where(gain > noise, ft >= fi + gain,
                      (ft >= fi - noise) & (rt < res[idx]))
        good = idx[ok]
        if good.size:
            x[good], f[good], g[good], n[good] = trial[ok], ft[ok], gt[ok], nt[ok]
            v[good], res[good] = vt[ok], rt[ok]
            step[good] *= 2.0
        bad = idx[~ok]
        step[bad] *= 0.5
        # a row whose step underflows has stalled at roundoff level
        active = (res > tol) & (step > _MIN_STEP)
    return AscentResult(x=x, value=f, residual=res, converged=res <= tol, iterations=it)
