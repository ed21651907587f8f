"""Hot kernels of the simplex engine.

The iteration loop spends its time applying product-form eta updates and
running the ratio test. Both kernels ship in two interchangeable builds: a
numba ``@njit`` build (default when numba imports) and a pure-numpy build.
Set ``TEMGRID_PURE_NUMPY=1`` to force the numpy path; the active build is
reported in ``USING_NUMBA``. Each build is deterministic run-to-run; across
builds the results agree to rounding (summation order differs in ``eta_btran``,
where BLAS dot products reduce in a different order than the jitted loop).

Eta update convention: a pivot with ftran column ``w`` and pivot row ``r``
multiplies the basis inverse from the left by the elementary matrix E that
is the identity except for column ``r`` (E[i,r] = -w[i]/w[r], E[r,r] = 1/w[r]).
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "eta_ftran",
    "eta_btran",
    "ratio_test",
    "eta_ftran_numpy",
    "eta_btran_numpy",
    "ratio_test_numpy",
]

#: ratio-test outcome markers (third slot of the returned tuple)
LEAVE_NONE = -1  # entering variable flips to its opposite bound
LEAVE_UNBOUNDED = -2  # no blocking bound anywhere


def eta_ftran_numpy(pivots: np.ndarray, columns: np.ndarray, count: int, z: np.ndarray) -> None:
    """Apply the first ``count`` eta matrices to ``z`` in creation order, in place."""
    for e in range(count):
        r = pivots[e]
        w = columns[e]
        t = z[r] / w[r]
        z -= w * t
        z[r] = t


def eta_btran_numpy(pivots: np.ndarray, columns: np.ndarray, count: int, z: np.ndarray) -> None:
    """Apply the transposed etas to ``z`` in reverse creation order, in place."""
    for e in range(count - 1, -1, -1):
        r = pivots[e]
        w = columns[e]
        t = z[r] - (np.dot(w, z) - w[r] * z[r])
        z[r] = t / w[r]


def ratio_test_numpy(
    x_basic: np.ndarray,
    lo_basic: np.ndarray,
    up_basic: np.ndarray,
    w: np.ndarray,
    sigma: int,
    step_cap: float,
    pivot_tol: float,
) -> tuple[float, int, bool]:
    """Largest step for the entering variable before a basic bound blocks it.

    The entering variable moves by ``t >= 0`` with sign ``sigma``; basic
    values move by ``-sigma * t * w``. Returns ``(t, leave_pos, to_upper)``:
    ``leave_pos`` is the blocking basic position (ties: largest pivot
    magnitude, then lowest position), LEAVE_NONE for a bound flip capped by
    ``step_cap``, LEAVE_UNBOUNDED when nothing blocks an infinite step.
    """
    delta = -sigma * w
    best_t = step_cap
    best_pos = LEAVE_NONE
    best_piv = 0.0
    for i in range(len(w)):
        d = delta[i]
        if d < -pivot_tol:
            if lo_basic[i] == -np.inf:
                continue
            t = (x_basic[i] - lo_basic[i]) / (-d)
        elif d > pivot_tol:
            if up_basic[i] == np.inf:
                continue
            t = (up_basic[i] - x_basic[i]) / d
        else:
            continue
        if t < 0.0:
            t = 0.0
        piv = abs(w[i])
        if t < best_t - 1e-12 or (t <= best_t + 1e-12 and best_pos != LEAVE_NONE and piv > best_piv):
            if t < best_t:
                best_t = t
            best_pos = i
            best_piv = piv
    if best_pos == LEAVE_NONE and np.isinf(step_cap):
        return np.inf, LEAVE_UNBOUNDED, False
    if best_pos == LEAVE_NONE:
        return step_cap, LEAVE_NONE, False
    to_upper = (-sigma * w[best_pos]) > 0.0
    return best_t, best_pos, to_upper


def _env_pure_numpy() -> bool:
    return os.environ.get("TEMGRID_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes")


USING_NUMBA = False
eta_ftran = eta_ftran_numpy
eta_btran = eta_btran_numpy
ratio_test = ratio_test_numpy

if not _env_pure_numpy():
    try:
        from numba import njit

        _sig_eta = "void(int64[:], float64[:, :], int64, float64[:])"

        @njit(_sig_eta, cache=True)
        def _eta_ftran_nb(pivots, columns, count, z):  # pragma: no cover - jitted
            m = z.shape[0]
            for e in range(count):
                r = pivots[e]
                w = columns[e]
                t = z[r] / w[r]
                for i in range(m):
                    z[i] -= w[i] * t
                z[r] = t

        @njit(_sig_eta, cache=True)
        def _eta_btran_nb(pivots, columns, count, z):  # pragma: no cover - jitted
            m = z.shape[0]
            for e in range(count - 1, -1, -1):
                r = pivots[e]
                w = columns[e]
                s = 0.0
                for i in range(m):
                    s += w[i] * z[i]
                t = z[r] - (s - w[r] * z[r])
                z[r] = t / w[r]

        @njit(
            "Tuple((float64, int64, boolean))"
            "(float64[:], float64[:], float64[:], float64[:], int64, float64, float64)",
            cache=True,
        )
        def _ratio_test_nb(x_basic, lo_basic, up_basic, w, sigma, step_cap, pivot_tol):  # pragma: no cover
            best_t = step_cap
            best_pos = -1
            best_piv = 0.0
            for i in range(len(w)):
                d = -sigma * w[i]
                if d < -pivot_tol:
                    if lo_basic[i] == -np.inf:
                        continue
                    t = (x_basic[i] - lo_basic[i]) / (-d)
                elif d > pivot_tol:
                    if up_basic[i] == np.inf:
                        continue
                    t = (up_basic[i] - x_basic[i]) / d
                else:
                    continue
                if t < 0.0:
                    t = 0.0
                piv = abs(w[i])
                if t < best_t - 1e-12 or (t <= best_t + 1e-12 and best_pos != -1 and piv > best_piv):
                    if t < best_t:
                        best_t = t
                    best_pos = i
                    best_piv = piv
            if best_pos == -1 and np.isinf(step_cap):
                return np.inf, -2, False
            if best_pos == -1:
                return step_cap, -1, False
            to_upper = (-sigma * w[best_pos]) > 0.0
            return best_t, best_pos, to_upper

        eta_ftran = _eta_ftran_nb
        eta_btran = _eta_btran_nb
        ratio_test = _ratio_test_nb
        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a regular dependency
        pass
