"""Flat numeric kernels behind the pair-potential algebra.

Every kernel has two interchangeable bodies: a pure-numpy one (suffix
``_np``) and a numba-compiled one (suffix ``_nb``).  The module-level names
``pair_sum_reduce``, ``pair_max_reduce`` and ``pair_divide`` are bound at
import time: setting ``IDVOI_NUMBA`` to ``0``, ``false`` or ``off`` forces
the numpy path, otherwise the compiled path is used whenever numba imports.

Inputs are C-contiguous float64 arrays.  Reductions take shape ``(K, R)``
(``K`` kept configurations, ``R`` the eliminated axis) and return length-K
vectors; division is elementwise on flat vectors.
"""

from __future__ import annotations

import os

import numpy as np


def numba_requested() -> bool:
    value = os.environ.get("IDVOI_NUMBA", "").strip().lower()
    return value not in ("0", "false", "off")


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    njit = None
    _HAVE_NUMBA = False


def pair_sum_reduce_np(phi: np.ndarray, psi: np.ndarray):
    """Sum out the last axis: mass adds, utility averages weighted by mass.

    Zero-mass rows keep utility 0 (the 0/0 convention).
    """
    phi_out = phi.sum(axis=1)
    weighted = (phi * psi).sum(axis=1)
    safe = np.where(phi_out == 0.0, 1.0, phi_out)
    psi_out = np.where(phi_out == 0.0, 0.0, weighted / safe)
    return phi_out, psi_out


def pair_max_reduce_np(phi: np.ndarray, psi: np.ndarray):
    """Maximize the last axis by utility; ties take the lowest index.

    Also reports the largest relative spread of the mass across the maxed
    axis: a policy variable must carry constant mass per context, so a big
    spread means the variable was not eligible for maximization.
    """
    arg = np.argmax(psi, axis=1)
    rows = np.arange(phi.shape[0])
    phi_out = phi[rows, arg]
    psi_out = psi[rows, arg]
    scale = np.maximum(np.abs(phi).max(axis=1), 1e-300)
    spread = phi.max(axis=1) - phi.min(axis=1)
    violation = float(np.max(spread / scale)) if phi.size else 0.0
    return phi_out, psi_out, arg.astype(np.int64), violation


def pair_divide_np(phi_num, psi_num, phi_den, psi_den):
    """Elementwise pair division: mass divides (0/0 -> 0), utility subtracts.

    Returns the index of the first nonzero/zero entry, or -1 when clean;
    utility is forced to 0 wherever the denominator mass vanishes.
    """
    zero = phi_den == 0.0
    bad = zero & (phi_num != 0.0)
    bad_index = int(np.argmax(bad)) if bool(bad.any()) else -1
    safe = np.where(zero, 1.0, phi_den)
    phi_out = np.where(zero, 0.0, phi_num / safe)
    psi_out = np.where(zero, 0.0, psi_num - psi_den)
    return phi_out, psi_out, bad_index


if _HAVE_NUMBA:

    @njit(cache=True)
    def pair_sum_reduce_nb(phi, psi):  # pragma: no cover - measured via tests
        k, r = phi.shape
        phi_out = np.empty(k, dtype=np.float64)
        psi_out = np.empty(k, dtype=np.float64)
        for i in range(k):
            mass = 0.0
            weighted = 0.0
            for j in range(r):
                mass += phi[i, j]
                weighted += phi[i, j] * psi[i, j]
            phi_out[i] = mass
            psi_out[i] = weighted / mass if mass != 0.0 else 0.0
        return phi_out, psi_out

    @njit(cache=True)
    def pair_max_reduce_nb(phi, psi):  # pragma: no cover
        k, r = phi.shape
        phi_out = np.empty(k, dtype=np.float64)
        psi_out = np.empty(k, dtype=np.float64)
        arg = np.empty(k, dtype=np.int64)
        violation = 0.0
        for i in range(k):
            best = 0
            lo = phi[i, 0]
            hi = phi[i, 0]
            scale = abs(phi[i, 0])
            for j in range(1, r):
                if psi[i, j] > psi[i, best]:
                    best = j
                if phi[i, j] < lo:
                    lo = phi[i, j]
                if phi[i, j] > hi:
                    hi = phi[i, j]
                if abs(phi[i, j]) > scale:
                    scale = abs(phi[i, j])
            if scale < 1e-300:
                scale = 1e-300
            rel = (hi - lo) / scale
            if rel > violation:
                violation = rel
            arg[i] = best
            phi_out[i] = phi[i, best]
            psi_out[i] = psi[i, best]
        return phi_out, psi_out, arg, violation

    @njit(cache=True)
    def pair_divide_nb(phi_num, psi_num, phi_den, psi_den):  # pragma: no cover
        n = phi_num.shape[0]
        phi_out = np.empty(n, dtype=np.float64)
        psi_out = np.empty(n, dtype=np.float64)
        bad_index = -1
        for i in range(n):
            if phi_den[i] == 0.0:
                if phi_num[i] != 0.0 and bad_index < 0:
                    bad_index = i
                phi_out[i] = 0.0
                psi_out[i] = 0.0
            else:
                phi_out[i] = phi_num[i] / phi_den[i]
                psi_out[i] = psi_num[i] - psi_den[i]
        return phi_out, psi_out, bad_index

else:  # pragma: no cover
    pair_sum_reduce_nb = None
    pair_max_reduce_nb = None
    pair_divide_nb = None


USE_NUMBA = _HAVE_NUMBA and numba_requested()

if USE_NUMBA:
    pair_sum_reduce = pair_sum_reduce_nb
    pair_max_reduce = pair_max_reduce_nb
    pair_divide = pair_divide_nb
else:
    pair_sum_reduce = pair_sum_reduce_np
    pair_max_reduce = pair_max_reduce_np
    pair_divide = pair_divide_np
