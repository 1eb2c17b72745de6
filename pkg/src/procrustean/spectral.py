"""Discrete Fourier low-pass projections on landmark sequences.

For odd ``k`` the frequencies are ``m = -(k-1)/2 .. (k-1)/2``; a cutoff
``lam`` keeps ``|m| <= lam``. Three variants share one code path:

``"full"``      keep ``|m| <= lam`` (the smoother ``A^lam``),
``"centered"``  keep ``0 < |m| <= lam`` (drops the landmark mean),
``"mean"``      keep ``m = 0`` only (replaces every landmark by the mean).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvenK, InvalidCutoff

MODES = ("full", "centered", "mean")

# Cutoffs used for the published experiments, keyed by the requested k.
CUTOFF_TABLE = {20: 7, 50: 7, 100: 7, 1000: 11, 3000: 25}


def _check(k: int, lam: int, mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if k % 2 == 0:
        raise EvenK(f"k must be odd, got {k}")
    if not (0 <= lam <= (k - 1) // 2) or int(lam) != lam:
        raise InvalidCutoff(f"cutoff must be an integer in [0, {(k - 1) // 2}], got {lam}")


def _kept(k: int, lam: int, mode: str) -> np.ndarray:
    """Boolean mask over the ``rfft`` bins ``0..(k-1)/2``."""
    m = np.arange((k - 1) // 2 + 1)
    if mode == "full":
        return m <= lam
    if mode == "centered":
        return (m >= 1) & (m <= lam)
    return m == 0


def smoothing_matrix(k: int, lam: int, mode: str = "full") -> np.ndarray:
    """Dense ``k x k`` projection matrix. Meant for tests and small k."""
    _check(k, lam, mode)
    d = np.subtract.outer(np.arange(k), np.arange(k))
    out = np.zeros((k, k))
    for m in np.flatnonzero(_kept(k, lam, mode)):
        out += (1.0 if m == 0 else 2.0) * np.cos(2.0 * np.pi * m * d / k)
    return out / k


def smooth(x, lam: int, mode: str = "full") -> np.ndarray:
    """Apply the projection to every column of ``x`` (landmarks on axis -2).

    Works on a single ``(k, 2)`` configuration or a stack ``(J, k, 2)``.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[-2]
    _check(k, lam, mode)
    coef = np.fft.rfft(x, axis=-2)
    coef[..., ~_kept(k, lam, mode), :] = 0.0
    return np.fft.irfft(coef, n=k, axis=-2)


def cutoff(k: int, s: float) -> int:
    """``floor(k ** (1 / (2 s + 1)))`` clamped to ``[1, (k-1)/2]``."""
    if k < 3:
        raise InvalidCutoff("cutoff needs k >= 3")
    if s < 1.5:
        raise ValueError("smoothness s must be at least 3/2")
    root = k ** (1.0 / (2.0 * s + 1.0))
    lam = math.floor(root)
    # guard exact integer roots against pow() landing just below them
    if math.isclose(root, lam + 1, rel_tol=1e-12):
        lam += 1
    return int(min(max(lam, 1), (k - 1) // 2))


def table_cutoff(k: int, table: dict | None = None) -> int:
    """Cutoff from a manual table.

    Keys may be the requested (possibly even) k; a key ``n`` also matches
    ``n + 1``. A k absent from the table takes the entry of the nearest key
    on a log scale. The result is clamped to ``(k-1)/2``.
    """
    table = CUTOFF_TABLE if table is None else {int(n): int(v) for n, v in table.items()}
    if not table:
        raise InvalidCutoff("empty cutoff table")
    if k in table:
        lam = table[k]
    elif k - 1 in table and k % 2 == 1:
        lam = table[k - 1]
    else:
        nearest = min(table, key=lambda n: (abs(math.log(k) - math.log(n)), n))
        lam = table[nearest]
    return int(min(max(lam, 0), (k - 1) // 2))


def full_band(k: int) -> int:
    """The largest admissible cutoff: no smoothing at all."""
    return (k - 1) // 2
