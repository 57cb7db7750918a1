"""Unperturbed dispersion lattice ``Lambda_{q,m}(eta) = M_q + (eta + 2 pi m)^2``."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cross_modes import ModeSet

TWO_PI = 2.0 * math.pi


def wrap_eta(eta: float) -> float:
    """Map ``eta`` into ``[0, 2 pi)``."""
    w = math.fmod(float(eta), TWO_PI)
    if w < 0:
        w += TWO_PI
    return 0.0 if w >= TWO_PI else w


def lattice_eigenvalue(ms: ModeSet, q: int, m: int, eta: float) -> float:
    """``M_q + (eta + 2 pi m)^2`` for the 1-based cross-section index ``q``."""
    if not 1 <= q <= ms.count:
        raise IndexError(f"mode index {q} outside 1..{ms.count}")
    eta = wrap_eta(eta)
    return float(ms.eigenvalues[q - 1] + (eta + TWO_PI * m) ** 2)


@dataclass(frozen=True, eq=False)
class DispersionLattice:
    """All lattice values built on one set of cross-section eigenvalues."""

    mode_set: ModeSet

    def value(self, q: int, m: int, eta: float) -> float:
        return lattice_eigenvalue(self.mode_set, q, m, eta)

    def ordered(self, eta: float, k: int) -> list[tuple[float, int, int]]:
        return ordered_spectrum(self.mode_set, eta, k)

    def m_window(self, eta: float, k: int) -> int:
        """Smallest ``m_max`` for which ``|m| <= m_max`` provably captures the first ``k`` values."""
        return _ordered_with_window(self.mode_set, wrap_eta(eta), k)[1]


def _candidates(M: np.ndarray, eta: float, m_max: int):
    m = np.arange(-m_max, m_max + 1)
    q = np.arange(1, len(M) + 1)
    qq, mm = np.meshgrid(q, m, indexing="ij")
    vals = M[qq - 1] + (eta + TWO_PI * mm) ** 2
    return vals.ravel(), qq.ravel(), mm.ravel()


def _ordered_with_window(ms: ModeSet, eta: float, k: int):
    M = np.asarray(ms.eigenvalues, dtype=float)
    floor = float(M.min())
    m_max = 1
    while True:
        vals, qs, ms_ = _candidates(M, eta, m_max)
        order = np.lexsort((ms_, qs, vals))[:k]
        if len(order) >= k:
            kth = vals[order[-1]]
            if floor + (TWO_PI * (m_max - 1)) ** 2 > kth:
                return [(float(vals[i]), int(qs[i]), int(ms_[i])) for i in order], m_max
        m_max *= 2


def ordered_spectrum(ms: ModeSet, eta: float, k: int) -> list[tuple[float, int, int]]:
    """First ``k`` lattice values in ascending order with their ``(q, m)`` labels.

    Ties are broken by ``(q, m)`` in lexicographic order.  The ``m`` window is
    widened until no omitted value can enter the first ``k``.  Values beyond
    the largest known cross-section eigenvalue may miss unresolved modes; a
    warning is issued in that case.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    out, _ = _ordered_with_window(ms, wrap_eta(eta), k)
    if out[-1][0] > ms.eigenvalues[-1]:
        warnings.warn("ordered spectrum reaches beyond the largest computed cross-section "
                      "eigenvalue; request more modes for a guaranteed ordering",
                      RuntimeWarning, stacklevel=2)
    return out


def band_table(ms: ModeSet, etas, k: int):
    """Ordered values and labels over an ``eta`` grid.

    Returns ``(values, q_labels, m_labels)``, each of shape ``(len(etas), k)``.
    """
    etas = np.asarray(etas, dtype=float)
    vals = np.empty((len(etas), k))
    qs = np.empty((len(etas), k), dtype=int)
    mm = np.empty((len(etas), k), dtype=int)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, eta in enumerate(etas):
            rows = ordered_spectrum(ms, eta, k)
            vals[i] = [r[0] for r in rows]
            qs[i] = [r[1] for r in rows]
            mm[i] = [r[2] for r in rows]
    return vals, qs, mm


def gap_precondition(ms: ModeSet) -> tuple[bool, float]:
    """Whether ``M_1 + pi^2 < M_2``, with the margin ``M_2 - M_1 - pi^2``."""
    if ms.count < 2:
        raise ValueError("the gap precondition needs at least two cross-section modes")
    margin = float(ms.eigenvalues[1] - ms.eigenvalues[0] - math.pi ** 2)
    return margin > 0, margin


def unperturbed_curves(eta: float, m1: float = 0.0) -> tuple[float, float]:
    """The two lowest curves ``(M_1 + eta^2, M_1 + (eta - 2 pi)^2)``."""
    eta = wrap_eta(eta)
    return m1 + eta ** 2, m1 + (eta - TWO_PI) ** 2
