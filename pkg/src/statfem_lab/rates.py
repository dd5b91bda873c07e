"""Convergence-rate estimation from (h, distance) data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import linregress


@dataclass
class RateReport:
    experiment: str
    h_values: np.ndarray
    distances: np.ndarray
    slope: float = float("nan")
    intercept: float = float("nan")
    epsilon: Optional[float] = None
    lr_sequence: Optional[list] = None  # [(h, LR(h))]
    smoothed_lr: Optional[list] = None  # [(h, smoothed LR)]
    extras: dict = field(default_factory=dict)

    @property
    def final_smoothed_lr(self) -> Optional[float]:
        return self.smoothed_lr[-1][1] if self.smoothed_lr else None


def fit_loglog_slope(hs, ws) -> tuple[float, float]:
    """Least-squares line through ``(log h, log w)``; natural logarithms."""
    hs = np.asarray(hs, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if hs.size < 2 or hs.size != ws.size:
        raise ValueError("need at least two (h, w) pairs of equal length")
    if np.any(ws <= 0) or np.any(hs <= 0):
        raise ValueError("h and distances must be positive to take logarithms")
    fit = linregress(np.log(hs), np.log(ws))
    return float(fit.slope), float(fit.intercept)


def dyadic_log_ratio(w_coarse: float, w_fine: float) -> float:
    """``log2(W(h, h/2) / W(h/2, h/4))`` from the two self-distances."""
    if not (w_coarse > 0 and w_fine > 0):
        raise ValueError("distances must be positive")
    return float(np.log2(w_coarse / w_fine))


def smooth_lr(hs, ratios, cutoff_h: float):
    """Cumulative average of raw ratios over ``h <= cutoff_h``, largest h first.

    Returns ``(h_kept, log2_of_running_means)``, both ordered by decreasing h.
    """
    hs = np.asarray(hs, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    keep = hs <= cutoff_h
    if not np.any(keep):
        raise ValueError(f"no h-values at or below the cutoff {cutoff_h}")
    order = np.argsort(-hs[keep], kind="stable")
    h_kept = hs[keep][order]
    r = ratios[keep][order]
    running = np.cumsum(r) / np.arange(1, r.size + 1)
    return h_kept, np.log2(running)
