"""Error metrics over scalar estimates.

Errors are estimate minus truth. SD is the population standard deviation of
the errors (divide by N), so RMSE**2 == SD**2 + bias**2 holds exactly.
Relative forms divide by the ground truth and are reported in percent; with
a per-estimate truth sequence the scalar mean of the truths is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotEnoughDataError


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    mae: float
    sd: float
    rmse_rel: float      # percent
    mae_rel: float
    sd_rel: float
    n: int


def compute_metrics(estimates, truth) -> MetricsReport:
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 1 or est.size == 0:
        raise NotEnoughDataError("metrics need at least one estimate")
    t = np.asarray(truth, dtype=float)
    if t.ndim == 0:
        t = np.full(est.shape, float(t))
    elif t.shape != est.shape:
        raise ValueError("truth must be a scalar or match the estimates")
    if not (np.all(np.isfinite(est)) and np.all(np.isfinite(t))):
        raise ValueError("estimates and truth must be finite")

    err = est - t
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    sd = float(np.std(err))
    scale = float(np.mean(t))
    if scale == 0:
        raise ValueError("relative metrics need a nonzero ground truth")
    return MetricsReport(rmse=rmse, mae=mae, sd=sd,
                         rmse_rel=100.0 * rmse / abs(scale),
                         mae_rel=100.0 * mae / abs(scale),
                         sd_rel=100.0 * sd / abs(scale),
                         n=est.size)
