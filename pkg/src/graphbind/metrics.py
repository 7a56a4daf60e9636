"""Evaluation metrics for affinity regression.

Mean squared error, concordance index over all ordered pairs with
differing ground truth, squared correlations with and without intercept,
and the modified squared correlation r_m^2 built from both. The
concordance index is counted with integer arithmetic in fixed-size
chunks, so its result is bitwise identical to a sequential pair loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CI_CHUNK = 512


class MetricError(ValueError):
    pass


class LengthMismatchError(MetricError):
    pass


class EmptyDataError(MetricError):
    pass


class NoComparablePairsError(MetricError):
    """No pair of records has differing ground truth."""


class DegenerateInputError(MetricError):
    """A correlation is undefined because an input has zero variance."""


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    ci: float
    rm2: float
    pearson: float
    n_pairs: int
    z_pairs: int

    def as_dict(self) -> dict:
        return {
            "mse": self.mse,
            "ci": self.ci,
            "rm2": self.rm2,
            "pearson": self.pearson,
            "n_pairs": self.n_pairs,
            "z_pairs": self.z_pairs,
        }


def _as_pair(predictions, truths) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(predictions, dtype=np.float64).reshape(-1)
    truth = np.asarray(truths, dtype=np.float64).reshape(-1)
    if pred.shape[0] != truth.shape[0]:
        raise LengthMismatchError(
            f"got {pred.shape[0]} predictions for {truth.shape[0]} truths"
        )
    if pred.shape[0] == 0:
        raise EmptyDataError("metrics need at least one record")
    return pred, truth


def mse(predictions, truths) -> float:
    pred, truth = _as_pair(predictions, truths)
    diff = pred - truth
    return float(np.mean(diff * diff))


def _ci_counts(pred: np.ndarray, truth: np.ndarray) -> tuple[int, int, int]:
    """(wins, ties, z) over ordered pairs (i, j) with truth_i > truth_j."""
    wins = ties = z = 0
    n = truth.shape[0]
    for start in range(0, n, _CI_CHUNK):
        stop = min(start + _CI_CHUNK, n)
        truth_diff = truth[start:stop, None] - truth[None, :]
        pred_diff = pred[start:stop, None] - pred[None, :]
        harder = truth_diff > 0.0
        z += int(np.count_nonzero(harder))
        wins += int(np.count_nonzero(harder & (pred_diff > 0.0)))
        ties += int(np.count_nonzero(harder & (pred_diff == 0.0)))
    return wins, ties, z


def concordance_index(predictions, truths) -> float:
    """(wins + 0.5 * ties) / Z over pairs with differing ground truth.

    A pair scores 1 when the prediction ordering matches the truth
    ordering, 0.5 when the predictions tie, and 0 otherwise.
    """
    pred, truth = _as_pair(predictions, truths)
    wins, ties, z = _ci_counts(pred, truth)
    if z == 0:
        raise NoComparablePairsError("all ground-truth values are equal")
    return (wins + 0.5 * ties) / z


def _centered_sums(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """(cov_sum, var_pred_sum, var_truth_sum) about the means."""
    pred_c = pred - pred.mean()
    truth_c = truth - truth.mean()
    cov = float(np.sum(pred_c * truth_c))
    var_p = float(np.sum(pred_c * pred_c))
    var_t = float(np.sum(truth_c * truth_c))
    return cov, var_p, var_t


def r_squared(predictions, truths, with_intercept: bool = True) -> float:
    """Squared correlation of the least-squares fit truth ~ prediction.

    With an intercept this is cov^2 / (var_pred * var_truth). Without
    one, the slope is constrained to k = sum(x*y) / sum(x*x) and the
    result is 1 - SS_res / SS_tot with SS_tot taken about the mean.
    """
    pred, truth = _as_pair(predictions, truths)
    cov, var_p, var_t = _centered_sums(pred, truth)
    if with_intercept:
        if var_p <= 0.0 or var_t <= 0.0:
            raise DegenerateInputError("correlation undefined for zero-variance input")
        return (cov * cov) / (var_p * var_t)
    sxx = float(np.sum(pred * pred))
    if sxx <= 0.0:
        raise DegenerateInputError("through-origin slope undefined for all-zero predictions")
    if var_t <= 0.0:
        raise DegenerateInputError("correlation undefined for zero-variance truth")
    k = float(np.sum(pred * truth)) / sxx
    resid = truth - k * pred
    ss_res = float(np.sum(resid * resid))
    return 1.0 - ss_res / var_t


def rm2(predictions, truths) -> float:
    """r^2 * (1 - sqrt(|r^2 - r0^2|)) with r0^2 the through-origin fit."""
    r2 = r_squared(predictions, truths, with_intercept=True)
    r02 = r_squared(predictions, truths, with_intercept=False)
    return r2 * (1.0 - math.sqrt(abs(r2 - r02)))


def pearson(predictions, truths) -> float:
    pred, truth = _as_pair(predictions, truths)
    cov, var_p, var_t = _centered_sums(pred, truth)
    if var_p <= 0.0 or var_t <= 0.0:
        raise DegenerateInputError("correlation undefined for zero-variance input")
    return cov / math.sqrt(var_p * var_t)


def compute_report(predictions, truths) -> MetricsReport:
    pred, truth = _as_pair(predictions, truths)
    wins, ties, z = _ci_counts(pred, truth)
    if z == 0:
        raise NoComparablePairsError("all ground-truth values are equal")
    return MetricsReport(
        mse=mse(pred, truth),
        ci=(wins + 0.5 * ties) / z,
        rm2=rm2(pred, truth),
        pearson=pearson(pred, truth),
        n_pairs=int(pred.shape[0]),
        z_pairs=z,
    )
