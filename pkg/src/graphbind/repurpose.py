"""Combined-score ranking of candidate drugs against target proteins.

Each scored pair carries two model predictions: a KIBA-scale score
(lower binds tighter) and a pKd-scale score (higher binds tighter).
Both are normalized by the batch maximum after clipping negatives to
zero, the KIBA side is flipped so larger means better, and the combined
score is the mean of the two normalized components. Ranking is per
protein, descending by combined score with ties broken by drug id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)


class RepurposeError(ValueError):
    pass


class EmptyBatchError(RepurposeError):
    pass


class NonPositiveMaxError(RepurposeError):
    """A prediction column has no positive entry to normalize by."""


class UnknownProteinError(RepurposeError):
    pass


@dataclass(frozen=True)
class ScoredPair:
    drug_id: str
    protein_id: str
    kiba_pred: float
    pkd_pred: float
    k_component: float
    d_component: float
    cb: float


def combined_scores(rows) -> list[ScoredPair]:
    """Score a batch of (drug_id, protein_id, kiba_pred, pkd_pred) rows.

    K_i = 1 - KB_i / max(KB) and D_i = DB_i / max(DB), both maxima taken
    over the batch after clipping negative predictions to zero; the
    combined score is (K_i + D_i) / 2. Clipped predictions are counted
    and logged. Raises :class:`EmptyBatchError` on an empty batch and
    :class:`NonPositiveMaxError` when either column has no positive
    entry.
    """
    rows = list(rows)
    if not rows:
        raise EmptyBatchError("no pairs to score")
    n_clipped = 0
    kiba_vals = []
    pkd_vals = []
    for _, _, kiba_pred, pkd_pred in rows:
        if kiba_pred < 0.0:
            kiba_pred = 0.0
            n_clipped += 1
        if pkd_pred < 0.0:
            pkd_pred = 0.0
            n_clipped += 1
        kiba_vals.append(kiba_pred)
        pkd_vals.append(pkd_pred)
    if n_clipped:
        logger.warning("clipped %d negative predictions to 0 before normalization", n_clipped)
    kiba_max = max(kiba_vals)
    pkd_max = max(pkd_vals)
    if not kiba_max > 0.0:
        raise NonPositiveMaxError("KIBA predictions have no positive entry")
    if not pkd_max > 0.0:
        raise NonPositiveMaxError("pKd predictions have no positive entry")
    scored = []
    for (drug_id, protein_id, raw_kiba, raw_pkd), kb, db in zip(rows, kiba_vals, pkd_vals):
        k_comp = 1.0 - kb / kiba_max
        d_comp = db / pkd_max
        scored.append(
            ScoredPair(
                drug_id=drug_id,
                protein_id=protein_id,
                kiba_pred=float(raw_kiba),
                pkd_pred=float(raw_pkd),
                k_component=k_comp,
                d_component=d_comp,
                cb=(k_comp + d_comp) / 2.0,
            )
        )
    return scored


def rank_top_k(scored: list[ScoredPair], protein_id: str, k: int) -> list[ScoredPair]:
    """Top-k drugs for one protein, descending by combined score.

    Ties break by ascending drug id; k beyond the number of candidates
    returns them all. Raises :class:`UnknownProteinError` when the
    protein has no scored pairs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    candidates = [pair for pair in scored if pair.protein_id == protein_id]
    if not candidates:
        raise UnknownProteinError(f"no scored pairs for protein {protein_id!r}")
    candidates.sort(key=lambda pair: (-pair.cb, pair.drug_id))
    return candidates[:k]
