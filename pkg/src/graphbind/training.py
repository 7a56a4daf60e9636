"""Training loop, evaluation, and epoch logging.

Training runs seeded shuffled mini-batches: unique drugs in a batch go
through the graph blocks once and are gathered per record, unique
proteins go through the Bi-LSTM once per batch, and the joint head
produces the batch predictions for a mean-squared-error loss stepped
with Adam. The per-epoch train (and optional test) MSE is computed
through the same per-record evaluation path `evaluate` uses, so the
logged value agrees with a later evaluation bit for bit.

Evaluation always predicts records one at a time with per-entity
caching, which makes its output independent of record order and batch
size.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Adam,
    Rng,
    Value,
    backward,
    concat,
    mse as mse_loss,
    stack_rows,
    take_rows,
    zero_grads,
)
from .data import AffinityDataset
from .metrics import MetricsReport, compute_report, mse as mse_metric
from .model import (
    HyperParams,
    ModelParameters,
    drug_dense,
    drug_encoder,
    drug_inputs,
    drug_pooled,
    head,
    init_params,
    protein_batch,
    protein_encoder,
    save_checkpoint,
)
from .protein import encode_protein

SHUFFLE_STREAM = 1
DROPOUT_STREAM = 2


class NonFiniteLossError(RuntimeError):
    """Training aborted on a NaN/inf batch loss; message names the batch."""


@dataclass(frozen=True)
class TrainConfig:
    hyper: HyperParams = HyperParams()
    blocks: tuple[int, ...] = (1, 2, 3)
    protein_encoder: str = "bilstm"
    power_mode: str = "binary"
    checkpoint_path: str | None = None
    checkpoint_interval: int = 0  # save every k epochs; 0 = only at the end
    log_path: str | None = None  # JSONL, one epoch per line


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_mse: float
    test_mse: float | None
    wall_time: float

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_mse": self.train_mse,
            "test_mse": self.test_mse,
            "wall_time": self.wall_time,
        }


def _param_dtype(params: ModelParameters):
    return next(iter(params.tensors.values())).data.dtype


class _GraphCache:
    """Per-drug graph inputs and per-protein token rows, built lazily."""

    def __init__(self, dataset: AffinityDataset, params: ModelParameters):
        self.dataset = dataset
        self.params = params
        self.dtype = _param_dtype(params)
        self.graphs: dict[str, object] = {}
        self.tokens: dict[str, np.ndarray] = {}

    def graph(self, drug_id: str):
        if drug_id not in self.graphs:
            self.graphs[drug_id] = drug_inputs(
                self.dataset.drugs[drug_id], self.params, dtype=self.dtype
            )
        return self.graphs[drug_id]

    def token_row(self, protein_id: str) -> np.ndarray:
        if protein_id not in self.tokens:
            self.tokens[protein_id] = encode_protein(
                self.dataset.proteins[protein_id], self.params.hyper.n
            )
        return self.tokens[protein_id]


def _batch_loss(records, params, cache: _GraphCache, rng: Rng):
    """Forward pass over one mini-batch -> scalar mse loss Value."""
    drug_order: list[str] = []
    drug_slot: dict[str, int] = {}
    for rec in records:
        if rec.drug_id not in drug_slot:
            drug_slot[rec.drug_id] = len(drug_order)
            drug_order.append(rec.drug_id)
    pooled = stack_rows([drug_pooled(cache.graph(d), params) for d in drug_order])
    drug_rows = take_rows(pooled, np.array([drug_slot[r.drug_id] for r in records]))
    drug_vec = drug_dense(drug_rows, params, mode="train", rng=rng)

    if params.protein_encoder == "bilstm":
        prot_order: list[str] = []
        prot_slot: dict[str, int] = {}
        for rec in records:
            if rec.protein_id not in prot_slot:
                prot_slot[rec.protein_id] = len(prot_order)
                prot_order.append(rec.protein_id)
        tokens = np.stack([cache.token_row(p) for p in prot_order])
        prot_vecs = protein_batch(tokens, params)
        prot_rows = take_rows(prot_vecs, np.array([prot_slot[r.protein_id] for r in records]))
        joint = concat([drug_vec, prot_rows], axis=1)
    else:
        joint = drug_vec

    pred = head(joint, params, mode="train", rng=rng)
    targets = np.array([[rec.value] for rec in records], dtype=cache.dtype)
    return mse_loss(pred, targets)


def predictions(params: ModelParameters, dataset: AffinityDataset) -> list[float]:
    """Eval-mode prediction per record, one pair at a time.

    Drug and protein branch outputs are cached per entity, so the result
    is a pure function of (params, record) — independent of record
    order and of how any training batches were composed.
    """
    cache = _GraphCache(dataset, params)
    use_protein = params.protein_encoder == "bilstm"
    drug_vecs: dict[str, np.ndarray] = {}
    prot_vecs: dict[str, np.ndarray] = {}
    out: list[float] = []
    for rec in dataset.records:
        if rec.drug_id not in drug_vecs:
            drug_vecs[rec.drug_id] = drug_encoder(cache.graph(rec.drug_id), params).data
        joint = Value(drug_vecs[rec.drug_id])
        if use_protein:
            if rec.protein_id not in prot_vecs:
                prot_vecs[rec.protein_id] = protein_encoder(
                    cache.token_row(rec.protein_id), params
                ).data
            joint = concat([joint, Value(prot_vecs[rec.protein_id])], axis=1)
        out.append(float(head(joint, params).data.reshape(())))
    return out


def evaluate(
    params: ModelParameters, dataset: AffinityDataset
) -> tuple[MetricsReport, list[tuple[float, float]]]:
    """MetricsReport plus (measured, predicted) scatter rows."""
    preds = predictions(params, dataset)
    truths = [rec.value for rec in dataset.records]
    report = compute_report(preds, truths)
    scatter = list(zip(truths, preds))
    return report, scatter


def _eval_mse(params, dataset) -> float:
    return mse_metric(predictions(params, dataset), [r.value for r in dataset.records])


def train(
    dataset: AffinityDataset,
    config: TrainConfig,
    test_dataset: AffinityDataset | None = None,
) -> tuple[ModelParameters, list[EpochLog]]:
    """Seeded mini-batch training; returns final parameters and epoch logs."""
    hyper = config.hyper
    n = dataset.n_records
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if hyper.batch_size > n:
        raise ValueError(f"batch_size {hyper.batch_size} exceeds record count {n}")

    params = init_params(
        hyper.seed,
        hyper=hyper,
        blocks=config.blocks,
        protein_encoder=config.protein_encoder,
        power_mode=config.power_mode,
    )
    cache = _GraphCache(dataset, params)
    shuffle_rng = Rng(hyper.seed, SHUFFLE_STREAM)
    dropout_rng = Rng(hyper.seed, DROPOUT_STREAM)
    optimizer = Adam(lr=hyper.lr)
    logs: list[EpochLog] = []
    log_fh = open(config.log_path, "w", encoding="utf-8") if config.log_path else None
    try:
        for epoch in range(1, hyper.epochs + 1):
            started = time.perf_counter()
            order = shuffle_rng.permutation(n)
            for batch_index, start in enumerate(range(0, n, hyper.batch_size)):
                batch = [dataset.records[i] for i in order[start : start + hyper.batch_size]]
                loss = _batch_loss(batch, params, cache, dropout_rng)
                if not np.isfinite(loss.data):
                    pairs = [(r.drug_id, r.protein_id) for r in batch]
                    raise NonFiniteLossError(
                        f"non-finite loss at epoch {epoch}, batch {batch_index}: {pairs}"
                    )
                backward(loss)
                optimizer.step(params.tensors)
                zero_grads(params.tensors.values())
            train_mse = _eval_mse(params, dataset)
            test_mse = _eval_mse(params, test_dataset) if test_dataset is not None else None
            log = EpochLog(epoch, train_mse, test_mse, time.perf_counter() - started)
            logs.append(log)
            if log_fh is not None:
                log_fh.write(json.dumps(log.as_dict()) + "\n")
                log_fh.flush()
            if (
                config.checkpoint_path
                and config.checkpoint_interval
                and epoch % config.checkpoint_interval == 0
                and epoch != hyper.epochs
            ):
                save_checkpoint(params, config.checkpoint_path)
    finally:
        if log_fh is not None:
            log_fh.close()
    if config.checkpoint_path:
        save_checkpoint(params, config.checkpoint_path)
    return params, logs
