"""The binding-affinity network and its checkpoint format.

Drug branch: up to three graph-convolution blocks, one per adjacency
power. Block 1 runs three layers (78→78→156→312) on the normalized
1-hop graph, block 2 two layers (78→78→156) on the 2-hop graph, block 3
one layer (78→78) on the 3-hop graph. Block outputs concatenate along
the feature axis, a global max-pool collapses atoms, and two dense
layers produce a 128-vector. Protein branch: residue embedding (27×128)
plus a bidirectional LSTM with 64 hidden units per direction whose final
states concatenate to a 128-vector. The head joins both vectors and
regresses the affinity through 1024- and 512-wide layers.

Every trainable tensor lives in an ordered name→Value dict so
initialization order, checkpoint layout, and optimizer state are all
pinned by the same sequence of names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import (
    AggregationStructure,
    Rng,
    Value,
    concat,
    dropout,
    embedding_lookup,
    lstm_last,
    matmul,
    neighbor_sum,
    relu,
    row_max_pool,
    stack_rows,
)
from .graphs import DrugGraph, prepare_drug
from .protein import N_CODES

CHECKPOINT_MAGIC = b"DGLSTM01"
SCHEMA_VERSION = 1

FEATURE_DIM = 78
EMBED_DIM = 128
LSTM_HIDDEN = 64
DRUG_DIM = 128
PROTEIN_DIM = 2 * LSTM_HIDDEN  # 128

# Per-block layer shapes; each block consumes the 78-dim node features.
BLOCK_LAYERS: dict[int, tuple[tuple[int, int], ...]] = {
    1: ((78, 78), (78, 156), (156, 312)),
    2: ((78, 78), (78, 156)),
    3: ((78, 78),),
}
BLOCK_WIDTHS = {1: 312, 2: 156, 3: 78}

PROTEIN_ENCODERS = ("bilstm", "none")
POWER_MODES = ("binary", "raw")


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Training-time knobs; defaults follow the reference recipe."""

    lr: float = 0.0005
    dropout: float = 0.2
    batch_size: int = 512
    epochs: int = 1000
    n: int = 1000  # fixed protein length
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class ModelParameters:
    """All trainable tensors plus the architecture switches they imply."""

    tensors: dict[str, Value]
    hyper: HyperParams
    blocks: tuple[int, ...] = (1, 2, 3)
    protein_encoder: str = "bilstm"
    power_mode: str = "binary"

    @property
    def concat_width(self) -> int:
        return sum(BLOCK_WIDTHS[b] for b in self.blocks)

    @property
    def head_input_width(self) -> int:
        return DRUG_DIM + (PROTEIN_DIM if self.protein_encoder == "bilstm" else 0)

    def __getitem__(self, name: str) -> Value:
        return self.tensors[name]

    def parameter_count(self) -> int:
        return sum(v.data.size for v in self.tensors.values())


def _tensor_plan(
    blocks: tuple[int, ...], protein_encoder: str
) -> list[tuple[str, tuple[int, ...], str]]:
    """Ordered (name, shape, init kind) list defining the whole model."""
    width = sum(BLOCK_WIDTHS[b] for b in blocks)
    plan: list[tuple[str, tuple[int, ...], str]] = []
    for b in blocks:
        for li, (d_in, d_out) in enumerate(BLOCK_LAYERS[b]):
            plan.append((f"gcn{b}_w{li}", (d_in, d_out), "glorot"))
    plan += [
        ("drug_dense1_w", (width, 1024), "glorot"),
        ("drug_dense1_b", (1024,), "zeros"),
        ("drug_dense2_w", (1024, DRUG_DIM), "glorot"),
        ("drug_dense2_b", (DRUG_DIM,), "zeros"),
    ]
    if protein_encoder == "bilstm":
        plan.append(("embedding", (N_CODES, EMBED_DIM), "embed"))
        for direction in ("fwd", "bwd"):
            plan += [
                (f"lstm_{direction}_wx", (EMBED_DIM, 4 * LSTM_HIDDEN), "glorot"),
                (f"lstm_{direction}_wh", (LSTM_HIDDEN, 4 * LSTM_HIDDEN), "glorot"),
                (f"lstm_{direction}_b", (4 * LSTM_HIDDEN,), "lstm_bias"),
            ]
    head_in = DRUG_DIM + (PROTEIN_DIM if protein_encoder == "bilstm" else 0)
    plan += [
        ("head1_w", (head_in, 1024), "glorot"),
        ("head1_b", (1024,), "zeros"),
        ("head2_w", (1024, 512), "glorot"),
        ("head2_b", (512,), "zeros"),
        ("out_w", (512, 1), "glorot"),
        ("out_b", (1,), "zeros"),
    ]
    return plan


def _validate_config(blocks, protein_encoder, power_mode):
    blocks = tuple(sorted(set(int(b) for b in blocks)))
    if not blocks or any(b not in BLOCK_LAYERS for b in blocks):
        raise ValueError(f"blocks must be a non-empty subset of {{1,2,3}}, got {blocks}")
    if protein_encoder not in PROTEIN_ENCODERS:
        raise ValueError(f"protein_encoder must be one of {PROTEIN_ENCODERS}")
    if power_mode not in POWER_MODES:
        raise ValueError(f"power_mode must be one of {POWER_MODES}")
    return blocks


def init_params(
    seed: int,
    hyper: HyperParams | None = None,
    blocks: tuple[int, ...] = (1, 2, 3),
    protein_encoder: str = "bilstm",
    power_mode: str = "binary",
) -> ModelParameters:
    """Seeded initialization: Glorot-uniform weights, zero biases, LSTM
    forget gates at 1.0, embeddings uniform in ±0.05.

    Tensors are drawn from a single stream in plan order, so the full
    parameter set is a pure function of (seed, architecture switches).
    """
    blocks = _validate_config(blocks, protein_encoder, power_mode)
    hyper = hyper if hyper is not None else HyperParams(seed=seed)
    rng = Rng(seed, stream=0)
    tensors: dict[str, Value] = {}
    for name, shape, kind in _tensor_plan(blocks, protein_encoder):
        if kind == "glorot":
            limit = float(np.sqrt(6.0 / (shape[0] + shape[1])))
            data = rng.uniform(-limit, limit, shape)
        elif kind == "embed":
            data = rng.uniform(-0.05, 0.05, shape)
        elif kind == "lstm_bias":
            data = np.zeros(shape, dtype=np.float32)
            data[LSTM_HIDDEN : 2 * LSTM_HIDDEN] = 1.0  # forget gate
        else:
            data = np.zeros(shape, dtype=np.float32)
        tensors[name] = Value(data, requires_grad=True, name=name)
    return ModelParameters(
        tensors=tensors,
        hyper=hyper,
        blocks=blocks,
        protein_encoder=protein_encoder,
        power_mode=power_mode,
    )


def cast_parameters(params: ModelParameters, dtype) -> ModelParameters:
    """Copy of the model with every tensor cast (64-bit gradient checks)."""
    tensors = {
        name: Value(v.data.astype(dtype), requires_grad=True, name=name)
        for name, v in params.tensors.items()
    }
    return replace(params, tensors=tensors)


# ---------------------------------------------------------------------------
# forward passes


def gcn_layer(h: Value, structure: AggregationStructure, w: Value) -> Value:
    """relu(A_norm · H · W) for one precomputed normalized matrix."""
    if h.data.shape[1] != w.data.shape[0]:
        raise ShapeMismatchError(
            f"features have width {h.data.shape[1]}, weight expects {w.data.shape[0]}"
        )
    return relu(matmul(neighbor_sum(h, structure), w))


def drug_pooled(inputs: DrugGraph, params: ModelParameters) -> Value:
    """GCN blocks + feature concat + global max-pool -> concat_width vector."""
    outputs = []
    for b in params.blocks:
        structure = inputs.structures[b]
        h = Value(inputs.features)
        for li in range(len(BLOCK_LAYERS[b])):
            h = gcn_layer(h, structure, params[f"gcn{b}_w{li}"])
        outputs.append(h)
    h_cat = outputs[0] if len(outputs) == 1 else concat(outputs, axis=1)
    return row_max_pool(h_cat)


def drug_dense(pooled: Value, params: ModelParameters, mode: str = "eval", rng: Rng | None = None) -> Value:
    """Two dense layers mapping (B, concat_width) -> (B, 128)."""
    training = mode == "train"
    rate = params.hyper.dropout
    x = relu(matmul(pooled, params["drug_dense1_w"]) + params["drug_dense1_b"])
    x = dropout(x, rate, rng, training=training)
    x = matmul(x, params["drug_dense2_w"]) + params["drug_dense2_b"]
    return dropout(x, rate, rng, training=training)


def drug_encoder(
    inputs: DrugGraph, params: ModelParameters, mode: str = "eval", rng: Rng | None = None
) -> Value:
    """Full drug branch for a single molecule -> 128-vector."""
    pooled = drug_pooled(inputs, params)
    return drug_dense(stack_rows([pooled]), params, mode=mode, rng=rng)


def protein_batch(tokens: np.ndarray, params: ModelParameters) -> Value:
    """Embed + Bi-LSTM for a (B, n) integer batch -> (B, 128)."""
    embedded = embedding_lookup(params["embedding"], tokens)
    fwd = lstm_last(
        embedded, params["lstm_fwd_wx"], params["lstm_fwd_wh"], params["lstm_fwd_b"]
    )
    bwd = lstm_last(
        embedded,
        params["lstm_bwd_wx"],
        params["lstm_bwd_wh"],
        params["lstm_bwd_b"],
        reverse=True,
    )
    return concat([fwd, bwd], axis=1)


def protein_encoder(tokens: np.ndarray, params: ModelParameters) -> Value:
    """Protein branch for one sequence -> 128-vector (as shape (1, 128))."""
    return protein_batch(np.asarray(tokens)[None, :], params)


def head(joint: Value, params: ModelParameters, mode: str = "eval", rng: Rng | None = None) -> Value:
    """Prediction head: (B, head_in) -> (B, 1) affinity."""
    training = mode == "train"
    rate = params.hyper.dropout
    x = relu(matmul(joint, params["head1_w"]) + params["head1_b"])
    x = dropout(x, rate, rng, training=training)
    x = relu(matmul(x, params["head2_w"]) + params["head2_b"])
    x = dropout(x, rate, rng, training=training)
    return matmul(x, params["out_w"]) + params["out_b"]


def predict(
    drug: DrugGraph,
    protein: np.ndarray,
    params: ModelParameters,
    mode: str = "eval",
    rng: Rng | None = None,
) -> Value:
    """Affinity for one drug-protein pair, as a (1, 1) graph output."""
    drug_vec = drug_encoder(drug, params, mode=mode, rng=rng)
    if params.protein_encoder == "bilstm":
        joint = concat([drug_vec, protein_encoder(protein, params)], axis=1)
    else:
        joint = drug_vec
    return head(joint, params, mode=mode, rng=rng)


def drug_inputs(
    smiles: str, params: ModelParameters, dtype=np.float32
) -> DrugGraph:
    """Prepare GraphInputs matching the model's block mask / power mode."""
    return prepare_drug(
        smiles,
        orders=params.blocks,
        binarize=params.power_mode == "binary",
        dtype=dtype,
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: ModelParameters, path: str) -> None:
    """Magic bytes, JSON header, newline, then raw float32 payload."""
    names = list(params.tensors)
    offset = 0
    entries = []
    payload = bytearray()
    for name in names:
        arr = np.ascontiguousarray(params.tensors[name].data.astype("<f4", copy=False))
        raw = arr.tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        payload += raw
        offset += len(raw)
    header = {
        "schema": SCHEMA_VERSION,
        "seed": params.hyper.seed,
        "hyper": {
            "lr": params.hyper.lr,
            "dropout": params.hyper.dropout,
            "batch_size": params.hyper.batch_size,
            "epochs": params.hyper.epochs,
            "n": params.hyper.n,
            "seed": params.hyper.seed,
        },
        "blocks": list(params.blocks),
        "protein_encoder": params.protein_encoder,
        "power_mode": params.power_mode,
        "tensors": entries,
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(bytes(payload))


class CheckpointError(ValueError):
    pass


def load_checkpoint(path: str) -> ModelParameters:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: bad magic bytes")
    try:
        header_raw, payload = blob[len(CHECKPOINT_MAGIC) :].split(b"\n", 1)
    except ValueError:
        raise CheckpointError(f"{path}: truncated header") from None
    try:
        header = json.loads(header_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unparseable header ({exc})") from None
    if header.get("schema") != SCHEMA_VERSION:
        raise CheckpointError(f"{path}: unsupported schema {header.get('schema')!r}")

    hyper = HyperParams(**header["hyper"])
    tensors: dict[str, Value] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} overruns payload")
        arr = np.frombuffer(payload[start : start + nbytes], dtype="<f4").reshape(
            entry["shape"]
        )
        tensors[entry["name"]] = Value(
            arr.astype(np.float32, copy=True), requires_grad=True, name=entry["name"]
        )
    return ModelParameters(
        tensors=tensors,
        hyper=hyper,
        blocks=tuple(header["blocks"]),
        protein_encoder=header["protein_encoder"],
        power_mode=header["power_mode"],
    )
