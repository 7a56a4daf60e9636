"""Command-line interface.

Subcommands: ``featurize`` (validate and summarize a dataset),
``train``, ``evaluate``, ``predict``, ``rank`` (combined-score drug
ranking from a predictions CSV), and ``gradcheck`` (finite-difference
gradient verification). Success exits 0; failures print one
machine-readable JSON line to stderr and exit nonzero; usage errors
print the flag table and exit 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .autodiff import finite_difference_check, mse as mse_loss
from .data import MEASURES, _read_rows, load_dataset, split
from .features import FEATURE_DIM, featurize_smiles
from .model import (
    HyperParams,
    POWER_MODES,
    PROTEIN_ENCODERS,
    cast_parameters,
    drug_inputs,
    init_params,
    load_checkpoint,
    predict,
)
from .protein import encode_protein
from .repurpose import combined_scores, rank_top_k
from .training import TrainConfig, evaluate, predictions, train

GRADCHECK_TOLERANCE = 1e-4
DEFAULT_BATCH_SIZE = 512
PKD_BATCH_SIZE = 128  # smaller preset for Kd-measured datasets


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors print the full flag table."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_data_flags(parser, required=True):
    parser.add_argument("--data-dir", required=required, help="dataset directory")
    parser.add_argument(
        "--measure",
        choices=MEASURES,
        default="kiba",
        help="affinity measure / value transform (default: kiba)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphbind", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", parents=[], help="validate a dataset and summarize features")
    _add_data_flags(p)
    p.add_argument("--report", help="write load-report JSON here")

    p = sub.add_parser("train", help="train a model")
    _add_data_flags(p)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument(
        "--batch-size",
        type=int,
        default=None,
        help=f"default {DEFAULT_BATCH_SIZE} ({PKD_BATCH_SIZE} for --measure pkd)",
    )
    p.add_argument("--lr", type=float, default=0.0005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", default="1,2,3", help="comma-separated subset of 1,2,3")
    p.add_argument("--power-mode", choices=POWER_MODES, default="binary")
    p.add_argument("--protein-encoder", choices=PROTEIN_ENCODERS, default="bilstm")
    p.add_argument("--protein-length", type=int, default=1000)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--test-fraction", type=float, default=0.0, help="held-out fraction (0 = none)")
    p.add_argument("--split-seed", type=int, default=None, help="defaults to --seed")
    p.add_argument("--checkpoint", help="write final parameters here")
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--log-out", help="write epoch logs here (JSONL)")
    p.add_argument("--metrics-out", help="write final metrics JSON here")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    _add_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metrics-out", help="write metrics JSON here")
    p.add_argument("--scatter-out", help="write measured,predicted CSV here")

    p = sub.add_parser("predict", help="predict affinities for dataset pairs")
    _add_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--predictions-out", help="output CSV (default: stdout)")

    p = sub.add_parser("rank", help="combined-score drug ranking from a predictions CSV")
    p.add_argument(
        "--predictions-csv",
        required=True,
        help="CSV with header drug_id,protein_id,kiba_pred,pkd_pred",
    )
    p.add_argument("--rank-out", help="write full scored CSV here, cb descending")
    p.add_argument("--protein", help="only print the table for this protein")
    p.add_argument("--top-k", type=int, default=18)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-coords", type=int, default=200, help="sampled coordinates per tensor")

    return parser


def _parse_blocks(text: str) -> tuple[int, ...]:
    try:
        blocks = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"--blocks must be comma-separated integers, got {text!r}") from None
    return blocks


def cmd_featurize(args) -> int:
    dataset = load_dataset(args.data_dir, args.measure)
    total_atoms = 0
    for smiles in dataset.drugs.values():
        features, _ = featurize_smiles(smiles)
        total_atoms += features.shape[0]
    report = dataset.load_report.as_dict()
    report["feature_dim"] = FEATURE_DIM
    report["total_atoms"] = total_atoms
    print(f"drugs: {report['n_drugs']} (dropped {report['n_drugs_dropped']})")
    print(f"proteins: {report['n_proteins']}")
    print(f"records: {report['n_records']} (dropped {report['n_records_dropped']})")
    print(f"atoms: {total_atoms}, features per atom: {FEATURE_DIM}")
    for warning in report["warnings"]:
        print(f"warning: {warning}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
        print(f"report written to {args.report}")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.data_dir, args.measure)
    test_dataset = None
    if args.test_fraction > 0.0:
        split_seed = args.seed if args.split_seed is None else args.split_seed
        dataset, test_dataset = split(dataset, split_seed, args.test_fraction)
    batch_size = args.batch_size
    if batch_size is None:
        batch_size = PKD_BATCH_SIZE if args.measure == "pkd" else DEFAULT_BATCH_SIZE
    hyper = HyperParams(
        lr=args.lr,
        dropout=args.dropout,
        batch_size=batch_size,
        epochs=args.epochs,
        n=args.protein_length,
        seed=args.seed,
    )
    config = TrainConfig(
        hyper=hyper,
        blocks=_parse_blocks(args.blocks),
        protein_encoder=args.protein_encoder,
        power_mode=args.power_mode,
        checkpoint_path=args.checkpoint,
        checkpoint_interval=args.checkpoint_interval,
        log_path=args.log_out,
    )
    params, logs = train(dataset, config, test_dataset=test_dataset)
    for log in logs:
        line = f"epoch {log.epoch}: train_mse {log.train_mse:.6f}"
        if log.test_mse is not None:
            line += f", test_mse {log.test_mse:.6f}"
        print(f"{line} ({log.wall_time:.2f}s)")
    if args.metrics_out:
        target = test_dataset if test_dataset is not None else dataset
        report, _ = evaluate(params, target)
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
        print(f"metrics written to {args.metrics_out}")
    if args.checkpoint:
        print(f"checkpoint written to {args.checkpoint}")
    return 0


def cmd_evaluate(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data_dir, args.measure)
    report, scatter = evaluate(params, dataset)
    for key, value in report.as_dict().items():
        print(f"{key}: {value}")
    if args.metrics_out:
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
    if args.scatter_out:
        with open(args.scatter_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["measured", "predicted"])
            for measured, predicted in scatter:
                writer.writerow([repr(measured), repr(predicted)])
    return 0


def cmd_predict(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data_dir, args.measure)
    preds = predictions(params, dataset)
    rows = [
        (rec.drug_id, rec.protein_id, repr(pred))
        for rec, pred in zip(dataset.records, preds)
    ]
    if args.predictions_out:
        with open(args.predictions_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["drug_id", "protein_id", "predicted"])
            writer.writerows(rows)
        print(f"predictions written to {args.predictions_out}")
    else:
        print("drug_id,protein_id,predicted")
        for row in rows:
            print(",".join(row))
    return 0


def _read_predictions_csv(path: str):
    rows = []
    header = ["drug_id", "protein_id", "kiba_pred", "pkd_pred"]
    for lineno, row in _read_rows(path, header):
        try:
            rows.append((row[0], row[1], float(row[2]), float(row[3])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric prediction") from None
    return rows


def cmd_rank(args) -> int:
    pairs = _read_predictions_csv(args.predictions_csv)
    scored = combined_scores(pairs)
    by_cb = sorted(scored, key=lambda s: (-s.cb, s.drug_id, s.protein_id))
    if args.rank_out:
        with open(args.rank_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["drug_id", "protein_id", "kiba_pred", "pkd_pred", "cb"])
            for s in by_cb:
                writer.writerow(
                    [s.drug_id, s.protein_id, repr(s.kiba_pred), repr(s.pkd_pred), repr(s.cb)]
                )
        print(f"scored CSV written to {args.rank_out}")
    proteins = [args.protein] if args.protein else sorted({s.protein_id for s in scored})
    for protein_id in proteins:
        top = rank_top_k(scored, protein_id, args.top_k)
        print(f"top {len(top)} for {protein_id}:")
        for position, s in enumerate(top, start=1):
            print(f"  {position:3d}. {s.drug_id}  cb={s.cb:.6f}")
    return 0


def cmd_gradcheck(args) -> int:
    params = cast_parameters(init_params(seed=args.seed), np.float64)
    drug = drug_inputs("CCO", params, dtype=np.float64)
    tokens = encode_protein("MKTAYIAKQR", length=10)
    target = np.array([[7.0]])
    result = finite_difference_check(
        lambda: mse_loss(predict(drug, tokens, params), target),
        params.tensors,
        max_coords=args.max_coords,
        seed=args.seed,
    )
    print(f"max relative error: {result.max_rel_error:.6e}")
    passed = result.max_rel_error < GRADCHECK_TOLERANCE
    print("PASS" if passed else f"FAIL (tolerance {GRADCHECK_TOLERANCE:.0e})")
    return 0 if passed else 1


_COMMANDS = {
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "rank": cmd_rank,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(error), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
