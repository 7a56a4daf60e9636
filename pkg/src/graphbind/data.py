"""Affinity dataset loading, value transforms, and splits.

On-disk format is a directory of three UTF-8 CSVs with header rows:

- ``drugs.csv``       — ``id,smiles``
- ``proteins.csv``    — ``id,sequence``
- ``affinities.csv``  — ``drug_id,protein_id,value``

The measure chosen at load time decides the value transform: raw
dissociation constants (nanomolar) go through ``pkd_transform``, STITCH
scores are divided by 100, and KIBA / pKi / AC50 values pass through
unchanged. Drugs whose SMILES fail to parse are dropped with a counted
warning, together with the affinity rows that reference them.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

from .autodiff import Rng
from .smiles import SmilesError, parse_smiles

SPLIT_STREAM = 3  # RNG stream reserved for train/test splitting

MEASURES = ("pkd", "kiba", "pki", "ac50", "stitch")


class DatasetError(ValueError):
    pass


class MissingFileError(DatasetError):
    pass


class MalformedRowError(DatasetError):
    """A CSV row that cannot be used; message carries the line number."""


class DanglingIdError(DatasetError):
    """An affinity row references an id absent from the registries."""


class NonPositiveKdError(ValueError):
    pass


def pkd_transform(kd_nanomolar: float) -> float:
    """Raw dissociation constant in nM -> pKd = -log10(Kd / 1e9)."""
    if not kd_nanomolar > 0:
        raise NonPositiveKdError(f"Kd must be positive, got {kd_nanomolar}")
    return -math.log10(kd_nanomolar / 1e9)


def stitch_scale(score: float) -> float:
    """STITCH SCORES column -> score / 100."""
    return score / 100.0


_TRANSFORMS = {
    "pkd": pkd_transform,
    "kiba": lambda v: v,
    "pki": lambda v: v,
    "ac50": lambda v: v,
    "stitch": stitch_scale,
}


@dataclass(frozen=True)
class AffinityRecord:
    drug_id: str
    protein_id: str
    value: float
    measure: str


@dataclass
class LoadReport:
    """Counted warnings from one load, exposed via the CLI ``--report``."""

    n_drugs: int = 0
    n_proteins: int = 0
    n_records: int = 0
    n_drugs_dropped: int = 0
    n_records_dropped: int = 0
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "n_drugs": self.n_drugs,
            "n_proteins": self.n_proteins,
            "n_records": self.n_records,
            "n_drugs_dropped": self.n_drugs_dropped,
            "n_records_dropped": self.n_records_dropped,
            "warnings": list(self.warnings),
        }


@dataclass
class AffinityDataset:
    drugs: dict[str, str]
    proteins: dict[str, str]
    records: list[AffinityRecord]
    load_report: LoadReport | None = None

    @property
    def n_records(self) -> int:
        return len(self.records)


def _read_rows(path: str, expected_header: list[str]):
    if not os.path.isfile(path):
        raise MissingFileError(f"missing dataset file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != expected_header:
        raise MalformedRowError(
            f"{path}:1: expected header {','.join(expected_header)!r}, "
            f"got {','.join(rows[0]) if rows else '<empty file>'!r}"
        )
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue  # blank line
        if len(row) != len(expected_header):
            raise MalformedRowError(
                f"{path}:{lineno}: expected {len(expected_header)} columns, got {len(row)}"
            )
        yield lineno, row


def _read_registry(path: str, header: list[str], kind: str) -> dict[str, str]:
    registry: dict[str, str] = {}
    for lineno, row in _read_rows(path, header):
        key, value = row
        if not key:
            raise MalformedRowError(f"{path}:{lineno}: empty {kind} id")
        if key in registry:
            raise MalformedRowError(f"{path}:{lineno}: duplicate {kind} id {key!r}")
        registry[key] = value
    return registry


def load_dataset(data_dir: str, measure: str) -> AffinityDataset:
    """Load the three-CSV directory and apply the measure's transform.

    Raises :class:`MissingFileError`, :class:`MalformedRowError` (with
    file and line number), or :class:`DanglingIdError`. Drugs with
    unparseable SMILES are dropped and counted in the returned dataset's
    ``load_report`` rather than raised.
    """
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}, got {measure!r}")
    transform = _TRANSFORMS[measure]
    report = LoadReport()

    raw_drugs = _read_registry(os.path.join(data_dir, "drugs.csv"), ["id", "smiles"], "drug")
    proteins = _read_registry(
        os.path.join(data_dir, "proteins.csv"), ["id", "sequence"], "protein"
    )

    drugs: dict[str, str] = {}
    dropped_drugs: set[str] = set()
    for drug_id, smiles in raw_drugs.items():
        try:
            parse_smiles(smiles)
        except SmilesError as exc:
            dropped_drugs.add(drug_id)
            report.n_drugs_dropped += 1
            report.warnings.append(f"dropped drug {drug_id!r}: unparseable SMILES ({exc})")
        else:
            drugs[drug_id] = smiles

    affin_path = os.path.join(data_dir, "affinities.csv")
    records: list[AffinityRecord] = []
    seen_pairs: set[tuple[str, str]] = set()
    for lineno, row in _read_rows(affin_path, ["drug_id", "protein_id", "value"]):
        drug_id, protein_id, raw_value = row
        if drug_id in dropped_drugs:
            report.n_records_dropped += 1
            continue
        if drug_id not in drugs:
            raise DanglingIdError(f"{affin_path}:{lineno}: unknown drug_id {drug_id!r}")
        if protein_id not in proteins:
            raise DanglingIdError(f"{affin_path}:{lineno}: unknown protein_id {protein_id!r}")
        if (drug_id, protein_id) in seen_pairs:
            raise MalformedRowError(
                f"{affin_path}:{lineno}: duplicate pair ({drug_id!r}, {protein_id!r})"
            )
        seen_pairs.add((drug_id, protein_id))
        try:
            value = float(raw_value)
        except ValueError:
            raise MalformedRowError(
                f"{affin_path}:{lineno}: non-numeric value {raw_value!r}"
            ) from None
        if not math.isfinite(value):
            raise MalformedRowError(f"{affin_path}:{lineno}: non-finite value {raw_value!r}")
        try:
            value = transform(value)
        except NonPositiveKdError as exc:
            raise MalformedRowError(f"{affin_path}:{lineno}: {exc}") from exc
        records.append(AffinityRecord(drug_id, protein_id, value, measure))

    report.n_drugs = len(drugs)
    report.n_proteins = len(proteins)
    report.n_records = len(records)
    return AffinityDataset(drugs=drugs, proteins=proteins, records=records, load_report=report)


def save_dataset(dataset: AffinityDataset, data_dir: str) -> None:
    """Write the three CSVs with values as stored (already transformed).

    Reloading the written directory with an identity measure (e.g.
    ``kiba``) reproduces every value exactly; ``repr`` round-trips
    floats losslessly.
    """
    os.makedirs(data_dir, exist_ok=True)
    with open(os.path.join(data_dir, "drugs.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "smiles"])
        for drug_id, smiles in dataset.drugs.items():
            writer.writerow([drug_id, smiles])
    with open(os.path.join(data_dir, "proteins.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "sequence"])
        for protein_id, seq in dataset.proteins.items():
            writer.writerow([protein_id, seq])
    with open(os.path.join(data_dir, "affinities.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["drug_id", "protein_id", "value"])
        for rec in dataset.records:
            writer.writerow([rec.drug_id, rec.protein_id, repr(rec.value)])


def split(
    dataset: AffinityDataset, seed: int, test_fraction: float = 1.0 / 6.0
) -> tuple[AffinityDataset, AffinityDataset]:
    """Seeded record-level shuffle into disjoint (train, test) datasets.

    The test partition takes ``round(n * test_fraction)`` records (half
    up), both partitions keep the shuffled order, and the id registries
    are shared unchanged.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n_records
    perm = Rng(seed, stream=SPLIT_STREAM).permutation(n)
    n_test = int(n * test_fraction + 0.5)
    test_records = [dataset.records[i] for i in perm[:n_test]]
    train_records = [dataset.records[i] for i in perm[n_test:]]
    train = replace(dataset, records=train_records, load_report=None)
    test = replace(dataset, records=test_records, load_report=None)
    return train, test
