#!/usr/bin/env python3
"""Generate a synthetic affinity directory in the raw-Kd CSV layout.

The values carry a learnable structure/affinity signal, so the small
presets are usable for smoke training runs and ablations:

    python scripts/make_toy_data.py --preset toy --out-dir data/toy
    python scripts/make_toy_data.py --preset sanity --out-dir data/sanity
    python scripts/make_toy_data.py --n-drugs 20 --n-proteins 5 --out-dir data/mini
"""

import argparse
import sys

sys.path.insert(0, "src")

from graphbind.synth import make_dataset, sanity_dataset, toy_dataset, write_kd_format

PRESETS = {
    "toy": lambda seed: toy_dataset(seed=seed),
    "sanity": lambda seed: sanity_dataset(seed=seed),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True, help="directory to write CSVs into")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named size preset")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--n-drugs", type=int, default=8)
    parser.add_argument("--n-proteins", type=int, default=4)
    parser.add_argument("--min-protein-len", type=int, default=20)
    parser.add_argument("--max-protein-len", type=int, default=40)
    args = parser.parse_args()

    if args.preset is not None:
        dataset = PRESETS[args.preset](args.seed)
    else:
        dataset = make_dataset(
            args.seed,
            n_drugs=args.n_drugs,
            n_proteins=args.n_proteins,
            protein_length=(args.min_protein_len, args.max_protein_len),
        )
    write_kd_format(dataset, args.out_dir)
    print(
        f"wrote {len(dataset.drugs)} drugs x {len(dataset.proteins)} proteins "
        f"({dataset.n_records} records) to {args.out_dir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
