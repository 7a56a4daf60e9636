"""Protein sequence encoding.

Residues are letters ``A``-``Z`` mapped to integer codes 1-26 in
alphabetical order; 0 is reserved for padding. Sequences are forced to a
fixed length: longer ones keep their prefix, shorter ones get a zero
suffix. The wide alphabet deliberately covers the ambiguity codes (B, J,
O, U, X, Z) that appear in real sequence databases.
"""

from __future__ import annotations

import numpy as np

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
PAD_CODE = 0
N_CODES = len(ALPHABET) + 1  # 26 residue codes + padding
DEFAULT_LENGTH = 1000

_CODE = {ch: i + 1 for i, ch in enumerate(ALPHABET)}


class InvalidResidueError(ValueError):
    """A sequence character outside ``A``-``Z``."""


def encode_residue(ch: str) -> int:
    code = _CODE.get(ch)
    if code is None:
        raise InvalidResidueError(f"invalid residue {ch!r}")
    return code


def encode_protein(sequence: str, length: int = DEFAULT_LENGTH) -> np.ndarray:
    """Integer-encode a residue string to a fixed-length int64 vector.

    Truncates to ``length`` (keeping the prefix) and pads the tail with
    zeros. Raises :class:`InvalidResidueError` on any character outside
    the residue alphabet, reporting its position.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    out = np.zeros(length, dtype=np.int64)
    for i, ch in enumerate(sequence[:length]):
        code = _CODE.get(ch)
        if code is None:
            raise InvalidResidueError(f"invalid residue {ch!r} at position {i}")
        out[i] = code
    # Validate the truncated tail too: a bad residue is a data error
    # wherever it sits.
    for i, ch in enumerate(sequence[length:], start=length):
        if ch not in _CODE:
            raise InvalidResidueError(f"invalid residue {ch!r} at position {i}")
    return out


def sequence_length(encoded: np.ndarray) -> int:
    """Number of leading non-pad codes (the original length, capped)."""
    nonzero = np.flatnonzero(encoded == PAD_CODE)
    return int(nonzero[0]) if nonzero.size else int(encoded.size)
