"""Binary atom features for molecular graphs.

Each heavy atom maps to a 78-dimensional 0/1 vector laid out as four
one-hot blocks plus a flag:

====== ======================= ==========================================
cols   block                   encoding
====== ======================= ==========================================
0-43   element symbol          44-way one-hot, last slot = "other"
44-54  degree                  0..10, clamped
55-65  hydrogen count          0..10, clamped
66-76  implicit valence        0..10, clamped
77     aromatic                single flag
====== ======================= ==========================================

Every row therefore sums to exactly 4 (plus 1 when aromatic).
"""

from __future__ import annotations

import math

import numpy as np

from .smiles import Atom, MolecularGraph, parse_smiles

# Symbol vocabulary; the final "other" slot absorbs anything unlisted.
ATOM_SYMBOLS = [
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg",
    "Na", "Ca", "Fe", "As", "Al", "I", "B", "V", "K", "Tl",
    "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H",
    "Li", "Ge", "Cu", "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr",
    "Pt", "Hg", "Pb", "other",
]
_SYMBOL_INDEX = {s: i for i, s in enumerate(ATOM_SYMBOLS)}

N_SYMBOLS = len(ATOM_SYMBOLS)          # 44
MAX_COUNT = 10                          # degree / H / valence buckets 0..10
COUNT_SLOTS = MAX_COUNT + 1             # 11

SYMBOL_OFFSET = 0
DEGREE_OFFSET = N_SYMBOLS               # 44
HYDROGEN_OFFSET = DEGREE_OFFSET + COUNT_SLOTS   # 55
VALENCE_OFFSET = HYDROGEN_OFFSET + COUNT_SLOTS  # 66
AROMATIC_OFFSET = VALENCE_OFFSET + COUNT_SLOTS  # 77
FEATURE_DIM = AROMATIC_OFFSET + 1       # 78

# Usual valences for the organic subset, used to infer hydrogen counts
# on atoms written without brackets.
DEFAULT_VALENCE = {
    "B": 3, "C": 4, "N": 3, "O": 2, "P": 3, "S": 2,
    "F": 1, "Cl": 1, "Br": 1, "I": 1,
}


def symbol_index(element: str) -> int:
    """Column of the element's one-hot slot ("other" when unlisted)."""
    return _SYMBOL_INDEX.get(element, N_SYMBOLS - 1)


def implicit_hydrogens(atom: Atom, graph: MolecularGraph) -> int:
    """Hydrogens attached to ``atom`` but absent from the heavy-atom graph.

    Bracket atoms carry their count verbatim. Organic-subset atoms fill
    their usual valence (shifted by formal charge): whatever bonding
    capacity the explicit bonds leave over becomes hydrogens, with
    aromatic bonds counting 1.5 and fractional leftovers rounded down.
    """
    if atom.explicit_h is not None:
        return atom.explicit_h
    capacity = DEFAULT_VALENCE.get(atom.element)
    if capacity is None:
        return 0
    capacity += atom.formal_charge
    leftover = capacity - graph.bond_order_sum(atom.index)
    return max(0, math.floor(leftover))


def implicit_valence(atom: Atom, graph: MolecularGraph) -> int:
    """Bonding capacity not consumed by explicit bonds.

    Equal to the implicit hydrogen count for organic-subset atoms and
    zero for bracket atoms, whose hydrogens are explicit by definition.
    """
    if atom.explicit_h is not None:
        return 0
    return implicit_hydrogens(atom, graph)


def featurize_atom(atom: Atom, graph: MolecularGraph, dtype=np.float32) -> np.ndarray:
    """78-dimensional binary feature vector for one atom."""
    vec = np.zeros(FEATURE_DIM, dtype=dtype)
    vec[SYMBOL_OFFSET + symbol_index(atom.element)] = 1
    vec[DEGREE_OFFSET + min(graph.degree(atom.index), MAX_COUNT)] = 1
    vec[HYDROGEN_OFFSET + min(implicit_hydrogens(atom, graph), MAX_COUNT)] = 1
    vec[VALENCE_OFFSET + min(implicit_valence(atom, graph), MAX_COUNT)] = 1
    if atom.aromatic:
        vec[AROMATIC_OFFSET] = 1
    return vec


def featurize_molecule(graph: MolecularGraph, dtype=np.float32) -> np.ndarray:
    """Stack per-atom features into an ``(n_atoms, 78)`` matrix."""
    if graph.n_atoms == 0:
        return np.zeros((0, FEATURE_DIM), dtype=dtype)
    return np.stack([featurize_atom(a, graph, dtype=dtype) for a in graph.atoms])


def featurize_smiles(smiles: str, dtype=np.float32) -> tuple[np.ndarray, MolecularGraph]:
    """Parse and featurize in one step; returns (features, graph)."""
    graph = parse_smiles(smiles)
    return featurize_molecule(graph, dtype=dtype), graph
