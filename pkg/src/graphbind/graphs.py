"""Adjacency construction, graph powers, and normalization.

The drug encoder consumes one adjacency matrix per power order k: the
k-th power graph connects atom pairs whose shortest-path distance is at
most k hops. Each power is then symmetrically normalized with self
loops, which pins the top eigenvalue of every connected component at 1
and keeps repeated propagation from blowing up activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import AggregationStructure
from .features import featurize_molecule
from .smiles import MolecularGraph, parse_smiles


def adjacency_matrix(graph: MolecularGraph, dtype=np.float32) -> np.ndarray:
    """Binary symmetric adjacency with a zero diagonal, parse order."""
    n = graph.n_atoms
    adj = np.zeros((n, n), dtype=dtype)
    for bond in graph.bonds:
        adj[bond.i, bond.j] = 1
        adj[bond.j, bond.i] = 1
    return adj


def power_graph(adj: np.ndarray, k: int, dtype=np.float32) -> np.ndarray:
    """Binary reachability within ``k`` hops, zero diagonal.

    Entry (i, j) is 1 iff i != j and a path of length at most k connects
    them. Counts are re-binarized after every hop so intermediate values
    stay small integers regardless of k.
    """
    if k < 1:
        raise ValueError(f"power order must be >= 1, got {k}")
    base = (adj > 0).astype(np.int64)
    np.fill_diagonal(base, 0)
    reach = base.copy()
    frontier = base
    for _ in range(k - 1):
        frontier = ((frontier @ base) > 0).astype(np.int64)
        reach |= frontier
    np.fill_diagonal(reach, 0)
    return reach.astype(dtype)


def raw_power(adj: np.ndarray, k: int, dtype=np.float32) -> np.ndarray:
    """Plain matrix power A^k with walk counts left intact."""
    if k < 1:
        raise ValueError(f"power order must be >= 1, got {k}")
    out = np.linalg.matrix_power(adj.astype(np.float64), k)
    return out.astype(dtype)


def sym_normalize(adj: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Self-loop renormalization: D̃^{-1/2} (A + I) D̃^{-1/2}.

    Computed in float64 and cast on the way out. The scale factors are
    formed as an outer product first so the result is exactly symmetric.
    """
    n = adj.shape[0]
    a_tilde = adj.astype(np.float64) + np.eye(n)
    degree = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    scale = np.multiply.outer(inv_sqrt, inv_sqrt)
    return (a_tilde * scale).astype(dtype)


@dataclass
class DrugGraph:
    """Featurized drug ready for the graph encoder.

    ``norm_powers`` maps power order k to the normalized k-th power
    graph and ``structures`` to its gather form used by the
    permutation-stable aggregation op; the model picks the orders its
    block mask requests.
    """

    features: np.ndarray
    norm_powers: dict[int, np.ndarray]
    structures: dict[int, AggregationStructure]
    n_atoms: int


def prepare_drug(
    smiles: str,
    orders: tuple[int, ...] = (1, 2, 3),
    binarize: bool = True,
    dtype=np.float32,
) -> DrugGraph:
    """Parse, featurize, and precompute normalized power graphs."""
    graph = parse_smiles(smiles)
    feats = featurize_molecule(graph, dtype=dtype)
    adj = adjacency_matrix(graph, dtype=np.float64)
    powers = {}
    structures = {}
    for k in sorted(set(orders)):
        pk = power_graph(adj, k, dtype=np.float64) if binarize else raw_power(adj, k, dtype=np.float64)
        powers[k] = sym_normalize(pk, dtype=dtype)
        structures[k] = AggregationStructure.from_matrix(powers[k])
    return DrugGraph(
        features=feats, norm_powers=powers, structures=structures, n_atoms=graph.n_atoms
    )
