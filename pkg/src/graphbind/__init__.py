"""Drug-target binding affinity prediction.

Pipeline: molecules arrive as SMILES strings and proteins as residue
sequences; a graph-convolutional encoder over adjacency powers meets a
bidirectional LSTM over residues, and a dense head regresses binding
affinity. Everything runs on numpy with a small reverse-mode autodiff
engine; training, evaluation, ranking, and gradient checking are exposed
through the ``graphbind`` command-line tool.
"""

__version__ = "0.1.0"
