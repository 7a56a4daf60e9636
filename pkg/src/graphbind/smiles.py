"""SMILES parsing into a heavy-atom molecular graph.

Supports the organic subset (B, C, N, O, P, S, F, Cl, Br, I and their
aromatic lowercase forms), bracket atoms ``[isotope? symbol chirality?
Hcount? charge?]``, explicit bonds ``- = # :``, branches, ring closures
(``0``-``9`` and ``%nn``), and dot-disconnection. Stereo markers
(``/ \\ @ @@``) and isotope labels are read and discarded. Hydrogens are
never materialized as atoms; bracket H-counts are stored on the atom.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SmilesError(ValueError):
    """Base class for all SMILES parsing failures."""


class EmptyInputError(SmilesError):
    pass


class UnknownTokenError(SmilesError):
    pass


class UnbalancedBranchError(SmilesError):
    pass


class UnclosedRingError(SmilesError):
    pass


# Two-character symbols must be matched before single characters.
ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_ELEMENTS = frozenset("BCNOPS")

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}
_DIGITS = "0123456789"  # str.isdigit also accepts superscripts etc.

# Order contribution of each bond kind when counting bonding electrons
# for implicit-hydrogen assignment (aromatic counts as 1.5).
BOND_ORDER_VALUE = {SINGLE: 1.0, DOUBLE: 2.0, TRIPLE: 3.0, AROMATIC: 1.5}


@dataclass
class Atom:
    """One heavy atom: element symbol, aromatic flag, charge, optional
    bracket hydrogen count, and position in parse order."""

    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int | None = None
    index: int = 0

    @property
    def bracketed(self) -> bool:
        return self.explicit_h is not None


@dataclass(frozen=True)
class Bond:
    """Undirected bond between two atom indices."""

    i: int
    j: int
    order: str = SINGLE

    def __post_init__(self):
        if self.i == self.j:
            raise SmilesError(f"self-bond on atom {self.i}")

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass
class MolecularGraph:
    """Simple undirected heavy-atom graph in SMILES parse order."""

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def neighbors(self, i: int) -> list[int]:
        out = []
        for b in self.bonds:
            if b.i == i:
                out.append(b.j)
            elif b.j == i:
                out.append(b.i)
        return out

    def degree(self, i: int) -> int:
        return sum(1 for b in self.bonds if i in (b.i, b.j))

    def bond_order_sum(self, i: int) -> float:
        """Sum of bond-order values incident to atom i (aromatic = 1.5)."""
        return sum(BOND_ORDER_VALUE[b.order] for b in self.bonds if i in (b.i, b.j))


def _parse_bracket(text: str, start: int) -> tuple[Atom, int]:
    """Parse a bracket atom beginning at ``text[start] == '['``.

    Returns the atom and the index one past the closing bracket.
    """
    end = text.find("]", start)
    if end < 0:
        raise UnbalancedBranchError(f"unterminated bracket atom at position {start}")
    body = text[start + 1 : end]
    pos = 0
    n = len(body)

    while pos < n and body[pos] in _DIGITS:  # isotope, discarded
        pos += 1
    if pos >= n:
        raise UnknownTokenError(f"bracket atom without element symbol: [{body}]")

    aromatic = False
    ch = body[pos]
    if ch.isupper():
        if pos + 1 < n and body[pos + 1].islower() and body[pos + 1] not in "h":
            # Two-letter element; 'h' is reserved for the H-count field.
            element = body[pos : pos + 2]
            pos += 2
        else:
            element = ch
            pos += 1
    elif ch.islower():
        if ch.upper() not in AROMATIC_ELEMENTS:
            raise UnknownTokenError(f"unsupported aromatic symbol '{ch}' in [{body}]")
        element = ch.upper()
        aromatic = True
        pos += 1
    else:
        raise UnknownTokenError(f"unsupported bracket content: [{body}]")

    while pos < n and body[pos] == "@":  # chirality, discarded
        pos += 1

    explicit_h = 0
    if pos < n and body[pos] == "H":
        pos += 1
        digits = ""
        while pos < n and body[pos] in _DIGITS:
            digits += body[pos]
            pos += 1
        explicit_h = int(digits) if digits else 1

    charge = 0
    if pos < n and body[pos] in "+-":
        sign = 1 if body[pos] == "+" else -1
        symbol = body[pos]
        pos += 1
        digits = ""
        while pos < n and body[pos] in _DIGITS:
            digits += body[pos]
            pos += 1
        if digits:
            charge = sign * int(digits)
        else:
            charge = sign
            while pos < n and body[pos] == symbol:  # ++ / -- streaks
                charge += sign
                pos += 1

    if pos != n:
        raise UnknownTokenError(f"unsupported bracket content: [{body}]")

    atom = Atom(element=element, aromatic=aromatic, formal_charge=charge, explicit_h=explicit_h)
    return atom, end + 1


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a :class:`MolecularGraph`.

    Raises :class:`EmptyInputError`, :class:`UnbalancedBranchError`,
    :class:`UnclosedRingError`, :class:`UnknownTokenError`, or a generic
    :class:`SmilesError` for other malformed constructs.
    """
    if not text:
        raise EmptyInputError("empty SMILES string")

    graph = MolecularGraph()
    anchor: int | None = None  # atom awaiting the next connection
    pending_bond: str | None = None  # explicit bond symbol not yet consumed
    branch_stack: list[int | None] = []
    open_rings: dict[int, tuple[int, str | None]] = {}  # digit -> (atom, bond symbol)
    seen_pairs: set[tuple[int, int]] = set()
    fresh_component = True  # True right after start or a '.'

    def add_atom(atom: Atom) -> None:
        nonlocal anchor, pending_bond, fresh_component
        atom.index = graph.n_atoms
        graph.atoms.append(atom)
        if anchor is not None:
            order = pending_bond
            if order is None:
                prev = graph.atoms[anchor]
                order = AROMATIC if (prev.aromatic and atom.aromatic) else SINGLE
            add_bond(anchor, atom.index, order)
        elif pending_bond is not None:
            raise SmilesError("bond symbol with no preceding atom")
        pending_bond = None
        anchor = atom.index
        fresh_component = False

    def add_bond(i: int, j: int, order: str) -> None:
        bond = Bond(i, j, order)
        if bond.endpoints in seen_pairs:
            raise SmilesError(f"duplicate bond between atoms {i} and {j}")
        seen_pairs.add(bond.endpoints)
        graph.bonds.append(bond)

    def close_ring(digit: int) -> None:
        nonlocal pending_bond
        if anchor is None:
            raise SmilesError(f"ring-closure digit {digit} with no preceding atom")
        if digit in open_rings:
            other, opening_bond = open_rings.pop(digit)
            if (
                pending_bond is not None
                and opening_bond is not None
                and pending_bond != opening_bond
            ):
                raise SmilesError(
                    f"conflicting bond symbols on ring closure {digit}"
                )
            order = pending_bond if pending_bond is not None else opening_bond
            if order is None:
                a, b = graph.atoms[other], graph.atoms[anchor]
                order = AROMATIC if (a.aromatic and b.aromatic) else SINGLE
            if other == anchor:
                raise SmilesError(f"ring closure {digit} bonds atom {anchor} to itself")
            add_bond(other, anchor, order)
        else:
            open_rings[digit] = (anchor, pending_bond)
        pending_bond = None

    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]

        if ch == "[":
            atom, pos = _parse_bracket(text, pos)
            add_atom(atom)
            continue

        two = text[pos : pos + 2]
        if two in ("Cl", "Br"):
            add_atom(Atom(element=two))
            pos += 2
            continue
        if ch in ORGANIC_SUBSET:
            add_atom(Atom(element=ch))
            pos += 1
            continue
        if ch in AROMATIC_ORGANIC:
            add_atom(Atom(element=ch.upper(), aromatic=True))
            pos += 1
            continue

        if ch in _BOND_SYMBOLS:
            if pending_bond is not None:
                raise SmilesError(f"two consecutive bond symbols at position {pos}")
            pending_bond = _BOND_SYMBOLS[ch]
            pos += 1
            continue
        if ch in "/\\":  # cis/trans marker: treated as a single bond
            if pending_bond is not None:
                raise SmilesError(f"two consecutive bond symbols at position {pos}")
            pending_bond = SINGLE
            pos += 1
            continue

        if ch == "(":
            if anchor is None:
                raise UnbalancedBranchError("branch opened before any atom")
            if pending_bond is not None:
                raise SmilesError("bond symbol before '('")
            branch_stack.append(anchor)
            pos += 1
            continue
        if ch == ")":
            if not branch_stack:
                raise UnbalancedBranchError(f"unmatched ')' at position {pos}")
            if pending_bond is not None:
                raise SmilesError("dangling bond symbol before ')'")
            anchor = branch_stack.pop()
            pos += 1
            continue

        if ch in _DIGITS:
            close_ring(int(ch))
            pos += 1
            continue
        if ch == "%":
            digits = text[pos + 1 : pos + 3]
            if len(digits) < 2 or not all(d in _DIGITS for d in digits):
                raise UnknownTokenError(f"'%' without two digits at position {pos}")
            close_ring(int(digits))
            pos += 3
            continue

        if ch == ".":
            if fresh_component or anchor is None:
                raise SmilesError(f"misplaced '.' at position {pos}")
            if pending_bond is not None:
                raise SmilesError("bond symbol before '.'")
            anchor = None
            fresh_component = True
            pos += 1
            continue

        raise UnknownTokenError(f"unsupported character {ch!r} at position {pos}")

    if branch_stack:
        raise UnbalancedBranchError(f"{len(branch_stack)} unclosed '(' at end of input")
    if open_rings:
        raise UnclosedRingError(f"unclosed ring digits {sorted(open_rings)} at end of input")
    if pending_bond is not None:
        raise SmilesError("dangling bond symbol at end of input")
    if fresh_component:
        raise SmilesError("input ends without an atom after '.'")
    return graph
