"""SMILES parsing, molecular graph model, canonical and randomized writers.

The grammar covers the organic subset (B, C, N, O, P, S, F, Cl, Br, I plus
aromatic b, c, n, o, p, s), bracket atoms with charge and H-count, ring
closures (digits and %nn), branches, and the bond symbols - = # :.
Stereochemistry and isotopes are rejected at parse time; inputs must be
preprocessed with :func:`strip_stereo_and_components` first.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SINGLE = 1
DOUBLE = 2
TRIPLE = 3
AROMATIC = 4

_BOND_CHAR = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC}
_BOND_SIGMA = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3}

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ELEMENTS = ("B", "C", "N", "O", "P", "S")

# Allowed valence states; for multivalent elements the smallest state that
# accommodates the bonded electrons is used when inferring implicit hydrogens.
VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_ELEMENT_ORDER = {el: i for i, el in enumerate(ORGANIC_SUBSET)}

DEFAULT_MAX_SMILES_LEN = 200


class SmilesError(ValueError):
    """Raised for malformed or unsupported SMILES input.

    ``position`` is the 0-based index into the input string where the
    problem was detected, or None when no single position applies.
    """

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int | None = None
    in_ring: bool = False


@dataclass
class Bond:
    a: int
    b: int
    order: int
    in_ring: bool = False

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass
class Molecule:
    """Attributed undirected graph of atoms and bonds.

    ``rings`` holds an SSSR-style cycle basis (atom index cycles), ``adj``
    maps atom index to (neighbor, bond index) pairs, and ``h_counts`` the
    total hydrogen count per atom under the valence model.
    """

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    rings: list[list[int]] = field(default_factory=list)
    adj: list[list[tuple[int, int]]] = field(default_factory=list)
    h_counts: list[int] = field(default_factory=list)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def degree(self, idx: int) -> int:
        return len(self.adj[idx])

    def bond_between(self, a: int, b: int) -> Bond | None:
        for nbr, bi in self.adj[a]:
            if nbr == b:
                return self.bonds[bi]
        return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?(?P<element>[A-Z][a-z]?|[bcnops])"
    r"(?P<stereo>@{1,2})?(?P<hcount>H\d*)?(?P<charge>\+{1,3}|-{1,3}|\+\d|-\d)?"
    r"(?P<cls>:\d+)?$"
)


def _parse_bracket(body: str, pos: int) -> Atom:
    m = _BRACKET_RE.match(body)
    if m is None:
        raise SmilesError(f"malformed bracket atom [{body}]", pos)
    if m.group("isotope"):
        raise SmilesError("isotope annotations are not supported; preprocess input", pos)
    if m.group("stereo"):
        raise SmilesError(
            "stereo annotations are not supported; run strip_stereo_and_components first", pos
        )
    if m.group("cls"):
        raise SmilesError("atom class annotations are not supported", pos)
    sym = m.group("element")
    aromatic = sym[0].islower()
    element = sym.capitalize() if aromatic else sym
    if element not in VALENCES:
        raise SmilesError(f"unsupported element: {sym}", pos)
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise SmilesError(f"element {element} cannot be aromatic", pos)
    h = m.group("hcount")
    if h is None:
        explicit_h = 0
    elif h == "H":
        explicit_h = 1
    else:
        explicit_h = int(h[1:])
    c = m.group("charge")
    if c is None:
        charge = 0
    elif c[0] == "+":
        charge = int(c[1:]) if c[1:].isdigit() else len(c)
    else:
        charge = -(int(c[1:]) if c[1:].isdigit() else len(c))
    return Atom(element, aromatic=aromatic, formal_charge=charge, explicit_h=explicit_h)


def parse_smiles(text: str, max_len: int = DEFAULT_MAX_SMILES_LEN) -> Molecule:
    """Parse a single-component SMILES string into a :class:`Molecule`.

    Ring perception, Kekule aromatization of qualifying rings, and implicit
    hydrogen assignment all run before the molecule is returned.

    Raises :class:`SmilesError` for syntax errors (position-annotated),
    unclosed ring bonds, unsupported elements, and valence violations.
    """
    if not text:
        raise SmilesError("empty SMILES string")
    if len(text) > max_len:
        raise SmilesError(f"SMILES length {len(text)} exceeds cap {max_len}")

    mol = Molecule()
    # Bond order None means "unspecified", resolved after ring perception.
    raw_bonds: list[tuple[int, int, int | None]] = []
    prev: int | None = None
    branch_stack: list[int | None] = []
    pending: int | None = None
    pending_pos = 0
    ring_open: dict[int, tuple[int, int | None, int]] = {}

    def add_atom(atom: Atom) -> None:
        nonlocal prev, pending
        idx = len(mol.atoms)
        mol.atoms.append(atom)
        if prev is not None:
            raw_bonds.append((prev, idx, pending))
        elif pending is not None:
            raise SmilesError("bond symbol with no preceding atom", pending_pos)
        prev = idx
        pending = None

    def add_ring_digit(num: int, pos: int) -> None:
        nonlocal pending
        if prev is None:
            raise SmilesError("ring closure before any atom", pos)
        if num in ring_open:
            other, sym, opos = ring_open.pop(num)
            if other == prev:
                raise SmilesError(f"ring bond {num} closes on its own atom", pos)
            if sym is not None and pending is not None and sym != pending:
                raise SmilesError(f"conflicting bond orders for ring closure {num}", pos)
            order = pending if pending is not None else sym
            if any((a, b) in ((other, prev), (prev, other)) for a, b, _ in raw_bonds):
                raise SmilesError(f"duplicate bond via ring closure {num}", pos)
            raw_bonds.append((other, prev, order))
        else:
            ring_open[num] = (prev, pending, pos)
        pending = None

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _BOND_CHAR:
            if pending is not None:
                raise SmilesError("two consecutive bond symbols", i)
            pending = _BOND_CHAR[ch]
            pending_pos = i
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch before any atom", i)
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError("unmatched ')'", i)
            if pending is not None:
                raise SmilesError("dangling bond symbol before ')'", i)
            prev = branch_stack.pop()
            i += 1
        elif ch.isdigit():
            add_ring_digit(int(ch), i)
            i += 1
        elif ch == "%":
            if i + 2 >= n or not text[i + 1 : i + 3].isdigit():
                raise SmilesError("'%' must be followed by two digits", i)
            add_ring_digit(int(text[i + 1 : i + 3]), i)
            i += 3
        elif ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise SmilesError("unterminated '[' bracket", i)
            add_atom(_parse_bracket(text[i + 1 : end], i))
            i = end + 1
        elif ch == ".":
            raise SmilesError(
                "multi-component SMILES; run strip_stereo_and_components first", i
            )
        elif ch in "/\\":
            raise SmilesError(
                "stereo bond symbols are not supported; run strip_stereo_and_components first", i
            )
        else:
            two = text[i : i + 2]
            if two in ("Cl", "Br"):
                add_atom(Atom(two))
                i += 2
            elif ch in "BCNOPSFI":
                add_atom(Atom(ch))
                i += 1
            elif ch in "bcnops":
                add_atom(Atom(ch.upper(), aromatic=True))
                i += 1
            else:
                raise SmilesError(f"unexpected character {ch!r}", i)

    if branch_stack:
        raise SmilesError("unclosed '(' branch")
    if pending is not None:
        raise SmilesError("dangling bond symbol at end of input", pending_pos)
    if ring_open:
        nums = ", ".join(str(k) for k in sorted(ring_open))
        raise SmilesError(f"unclosed ring bond {nums}", min(p for _, _, p in ring_open.values()))
    if not mol.atoms:
        raise SmilesError("no atoms in SMILES string")

    seen = set()
    for a, b, _ in raw_bonds:
        key = (min(a, b), max(a, b))
        if key in seen:
            raise SmilesError(f"more than one bond between atoms {a} and {b}")
        seen.add(key)

    _finalize(mol, raw_bonds)
    return mol


def _finalize(mol: Molecule, raw_bonds: list[tuple[int, int, int | None]]) -> None:
    """Resolve default bonds, perceive rings, aromatize, assign hydrogens."""
    for a, b, order in raw_bonds:
        mol.bonds.append(Bond(a, b, order if order is not None else 0))
    _build_adjacency(mol)

    ring_bond_ids = _non_bridge_bonds(mol)
    for bi in ring_bond_ids:
        mol.bonds[bi].in_ring = True
        mol.atoms[mol.bonds[bi].a].in_ring = True
        mol.atoms[mol.bonds[bi].b].in_ring = True

    mol.rings = perceive_rings(mol)

    # Default (unspecified) bonds inside an all-aromatic ring are aromatic.
    for ring in mol.rings:
        if all(mol.atoms[i].aromatic for i in ring):
            for bi in _ring_bond_indices(mol, ring):
                if mol.bonds[bi].order == 0:
                    mol.bonds[bi].order = AROMATIC
    for bond in mol.bonds:
        if bond.order == 0:
            bond.order = SINGLE
        elif bond.order == AROMATIC and not (
            mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic and bond.in_ring
        ):
            raise SmilesError("':' bond outside an aromatic ring")

    # Hydrogen counts are fixed by the written form, before Kekule rings are
    # aromatized (aromatization must not change the hydrogen count: the N of
    # Kekule pyrrole keeps its H and is later written as [nH]).
    mol.h_counts = [_hydrogen_count(mol, i) for i in range(mol.n_atoms)]

    _aromatize(mol)

    for idx, atom in enumerate(mol.atoms):
        if not atom.aromatic:
            continue
        if not atom.in_ring:
            raise SmilesError(f"aromatic atom {atom.element.lower()} (index {idx}) not in a ring")
        n_arom = sum(1 for _, bi in mol.adj[idx] if mol.bonds[bi].order == AROMATIC)
        if n_arom < 2:
            raise SmilesError(
                f"inconsistent aromatic annotation: atom {idx} is marked aromatic "
                "but lies in no aromatic ring"
            )


def _build_adjacency(mol: Molecule) -> None:
    mol.adj = [[] for _ in range(mol.n_atoms)]
    for bi, bond in enumerate(mol.bonds):
        mol.adj[bond.a].append((bond.b, bi))
        mol.adj[bond.b].append((bond.a, bi))


def _non_bridge_bonds(mol: Molecule) -> set[int]:
    """Bond indices lying on some cycle (iterative Tarjan bridge finding)."""
    n = mol.n_atoms
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            u, pbond, ei = stack.pop()
            if ei == 0:
                disc[u] = low[u] = timer
                timer += 1
            if ei < len(mol.adj[u]):
                stack.append((u, pbond, ei + 1))
                v, bi = mol.adj[u][ei]
                if bi == pbond:
                    continue
                if disc[v] == -1:
                    stack.append((v, bi, 0))
                else:
                    low[u] = min(low[u], disc[v])
            else:
                if pbond != -1:
                    parent = mol.bonds[pbond].other(u)
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add(pbond)
    return {bi for bi in range(mol.n_bonds)} - bridges


def _ring_bond_indices(mol: Molecule, ring: Sequence[int]) -> list[int]:
    out = []
    k = len(ring)
    for i in range(k):
        a, b = ring[i], ring[(i + 1) % k]
        for nbr, bi in mol.adj[a]:
            if nbr == b:
                out.append(bi)
                break
    return out


def perceive_rings(mol: Molecule) -> list[list[int]]:
    """Return an SSSR-style cycle basis as atom-index cycles.

    The basis has exactly bonds - atoms + components members, found by
    collecting the shortest cycle through every non-bridge bond and keeping
    a smallest independent subset (GF(2) elimination over bond incidence).
    """
    n_components = _count_components(mol)
    dim = mol.n_bonds - mol.n_atoms + n_components
    if dim <= 0:
        return []

    candidates: list[tuple[int, int, list[int]]] = []
    for bi, bond in enumerate(mol.bonds):
        path = _shortest_path_avoiding(mol, bond.a, bond.b, bi)
        if path is None:
            continue
        mask = 1 << bi
        for i in range(len(path) - 1):
            b2 = _bond_index(mol, path[i], path[i + 1])
            mask |= 1 << b2
        candidates.append((len(path), mask, path))
    candidates.sort(key=lambda c: (c[0], c[1]))

    basis: list[int] = []
    rings: list[list[int]] = []
    for _, mask, path in candidates:
        reduced = mask
        for b in basis:
            reduced = min(reduced, reduced ^ b)
        if reduced:
            basis.append(reduced)
            basis.sort(reverse=True)
            rings.append(path)
            if len(rings) == dim:
                break
    return rings


def _count_components(mol: Molecule) -> int:
    n = mol.n_atoms
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v, _ in mol.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return count


def _bond_index(mol: Molecule, a: int, b: int) -> int:
    for nbr, bi in mol.adj[a]:
        if nbr == b:
            return bi
    raise KeyError((a, b))


def _shortest_path_avoiding(mol: Molecule, src: int, dst: int, skip_bond: int) -> list[int] | None:
    """BFS path src..dst avoiding one bond; with that bond it closes a cycle."""
    from collections import deque

    parent = {src: -1}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            path = [u]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path
        for v, bi in mol.adj[u]:
            if bi == skip_bond or v in parent:
                continue
            parent[v] = u
            queue.append(v)
    return None


# ---------------------------------------------------------------------------
# Aromatization (minimal model: trusted lowercase plus common Kekule rings)
# ---------------------------------------------------------------------------


def _aromatize(mol: Molecule) -> None:
    """Convert qualifying Kekule rings to aromatic form, iterating fused systems.

    6-rings of C/N with an alternating double-bond pattern (credit given to
    atoms already aromatic from a fused neighbor) and 5-rings with exactly one
    lone-pair donor (O, S, or N carrying an H or a third substituent) qualify.
    Full Hueckel perception is out of scope.
    """
    changed = True
    while changed:
        changed = False
        for ring in mol.rings:
            if all(mol.atoms[i].aromatic for i in ring):
                continue
            if len(ring) == 6 and _qualifies_six(mol, ring):
                _mark_aromatic(mol, ring)
                changed = True
            elif len(ring) == 5 and _qualifies_five(mol, ring):
                _mark_aromatic(mol, ring)
                changed = True


def _in_ring_double(mol: Molecule, idx: int, ring_set: set[int]) -> bool:
    for nbr, bi in mol.adj[idx]:
        if mol.bonds[bi].order == DOUBLE and nbr in ring_set:
            return True
    return False


def _exocyclic_multiple(mol: Molecule, idx: int, ring_set: set[int]) -> bool:
    for nbr, bi in mol.adj[idx]:
        if mol.bonds[bi].order in (DOUBLE, TRIPLE) and nbr not in ring_set:
            return True
    return False


def _qualifies_six(mol: Molecule, ring: Sequence[int]) -> bool:
    ring_set = set(ring)
    for idx in ring:
        atom = mol.atoms[idx]
        if atom.element not in ("C", "N") or atom.formal_charge != 0:
            return False
        if atom.aromatic:
            continue
        if _exocyclic_multiple(mol, idx, ring_set):
            return False
        if not _in_ring_double(mol, idx, ring_set):
            return False
    return True


def _is_lone_pair_donor(mol: Molecule, idx: int, ring_set: set[int]) -> bool:
    atom = mol.atoms[idx]
    if _in_ring_double(mol, idx, ring_set) or _exocyclic_multiple(mol, idx, ring_set):
        return False
    if atom.element in ("O", "S"):
        return True
    if atom.element == "N":
        return mol.h_counts[idx] >= 1 or len(mol.adj[idx]) == 3
    return False


def _qualifies_five(mol: Molecule, ring: Sequence[int]) -> bool:
    ring_set = set(ring)
    donors = [i for i in ring if _is_lone_pair_donor(mol, i, ring_set)]
    if len(donors) != 1:
        return False
    for idx in ring:
        atom = mol.atoms[idx]
        if idx == donors[0]:
            continue
        if atom.element not in ("C", "N") or atom.formal_charge != 0:
            return False
        if atom.aromatic:
            continue
        if _exocyclic_multiple(mol, idx, ring_set):
            return False
        if not _in_ring_double(mol, idx, ring_set):
            return False
    return True


def _mark_aromatic(mol: Molecule, ring: Sequence[int]) -> None:
    for idx in ring:
        mol.atoms[idx].aromatic = True
    for bi in _ring_bond_indices(mol, ring):
        mol.bonds[bi].order = AROMATIC


# ---------------------------------------------------------------------------
# Valence model / hydrogen counts
# ---------------------------------------------------------------------------


def _sigma_and_aromatic(mol: Molecule, idx: int) -> tuple[int, int]:
    sigma = 0
    n_arom = 0
    for _, bi in mol.adj[idx]:
        order = mol.bonds[bi].order
        if order == AROMATIC:
            n_arom += 1
        else:
            sigma += _BOND_SIGMA[order]
    return sigma, n_arom


def _bare_hydrogens(mol: Molecule, idx: int) -> int | None:
    """Implicit H count a bare (unbracketed) atom would get, or None if the
    bonding exceeds every allowed valence state."""
    atom = mol.atoms[idx]
    sigma, n_arom = _sigma_and_aromatic(mol, idx)
    if atom.aromatic:
        used = sigma + n_arom + 1  # ring pi system claims one valence unit
        h = VALENCES[atom.element][0] - used
        return max(0, h)
    for val in VALENCES[atom.element]:
        if sigma <= val:
            return val - sigma
    return None


def _hydrogen_count(mol: Molecule, idx: int) -> int:
    atom = mol.atoms[idx]
    sigma, n_arom = _sigma_and_aromatic(mol, idx)
    if atom.explicit_h is not None:
        bound = max(VALENCES[atom.element]) + abs(atom.formal_charge) + (1 if n_arom else 0)
        if sigma + n_arom + atom.explicit_h > bound:
            raise SmilesError(
                f"valence violation on [{atom.element}] atom {idx}: "
                f"{sigma + n_arom + atom.explicit_h} bonds exceed {bound}"
            )
        return atom.explicit_h
    h = _bare_hydrogens(mol, idx)
    if h is None:
        sigma, _ = _sigma_and_aromatic(mol, idx)
        raise SmilesError(
            f"valence violation on {atom.element} atom {idx}: bond order sum {sigma} "
            f"exceeds allowed valences {VALENCES[atom.element]}"
        )
    return h


def from_graph(
    atoms: list[Atom], bonds: list[Bond], h_counts: list[int] | None = None
) -> Molecule:
    """Assemble a Molecule from prebuilt atoms and bonds.

    Ring perception and ring flags are recomputed. When ``h_counts`` is not
    given, hydrogens are assigned by the valence model.
    """
    mol = Molecule(atoms=atoms, bonds=bonds)
    _build_adjacency(mol)
    for atom in mol.atoms:
        atom.in_ring = False
    for bond in mol.bonds:
        bond.in_ring = False
    for bi in _non_bridge_bonds(mol):
        mol.bonds[bi].in_ring = True
        mol.atoms[mol.bonds[bi].a].in_ring = True
        mol.atoms[mol.bonds[bi].b].in_ring = True
    mol.rings = perceive_rings(mol)
    if h_counts is not None:
        mol.h_counts = list(h_counts)
    else:
        mol.h_counts = [_hydrogen_count(mol, i) for i in range(mol.n_atoms)]
    return mol


# ---------------------------------------------------------------------------
# Canonical ranking (Morgan-style refinement with CANGEN tie breaking)
# ---------------------------------------------------------------------------


def canonical_ranks(mol: Molecule) -> list[int]:
    """Assign a deterministic rank (0..n-1 bijection) to every atom.

    Initial invariants are (element, degree, charge, H count, ring flag,
    aromatic flag); iterative neighborhood refinement follows, and remaining
    ties are broken by doubling all ranks and perturbing one atom of the
    lowest tied class until the order is total. The induced canonical SMILES
    is identical for any input atom ordering of the same molecule.
    """
    n = mol.n_atoms
    if n == 1:
        return [0]
    invariants = [
        (
            _ELEMENT_ORDER[a.element],
            mol.degree(i),
            a.formal_charge,
            mol.h_counts[i],
            a.in_ring,
            a.aromatic,
        )
        for i, a in enumerate(mol.atoms)
    ]
    ranks = _ranks_from_keys(invariants)
    ranks = _refine(mol, ranks)

    while len(set(ranks)) < n:
        ranks = [r * 2 for r in ranks]
        lowest = min(r for r in ranks if ranks.count(r) > 1)
        tied = [i for i, r in enumerate(ranks) if r == lowest]
        ranks[tied[0]] -= 1
        ranks = _refine(mol, ranks)
    return _ranks_from_keys(ranks)


def _ranks_from_keys(keys: list) -> list[int]:
    order = sorted(set(keys))
    index = {k: i for i, k in enumerate(order)}
    return [index[k] for k in keys]


def _refine(mol: Molecule, ranks: list[int]) -> list[int]:
    n_classes = len(set(ranks))
    while True:
        keys = []
        for i in range(mol.n_atoms):
            nbrs = sorted(
                (mol.bonds[bi].order, ranks[v]) for v, bi in mol.adj[i]
            )
            keys.append((ranks[i], tuple(nbrs)))
        new_ranks = _ranks_from_keys(keys)
        new_classes = len(set(new_ranks))
        if new_classes == n_classes:
            return new_ranks
        ranks = new_ranks
        n_classes = new_classes


# ---------------------------------------------------------------------------
# SMILES writing
# ---------------------------------------------------------------------------


def write_smiles(mol: Molecule, order: Sequence[int] | None = None) -> str:
    """Write a SMILES string visiting atoms by preference ``order``.

    ``order`` is a permutation of atom indices: traversal starts at
    ``order[0]`` and neighbor choices follow the permutation's priority.
    The emitted string re-parses to an isomorphic molecule. Raises
    :class:`SmilesError` if the molecule is not connected.
    """
    n = mol.n_atoms
    if n == 0:
        raise SmilesError("cannot write an empty molecule")
    if order is None:
        order = list(range(n))
    priority = [0] * n
    for pos, idx in enumerate(order):
        priority[idx] = pos

    visited = [False] * n
    tree_children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    closure_partners: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    used_bonds = [False] * mol.n_bonds

    start = order[0]
    visited[start] = True
    visit_seq = {start: 0}
    sorted_nbrs = [sorted(mol.adj[u], key=lambda t: priority[t[0]]) for u in range(n)]
    stack = [start]
    cursor = [0] * n
    while stack:
        u = stack[-1]
        advanced = False
        while cursor[u] < len(sorted_nbrs[u]):
            v, bi = sorted_nbrs[u][cursor[u]]
            cursor[u] += 1
            if used_bonds[bi]:
                continue
            used_bonds[bi] = True
            if visited[v]:
                closure_partners[u].append((v, bi))
                closure_partners[v].append((u, bi))
            else:
                visited[v] = True
                visit_seq[v] = len(visit_seq)
                tree_children[u].append((v, bi))
                stack.append(v)
                advanced = True
                break
        if not advanced:
            stack.pop()
    if not all(visited):
        raise SmilesError("disconnected traversal: molecule has multiple components")

    digit_state: dict[tuple[int, int], int] = {}
    free_digits = list(range(1, 100))
    out: list[str] = []

    def bond_token(bond: Bond) -> str:
        if bond.order == DOUBLE:
            return "="
        if bond.order == TRIPLE:
            return "#"
        if bond.order == SINGLE and mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic:
            return "-"  # single bond between aromatic atoms must be explicit
        return ""

    def emit(u: int, parent_bond: int | None) -> None:
        node_stack: list[tuple[str, int, int | None]] = [("atom", u, parent_bond)]
        while node_stack:
            kind, x, pb = node_stack.pop()
            if kind == "text":
                out.append("(" if x == 0 else ")")
                continue
            if pb is not None:
                out.append(bond_token(mol.bonds[pb]))
            out.append(_atom_token(mol, x))
            closures = sorted(closure_partners[x], key=lambda t: visit_seq[t[0]])
            for v, bi in closures:
                key = (min(x, v), max(x, v))
                if key not in digit_state:
                    digit = free_digits.pop(0)
                    digit_state[key] = digit
                    out.append(bond_token(mol.bonds[bi]))
                else:
                    digit = digit_state.pop(key)
                    free_digits.append(digit)
                    free_digits.sort()
                out.append(str(digit) if digit < 10 else f"%{digit:02d}")
            kids = tree_children[x]
            for j in range(len(kids) - 1, -1, -1):
                v, bi = kids[j]
                if j < len(kids) - 1:
                    node_stack.append(("text", 1, None))
                    node_stack.append(("atom", v, bi))
                    node_stack.append(("text", 0, None))
                else:
                    node_stack.append(("atom", v, bi))

    emit(start, None)
    return "".join(out)


def _atom_token(mol: Molecule, idx: int) -> str:
    atom = mol.atoms[idx]
    h = mol.h_counts[idx]
    sym = atom.element.lower() if atom.aromatic else atom.element
    if atom.formal_charge == 0 and _bare_hydrogens(mol, idx) == h:
        return sym
    parts = [sym]
    if h == 1:
        parts.append("H")
    elif h > 1:
        parts.append(f"H{h}")
    c = atom.formal_charge
    if c == 1:
        parts.append("+")
    elif c == -1:
        parts.append("-")
    elif c > 1:
        parts.append(f"+{c}")
    elif c < -1:
        parts.append(f"-{-c}")
    return "[" + "".join(parts) + "]"


# ---------------------------------------------------------------------------
# High-level operations
# ---------------------------------------------------------------------------


def canonical_smiles(mol: Molecule) -> str:
    """Canonical SMILES of a parsed molecule."""
    ranks = canonical_ranks(mol)
    order = sorted(range(mol.n_atoms), key=lambda i: ranks[i])
    return write_smiles(mol, order)


def canonicalize(text: str, max_len: int = DEFAULT_MAX_SMILES_LEN) -> str:
    """Parse ``text`` and return its canonical SMILES.

    Idempotent: canonicalize(canonicalize(s)) == canonicalize(s). Two SMILES
    of the same molecule map to the same output. Parse errors propagate.
    """
    return canonical_smiles(parse_smiles(text, max_len=max_len))


def randomize_smiles(mol: Molecule, rng) -> str:
    """Write a valid randomized SMILES for ``mol``.

    Start atom and branch order are drawn from ``rng`` (a ``random.Random``);
    the result canonicalizes back to the molecule's canonical form.
    """
    order = list(range(mol.n_atoms))
    rng.shuffle(order)
    return write_smiles(mol, order)


_ATOM_TOKEN_RE = re.compile(r"\[[^\]]*\]|Cl|Br|[BCNOPSFIbcnops]")


def _heavy_atom_count(component: str) -> int:
    return sum(1 for m in _ATOM_TOKEN_RE.finditer(component) if m.group(0) != "[H]")


def strip_stereo_and_components(text: str, max_len: int = DEFAULT_MAX_SMILES_LEN) -> str:
    """Remove stereo annotations and keep the largest '.'-separated component.

    All "@", "/", "\\" marks are dropped; of the remaining components the one
    with the most heavy atoms is kept (ties broken by lexicographically
    smallest canonical form). The survivor is normalized through a
    parse/write round trip so redundant brackets (e.g. ``[CH]`` left by
    stereo removal) collapse. Idempotent.
    """
    stripped = []
    for ch in text:
        if ch in "@/\\":
            continue
        stripped.append(ch)
    flat = "".join(stripped)
    components = [c for c in flat.split(".") if c]
    if not components:
        raise SmilesError("no non-empty components after stripping")

    best = max(_heavy_atom_count(c) for c in components)
    top = [c for c in components if _heavy_atom_count(c) == best]
    if len(top) == 1:
        chosen = top[0]
    else:
        canon = []
        for c in top:
            try:
                canon.append((canonicalize(c, max_len=max_len), c))
            except SmilesError:
                continue
        if not canon:
            raise SmilesError("no parseable component among largest components")
        canon.sort()
        chosen = canon[0][1]
    return write_smiles(parse_smiles(chosen, max_len=max_len))
