"""Bemis-Murcko scaffolds, generic scaffolds, and the scaffold-novelty filter."""

from __future__ import annotations

from dataclasses import dataclass

from .molgraph import (
    DOUBLE,
    SINGLE,
    Atom,
    Bond,
    Molecule,
    canonical_smiles,
    from_graph,
)


@dataclass(frozen=True)
class Scaffold:
    """Ring systems plus their linkers (and retained exocyclic double-bond
    partners), with the canonical SMILES of that substructure."""

    molecule: Molecule
    canonical: str


def _prune_to_framework(mol: Molecule) -> set[int]:
    """Atom indices of rings + ring-to-ring linkers (iterative pruning)."""
    alive = set(range(mol.n_atoms))
    degree = {i: mol.degree(i) for i in alive}
    changed = True
    while changed:
        changed = False
        for i in list(alive):
            if degree[i] <= 1 and not mol.atoms[i].in_ring:
                alive.discard(i)
                changed = True
                for v, _ in mol.adj[i]:
                    if v in alive:
                        degree[v] -= 1
    return alive


def _extract(mol: Molecule, keep: set[int]) -> Molecule:
    """Induced submolecule; pruned single bonds are replaced by hydrogens."""
    index = {old: new for new, old in enumerate(sorted(keep))}
    atoms = []
    h_counts = []
    for old in sorted(keep):
        src = mol.atoms[old]
        atoms.append(
            Atom(src.element, aromatic=src.aromatic, formal_charge=src.formal_charge)
        )
        pruned = sum(1 for v, _ in mol.adj[old] if v not in keep)
        h_counts.append(mol.h_counts[old] + pruned)
    bonds = []
    for bond in mol.bonds:
        if bond.a in keep and bond.b in keep:
            bonds.append(Bond(index[bond.a], index[bond.b], bond.order))
    return from_graph(atoms, bonds, h_counts)


def bm_scaffold(mol: Molecule) -> Scaffold | None:
    """Extract the Bemis-Murcko scaffold, or None for acyclic molecules.

    Degree-1 atoms outside rings are pruned to fixpoint; atoms double-bonded
    to a surviving framework atom are retained (standard convention for
    exocyclic =O and =N).
    """
    if not mol.rings:
        return None
    keep = _prune_to_framework(mol)
    for bond in mol.bonds:
        if bond.order == DOUBLE:
            if bond.a in keep and bond.b not in keep:
                keep.add(bond.b)
            elif bond.b in keep and bond.a not in keep:
                keep.add(bond.a)
    sub = _extract(mol, keep)
    return Scaffold(sub, canonical_smiles(sub))


def generic_scaffold(scaffold: Scaffold) -> Scaffold:
    """Map every scaffold atom to carbon and every bond to a single bond.

    Retained exocyclic atoms become prunable terminals and are dropped, so
    only the carbon skeleton of rings and linkers remains. Idempotent.
    """
    src = scaffold.molecule
    atoms = [Atom("C") for _ in range(src.n_atoms)]
    bonds = [Bond(b.a, b.b, SINGLE) for b in src.bonds]
    generic = from_graph(atoms, bonds)
    keep = _prune_to_framework(generic)
    sub = _extract(generic, keep)
    return Scaffold(sub, canonical_smiles(sub))


def is_novel_scaffold(mol: Molecule, reference: set[str]) -> bool:
    """True iff the molecule's generic scaffold exists and its canonical
    SMILES is absent from ``reference``. Acyclic molecules are never novel
    (they carry no scaffold)."""
    scaffold = bm_scaffold(mol)
    if scaffold is None:
        return False
    return generic_scaffold(scaffold).canonical not in reference
