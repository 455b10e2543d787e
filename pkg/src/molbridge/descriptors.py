"""Physicochemical descriptors, drug-likeness (QED), and synthetic accessibility.

Contribution tables (logP, polar surface, QED desirability parameters) and
the structural-alert pattern list ship as versioned data files and are loaded
into a :class:`DescriptorTables` before use.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .fingerprint import morgan_identifiers
from .molgraph import AROMATIC, DOUBLE, SINGLE, TRIPLE, Molecule, parse_smiles

DATA_DIR = Path(__file__).parent / "data"

ATOMIC_MASS = {
    "B": 10.811, "C": 12.011, "N": 14.007, "O": 15.999, "P": 30.974,
    "S": 32.065, "F": 18.998, "Cl": 35.453, "Br": 79.904, "I": 126.904,
}
H_MASS = 1.008

FRAG_MAGIC = b"SAS1"
MISSING_FRAGMENT_SCORE = -4.0


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class DescriptorVector:
    mw: float
    logp: float
    hba: int
    hbd: int
    tpsa: float
    rotb: int
    arom_rings: int
    alerts: int
    logp_fallbacks: int = 0  # atoms that used the default 0.0 contribution


@dataclass(frozen=True)
class AdsParams:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    dmax: float
    weight: float


@dataclass(frozen=True)
class QedParams:
    properties: dict[str, AdsParams]


@dataclass(frozen=True)
class DescriptorTables:
    logp: dict[str, float]
    tpsa: dict[tuple, float]
    alerts: list["_Pattern"]
    qed: QedParams


# ---------------------------------------------------------------------------
# Table loading
# ---------------------------------------------------------------------------


def load_qed_params(path: str | Path = DATA_DIR / "qed_params.tsv") -> QedParams:
    props: dict[str, AdsParams] = {}
    for parts in _tsv_rows(path):
        name, *vals = parts
        a, b, c, d, e, f, dmax, weight = (float(v) for v in vals)
        if dmax <= 0:
            raise DescriptorError(f"dmax must be positive for {name}")
        props[name] = AdsParams(a, b, c, d, e, f, dmax, weight)
    return QedParams(props)


def _tsv_rows(path: str | Path):
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            yield line.split("\t")


def load_tables(data_dir: str | Path = DATA_DIR) -> DescriptorTables:
    data_dir = Path(data_dir)
    logp = {t: float(v) for t, v in _tsv_rows(data_dir / "logp_contrib.tsv")}
    tpsa = {}
    for el, ar, ch, h, s, d, t, arom, val in _tsv_rows(data_dir / "tpsa_contrib.tsv"):
        key = (el, int(ar), int(ch), int(h), int(s), int(d), int(t), int(arom))
        tpsa[key] = float(val)
    alerts = []
    with open(data_dir / "alert_patterns.txt") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            alerts.append(_Pattern(line))
    return DescriptorTables(logp, tpsa, alerts, load_qed_params(data_dir / "qed_params.tsv"))


# ---------------------------------------------------------------------------
# Substructure patterns (SMILES-subset subgraph matching)
# ---------------------------------------------------------------------------


class _Pattern:
    """A substructure pattern parsed from the package's SMILES subset.

    A pattern atom matches a molecule atom when element, aromatic flag, and
    charge agree, the molecule atom has at least the pattern degree, and a
    bracket H-count (when written) matches exactly. Bond orders match
    exactly.
    """

    def __init__(self, smiles: str):
        self.smiles = smiles
        self.mol = parse_smiles(smiles)
        # DFS order over pattern atoms so each new atom attaches to a mapped one
        self.order: list[int] = []
        self.anchor: list[tuple[int, int] | None] = []  # (mapped atom pos, order)
        seen = set()
        stack = [0]
        parent: dict[int, tuple[int, int]] = {}
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            self.anchor.append(parent.get(u))
            self.order.append(u)
            for v, bi in self.mol.adj[u]:
                if v not in seen:
                    parent[v] = (u, self.mol.bonds[bi].order)
                    stack.append(v)

    def _atom_ok(self, mol: Molecule, mi: int, pi: int) -> bool:
        pa = self.mol.atoms[pi]
        ma = mol.atoms[mi]
        if pa.element != ma.element or pa.aromatic != ma.aromatic:
            return False
        if pa.formal_charge != ma.formal_charge:
            return False
        if pa.explicit_h is not None and mol.h_counts[mi] != pa.explicit_h:
            return False
        return mol.degree(mi) >= self.mol.degree(pi)

    def matches(self, mol: Molecule) -> bool:
        n = len(self.order)
        mapping: dict[int, int] = {}
        used: set[int] = set()

        def place(k: int) -> bool:
            if k == n:
                return True
            p = self.order[k]
            anchor = self.anchor[k]
            if anchor is None:
                candidates = range(mol.n_atoms)
            else:
                pa, _ = anchor
                candidates = [v for v, _ in mol.adj[mapping[pa]]]
            for mi in candidates:
                if mi in used or not self._atom_ok(mol, mi, p):
                    continue
                ok = True
                for pv, pbi in self.mol.adj[p]:
                    if pv in mapping:
                        mb = mol.bond_between(mi, mapping[pv])
                        if mb is None or mb.order != self.mol.bonds[pbi].order:
                            ok = False
                            break
                if not ok:
                    continue
                mapping[p] = mi
                used.add(mi)
                if place(k + 1):
                    return True
                del mapping[p]
                used.discard(mi)
            return False

        return place(0)


# ---------------------------------------------------------------------------
# Descriptor computation
# ---------------------------------------------------------------------------


def atom_logp_type(mol: Molecule, idx: int) -> str:
    atom = mol.atoms[idx]
    el = atom.element
    if el in ("F", "Cl", "Br", "I"):
        return el
    if el == "P":
        return "P"
    orders = [mol.bonds[bi].order for _, bi in mol.adj[idx]]
    nbr_elements = [mol.atoms[v].element for v, _ in mol.adj[idx]]
    if el == "S":
        if atom.aromatic:
            return "s.ar"
        if any(
            mol.bonds[bi].order == DOUBLE and mol.atoms[v].element == "O"
            for v, bi in mol.adj[idx]
        ):
            return "S.oxid"
        return "S.thio"
    if el == "O":
        if atom.aromatic:
            return "o.ar"
        if atom.formal_charge < 0:
            return "O.neg"
        if DOUBLE in orders:
            return "O.carbonyl"
        if mol.h_counts[idx] >= 1:
            return "O.hydroxyl"
        return "O.ether"
    if el == "N":
        if atom.aromatic:
            return "n.ar"
        if atom.formal_charge > 0:
            return "N.pos"
        if _is_amide_nitrogen(mol, idx):
            return "N.amide"
        if DOUBLE in orders or TRIPLE in orders:
            return "N.sp2"
        h = mol.h_counts[idx]
        return "N.prim" if h >= 2 else ("N.sec" if h == 1 else "N.tert")
    if el == "C":
        if atom.aromatic:
            subs = sorted(
                (
                    (mol.atoms[v], mol.bonds[bi].order)
                    for v, bi in mol.adj[idx]
                    if mol.bonds[bi].order != AROMATIC
                ),
                key=lambda t: (t[1], t[0].element, t[0].aromatic),
            )
            if len([o for o in orders if o == AROMATIC]) >= 3:
                return "c.fused"
            if not subs:
                return "c.h"
            nbr, order = subs[0]
            if order == DOUBLE:
                return "c.sub_dbl"  # exocyclic double bond (aromatic carbonyl)
            if nbr.element == "C":
                return "c.sub_ar" if nbr.aromatic else "c.sub_c"
            if nbr.element == "N":
                return "c.sub_n"
            if nbr.element == "O":
                return "c.sub_o"
            if nbr.element == "S":
                return "c.sub_s"
            return "c.sub_other"
        if TRIPLE in orders:
            return "C.sp"
        if DOUBLE in orders:
            for v, bi in mol.adj[idx]:
                if mol.bonds[bi].order == DOUBLE and mol.atoms[v].element != "C":
                    return "C.sp2_het"
            return "C.sp2"
        if any(e not in ("C",) for e in nbr_elements):
            return "C.sp3_het"
        if len(nbr_elements) >= 3:
            return "C.sp3_branch"
        return "C.sp3"
    return f"{el}.other"


def _is_amide_nitrogen(mol: Molecule, idx: int) -> bool:
    for v, bi in mol.adj[idx]:
        if mol.bonds[bi].order != SINGLE or mol.atoms[v].element != "C":
            continue
        for w, bj in mol.adj[v]:
            if mol.bonds[bj].order == DOUBLE and mol.atoms[w].element == "O":
                return True
    return False


def _hydrogen_logp_type(mol: Molecule, idx: int) -> str:
    el = mol.atoms[idx].element
    if el == "C":
        return "H.c"
    if el == "N":
        return "H.n"
    if el == "S":
        return "H.s"
    if el == "O":
        for v, bi in mol.adj[idx]:
            if mol.bonds[bi].order == SINGLE and mol.atoms[v].element == "C":
                if any(
                    mol.bonds[bj].order == DOUBLE and mol.atoms[w].element in ("O", "N", "S")
                    for w, bj in mol.adj[v]
                ):
                    return "H.o_acid"
        return "H.o"
    return "H.c"


def _tpsa_key(mol: Molecule, idx: int) -> tuple:
    atom = mol.atoms[idx]
    counts = {SINGLE: 0, DOUBLE: 0, TRIPLE: 0, AROMATIC: 0}
    for _, bi in mol.adj[idx]:
        counts[mol.bonds[bi].order] += 1
    return (
        atom.element,
        int(atom.aromatic),
        atom.formal_charge,
        mol.h_counts[idx],
        counts[SINGLE],
        counts[DOUBLE],
        counts[TRIPLE],
        counts[AROMATIC],
    )


def _count_hbd(mol: Molecule) -> int:
    return sum(
        1
        for i, a in enumerate(mol.atoms)
        if a.element in ("N", "O") and mol.h_counts[i] >= 1
    )


def _count_hba(mol: Molecule) -> int:
    """N and O acceptors: all oxygens; nitrogens except pyrrole-type aromatic
    (three ring-plane connections), amide, and positively charged ones."""
    n = 0
    for i, a in enumerate(mol.atoms):
        if a.element == "O":
            n += 1
        elif a.element == "N":
            if a.formal_charge > 0:
                continue
            if a.aromatic and mol.degree(i) + mol.h_counts[i] >= 3:
                continue
            if _is_amide_nitrogen(mol, i):
                continue
            n += 1
    return n


def _count_rotatable(mol: Molecule) -> int:
    n = 0
    for bond in mol.bonds:
        if bond.order != SINGLE or bond.in_ring:
            continue
        if mol.degree(bond.a) < 2 or mol.degree(bond.b) < 2:
            continue
        if _amide_axis(mol, bond.a, bond.b) or _amide_axis(mol, bond.b, bond.a):
            continue
        n += 1
    return n


def _amide_axis(mol: Molecule, c: int, nitro: int) -> bool:
    if mol.atoms[nitro].element != "N" or mol.atoms[c].element != "C":
        return False
    return any(
        mol.bonds[bi].order == DOUBLE and mol.atoms[w].element == "O"
        for w, bi in mol.adj[c]
    )


def _count_aromatic_rings(mol: Molecule) -> int:
    return sum(1 for ring in mol.rings if all(mol.atoms[i].aromatic for i in ring))


def descriptor_vector(mol: Molecule, tables: DescriptorTables) -> DescriptorVector:
    """Compute the eight QED input properties for a molecule.

    Atoms missing from the logP table contribute the documented default of
    0.0 and are counted in ``logp_fallbacks``.
    """
    mw = math.fsum(
        sorted(ATOMIC_MASS[a.element] for a in mol.atoms)
    ) + H_MASS * sum(mol.h_counts)

    # exactly-rounded sums over sorted terms keep the result bit-identical
    # across input atom orderings
    logp_terms = []
    fallbacks = 0
    for i in range(mol.n_atoms):
        key = atom_logp_type(mol, i)
        contrib = tables.logp.get(key)
        if contrib is None:
            fallbacks += 1
            contrib = 0.0
        logp_terms.append(contrib)
        h = mol.h_counts[i]
        if h:
            logp_terms.append(h * tables.logp.get(_hydrogen_logp_type(mol, i), 0.0))
    logp = math.fsum(sorted(logp_terms))

    tpsa = math.fsum(
        sorted(tables.tpsa.get(_tpsa_key(mol, i), 0.0) for i in range(mol.n_atoms))
    )
    alerts = sum(1 for pattern in tables.alerts if pattern.matches(mol))

    return DescriptorVector(
        mw=mw,
        logp=logp,
        hba=_count_hba(mol),
        hbd=_count_hbd(mol),
        tpsa=tpsa,
        rotb=_count_rotatable(mol),
        arom_rings=_count_aromatic_rings(mol),
        alerts=alerts,
        logp_fallbacks=fallbacks,
    )


# ---------------------------------------------------------------------------
# QED
# ---------------------------------------------------------------------------


def ads(x: float, p: AdsParams) -> float:
    """Asymmetric double sigmoid desirability, normalized by dmax."""
    num = p.b / (1.0 + math.exp(-(x - p.c + p.d / 2.0) / p.e))
    num *= 1.0 - 1.0 / (1.0 + math.exp(-(x - p.c - p.d / 2.0) / p.f))
    return (p.a + num) / p.dmax


def qed(v: DescriptorVector, params: QedParams) -> float:
    """Weighted geometric mean of per-property desirabilities, in (0, 1]."""
    values = {
        "mw": v.mw, "logp": v.logp, "hba": v.hba, "hbd": v.hbd,
        "tpsa": v.tpsa, "rotb": v.rotb, "arom_rings": v.arom_rings,
        "alerts": v.alerts,
    }
    total_w = 0.0
    acc = 0.0
    for name, p in params.properties.items():
        d = min(ads(values[name], p), 1.0)
        acc += p.weight * math.log(d)
        total_w += p.weight
    return math.exp(acc / total_w)


def pc_filter(qed_value: float, sas_value: float, qed_min: float = 0.4, sas_max: float = 4.0) -> bool:
    """Physicochemical pass criterion: QED >= qed_min and SAS <= sas_max."""
    return qed_value >= qed_min and sas_value <= sas_max


# ---------------------------------------------------------------------------
# Synthetic accessibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FragScores:
    """Log-frequency contribution per circular environment identifier."""

    scores: dict[int, float]
    n_molecules: int


def build_fragment_scores(corpus: Iterable[Molecule]) -> FragScores:
    """Derive fragment contributions from environment frequencies in a corpus.

    Contributions follow log10 of frequency relative to the corpus's
    99th-percentile environment count, clipped to [-4.0, 2.5]; fragments at
    or above the anchor score 2.5 and fragments absent from the corpus score
    -4.0, centering common drug-like substructures in the conventional
    fragment-score range.
    """
    counts: dict[int, int] = {}
    n_molecules = 0
    for mol in corpus:
        n_molecules += 1
        for ident, mult in morgan_identifiers(mol, radius=2).items():
            counts[ident] = counts.get(ident, 0) + mult
    if n_molecules == 0:
        raise DescriptorError("cannot build fragment scores from an empty corpus")
    ordered = sorted(counts.values())
    anchor = max(1, ordered[min(len(ordered) - 1, int(0.99 * (len(ordered) - 1)))])
    scores = {
        ident: min(2.5, max(MISSING_FRAGMENT_SCORE, 2.5 + 1.5 * math.log10(c / anchor)))
        for ident, c in counts.items()
    }
    return FragScores(scores, n_molecules)


def save_fragment_scores(path: str | Path, frag: FragScores) -> None:
    with open(path, "wb") as fh:
        fh.write(FRAG_MAGIC)
        fh.write(struct.pack("<Q", len(frag.scores)))
        for key in sorted(frag.scores):
            fh.write(struct.pack("<Qd", key, frag.scores[key]))


def load_fragment_scores(path: str | Path) -> FragScores:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FRAG_MAGIC:
            raise DescriptorError(f"bad fragment score magic {magic!r}")
        (count,) = struct.unpack("<Q", fh.read(8))
        scores = {}
        for _ in range(count):
            key, val = struct.unpack("<Qd", fh.read(16))
            scores[key] = val
    return FragScores(scores, 0)


def _ring_complexity(mol: Molecule) -> tuple[int, int, int]:
    """(spiro atoms, bridgehead atoms, macrocycles of >= 8 atoms)."""
    spiro: set[int] = set()
    bridge: set[int] = set()
    rings = [set(r) for r in mol.rings]
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            shared = rings[i] & rings[j]
            if len(shared) == 1:
                spiro |= shared
            elif len(shared) >= 3:
                # ends of the shared path are the bridgeheads
                for atom in shared:
                    inside = sum(1 for v, _ in mol.adj[atom] if v in shared)
                    if inside == 1:
                        bridge.add(atom)
    macro = sum(1 for r in mol.rings if len(r) >= 8)
    return len(spiro), len(bridge), macro


def sas(mol: Molecule, frag: FragScores) -> float:
    """Synthetic accessibility score in [1, 10]; lower is easier to make.

    Mean fragment contribution combined with size, spiro/bridgehead,
    and macrocycle penalties plus a symmetry bonus for repeated
    environments, then mapped onto the conventional 1..10 scale.
    """
    idents = morgan_identifiers(mol, radius=2)
    nf = sum(idents.values())
    score1 = (
        sum(frag.scores.get(i, MISSING_FRAGMENT_SCORE) * m for i, m in idents.items()) / nf
    )

    n_atoms = mol.n_atoms
    size_penalty = n_atoms**1.005 - n_atoms
    n_spiro, n_bridge, n_macro = _ring_complexity(mol)
    macro_penalty = math.log10(2) if n_macro > 0 else 0.0
    score2 = (
        -size_penalty
        - math.log10(n_spiro + 1)
        - math.log10(n_bridge + 1)
        - macro_penalty
    )
    score3 = 0.0
    if n_atoms > len(idents):
        score3 = math.log(n_atoms / len(idents)) * 0.5

    raw = score1 + score2 + score3
    low, high = -4.0, 2.5
    value = 11.0 - (raw - low + 1.0) / (high - low) * 9.0
    if value > 8.0:
        value = 8.0 + math.log(value - 8.0 + 1.0)
    return min(10.0, max(1.0, value))
