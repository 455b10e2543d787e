"""Morgan circular fingerprints and bitset similarity metrics.

Environment identifiers are 64-bit values obtained by hashing a canonical
little-endian serialization of the environment tuple with BLAKE2b
(digest_size=8); bit positions fold the identifier modulo the fingerprint
width. Positions are self-consistent within this package only, not
compatible with any external toolkit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Iterable, Sequence

from .molgraph import Molecule

_ELEMENT_CODE = {el: i for i, el in enumerate(("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"))}

MAGIC = b"MFP1"
DEFAULT_N_BITS = 4096
DEFAULT_RADIUS = 2


class FingerprintError(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bitset; ``bits`` is an int bitmask of width ``n_bits``."""

    bits: int
    n_bits: int = DEFAULT_N_BITS
    radius: int = DEFAULT_RADIUS

    def popcount(self) -> int:
        return self.bits.bit_count()

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes(self.n_bits // 8, "little")

    @classmethod
    def from_bytes(cls, raw: bytes, n_bits: int, radius: int) -> "Fingerprint":
        return cls(int.from_bytes(raw, "little"), n_bits, radius)


def _hash64(values: Sequence[int]) -> int:
    packed = struct.pack(f"<{len(values)}q", *values)
    return int.from_bytes(blake2b(packed, digest_size=8).digest(), "little")


def morgan_identifiers(mol: Molecule, radius: int = DEFAULT_RADIUS) -> dict[int, int]:
    """Environment identifier -> multiplicity map for all radii 0..radius.

    Duplicate environments covering an identical bond set are emitted once;
    among same-round duplicates the smallest identifier is kept, which makes
    the result invariant under input atom reordering.
    """
    n = mol.n_atoms
    ids = [
        _hash64(
            (
                _ELEMENT_CODE[a.element],
                mol.degree(i),
                a.formal_charge,
                mol.h_counts[i],
                int(a.in_ring),
                int(a.aromatic),
            )
        )
        for i, a in enumerate(mol.atoms)
    ]
    features: dict[int, int] = {}
    for ident in ids:
        features[ident] = features.get(ident, 0) + 1

    # radius-0 environments cover no bonds, so later empty bond sets are
    # structural duplicates of them
    seen_envs: set[frozenset[int]] = {frozenset()}
    env_bonds: list[set[int]] = [set() for _ in range(n)]
    for _ in range(radius):
        new_ids = []
        new_envs = []
        for i in range(n):
            nbrs = sorted((mol.bonds[bi].order, ids[v]) for v, bi in mol.adj[i])
            payload = [ids[i]]
            for order, nid in nbrs:
                payload.append(order)
                payload.append(_signed(nid))
            new_ids.append(_hash64([_signed(p) for p in payload]))
            grown = set(env_bonds[i])
            for v, bi in mol.adj[i]:
                grown.add(bi)
                grown |= env_bonds[v]
            new_envs.append(grown)
        round_best: dict[frozenset[int], int] = {}
        for i in range(n):
            key = frozenset(new_envs[i])
            if key in seen_envs:
                continue
            cur = round_best.get(key)
            if cur is None or new_ids[i] < cur:
                round_best[key] = new_ids[i]
        for key, ident in round_best.items():
            seen_envs.add(key)
            features[ident] = features.get(ident, 0) + 1
        ids = new_ids
        env_bonds = new_envs
    return features


def _signed(v: int) -> int:
    return v - (1 << 64) if v >= (1 << 63) else v


def morgan_fingerprint(
    mol: Molecule, radius: int = DEFAULT_RADIUS, n_bits: int = DEFAULT_N_BITS
) -> Fingerprint:
    """Binary Morgan fingerprint; identifiers fold as ``id % n_bits``."""
    if n_bits <= 0 or n_bits & (n_bits - 1):
        raise FingerprintError(f"n_bits must be a power of two, got {n_bits}")
    if radius < 0:
        raise FingerprintError("radius must be >= 0")
    bits = 0
    for ident in morgan_identifiers(mol, radius):
        bits |= 1 << (ident % n_bits)
    return Fingerprint(bits, n_bits, radius)


def _check_widths(a: Fingerprint, b: Fingerprint) -> None:
    if a.n_bits != b.n_bits:
        raise FingerprintError(f"fingerprint width mismatch: {a.n_bits} vs {b.n_bits}")


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; two empty bitsets compare as 1.0."""
    _check_widths(a, b)
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def dice(a: Fingerprint, b: Fingerprint) -> float:
    """2 |a AND b| / (|a| + |b|); two empty bitsets compare as 1.0."""
    _check_widths(a, b)
    total = a.popcount() + b.popcount()
    if total == 0:
        return 1.0
    return 2 * (a.bits & b.bits).bit_count() / total


@dataclass(frozen=True)
class RdsValue:
    """Signed position of a candidate between reference molecules A and B.

    Negative values mean closer to A, positive closer to B. ``clamped`` is
    set when the raw ratio fell outside [-1, 1] and was clipped.
    """

    value: float
    clamped: bool = False


def rds(fp_i: Fingerprint, fp_a: Fingerprint, fp_b: Fingerprint) -> RdsValue:
    """Relative Dice similarity (d_Bi - d_Ai) / (1 - d_AB), clamped to [-1, 1]."""
    d_ab = dice(fp_a, fp_b)
    if d_ab >= 1.0:
        raise FingerprintError("degenerate reference pair: reference fingerprints identical")
    raw = (dice(fp_b, fp_i) - dice(fp_a, fp_i)) / (1.0 - d_ab)
    if raw > 1.0:
        return RdsValue(1.0, True)
    if raw < -1.0:
        return RdsValue(-1.0, True)
    return RdsValue(raw, False)


# ---------------------------------------------------------------------------
# Fingerprint store (binary, little-endian)
# ---------------------------------------------------------------------------


def save_fingerprints(path: str | Path, items: Iterable[tuple[str, Fingerprint]]) -> int:
    """Write an ``MFP1`` fingerprint store; returns the record count."""
    records = list(items)
    if records:
        n_bits = records[0][1].n_bits
        radius = records[0][1].radius
        for _, fp in records:
            if fp.n_bits != n_bits:
                raise FingerprintError("mixed fingerprint widths in store")
    else:
        n_bits, radius = DEFAULT_N_BITS, DEFAULT_RADIUS
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", n_bits, radius, len(records)))
        for rec_id, fp in records:
            raw_id = rec_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_id)))
            fh.write(raw_id)
            fh.write(fp.to_bytes())
    return len(records)


def load_fingerprints(path: str | Path) -> list[tuple[str, Fingerprint]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FingerprintError(f"bad fingerprint store magic {magic!r}")
        n_bits, radius, count = struct.unpack("<IIQ", fh.read(16))
        width = n_bits // 8
        out = []
        for _ in range(count):
            (id_len,) = struct.unpack("<I", fh.read(4))
            rec_id = fh.read(id_len).decode("utf-8")
            fp = Fingerprint.from_bytes(fh.read(width), n_bits, radius)
            out.append((rec_id, fp))
    return out
