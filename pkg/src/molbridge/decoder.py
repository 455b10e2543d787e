"""Pluggable decoders: a deterministic fingerprint-space reference decoder
and a newline-delimited JSON wire-protocol client for external models.

Wire protocol (over a local TCP socket or a child process's stdio):
  peer handshake, first frame:  {"latent_dim": <int>, "name": <string>}
  request:                      {"id": <u64>, "z": [<latent_dim> reals]}
  response:                     {"id": <u64>, "ok": <bool>, "smiles": <str, iff ok>}
Responses may arrive out of order; the client reorders by correlation id.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .fingerprint import Fingerprint, morgan_fingerprint
from .molgraph import Molecule, canonical_smiles

INDEX_MAGIC = b"LIX1"
DEFAULT_LATENT_DIM = 150


class DecoderError(ValueError):
    pass


class DecoderTransportError(RuntimeError):
    """Connection, framing, or timeout failure while talking to a peer."""


@runtime_checkable
class Decoder(Protocol):
    name: str
    latent_dim: int

    def decode_batch(self, zs: Sequence[np.ndarray]) -> list[str | None]:
        """One result per input vector, order-aligned; None marks a failure."""
        ...


# ---------------------------------------------------------------------------
# Reference encoder / nearest-neighbor decoder
# ---------------------------------------------------------------------------


def projection_matrix(seed: int, d_fp: int, d_latent: int) -> np.ndarray:
    """Seeded pseudo-random fingerprint-to-latent projection (d_fp x d_latent)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((d_fp, d_latent))


def reference_encode(fp: Fingerprint, projection: np.ndarray) -> np.ndarray:
    """tanh(P.T x / sqrt(popcount)) over the 0/1 bit vector of ``fp``.

    Deterministic; every component lies strictly inside (-1, 1).
    """
    if fp.n_bits != projection.shape[0]:
        raise DecoderError(
            f"fingerprint width {fp.n_bits} does not match projection rows {projection.shape[0]}"
        )
    pop = fp.popcount()
    if pop == 0:
        raise DecoderError("cannot encode an empty fingerprint")
    x = np.frombuffer(fp.to_bytes(), dtype=np.uint8)
    bits = np.unpackbits(x, bitorder="little").astype(np.float64)
    return np.tanh(bits @ projection / math.sqrt(pop))


@dataclass
class LatentIndex:
    """Deduplicated (canonical SMILES, fingerprint, latent) entries plus the
    seeded projection that produced the latents."""

    seed: int
    d_latent: int
    d_fp: int
    radius: int
    smiles: list[str]
    fingerprints: list[Fingerprint]
    latents: np.ndarray  # (n, d_latent) float32
    projection: np.ndarray | None = None

    def __post_init__(self):
        if self.projection is None:
            self.projection = projection_matrix(self.seed, self.d_fp, self.d_latent)

    def __len__(self) -> int:
        return len(self.smiles)

    def encode(self, fp: Fingerprint) -> np.ndarray:
        return reference_encode(fp, self.projection)


def build_latent_index(
    mols: Iterable[Molecule],
    seed: int,
    d_latent: int = DEFAULT_LATENT_DIM,
    n_bits: int = 4096,
    radius: int = 2,
) -> LatentIndex:
    """Index a corpus: canonical-SMILES deduplication, fingerprint, encode."""
    projection = projection_matrix(seed, n_bits, d_latent)
    seen: set[str] = set()
    smiles: list[str] = []
    fps: list[Fingerprint] = []
    rows: list[np.ndarray] = []
    for mol in mols:
        canon = canonical_smiles(mol)
        if canon in seen:
            continue
        seen.add(canon)
        fp = morgan_fingerprint(mol, radius=radius, n_bits=n_bits)
        smiles.append(canon)
        fps.append(fp)
        rows.append(reference_encode(fp, projection).astype(np.float32))
    if not smiles:
        raise DecoderError("cannot build an index from an empty corpus")
    latents = np.vstack(rows)
    return LatentIndex(seed, d_latent, n_bits, radius, smiles, fps, latents, projection)


def save_latent_index(path: str | Path, index: LatentIndex) -> None:
    """Write the LIX1 index file: magic, u64 seed, u32 d_latent, u32 d_fp,
    u64 count, then (u32 SMILES length + bytes, packed fingerprint,
    d_latent f32 components) per record, little-endian throughout."""
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<QIIQ", index.seed, index.d_latent, index.d_fp, len(index)))
        for smi, fp, row in zip(index.smiles, index.fingerprints, index.latents):
            raw = smi.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(fp.to_bytes())
            fh.write(row.astype("<f4").tobytes())


def load_latent_index(path: str | Path, radius: int = 2) -> LatentIndex:
    """Read a LIX1 file; the fingerprint radius is not part of the format
    and defaults to the toolkit-wide Morgan radius of 2."""
    with open(path, "rb") as fh:
        if fh.read(4) != INDEX_MAGIC:
            raise DecoderError(f"bad index magic in {path}")
        seed, d_latent, d_fp, count = struct.unpack("<QIIQ", fh.read(24))
        smiles, fps, rows = [], [], []
        fp_width = d_fp // 8
        for _ in range(count):
            (n,) = struct.unpack("<I", fh.read(4))
            smiles.append(fh.read(n).decode("utf-8"))
            fps.append(Fingerprint.from_bytes(fh.read(fp_width), d_fp, radius))
            rows.append(np.frombuffer(fh.read(4 * d_latent), dtype="<f4"))
    latents = np.vstack(rows)
    return LatentIndex(seed, d_latent, d_fp, radius, smiles, fps, latents)


def nn_decode(z: np.ndarray, index: LatentIndex) -> str:
    """Canonical SMILES of the index entry nearest to ``z`` (Euclidean);
    exact distance ties break to the lexicographically smallest SMILES."""
    if len(index) == 0:
        raise DecoderError("empty index")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (index.d_latent,):
        raise DecoderError(f"latent dimension mismatch: {z.shape} vs {index.d_latent}")
    diffs = index.latents.astype(np.float64) - z
    d2 = np.einsum("ij,ij->i", diffs, diffs)
    best = d2.min()
    ties = np.flatnonzero(d2 == best)
    if len(ties) == 1:
        return index.smiles[int(ties[0])]
    return min(index.smiles[int(i)] for i in ties)


class ReferenceDecoder:
    """Nearest-neighbor decoder over a LatentIndex; total and deterministic."""

    concurrent_safe = True

    def __init__(self, index: LatentIndex):
        self.index = index
        self.name = "reference"
        self.latent_dim = index.d_latent
        self._lat64 = index.latents.astype(np.float64)
        self._sq = np.einsum("ij,ij->i", self._lat64, self._lat64)

    def decode_batch(self, zs: Sequence[np.ndarray]) -> list[str | None]:
        if not zs:
            return []
        q = np.asarray(zs, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != self.latent_dim:
            raise DecoderError(
                f"latent dimension mismatch: {q.shape} vs (*, {self.latent_dim})"
            )
        # squared distances via the expansion ||a-b||^2 = ||a||^2 - 2ab + ||b||^2
        d2 = self._sq[None, :] - 2.0 * (q @ self._lat64.T)
        d2 += np.einsum("ij,ij->i", q, q)[:, None]
        out: list[str | None] = []
        smiles = self.index.smiles
        for row in d2:
            best = row.min()
            ties = np.flatnonzero(row == best)
            if len(ties) == 1:
                out.append(smiles[int(ties[0])])
            else:
                out.append(min(smiles[int(i)] for i in ties))
        return out


# ---------------------------------------------------------------------------
# Wire-protocol client
# ---------------------------------------------------------------------------


class ProtocolClient:
    """Client side of the decoder wire protocol.

    ``endpoint`` is either ``host:port`` (TCP) or ``cmd:<command line>``
    (peer spawned as a child process speaking the protocol on stdio). One
    batch is in flight per connection at a time.
    """

    concurrent_safe = False

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._next_id = 0
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        try:
            if endpoint.startswith("cmd:"):
                self._proc = subprocess.Popen(
                    shlex.split(endpoint[4:]),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
                self._reader = self._proc.stdout
                self._writer = self._proc.stdin
            else:
                host, _, port = endpoint.rpartition(":")
                self._sock = socket.create_connection((host, int(port)), timeout=timeout)
                self._sock.settimeout(timeout)
                self._reader = self._sock.makefile("rb")
                self._writer = self._sock.makefile("wb")
        except (OSError, ValueError) as err:
            raise DecoderTransportError(f"cannot connect to {endpoint}: {err}") from err
        hello = self._read_frame()
        try:
            self.latent_dim = int(hello["latent_dim"])
            self.name = str(hello["name"])
        except (KeyError, TypeError) as err:
            raise DecoderTransportError(f"bad handshake frame: {hello!r}") from err

    def _read_frame(self) -> dict:
        try:
            line = self._reader.readline()
        except (OSError, socket.timeout) as err:
            raise DecoderTransportError(f"read failed: {err}") from err
        if not line:
            raise DecoderTransportError("peer closed the connection")
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as err:
            raise DecoderTransportError(f"malformed frame: {line[:80]!r}") from err
        if not isinstance(frame, dict):
            raise DecoderTransportError(f"malformed frame: {line[:80]!r}")
        return frame

    def _write_frame(self, frame: dict) -> None:
        try:
            self._writer.write(json.dumps(frame).encode() + b"\n")
        except (OSError, BrokenPipeError) as err:
            raise DecoderTransportError(f"write failed: {err}") from err

    def decode_batch(self, zs: Sequence[np.ndarray]) -> list[str | None]:
        if not zs:
            return []
        base = self._next_id
        self._next_id += len(zs)
        for offset, z in enumerate(zs):
            self._write_frame({"id": base + offset, "z": [float(v) for v in z]})
        try:
            self._writer.flush()
        except (OSError, BrokenPipeError) as err:
            raise DecoderTransportError(f"write failed: {err}") from err

        results: list[str | None] = [None] * len(zs)
        answered = [False] * len(zs)
        remaining = len(zs)
        while remaining:
            frame = self._read_frame()
            try:
                rid = int(frame["id"])
                ok = bool(frame["ok"])
            except (KeyError, TypeError, ValueError) as err:
                raise DecoderTransportError(f"malformed response: {frame!r}") from err
            slot = rid - base
            if slot < 0 or slot >= len(zs):
                raise DecoderTransportError(f"response id {rid} outside batch")
            if answered[slot]:
                raise DecoderTransportError(f"duplicate response for id {rid}")
            answered[slot] = True
            remaining -= 1
            if ok:
                smiles = frame.get("smiles")
                if not isinstance(smiles, str):
                    raise DecoderTransportError(f"ok response without smiles: {frame!r}")
                results[slot] = smiles
        return results

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def check_decoder_conformance(decoder: Decoder, latent_dim: int | None = None,
                              batch_sizes: Sequence[int] = (1, 7, 64)) -> dict:
    """Shared conformance harness for any Decoder implementation.

    Verifies length/order alignment across batches (one result per input)
    and that repeated identical inputs give identical outputs. Returns a
    small report dict; raises on violation.
    """
    dim = latent_dim or decoder.latent_dim
    rng = np.random.default_rng(1234)
    report = {"name": decoder.name, "latent_dim": dim, "batches": []}
    for size in batch_sizes:
        zs = [rng.standard_normal(dim) for _ in range(size)]
        out = decoder.decode_batch(zs)
        if len(out) != size:
            raise DecoderError(f"conformance: {len(out)} results for {size} inputs")
        again = decoder.decode_batch(zs)
        if out != again:
            raise DecoderError("conformance: decoder is not deterministic on repeat")
        report["batches"].append({"size": size, "ok": sum(1 for r in out if r is not None)})
    if decoder.decode_batch([]) != []:
        raise DecoderError("conformance: empty batch must give empty output")
    return report
