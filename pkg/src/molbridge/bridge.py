"""Latent-space bridge generation: SLERP trajectories with Gaussian perturbation.

A run walks ``n_grid`` points along the spherical interpolation between two
reference latent vectors, perturbs each grid point ``n_perturb`` times, and
decodes every candidate. Per-candidate RNG streams are derived from
(run seed, grid index, perturbation index) with a splitmix64-style mix, so
results are independent of execution order and worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .molgraph import SmilesError, canonicalize

EPS_PARALLEL = 1e-9
EPS_ANTIPODAL = 1e-9

DEFAULT_COARSE_SIGMAS = (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5)


class BridgeError(ValueError):
    pass


@dataclass(frozen=True)
class BridgeConfig:
    """Geometry of a bridge run; total candidates = n_grid * n_perturb."""

    n_grid: int = 100
    n_perturb: int = 100
    seed: int = 0
    include_endpoints: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n_grid < 2:
            raise BridgeError("n_grid must be >= 2")
        if self.n_perturb < 1:
            raise BridgeError("n_perturb must be >= 1")


PRODUCTION_N_PERTURB = 5000


@dataclass(frozen=True)
class CandidateRecord:
    """One decoded candidate of a bridge run."""

    grid_index: int
    perturb_index: int
    t: float
    raw_smiles: str | None
    valid: bool
    canonical: str
    decode_micros: int

    def to_line(self) -> str:
        raw = self.raw_smiles if self.raw_smiles is not None else ""
        return (
            f"{self.grid_index}\t{self.perturb_index}\t{self.t:.10g}\t{raw}\t"
            f"{int(self.valid)}\t{self.canonical}\t{self.decode_micros}"
        )

    @classmethod
    def from_line(cls, line: str) -> "CandidateRecord":
        g, p, t, raw, valid, canonical, micros = line.rstrip("\n").split("\t")
        return cls(int(g), int(p), float(t), raw or None, valid == "1", canonical, int(micros))


@dataclass
class SigmaScan:
    sigma: float
    total: int = 0
    valid: int = 0
    unique: int = 0
    novel: int = 0
    decode_seconds: float = 0.0
    error: str | None = None


@dataclass
class ScanResult:
    per_sigma: list[SigmaScan] = field(default_factory=list)
    sigma_star: float | None = None


def slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical linear interpolation between two latent vectors.

    Falls back to linear interpolation when the vectors are (nearly)
    parallel; antipodal vectors have no unique great circle and raise.
    Endpoints are exact: slerp(a, b, 0) is a and slerp(a, b, 1) is b.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise BridgeError("slerp endpoints must be nonzero vectors")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    cos_omega = float(np.dot(a, b) / (na * nb))
    cos_omega = max(-1.0, min(1.0, cos_omega))
    omega = math.acos(cos_omega)
    if omega < EPS_PARALLEL:
        return (1.0 - t) * a + t * b
    if math.pi - omega < EPS_ANTIPODAL:
        raise BridgeError("undefined great-circle: endpoints are antipodal")
    s = math.sin(omega)
    return (math.sin((1.0 - t) * omega) / s) * a + (math.sin(t * omega) / s) * b


def bridge_grid(a: np.ndarray, b: np.ndarray, n_grid: int) -> list[np.ndarray]:
    """``n_grid`` SLERP points at t = k/(n_grid-1), endpoints included."""
    if n_grid < 2:
        raise BridgeError("n_grid must be >= 2")
    return [slerp(a, b, k / (n_grid - 1)) for k in range(n_grid)]


def perturb(v: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add iid Gaussian noise per component; sigma=0 returns the vector exactly.

    No clamping is applied: decoders must accept vectors outside [-1, 1].
    """
    if sigma < 0:
        raise BridgeError("sigma must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    if sigma == 0.0:
        return v.copy()
    return v + rng.normal(0.0, sigma, size=v.shape)


_MIX_A = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9
_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + _MIX_A) & _MASK
    z = ((z ^ (z >> 30)) * _MIX_B) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def candidate_seed(run_seed: int, grid_index: int, perturb_index: int) -> int:
    """Stream seed for candidate (g, p): two splitmix64 rounds over the mix
    of run seed and indices, so any execution order yields the same draws."""
    z = (run_seed & _MASK) ^ ((grid_index + 1) * _MIX_A) & _MASK ^ ((perturb_index + 1) * _MIX_B) & _MASK
    return _splitmix64(_splitmix64(z))


def _decode_grid_point(
    g: int,
    point: np.ndarray,
    sigma: float,
    decoder,
    cfg: BridgeConfig,
    t_value: float,
) -> tuple[list[CandidateRecord], float]:
    zs = []
    for p in range(cfg.n_perturb):
        rng = np.random.default_rng(candidate_seed(cfg.seed, g, p))
        zs.append(perturb(point, sigma, rng))
    t0 = time.perf_counter()
    outputs = decoder.decode_batch(zs)
    elapsed = time.perf_counter() - t0
    if len(outputs) != len(zs):
        raise BridgeError(
            f"decoder returned {len(outputs)} results for {len(zs)} inputs"
        )
    micros = int(elapsed * 1e6 / max(1, len(zs)))
    records = []
    canon_cache: dict[str, str | None] = {}
    for p, raw in enumerate(outputs):
        canonical = ""
        valid = False
        if raw is not None:
            if raw not in canon_cache:
                try:
                    canon_cache[raw] = canonicalize(raw, max_len=4096)
                except SmilesError:
                    canon_cache[raw] = None
            cached = canon_cache[raw]
            if cached is not None:
                valid = True
                canonical = cached
        records.append(
            CandidateRecord(g, p, t_value, raw, valid, canonical, micros)
        )
    return records, elapsed


def bridge_run(
    a: np.ndarray,
    b: np.ndarray,
    sigma: float,
    decoder,
    cfg: BridgeConfig,
    sink: Callable[[CandidateRecord], None] | None = None,
) -> tuple[list[CandidateRecord], float]:
    """Decode the full n_grid x n_perturb candidate set for one sigma.

    Returns (records, decode_seconds). When ``sink`` is given, records are
    streamed to it in (grid, perturb) order instead of being accumulated.
    Output is deterministic for fixed (a, b, sigma, seed, decoder)
    regardless of worker count.
    """
    grid = bridge_grid(a, b, cfg.n_grid)
    tasks = [
        (g, grid[g], g / (cfg.n_grid - 1)) for g in range(cfg.n_grid)
    ]

    results: list[tuple[list[CandidateRecord], float]] = [None] * cfg.n_grid  # type: ignore

    workers = cfg.workers if getattr(decoder, "concurrent_safe", False) else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_decode_grid_point, g, pt, sigma, decoder, cfg, t): g
                for g, pt, t in tasks
            }
            for fut, g in futures.items():
                results[g] = fut.result()
    else:
        for g, pt, t in tasks:
            results[g] = _decode_grid_point(g, pt, sigma, decoder, cfg, t)

    decode_seconds = sum(r[1] for r in results)
    if sink is not None:
        for recs, _ in results:
            for rec in recs:
                sink(rec)
        return [], decode_seconds
    out: list[CandidateRecord] = []
    for recs, _ in results:
        out.extend(recs)
    return out, decode_seconds


def noise_scan(
    a: np.ndarray,
    b: np.ndarray,
    sigmas: Sequence[float],
    decoder,
    cfg: BridgeConfig,
    corpus_index: set[str],
) -> ScanResult:
    """Scan perturbation noise levels and select the most productive one.

    For each sigma the full candidate set is decoded and valid / unique /
    novel counts recorded; sigma* maximizes the count of distinct valid
    canonical forms absent from ``corpus_index``, ties broken toward the
    smaller sigma. A decoder transport failure aborts that sigma only.
    """
    from .decoder import DecoderTransportError

    result = ScanResult()
    best: tuple[int, float] | None = None
    for sigma in sigmas:
        scan = SigmaScan(sigma=sigma)
        try:
            records, elapsed = bridge_run(a, b, sigma, decoder, cfg)
        except DecoderTransportError as err:
            scan.error = str(err)
            result.per_sigma.append(scan)
            continue
        scan.total = len(records)
        scan.decode_seconds = elapsed
        uniques: set[str] = set()
        for rec in records:
            if rec.valid:
                scan.valid += 1
                uniques.add(rec.canonical)
        scan.unique = len(uniques)
        scan.novel = sum(1 for c in uniques if c not in corpus_index)
        result.per_sigma.append(scan)
        key = (scan.novel, -sigma)
        if best is None or key > (best[0], -best[1]):
            best = (scan.novel, sigma)
    if best is not None:
        result.sigma_star = best[1]
    return result


def write_generation_set(path, records: Iterable[CandidateRecord]) -> int:
    """Write the tab-separated GenerationSet file; returns the record count."""
    n = 0
    with open(path, "w") as fh:
        fh.write(
            "# grid_index\tperturb_index\tt\traw_smiles\tvalid\tcanonical\tdecode_micros\n"
        )
        for rec in records:
            fh.write(rec.to_line() + "\n")
            n += 1
    return n


def read_generation_set(path) -> Iterator[CandidateRecord]:
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            yield CandidateRecord.from_line(line)
