"""Dataset preparation, the filter cascade, and KPI reporting.

The cascade annotates decoded candidates in the fixed stage order
valid -> unique -> novel -> PC -> NBM; each stage's verdict is only
evaluated for survivors of the previous stage, so stage counts are
monotone non-increasing and comparable across runs.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .bridge import CandidateRecord
from .descriptors import DescriptorTables, FragScores, descriptor_vector, pc_filter, qed, sas
from .fingerprint import Fingerprint, FingerprintError, morgan_fingerprint, rds
from .molgraph import (
    Molecule,
    SmilesError,
    canonicalize,
    parse_smiles,
    strip_stereo_and_components,
)
from .scaffold import bm_scaffold, generic_scaffold, is_novel_scaffold

DATA_DIR = Path(__file__).parent / "data"

RDS_BINS = 40
RDS_CORE = (-0.3, 0.3)


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Reference pairs
# ---------------------------------------------------------------------------


@dataclass
class ReferencePair:
    name: str
    name_a: str
    name_b: str
    mol_a: Molecule
    mol_b: Molecule
    smiles_a: str
    smiles_b: str
    fp_a: Fingerprint
    fp_b: Fingerprint
    scaffold_refs: set[str]

    @classmethod
    def from_smiles(cls, name: str, name_a: str, raw_a: str, name_b: str, raw_b: str,
                    n_bits: int = 4096, radius: int = 2) -> "ReferencePair":
        mol_a = parse_smiles(strip_stereo_and_components(raw_a, max_len=400), max_len=400)
        mol_b = parse_smiles(strip_stereo_and_components(raw_b, max_len=400), max_len=400)
        smiles_a = canonicalize(strip_stereo_and_components(raw_a, max_len=400), max_len=400)
        smiles_b = canonicalize(strip_stereo_and_components(raw_b, max_len=400), max_len=400)
        if smiles_a == smiles_b:
            raise HarnessError(f"reference pair {name}: targets are the same molecule")
        refs = set()
        for mol in (mol_a, mol_b):
            s = bm_scaffold(mol)
            if s is not None:
                refs.add(generic_scaffold(s).canonical)
        return cls(
            name, name_a, name_b, mol_a, mol_b, smiles_a, smiles_b,
            morgan_fingerprint(mol_a, radius, n_bits),
            morgan_fingerprint(mol_b, radius, n_bits),
            refs,
        )

    def latents(self, index) -> tuple:
        return index.encode(self.fp_a), index.encode(self.fp_b)


def load_reference_pairs(path: str | Path = DATA_DIR / "reference_pairs.tsv",
                         n_bits: int = 4096, radius: int = 2) -> dict[str, ReferencePair]:
    pairs: dict[str, ReferencePair] = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            name, name_a, smiles_a, name_b, smiles_b = line.split("\t")
            pairs[name] = ReferencePair.from_smiles(
                name, name_a, smiles_a, name_b, smiles_b, n_bits, radius
            )
    return pairs


# ---------------------------------------------------------------------------
# Dataset preparation
# ---------------------------------------------------------------------------


@dataclass
class PrepStats:
    read: int = 0
    kept: int = 0
    train: int = 0
    test: int = 0
    rejected: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1


@dataclass(frozen=True)
class PrepConfig:
    min_len: int = 10
    max_len: int = 200
    randomized_max: int = 215
    train_fraction: float = 0.9
    seed: int = 0


def prep_dataset(raw_path: str | Path, out_prefix: str | Path,
                 cfg: PrepConfig = PrepConfig()) -> PrepStats:
    """Clean a raw corpus file into canonical train/test splits.

    Per line: strip stereo and extra components, parse, canonicalize,
    filter canonical length to [min_len, max_len], deduplicate, then split
    train/test by a seeded shuffle. Writes ``<prefix>.clean.smi``,
    ``<prefix>.train.smi``, ``<prefix>.test.smi``, and ``<prefix>.stats.json``.
    """
    import random

    stats = PrepStats()
    seen: set[str] = set()
    kept: list[str] = []
    with open(raw_path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            stats.read += 1
            raw = line.split("\t")[0].strip()
            if not raw:
                stats.reject("empty")
                continue
            if len(raw) > cfg.randomized_max:
                stats.reject("too_long")
                continue
            try:
                stripped = strip_stereo_and_components(raw, max_len=cfg.randomized_max)
                canon = canonicalize(stripped, max_len=cfg.randomized_max)
            except SmilesError:
                stats.reject("parse_error")
                continue
            if len(canon) < cfg.min_len:
                stats.reject("too_short")
                continue
            if len(canon) > cfg.max_len:
                stats.reject("too_long")
                continue
            if canon in seen:
                stats.reject("duplicate")
                continue
            seen.add(canon)
            kept.append(canon)
    stats.kept = len(kept)

    order = list(range(len(kept)))
    random.Random(cfg.seed).shuffle(order)
    n_train = int(len(kept) * cfg.train_fraction)
    train_ids = sorted(order[:n_train])
    test_ids = sorted(order[n_train:])
    stats.train, stats.test = len(train_ids), len(test_ids)

    out_prefix = str(out_prefix)
    _write_corpus(f"{out_prefix}.clean.smi", kept, range(len(kept)))
    _write_corpus(f"{out_prefix}.train.smi", kept, train_ids)
    _write_corpus(f"{out_prefix}.test.smi", kept, test_ids)
    with open(f"{out_prefix}.stats.json", "w") as fh:
        json.dump(
            {"read": stats.read, "kept": stats.kept, "train": stats.train,
             "test": stats.test, "rejected": dict(sorted(stats.rejected.items()))},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return stats


def _write_corpus(path: str, smiles: list[str], ids: Iterable[int]) -> None:
    with open(path, "w") as fh:
        for i in ids:
            fh.write(f"{smiles[i]}\tM{i:06d}\n")


def read_corpus(path: str | Path) -> list[str]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            out.append(line.split("\t")[0])
    return out


# ---------------------------------------------------------------------------
# Filter cascade
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationRecord:
    grid_index: int
    perturb_index: int
    t: float
    raw_smiles: str | None
    valid: bool
    canonical: str
    decode_micros: int
    unique_first: bool = False
    novel: bool = False
    qed: float = math.nan
    sas: float = math.nan
    pc_pass: bool = False
    nbm_pass: bool = False
    rds: float = math.nan
    rds_clamped: bool = False


@dataclass(frozen=True)
class CascadeConfig:
    qed_min: float = 0.4
    sas_max: float = 4.0
    n_bits: int = 4096
    radius: int = 2


def filter_cascade(
    candidates: Iterable[CandidateRecord],
    training_index: set[str],
    pair: ReferencePair,
    tables: DescriptorTables,
    frag: FragScores,
    cfg: CascadeConfig = CascadeConfig(),
) -> list[GenerationRecord]:
    """Annotate candidates through valid -> unique -> novel -> PC -> NBM.

    QED, SAS, and RDS are computed once per distinct valid canonical form
    (RDS for every valid-unique record, per-molecule properties reused by
    duplicates' records only through the unique flag-bearer). PC verdicts
    apply to novelty survivors, NBM to PC survivors.
    """
    seen: set[str] = set()
    cache: dict[str, dict] = {}
    out: list[GenerationRecord] = []
    for cand in candidates:
        rec = GenerationRecord(
            cand.grid_index, cand.perturb_index, cand.t, cand.raw_smiles,
            cand.valid, cand.canonical, cand.decode_micros,
        )
        if not rec.valid:
            out.append(rec)
            continue
        canon = rec.canonical
        first = canon not in seen
        if first:
            seen.add(canon)
        rec = replace(rec, unique_first=first)
        if not first:
            out.append(rec)
            continue

        if canon not in cache:
            mol = parse_smiles(canon, max_len=4096)
            fp = morgan_fingerprint(mol, cfg.radius, cfg.n_bits)
            try:
                r = rds(fp, pair.fp_a, pair.fp_b)
                rds_value, rds_clamped = r.value, r.clamped
            except FingerprintError as err:
                raise HarnessError(str(err)) from err
            vec = descriptor_vector(mol, tables)
            cache[canon] = {
                "mol": mol,
                "rds": rds_value,
                "rds_clamped": rds_clamped,
                "qed": qed(vec, tables.qed),
                "sas": sas(mol, frag),
            }
        info = cache[canon]
        rec = replace(
            rec,
            rds=info["rds"],
            rds_clamped=info["rds_clamped"],
            qed=info["qed"],
            sas=info["sas"],
        )
        novel = canon not in training_index
        rec = replace(rec, novel=novel)
        if novel:
            if pc_filter(rec.qed, rec.sas, cfg.qed_min, cfg.sas_max):
                rec = replace(rec, pc_pass=True)
                if is_novel_scaffold(info["mol"], pair.scaffold_refs):
                    rec = replace(rec, nbm_pass=True)
        out.append(rec)
    return out


def cascade_counts(records: Iterable[GenerationRecord]) -> dict[str, int]:
    counts = {"total": 0, "valid": 0, "unique": 0, "novel": 0, "pc": 0, "nbm": 0}
    for rec in records:
        counts["total"] += 1
        counts["valid"] += rec.valid
        counts["unique"] += rec.unique_first
        counts["novel"] += rec.unique_first and rec.novel
        counts["pc"] += rec.pc_pass
        counts["nbm"] += rec.nbm_pass
    return counts


# ---------------------------------------------------------------------------
# KPI report
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    pair: str
    counts: dict[str, int]
    qed_mean: float | None
    qed_std: float | None
    sas_mean: float | None
    sas_std: float | None
    delta_sas: float | None
    novelty_pct: float | None
    rds_histogram: list[int]
    rds_core_count: int
    rds_clamp_events: int
    timing: dict

    def to_json(self) -> str:
        payload = {
            "pair": self.pair,
            "counts": self.counts,
            "qed": {"mean": self.qed_mean, "std": self.qed_std},
            "sas": {"mean": self.sas_mean, "std": self.sas_std},
            "delta_sas": self.delta_sas,
            "novelty_pct": self.novelty_pct,
            "rds": {
                "bins": RDS_BINS,
                "histogram": self.rds_histogram,
                "core_interval": list(RDS_CORE),
                "core_count": self.rds_core_count,
                "clamp_events": self.rds_clamp_events,
            },
            "timing": self.timing,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(
            pair=d["pair"], counts=d["counts"],
            qed_mean=d["qed"]["mean"], qed_std=d["qed"]["std"],
            sas_mean=d["sas"]["mean"], sas_std=d["sas"]["std"],
            delta_sas=d.get("delta_sas"), novelty_pct=d.get("novelty_pct"),
            rds_histogram=d["rds"]["histogram"],
            rds_core_count=d["rds"]["core_count"],
            rds_clamp_events=d["rds"]["clamp_events"],
            timing=d.get("timing", {}),
        )

    def deterministic_text(self) -> str:
        """Report serialization with the timing section removed."""
        d = json.loads(self.to_json())
        d.pop("timing", None)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def rds_bin(value: float) -> int:
    idx = int((value + 1.0) / 0.05)
    return min(max(idx, 0), RDS_BINS - 1)


def kpi_report(
    records: list[GenerationRecord],
    decode_seconds: float,
    pair_name: str,
    baseline: RunReport | None = None,
) -> RunReport:
    """Aggregate cascade counts, per-stage throughput, QED/SAS statistics,
    the RDS histogram, and the baseline deltas the benchmark reports.

    delta_sas is mean SAS of this run minus mean SAS of the baseline run;
    throughput-ratio KPIs live in the timing section because they inherit
    the wall clock's nondeterminism.
    """
    counts = cascade_counts(records)
    if baseline is not None and baseline.pair != pair_name:
        raise HarnessError(
            f"baseline pair {baseline.pair!r} does not match {pair_name!r}"
        )

    qs = [r.qed for r in records if r.unique_first and not math.isnan(r.qed)]
    ss = [r.sas for r in records if r.unique_first and not math.isnan(r.sas)]
    qed_mean = statistics.fmean(qs) if qs else None
    qed_std = statistics.pstdev(qs) if qs else None
    sas_mean = statistics.fmean(ss) if ss else None
    sas_std = statistics.pstdev(ss) if ss else None

    delta_sas = None
    if baseline is not None and sas_mean is not None and baseline.sas_mean is not None:
        delta_sas = sas_mean - baseline.sas_mean

    histogram = [0] * RDS_BINS
    core = 0
    clamps = 0
    for rec in records:
        if rec.unique_first and not math.isnan(rec.rds):
            histogram[rds_bin(rec.rds)] += 1
            if RDS_CORE[0] < rec.rds < RDS_CORE[1]:
                core += 1
            clamps += rec.rds_clamped

    novelty_pct = None
    if counts["unique"]:
        novelty_pct = 100.0 * counts["novel"] / counts["unique"]

    timing: dict = {"decode_seconds": decode_seconds}
    if decode_seconds > 0:
        timing["molecules_per_second"] = {
            stage: counts[stage] / decode_seconds for stage in counts
        }
    if baseline is not None:
        base_rates = baseline.timing.get("molecules_per_second", {})
        ours = timing.get("molecules_per_second", {})
        ratios = {
            stage: (ours[stage] / base_rates[stage])
            for stage in ours
            if stage in base_rates and base_rates[stage] > 0
        }
        if ratios:
            timing["efficiency_vs_baseline"] = ratios

    return RunReport(
        pair=pair_name, counts=counts,
        qed_mean=qed_mean, qed_std=qed_std, sas_mean=sas_mean, sas_std=sas_std,
        delta_sas=delta_sas, novelty_pct=novelty_pct,
        rds_histogram=histogram, rds_core_count=core, rds_clamp_events=clamps,
        timing=timing,
    )


# ---------------------------------------------------------------------------
# Distribution exports
# ---------------------------------------------------------------------------


def export_distributions(records: list[GenerationRecord], scatter_path, hist_path) -> None:
    """Write plot-ready CSVs: the QED-SAS scatter over valid-unique records
    (sorted by t then perturbation index) and the 40-bin RDS histogram."""
    rows = sorted(
        (r for r in records if r.unique_first and not math.isnan(r.qed)),
        key=lambda r: (r.t, r.perturb_index),
    )
    with open(scatter_path, "w") as fh:
        fh.write("t,perturb_index,canonical,qed,sas,rds\n")
        for r in rows:
            fh.write(
                f"{r.t:.10g},{r.perturb_index},{r.canonical},{r.qed:.6f},{r.sas:.6f},{r.rds:.6f}\n"
            )
    histogram = [0] * RDS_BINS
    for r in records:
        if r.unique_first and not math.isnan(r.rds):
            histogram[rds_bin(r.rds)] += 1
    with open(hist_path, "w") as fh:
        fh.write("bin_low,bin_high,count\n")
        for k, count in enumerate(histogram):
            low = -1.0 + k * 0.05
            fh.write(f"{low:.2f},{low + 0.05:.2f},{count}\n")
