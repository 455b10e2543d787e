"""Command-line interface for the benchmark pipeline.

Every flag has a config-file twin (``key=value`` lines, ``#`` comments);
explicit flags win over config values. Exit codes: 0 ok, 1 usage error,
2 data error, 3 decoder transport error.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import bridge as bridge_mod
from . import decoder as decoder_mod
from . import harness as harness_mod
from .descriptors import (
    DescriptorError,
    build_fragment_scores,
    load_fragment_scores,
    load_tables,
    save_fragment_scores,
)
from .fingerprint import FingerprintError, morgan_fingerprint, save_fingerprints
from .molgraph import SmilesError, parse_smiles

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3


class ConfigOption(click.Option):
    """Option whose default can come from the --config file."""

    def value_from_config(self, ctx):
        cfg = ctx.obj or {}
        return cfg.get(self.name.replace("_", "-"), None)

    def process_value(self, ctx, value):
        source = ctx.get_parameter_source(self.name)
        if source == click.core.ParameterSource.DEFAULT:
            from_cfg = self.value_from_config(ctx)
            if from_cfg is not None:
                value = self.type_cast_value(ctx, from_cfg)
        return super().process_value(ctx, value)


def copt(*args, **kwargs):
    return click.option(*args, cls=ConfigOption, **kwargs)


def read_config(path: str | None) -> dict:
    if not path:
        return {}
    cfg = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.UsageError(f"bad config line: {line!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="key=value config file; explicit flags win.")
@click.pass_context
def cli(ctx, config):
    """Molecular-generation benchmark toolkit."""
    ctx.obj = read_config(config)


@cli.command()
@click.argument("raw", type=click.Path(exists=True))
@click.argument("out_prefix")
@copt("--min-len", type=int, default=10, show_default=True)
@copt("--max-len", type=int, default=200, show_default=True)
@copt("--randomized-max", type=int, default=215, show_default=True)
@copt("--split", type=float, default=0.9, show_default=True,
      help="training fraction of the cleaned corpus")
@copt("--seed", type=int, default=0, show_default=True)
def prep(raw, out_prefix, min_len, max_len, randomized_max, split, seed):
    """Clean a raw corpus into canonical train/test files."""
    cfg = harness_mod.PrepConfig(min_len, max_len, randomized_max, split, seed)
    stats = harness_mod.prep_dataset(raw, out_prefix, cfg)
    click.echo(
        f"read={stats.read} kept={stats.kept} train={stats.train} test={stats.test} "
        f"rejected={json.dumps(dict(sorted(stats.rejected.items())))}"
    )


@cli.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@copt("--bits", type=int, default=4096, show_default=True)
@copt("--radius", type=int, default=2, show_default=True)
@copt("--skip-invalid", is_flag=True, default=False,
      help="drop unparseable lines instead of aborting")
def fp(corpus, out, bits, radius, skip_invalid):
    """Fingerprint a corpus into a binary store.

    Records are keyed by the line's id column when present, else by the
    SMILES string itself.
    """
    items = []
    skipped = 0
    with open(corpus) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            smiles = parts[0]
            rec_id = parts[1] if len(parts) > 1 and parts[1] else smiles
            try:
                mol = parse_smiles(smiles, max_len=400)
            except SmilesError:
                if skip_invalid:
                    skipped += 1
                    continue
                raise
            items.append((rec_id, morgan_fingerprint(mol, radius, bits)))
    n = save_fingerprints(out, items)
    suffix = f" (skipped {skipped} invalid)" if skipped else ""
    click.echo(f"wrote {n} fingerprints to {out}{suffix}")


@cli.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
def fragscores(corpus, out):
    """Build the synthetic-accessibility fragment table from a corpus."""
    mols = (parse_smiles(s, max_len=400) for s in harness_mod.read_corpus(corpus))
    frag = build_fragment_scores(mols)
    save_fragment_scores(out, frag)
    click.echo(f"wrote {len(frag.scores)} fragment scores from {frag.n_molecules} molecules")


@cli.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.argument("out", type=click.Path())
@copt("--seed", type=int, default=0, show_default=True)
@copt("--latent-dim", type=int, default=150, show_default=True)
@copt("--bits", type=int, default=4096, show_default=True)
def index(corpus, out, seed, latent_dim, bits):
    """Build the reference-decoder latent index from a corpus."""
    mols = (parse_smiles(s, max_len=400) for s in harness_mod.read_corpus(corpus))
    idx = decoder_mod.build_latent_index(mols, seed=seed, d_latent=latent_dim, n_bits=bits)
    decoder_mod.save_latent_index(out, idx)
    click.echo(f"indexed {len(idx)} molecules into {out}")


def _load_decoder(spec: str, index_path: str | None, timeout: float):
    if spec == "reference":
        if not index_path:
            raise click.UsageError("--decoder reference requires --index")
        idx = decoder_mod.load_latent_index(index_path)
        return decoder_mod.ReferenceDecoder(idx), idx
    if spec.startswith("proto:"):
        client = decoder_mod.ProtocolClient(spec[len("proto:"):], timeout=timeout)
        if not index_path:
            raise click.UsageError("--index is required to embed reference latents")
        idx = decoder_mod.load_latent_index(index_path)
        return client, idx
    raise click.UsageError(f"unknown decoder {spec!r}; use 'reference' or 'proto:<endpoint>'")


def _resolve_pair(name: str, pairs_file: str | None, bits: int):
    path = pairs_file or harness_mod.DATA_DIR / "reference_pairs.tsv"
    pairs = harness_mod.load_reference_pairs(path, n_bits=bits)
    if name not in pairs:
        raise click.UsageError(f"unknown pair {name!r}; available: {', '.join(sorted(pairs))}")
    return pairs[name]


def _pair_latents(ref_pair, idx, latents_path: str | None, latent_dim: int):
    """Reference latents from the index encoder, or from a JSON file when an
    external decoder's own encoder produced them (keys 'a'/'b' or the
    target names)."""
    import numpy as np

    if not latents_path:
        return ref_pair.latents(idx)
    data = json.loads(Path(latents_path).read_text())
    out = []
    for slot, name in (("a", ref_pair.name_a), ("b", ref_pair.name_b)):
        vec = data.get(slot, data.get(name))
        if vec is None:
            raise click.UsageError(
                f"latents file {latents_path} lacks key {slot!r} (or {name!r})"
            )
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (latent_dim,):
            raise click.UsageError(
                f"latent vector {slot!r} has shape {arr.shape}, expected ({latent_dim},)"
            )
        out.append(arr)
    return out[0], out[1]


@cli.command()
@copt("--pair", required=True, help="reference pair class name (e.g. NSAID)")
@copt("--pairs-file", type=click.Path(exists=True), default=None)
@copt("--index", "index_path", type=click.Path(exists=True), required=True)
@copt("--sigmas", default="0.0,0.05,0.1,0.15,0.2,0.3,0.5", show_default=True)
@copt("--grid", type=int, default=100, show_default=True)
@copt("--perturb", type=int, default=100, show_default=True)
@copt("--decoder", "decoder_spec", default="reference", show_default=True,
      help="'reference' or 'proto:<host:port|cmd:...>'")
@copt("--seed", type=int, default=0, show_default=True)
@copt("--timeout", type=float, default=30.0, show_default=True)
@copt("--novelty-ref", type=click.Path(exists=True), default=None,
      help="corpus whose canonical forms define novelty (default: the index)")
@copt("--pair-latents", type=click.Path(exists=True), default=None,
      help="JSON file with the pair's latent vectors (keys 'a'/'b'), e.g. "
           "from an external decoder's own encoder")
@copt("--workers", type=int, default=1, show_default=True)
@copt("--out", "out_path", type=click.Path(), default=None)
def scan(pair, pairs_file, index_path, sigmas, grid, perturb, decoder_spec, seed,
         timeout, novelty_ref, pair_latents, workers, out_path):
    """Scan perturbation noise levels between a reference pair."""
    sigma_values = [float(s) for s in sigmas.split(",") if s.strip()]
    dec, idx = _load_decoder(decoder_spec, index_path, timeout)
    ref_pair = _resolve_pair(pair, pairs_file, idx.d_fp)
    za, zb = _pair_latents(ref_pair, idx, pair_latents, dec.latent_dim)
    if novelty_ref:
        corpus_index = set(harness_mod.read_corpus(novelty_ref))
    else:
        corpus_index = set(idx.smiles)
    cfg = bridge_mod.BridgeConfig(n_grid=grid, n_perturb=perturb, seed=seed, workers=workers)
    result = bridge_mod.noise_scan(za, zb, sigma_values, dec, cfg, corpus_index)
    payload = {
        "pair": pair,
        "decoder": dec.name,
        "grid": grid,
        "perturb": perturb,
        "seed": seed,
        "sigma_star": result.sigma_star,
        "per_sigma": [
            {"sigma": s.sigma, "total": s.total, "valid": s.valid, "unique": s.unique,
             "novel": s.novel, "decode_seconds": s.decode_seconds, "error": s.error}
            for s in result.per_sigma
        ],
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text, nl=False)


@cli.command()
@copt("--pair", required=True)
@copt("--pairs-file", type=click.Path(exists=True), default=None)
@copt("--index", "index_path", type=click.Path(exists=True), required=True)
@copt("--sigma", type=float, required=True)
@copt("--grid", type=int, default=100, show_default=True)
@copt("--perturb", type=int, default=5000, show_default=True)
@copt("--decoder", "decoder_spec", default="reference", show_default=True)
@copt("--seed", type=int, default=0, show_default=True)
@copt("--timeout", type=float, default=30.0, show_default=True)
@copt("--pair-latents", type=click.Path(exists=True), default=None,
      help="JSON file with the pair's latent vectors (keys 'a'/'b')")
@copt("--workers", type=int, default=1, show_default=True)
@copt("--out", "out_path", type=click.Path(), required=True)
def run(pair, pairs_file, index_path, sigma, grid, perturb, decoder_spec, seed,
        timeout, pair_latents, workers, out_path):
    """Production bridge run: decode the full candidate set to a file."""
    dec, idx = _load_decoder(decoder_spec, index_path, timeout)
    ref_pair = _resolve_pair(pair, pairs_file, idx.d_fp)
    za, zb = _pair_latents(ref_pair, idx, pair_latents, dec.latent_dim)
    cfg = bridge_mod.BridgeConfig(n_grid=grid, n_perturb=perturb, seed=seed, workers=workers)
    t0 = time.perf_counter()
    n = 0
    with open(out_path, "w") as fh:
        fh.write("# grid_index\tperturb_index\tt\traw_smiles\tvalid\tcanonical\tdecode_micros\n")

        def sink(rec):
            nonlocal n
            fh.write(rec.to_line() + "\n")
            n += 1

        _, decode_seconds = bridge_mod.bridge_run(za, zb, sigma, dec, cfg, sink=sink)
    meta = {
        "pair": pair, "sigma": sigma, "seed": seed, "grid": grid, "perturb": perturb,
        "decoder": dec.name, "records": n,
        "decode_seconds": decode_seconds, "wall_seconds": time.perf_counter() - t0,
    }
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {n} records to {out_path}")


@cli.command()
@click.argument("generation_set", type=click.Path(exists=True))
@copt("--pair", required=True)
@copt("--pairs-file", type=click.Path(exists=True), default=None)
@copt("--training-ref", type=click.Path(exists=True), default=None,
      help="corpus defining novelty (default: the index the run used)")
@copt("--index", "index_path", type=click.Path(exists=True), default=None)
@copt("--fragscores", "frag_path", type=click.Path(exists=True), default=None,
      help="fragment score table (default: rebuilt from the novelty corpus)")
@copt("--baseline", type=click.Path(exists=True), default=None)
@copt("--qed-min", type=float, default=0.4, show_default=True)
@copt("--sas-max", type=float, default=4.0, show_default=True)
@copt("--out", "out_path", type=click.Path(), required=True)
@copt("--export-dir", type=click.Path(), default=None)
def report(generation_set, pair, pairs_file, training_ref, index_path, frag_path,
           baseline, qed_min, sas_max, out_path, export_dir):
    """Annotate a GenerationSet through the filter cascade and emit the KPI report."""
    tables = load_tables()
    if training_ref:
        training = set(harness_mod.read_corpus(training_ref))
    elif index_path:
        training = set(decoder_mod.load_latent_index(index_path).smiles)
    else:
        raise click.UsageError("either --training-ref or --index is required")
    if frag_path:
        frag = load_fragment_scores(frag_path)
    else:
        frag = build_fragment_scores(parse_smiles(s, max_len=400) for s in sorted(training))
    ref_pair = _resolve_pair(pair, pairs_file, 4096)

    records = bridge_mod.read_generation_set(generation_set)
    cascade_cfg = harness_mod.CascadeConfig(qed_min=qed_min, sas_max=sas_max)
    annotated = harness_mod.filter_cascade(records, training, ref_pair, tables, frag, cascade_cfg)
    decode_seconds = sum(r.decode_micros for r in annotated) / 1e6

    base = None
    if baseline:
        base = harness_mod.RunReport.from_json(Path(baseline).read_text())
    rep = harness_mod.kpi_report(annotated, decode_seconds, pair, base)
    Path(out_path).write_text(rep.to_json())
    if export_dir:
        ex = Path(export_dir)
        ex.mkdir(parents=True, exist_ok=True)
        harness_mod.export_distributions(
            annotated, ex / "qed_sas_scatter.csv", ex / "rds_histogram.csv"
        )
    click.echo(rep.to_json(), nl=False)


@cli.command()
@copt("--decoder", "decoder_spec", required=True,
      help="'proto:<endpoint>' or 'reference' (with --index)")
@copt("--index", "index_path", type=click.Path(exists=True), default=None)
@copt("--timeout", type=float, default=30.0, show_default=True)
def conformance(decoder_spec, index_path, timeout):
    """Run the decoder conformance harness against an implementation."""
    if decoder_spec == "reference":
        dec, _ = _load_decoder(decoder_spec, index_path, timeout)
    elif decoder_spec.startswith("proto:"):
        dec = decoder_mod.ProtocolClient(decoder_spec[len("proto:"):], timeout=timeout)
    else:
        raise click.UsageError(f"unknown decoder {decoder_spec!r}")
    report_dict = decoder_mod.check_decoder_conformance(dec)
    click.echo(json.dumps(report_dict, indent=2, sort_keys=True))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as err:
        click.echo(f"usage error: {err.format_message()}", err=True)
        return EXIT_USAGE
    except decoder_mod.DecoderTransportError as err:
        click.echo(f"decoder transport error: {err}", err=True)
        return EXIT_TRANSPORT
    except (SmilesError, FingerprintError, DescriptorError, decoder_mod.DecoderError,
            harness_mod.HarnessError, bridge_mod.BridgeError, OSError, ValueError) as err:
        click.echo(f"data error: {err}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
