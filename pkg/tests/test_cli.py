import json
from pathlib import Path

import pytest

from molbridge.cli import main

DATA = Path(__file__).resolve().parents[1] / "src" / "molbridge" / "data"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, corpus_1k):
    """Prepped corpus, fingerprints, fragment scores, and index for CLI runs."""
    ws = tmp_path_factory.mktemp("cli")
    raw = ws / "raw.smi"
    raw.write_text("".join(f"{s}\tR{i}\n" for i, s in enumerate(corpus_1k[:400])))
    assert main(["prep", str(raw), str(ws / "corpus")]) == 0
    assert main(["fp", str(ws / "corpus.train.smi"), str(ws / "fps.bin")]) == 0
    assert main(["fragscores", str(ws / "corpus.train.smi"), str(ws / "frag.bin")]) == 0
    assert main([
        "index", str(ws / "corpus.train.smi"), str(ws / "index.lix"),
        "--seed", "11", "--latent-dim", "24",
    ]) == 0
    return ws


class TestPipeline:
    def test_prep_outputs_exist(self, workspace):
        for suffix in (".clean.smi", ".train.smi", ".test.smi", ".stats.json"):
            assert (workspace / f"corpus{suffix}").exists()

    def test_scan_and_run_and_report(self, workspace):
        scan_out = workspace / "scan.json"
        rc = main([
            "scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--sigmas", "0.0,0.2", "--grid", "5", "--perturb", "4",
            "--seed", "3", "--out", str(scan_out),
        ])
        assert rc == 0
        scan = json.loads(scan_out.read_text())
        assert all(s["total"] == 20 for s in scan["per_sigma"])
        assert scan["sigma_star"] in (0.0, 0.2)

        gen = workspace / "gen.tsv"
        rc = main([
            "run", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--sigma", "0.2", "--grid", "5", "--perturb", "4",
            "--seed", "3", "--out", str(gen),
        ])
        assert rc == 0
        lines = [l for l in gen.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 20

        report_out = workspace / "report.json"
        rc = main([
            "report", str(gen), "--pair", "NSAID",
            "--index", str(workspace / "index.lix"),
            "--fragscores", str(workspace / "frag.bin"),
            "--out", str(report_out), "--export-dir", str(workspace / "exports"),
        ])
        assert rc == 0
        rep = json.loads(report_out.read_text())
        c = rep["counts"]
        assert c["total"] == 20
        assert c["total"] >= c["valid"] >= c["unique"] >= c["novel"] >= c["pc"] >= c["nbm"]
        assert (workspace / "exports" / "qed_sas_scatter.csv").exists()
        assert (workspace / "exports" / "rds_histogram.csv").exists()

    def test_report_with_baseline_ratios(self, workspace):
        gen = workspace / "gen.tsv"
        base = workspace / "report.json"
        out = workspace / "report2.json"
        rc = main([
            "report", str(gen), "--pair", "NSAID",
            "--index", str(workspace / "index.lix"),
            "--fragscores", str(workspace / "frag.bin"),
            "--baseline", str(base), "--out", str(out),
        ])
        assert rc == 0
        rep = json.loads(out.read_text())
        assert rep["delta_sas"] == pytest.approx(0.0)
        ratios = rep["timing"]["efficiency_vs_baseline"]
        for stage, ratio in ratios.items():
            assert ratio == pytest.approx(1.0)

    def test_conformance_reference(self, workspace):
        rc = main(["conformance", "--decoder", "reference",
                   "--index", str(workspace / "index.lix")])
        assert rc == 0

    def test_scan_with_external_pair_latents(self, workspace, tmp_path):
        import numpy as np

        from molbridge.decoder import load_latent_index

        idx = load_latent_index(workspace / "index.lix")
        rng = np.random.default_rng(8)
        latents = {
            "a": rng.uniform(-1, 1, idx.d_latent).tolist(),
            "b": rng.uniform(-1, 1, idx.d_latent).tolist(),
        }
        lat_file = tmp_path / "latents.json"
        lat_file.write_text(json.dumps(latents))
        out = tmp_path / "scan.json"
        rc = main([
            "scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--pair-latents", str(lat_file),
            "--sigmas", "0.0", "--grid", "3", "--perturb", "2", "--out", str(out),
        ])
        assert rc == 0
        assert json.loads(out.read_text())["per_sigma"][0]["total"] == 6

    def test_pair_latents_dimension_mismatch_is_usage_error(self, workspace, tmp_path):
        lat_file = tmp_path / "latents.json"
        lat_file.write_text(json.dumps({"a": [0.1, 0.2], "b": [0.3, 0.4]}))
        rc = main([
            "scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--pair-latents", str(lat_file), "--sigmas", "0.0",
            "--grid", "2", "--perturb", "1",
        ])
        assert rc == 1


class TestConfigAndExitCodes:
    def test_usage_error_is_1(self, workspace):
        assert main(["scan", "--pair", "NOPE", "--index", str(workspace / "index.lix")]) == 1
        assert main(["scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
                     "--decoder", "bogus"]) == 1

    def test_missing_required_flag_is_1(self):
        assert main(["scan"]) == 1

    def test_data_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.smi"
        bad.write_text("this_is_not_smiles\tX\n")
        assert main(["fp", str(bad), str(tmp_path / "out.bin")]) == 2

    def test_transport_error_is_3(self, workspace):
        rc = main([
            "scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--decoder", "proto:127.0.0.1:1", "--timeout", "1",
            "--sigmas", "0.0", "--grid", "2", "--perturb", "1",
        ])
        assert rc == 3

    def test_config_file_flag_precedence(self, workspace, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid=3\nperturb=2\nseed=9\n")
        out = tmp_path / "scan.json"
        rc = main([
            "--config", str(cfg),
            "scan", "--pair", "NSAID", "--index", str(workspace / "index.lix"),
            "--sigmas", "0.0", "--perturb", "5", "--out", str(out),
        ])
        assert rc == 0
        scan = json.loads(out.read_text())
        # grid came from config, perturb from the explicit flag
        assert scan["grid"] == 3 and scan["perturb"] == 5
        assert scan["seed"] == 9
        assert scan["per_sigma"][0]["total"] == 15
