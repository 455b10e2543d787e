import math

import numpy as np
import pytest

from molbridge.bridge import (
    BridgeConfig,
    BridgeError,
    CandidateRecord,
    bridge_grid,
    bridge_run,
    candidate_seed,
    noise_scan,
    perturb,
    read_generation_set,
    slerp,
    write_generation_set,
)


class ConstantDecoder:
    """Always decodes to one fixed SMILES."""

    concurrent_safe = True

    def __init__(self, smiles="C", latent_dim=8):
        self.smiles = smiles
        self.name = "constant"
        self.latent_dim = latent_dim

    def decode_batch(self, zs):
        return [self.smiles] * len(zs)


class GridEchoDecoder:
    """Maps each vector to a distinct valid SMILES keyed by its rounded
    position, so unperturbed grids give exactly n_grid unique molecules."""

    concurrent_safe = True

    def __init__(self, latent_dim=8):
        self.name = "grid-echo"
        self.latent_dim = latent_dim
        self._seen: dict[tuple, str] = {}

    def decode_batch(self, zs):
        out = []
        for z in zs:
            key = tuple(np.round(np.asarray(z), 9))
            if key not in self._seen:
                n = len(self._seen) + 1
                self._seen[key] = "C" * (n + 1)  # CC, CCC, ... all valid, distinct
            out.append(self._seen[key])
        return out


class TestSlerp:
    def test_endpoints_exact(self):
        a = np.array([0.3, -0.2, 0.9])
        b = np.array([-0.5, 0.1, 0.4])
        assert np.array_equal(slerp(a, b, 0.0), a)
        assert np.array_equal(slerp(a, b, 1.0), b)

    def test_orthonormal_midpoint(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        mid = slerp(a, b, 0.5)
        assert np.allclose(mid, (a + b) / math.sqrt(2), atol=1e-12)

    def test_parallel_fallback(self):
        a = np.array([0.5, 0.5, 0.1])
        for t in (0.25, 0.5, 0.75):
            assert np.allclose(slerp(a, a, t), a, atol=1e-15)

    def test_zero_vector_error(self):
        with pytest.raises(BridgeError, match="nonzero"):
            slerp(np.zeros(3), np.ones(3), 0.5)

    def test_antipodal_error(self):
        a = np.array([1.0, 0.0])
        with pytest.raises(BridgeError, match="antipodal"):
            slerp(a, -a, 0.5)

    def test_norm_continuity(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(16)
        b = rng.standard_normal(16)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        ts = np.linspace(0, 1, 1000)
        norms = [np.linalg.norm(slerp(a, b, float(t))) for t in ts]
        jumps = np.abs(np.diff(norms))
        assert jumps.max() < 10 * np.linalg.norm(a - b) / 1000


class TestGrid:
    def test_two_points_are_endpoints(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        grid = bridge_grid(a, b, 2)
        assert np.array_equal(grid[0], a) and np.array_equal(grid[1], b)

    def test_hundred_points(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        grid = bridge_grid(a, b, 100)
        assert len(grid) == 100
        assert np.array_equal(grid[0], a) and np.array_equal(grid[-1], b)

    def test_three_point_midpoint(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        grid = bridge_grid(a, b, 3)
        assert np.allclose(grid[1], (a + b) / math.sqrt(2), atol=1e-12)


class TestPerturb:
    def test_sigma_zero_identity(self):
        v = np.array([0.1, -0.9, 0.5])
        rng = np.random.default_rng(3)
        assert np.array_equal(perturb(v, 0.0, rng), v)

    def test_negative_sigma_error(self):
        with pytest.raises(BridgeError, match="sigma"):
            perturb(np.ones(3), -0.1, np.random.default_rng(0))

    def test_moment_estimates(self):
        # Monte-Carlo check of the noise moments
        rng = np.random.default_rng(7)
        sigma = 0.25
        n = 100_000
        draws = np.vstack([perturb(np.zeros(4), sigma, rng) for _ in range(n // 4)])
        flat = draws.ravel()
        assert abs(flat.mean()) < 4 * sigma / math.sqrt(flat.size)
        assert abs(flat.std() - sigma) / sigma < 0.05


class TestSeeds:
    def test_candidate_seed_is_pure(self):
        assert candidate_seed(42, 3, 7) == candidate_seed(42, 3, 7)

    def test_candidate_seed_varies(self):
        seeds = {candidate_seed(42, g, p) for g in range(20) for p in range(20)}
        assert len(seeds) == 400


class TestRun:
    def test_candidate_count_conservation(self):
        cfg = BridgeConfig(n_grid=5, n_perturb=7, seed=1)
        a, b = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        records, _ = bridge_run(a, b, 0.1, ConstantDecoder(latent_dim=3), cfg)
        assert len(records) == 5 * 7
        assert [(r.grid_index, r.perturb_index) for r in records] == [
            (g, p) for g in range(5) for p in range(7)
        ]

    def test_deterministic_across_worker_counts(self):
        class ContentDecoder:
            # pure function of the vector, safe under any scheduling
            concurrent_safe = True
            name = "content"
            latent_dim = 3

            def decode_batch(self, zs):
                return ["C" * (1 + hash(tuple(np.round(z, 9))) % 40) for z in zs]

        a, b = np.array([1.0, 0.0, 0.2]), np.array([0.0, 1.0, -0.3])
        outs = []
        for workers in (1, 4):
            cfg = BridgeConfig(n_grid=6, n_perturb=5, seed=9, workers=workers)
            records, _ = bridge_run(a, b, 0.2, ContentDecoder(), cfg)
            outs.append([(r.grid_index, r.perturb_index, r.raw_smiles) for r in records])
        assert outs[0] == outs[1]

    def test_file_roundtrip(self, tmp_path):
        cfg = BridgeConfig(n_grid=3, n_perturb=2, seed=5)
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        records, _ = bridge_run(a, b, 0.0, ConstantDecoder(latent_dim=2), cfg)
        path = tmp_path / "gen.tsv"
        assert write_generation_set(path, records) == 6
        loaded = list(read_generation_set(path))
        assert loaded == records

    def test_invalid_decodes_flagged(self):
        class BadDecoder(ConstantDecoder):
            def decode_batch(self, zs):
                return ["C1CC"] * len(zs)  # unclosed ring: invalid

        cfg = BridgeConfig(n_grid=2, n_perturb=2, seed=0)
        records, _ = bridge_run(
            np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0, BadDecoder(), cfg
        )
        assert all(not r.valid and r.canonical == "" for r in records)


class TestScan:
    def test_sigma_zero_constant_decoder(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        cfg = BridgeConfig(n_grid=4, n_perturb=3, seed=2)
        result = noise_scan(a, b, [0.0], ConstantDecoder(latent_dim=2), cfg, set())
        scan = result.per_sigma[0]
        assert scan.total == 12 and scan.valid == 12
        assert scan.unique == 1
        assert result.sigma_star == 0.0

    def test_grid_echo_unique_equals_grid(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        cfg = BridgeConfig(n_grid=8, n_perturb=4, seed=2)
        result = noise_scan(a, b, [0.0], GridEchoDecoder(latent_dim=2), cfg, set())
        assert result.per_sigma[0].unique == 8

    def test_tie_breaks_toward_smaller_sigma(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        cfg = BridgeConfig(n_grid=3, n_perturb=2, seed=0)
        result = noise_scan(a, b, [0.3, 0.1, 0.2], ConstantDecoder(latent_dim=2), cfg, set())
        assert result.sigma_star == 0.1

    def test_novelty_against_corpus_index(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        cfg = BridgeConfig(n_grid=4, n_perturb=1, seed=0)
        decoder = GridEchoDecoder(latent_dim=2)
        known = {"CC", "CCC"}  # two of the four decoded forms are known
        result = noise_scan(a, b, [0.0], decoder, cfg, known)
        assert result.per_sigma[0].unique == 4
        assert result.per_sigma[0].novel == 2

    def test_transport_error_aborts_that_sigma_only(self):
        from molbridge.decoder import DecoderTransportError

        class FlakyDecoder(ConstantDecoder):
            def decode_batch(self, zs):
                if any(np.linalg.norm(z) > 1.2 for z in zs):
                    raise DecoderTransportError("boom")
                return super().decode_batch(zs)

        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        cfg = BridgeConfig(n_grid=3, n_perturb=4, seed=1)
        result = noise_scan(a, b, [0.0, 5.0], FlakyDecoder(latent_dim=2), cfg, set())
        assert result.per_sigma[0].error is None
        assert result.per_sigma[1].error is not None
        assert result.sigma_star == 0.0
