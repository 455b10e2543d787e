import json
import socket
import threading

import numpy as np
import pytest

from molbridge.decoder import (
    DecoderError,
    DecoderTransportError,
    LatentIndex,
    ProtocolClient,
    ReferenceDecoder,
    build_latent_index,
    check_decoder_conformance,
    load_latent_index,
    nn_decode,
    projection_matrix,
    reference_encode,
    save_latent_index,
)
from molbridge.fingerprint import morgan_fingerprint
from molbridge.molgraph import parse_smiles


@pytest.fixture(scope="module")
def small_index(corpus_1k):
    mols = [parse_smiles(s) for s in corpus_1k[:200]]
    return build_latent_index(mols, seed=77, d_latent=16)


class TestReferenceEncode:
    def test_deterministic(self):
        fp = morgan_fingerprint(parse_smiles("CCO"))
        proj = projection_matrix(5, fp.n_bits, 8)
        assert np.array_equal(reference_encode(fp, proj), reference_encode(fp, proj))

    def test_bounded_open_interval(self, corpus_1k):
        proj = projection_matrix(5, 4096, 12)
        for smiles in corpus_1k[:100]:
            z = reference_encode(morgan_fingerprint(parse_smiles(smiles)), proj)
            assert np.all(z > -1.0) and np.all(z < 1.0)

    def test_identical_fingerprints_identical_latents(self):
        proj = projection_matrix(5, 4096, 8)
        z1 = reference_encode(morgan_fingerprint(parse_smiles("CCO")), proj)
        z2 = reference_encode(morgan_fingerprint(parse_smiles("OCC")), proj)
        assert np.array_equal(z1, z2)

    def test_empty_fingerprint_error(self):
        from molbridge.fingerprint import Fingerprint

        with pytest.raises(DecoderError, match="empty"):
            reference_encode(Fingerprint(0, 4096, 2), projection_matrix(1, 4096, 4))

    def test_width_mismatch(self):
        fp = morgan_fingerprint(parse_smiles("C"), n_bits=1024)
        with pytest.raises(DecoderError, match="width"):
            reference_encode(fp, projection_matrix(1, 4096, 4))


class TestLatentIndex:
    def test_single_molecule(self):
        index = build_latent_index([parse_smiles("CCO")], seed=1, d_latent=4)
        assert len(index) == 1

    def test_duplicates_removed(self):
        mols = [parse_smiles(s) for s in ("CCO", "OCC", "C(O)C")]
        index = build_latent_index(mols, seed=1, d_latent=4)
        assert len(index) == 1

    def test_save_load_identical_bytes(self, tmp_path, small_index):
        p1, p2 = tmp_path / "a.lix", tmp_path / "b.lix"
        save_latent_index(p1, small_index)
        save_latent_index(p2, small_index)
        assert p1.read_bytes() == p2.read_bytes()
        loaded = load_latent_index(p1)
        assert loaded.smiles == small_index.smiles
        assert np.array_equal(loaded.latents, small_index.latents)
        assert np.array_equal(loaded.projection, small_index.projection)


class TestNnDecode:
    def test_own_latent_maps_to_entry(self, small_index):
        for i in (0, 17, 101):
            z = small_index.latents[i].astype(np.float64)
            assert nn_decode(z, small_index) == small_index.smiles[i]

    def test_equidistant_tie_lexicographic(self):
        index = LatentIndex(
            seed=0, d_latent=2, d_fp=64, radius=2,
            smiles=["CCO", "CCN"],
            fingerprints=[morgan_fingerprint(parse_smiles("CCO"), n_bits=64),
                          morgan_fingerprint(parse_smiles("CCN"), n_bits=64)],
            latents=np.array([[1.0, 0.0], [-1.0, 0.0]], dtype=np.float32),
        )
        assert nn_decode(np.zeros(2), index) == "CCN"

    def test_matches_exhaustive_oracle(self, small_index):
        rng = np.random.default_rng(3)
        lat = small_index.latents.astype(np.float64)
        for _ in range(200):
            z = rng.uniform(-1, 1, size=small_index.d_latent)
            d2 = ((lat - z) ** 2).sum(axis=1)
            best = d2.min()
            expected = min(small_index.smiles[int(i)] for i in np.flatnonzero(d2 == best))
            assert nn_decode(z, small_index) == expected

    def test_batch_decoder_agrees_with_single(self, small_index):
        decoder = ReferenceDecoder(small_index)
        rng = np.random.default_rng(4)
        zs = [rng.uniform(-1, 1, size=small_index.d_latent) for _ in range(50)]
        batch = decoder.decode_batch(zs)
        single = [nn_decode(z, small_index) for z in zs]
        assert batch == single

    def test_reference_decoder_total(self, small_index):
        decoder = ReferenceDecoder(small_index)
        rng = np.random.default_rng(5)
        out = decoder.decode_batch([rng.standard_normal(small_index.d_latent) * 10 for _ in range(20)])
        assert all(isinstance(s, str) for s in out)

    def test_conformance(self, small_index):
        report = check_decoder_conformance(ReferenceDecoder(small_index))
        assert report["name"] == "reference"


# ---------------------------------------------------------------------------
# Protocol peer for client tests
# ---------------------------------------------------------------------------


class TcpPeer:
    """Minimal protocol peer: handshake then scripted per-request behavior."""

    def __init__(self, latent_dim=4, behavior=None, shuffle=False, name="echo"):
        self.latent_dim = latent_dim
        self.behavior = behavior or (lambda rid, z: (True, "C"))
        self.shuffle = shuffle
        self.name = name
        self.server = socket.create_server(("127.0.0.1", 0))
        self.port = self.server.getsockname()[1]
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self.thread.start()

    def _serve(self):
        conn, _ = self.server.accept()
        fh_r = conn.makefile("rb")
        fh_w = conn.makefile("wb")
        fh_w.write(json.dumps({"latent_dim": self.latent_dim, "name": self.name}).encode() + b"\n")
        fh_w.flush()
        pending = []
        while True:
            line = fh_r.readline()
            if not line:
                break
            req = json.loads(line)
            ok, smiles = self.behavior(req["id"], req["z"])
            frame = {"id": req["id"], "ok": ok}
            if ok:
                frame["smiles"] = smiles
            pending.append(frame)
            flush_now = len(pending) >= 3 if self.shuffle else True
            if flush_now:
                if self.shuffle:
                    pending.reverse()
                for f in pending:
                    fh_w.write(json.dumps(f).encode() + b"\n")
                pending = []
                fh_w.flush()
        for f in pending:
            fh_w.write(json.dumps(f).encode() + b"\n")
        fh_w.flush()

    def close(self):
        self.server.close()


class TestProtocolClient:
    def test_echo_peer_all_results(self):
        peer = TcpPeer(latent_dim=4)
        with ProtocolClient(f"127.0.0.1:{peer.port}", timeout=5) as client:
            assert client.latent_dim == 4 and client.name == "echo"
            out = client.decode_batch([np.zeros(4)] * 10)
        assert out == ["C"] * 10
        peer.close()

    def test_failure_slot_isolated(self):
        peer = TcpPeer(behavior=lambda rid, z: (rid % 3 != 1, "CC"))
        with ProtocolClient(f"127.0.0.1:{peer.port}", timeout=5) as client:
            out = client.decode_batch([np.zeros(4)] * 6)
        assert out == ["CC", None, "CC", "CC", None, "CC"]
        peer.close()

    def test_out_of_order_responses_reordered(self):
        peer = TcpPeer(behavior=lambda rid, z: (True, f"{'C' * (rid + 1)}"), shuffle=True)
        with ProtocolClient(f"127.0.0.1:{peer.port}", timeout=5) as client:
            out = client.decode_batch([np.zeros(4)] * 9)
        assert out == ["C" * (i + 1) for i in range(9)]
        peer.close()

    def test_large_batch_each_id_once(self):
        seen = set()

        def behavior(rid, z):
            assert rid not in seen
            seen.add(rid)
            return True, "C"

        peer = TcpPeer(behavior=behavior)
        with ProtocolClient(f"127.0.0.1:{peer.port}", timeout=30) as client:
            out = client.decode_batch([np.zeros(4)] * 2000)
        assert len(out) == 2000 and len(seen) == 2000
        assert seen == set(range(2000))
        peer.close()

    def test_malformed_frame_raises_transport_error(self):
        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]

        def serve():
            conn, _ = server.accept()
            fh = conn.makefile("rwb")
            fh.write(json.dumps({"latent_dim": 4, "name": "bad"}).encode() + b"\n")
            fh.flush()
            fh.readline()
            fh.write(b"this is not json\n")
            fh.flush()

        threading.Thread(target=serve, daemon=True).start()
        with ProtocolClient(f"127.0.0.1:{port}", timeout=5) as client:
            with pytest.raises(DecoderTransportError, match="malformed"):
                client.decode_batch([np.zeros(4)])
        server.close()

    def test_connection_refused(self):
        with pytest.raises(DecoderTransportError, match="cannot connect"):
            ProtocolClient("127.0.0.1:1", timeout=1)

    def test_stdio_subprocess_peer(self, tmp_path):
        script = tmp_path / "peer.py"
        script.write_text(
            "import json, sys\n"
            "sys.stdout.write(json.dumps({'latent_dim': 3, 'name': 'stdio'}) + '\\n')\n"
            "sys.stdout.flush()\n"
            "for line in sys.stdin:\n"
            "    req = json.loads(line)\n"
            "    sys.stdout.write(json.dumps({'id': req['id'], 'ok': True, 'smiles': 'CCO'}) + '\\n')\n"
            "    sys.stdout.flush()\n"
        )
        with ProtocolClient(f"cmd:python3 {script}", timeout=10) as client:
            assert client.name == "stdio"
            assert client.decode_batch([np.zeros(3)] * 4) == ["CCO"] * 4
