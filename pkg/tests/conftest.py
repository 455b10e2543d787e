from pathlib import Path

import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "molbridge" / "data"


def read_corpus(path: Path) -> list[str]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            out.append(line.split("\t")[0])
    return out


@pytest.fixture(scope="session")
def corpus_1k() -> list[str]:
    return read_corpus(DATA_DIR / "corpus_1k.smi")


@pytest.fixture(scope="session")
def corpus_10k() -> list[str]:
    return read_corpus(DATA_DIR / "corpus_10k.smi")


@pytest.fixture(scope="session")
def corpus_10k_mols(corpus_10k):
    from molbridge.molgraph import parse_smiles

    return [parse_smiles(s) for s in corpus_10k]
