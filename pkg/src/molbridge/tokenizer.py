"""Atomwise SMILES tokenization, vocabulary construction, and fixed-length codes."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

PAD, SOS, EOS, UNK = "<PAD>", "<SOS>", "<EOS>", "<UNK>"
RESERVED = (PAD, SOS, EOS, UNK)


class TokenizeError(ValueError):
    pass


class EncodeError(ValueError):
    pass


def tokenize_atomwise(text: str) -> list[str]:
    """Split a SMILES string into atomwise tokens.

    Greedy left to right: a bracket atom ``[...]`` is one token, ``%nn`` is
    one token, ``Cl`` and ``Br`` are one token, and every other character is
    its own token. The concatenation of the tokens reproduces the input
    exactly. Raises :class:`TokenizeError` on an unterminated bracket.
    """
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise TokenizeError(f"unterminated '[' bracket at position {i}")
            tokens.append(text[i : end + 1])
            i = end + 1
        elif ch == "%" and i + 2 < n + 1 and text[i + 1 : i + 3].isdigit():
            tokens.append(text[i : i + 3])
            i += 3
        elif text[i : i + 2] in ("Cl", "Br"):
            tokens.append(text[i : i + 2])
            i += 2
        else:
            tokens.append(ch)
            i += 1
    return tokens


@dataclass(frozen=True)
class Vocab:
    """Immutable token vocabulary with reserved PAD/SOS/EOS/UNK entries.

    PAD has id 0; reserved ids precede corpus tokens, which are ordered by
    descending frequency then lexicographically, so construction is
    deterministic and corpus-order independent.
    """

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)}
        )

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def sos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for token in self.id_to_token:
                fh.write(token + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path) as fh:
            tokens = [line.rstrip("\n") for line in fh]
        tokens = [t for t in tokens if t]
        if tuple(tokens[:4]) != RESERVED:
            raise ValueError(f"vocab file {path} must start with {RESERVED}")
        return cls(tuple(tokens))


def build_vocab(corpus: Iterable[list[str]]) -> Vocab:
    """Build a :class:`Vocab` from a stream of token sequences."""
    counts: Counter[str] = Counter()
    empty = True
    for seq in corpus:
        empty = False
        counts.update(seq)
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(RESERVED + tuple(ordered))


def encode(tokens: list[str], vocab: Vocab, max_len: int, allow_unk: bool = False) -> list[int]:
    """Encode tokens as ``[SOS, ids..., EOS, PAD...]`` of exactly ``max_len``.

    Raises :class:`EncodeError` when the sequence does not fit or contains a
    token outside the vocabulary while ``allow_unk`` is off.
    """
    if len(tokens) + 2 > max_len:
        raise EncodeError(
            f"sequence of {len(tokens)} tokens does not fit max_len {max_len}"
        )
    ids = [vocab.sos_id]
    for tok in tokens:
        tid = vocab.token_to_id.get(tok)
        if tid is None:
            if not allow_unk:
                raise EncodeError(f"unknown token {tok!r}")
            tid = vocab.unk_id
        ids.append(tid)
    ids.append(vocab.eos_id)
    ids.extend([vocab.pad_id] * (max_len - len(ids)))
    return ids


def decode(ids: Iterable[int], vocab: Vocab) -> str:
    """Concatenate the tokens between SOS and the first EOS, ignoring PAD."""
    out: list[str] = []
    for tid in ids:
        if tid < 0 or tid >= len(vocab):
            raise ValueError(f"token id {tid} out of range for vocab of {len(vocab)}")
        if tid == vocab.eos_id:
            break
        if tid in (vocab.pad_id, vocab.sos_id):
            continue
        out.append(vocab.id_to_token[tid])
    return "".join(out)
