"""Tokenization, vocabulary construction/persistence, and marshalling of
patches into fixed-shape numeric encodings.

A persisted vocabulary is all that is needed to encode new patches later;
the original corpus never has to be kept around.
"""

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ingest import Label
from .patch import LineTag, Patch

PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_MSG_SPLIT = re.compile(r"[^a-z0-9_]+")
_HEX12 = re.compile(r"^[0-9a-f]{12,}$")
_CODE_STRING = re.compile(r'"(?:[^"\\]|\\.)*("|$)')
_CODE_TOKEN = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")


def tokenize_message(text: str):
    """Lowercased word tokens; long numbers and sha-like hex are folded."""
    tokens = []
    for tok in _MSG_SPLIT.split(text.lower()):
        if not tok:
            continue
        if tok.isdigit() and len(tok) > 8:
            tokens.append("<num>")
        elif _HEX12.match(tok):
            tokens.append("<sha>")
        else:
            tokens.append(tok)
    return tokens


def tokenize_code_line(text: str):
    """Identifier runs and single punctuation characters, case preserved.

    Double-quoted string literal contents collapse to one <str> token.
    """
    tokens = []
    pos = 0
    for m in _CODE_STRING.finditer(text):
        tokens.extend(_CODE_TOKEN.findall(text[pos:m.start()]))
        tokens.append("<str>")
        pos = m.end()
    tokens.extend(_CODE_TOKEN.findall(text[pos:]))
    return tokens


class VocabKind(Enum):
    MESSAGE = "message"
    CODE = "code"


@dataclass(frozen=True)
class Vocab:
    kind: VocabKind
    token_to_index: dict
    min_freq: int

    @property
    def size(self) -> int:
        return len(self.token_to_index)

    def lookup(self, token: str) -> int:
        return self.token_to_index.get(token, UNK)


def build_vocab(token_streams, kind: VocabKind, min_freq: int) -> Vocab:
    """Index tokens seen at least min_freq times, most frequent first.

    Ties break lexicographically so the assignment is deterministic
    regardless of input order.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter()
    for stream in token_streams:
        counts.update(stream)
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    mapping = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
    for i, tok in enumerate(kept):
        mapping[tok] = i + 2
    return Vocab(kind=kind, token_to_index=mapping, min_freq=min_freq)


def vocab_to_bytes(vocab: Vocab) -> bytes:
    """Canonical single-line JSON; identical vocabs serialize identically."""
    ordered = sorted(
        (tok for tok in vocab.token_to_index if tok not in (PAD_TOKEN, UNK_TOKEN)),
        key=lambda tok: vocab.token_to_index[tok],
    )
    doc = {"kind": vocab.kind.value, "min_freq": vocab.min_freq, "tokens": ordered}
    return (json.dumps(doc, ensure_ascii=True, separators=(",", ":")) + "\n").encode("utf-8")


def vocab_from_bytes(data: bytes) -> Vocab:
    doc = json.loads(data.decode("utf-8"))
    mapping = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
    for i, tok in enumerate(doc["tokens"]):
        mapping[tok] = i + 2
    return Vocab(kind=VocabKind(doc["kind"]), token_to_index=mapping, min_freq=int(doc["min_freq"]))


def save_vocab(vocab: Vocab, path: str):
    with open(path, "wb") as fh:
        fh.write(vocab_to_bytes(vocab))


def load_vocab(path: str) -> Vocab:
    with open(path, "rb") as fh:
        return vocab_from_bytes(fh.read())


@dataclass(frozen=True)
class EncodeConfig:
    max_msg_tokens: int = 64
    max_files: int = 8
    max_lines: int = 16      # per change side per file
    max_line_tokens: int = 32

    def __post_init__(self):
        for name in ("max_msg_tokens", "max_files", "max_lines", "max_line_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


class EncodedFile:
    """Removed-side and added-side token id matrices for one file."""

    __slots__ = ("removed_ids", "added_ids")

    def __init__(self, removed_ids, added_ids):
        self.removed_ids = np.asarray(removed_ids, dtype=np.int64)
        self.added_ids = np.asarray(added_ids, dtype=np.int64)

    def __eq__(self, other):
        return (
            isinstance(other, EncodedFile)
            and np.array_equal(self.removed_ids, other.removed_ids)
            and np.array_equal(self.added_ids, other.added_ids)
        )

    def __repr__(self):
        return f"EncodedFile(removed={self.removed_ids.shape}, added={self.added_ids.shape})"


class EncodedPatch:
    __slots__ = ("sha", "msg_ids", "files", "label")

    def __init__(self, sha, msg_ids, files, label=None):
        self.sha = sha
        self.msg_ids = np.asarray(msg_ids, dtype=np.int64)
        self.files = tuple(files)
        self.label = label

    def __eq__(self, other):
        return (
            isinstance(other, EncodedPatch)
            and self.sha == other.sha
            and np.array_equal(self.msg_ids, other.msg_ids)
            and self.files == other.files
            and self.label == other.label
        )

    def __repr__(self):
        return f"EncodedPatch(sha={self.sha[:12]}, files={len(self.files)}, label={self.label})"


def encode_tokens(tokens, vocab: Vocab, length: int):
    """Map tokens to ids, truncate at length, pad the tail with PAD."""
    ids = np.zeros(length, dtype=np.int64)
    for i, tok in enumerate(tokens[:length]):
        ids[i] = vocab.lookup(tok)
    return ids


def encode_message(tokens, vocab: Vocab, max_len: int):
    if vocab.kind is not VocabKind.MESSAGE:
        raise ValueError("message encoding requires a message vocabulary")
    return encode_tokens(tokens, vocab, max_len)


def _encode_side(texts, vocab, cfg: EncodeConfig):
    mat = np.zeros((cfg.max_lines, cfg.max_line_tokens), dtype=np.int64)
    for r, text in enumerate(texts[:cfg.max_lines]):
        mat[r] = encode_tokens(tokenize_code_line(text), vocab, cfg.max_line_tokens)
    return mat


def encode_patch(patch: Patch, vocab_msg: Vocab, vocab_code: Vocab, cfg: EncodeConfig, label=None) -> EncodedPatch:
    """Fixed-shape numeric encoding preserving per-file structure.

    Context lines are ignored; the removed/added lines are the change.
    Truncation keeps the earliest tokens, lines and files.
    """
    if vocab_msg.kind is not VocabKind.MESSAGE or vocab_code.kind is not VocabKind.CODE:
        raise ValueError("vocabulary kinds are swapped or wrong")
    msg_ids = encode_tokens(tokenize_message(patch.commit.message), vocab_msg, cfg.max_msg_tokens)
    files = []
    for fc in patch.files[:cfg.max_files]:
        removed = [text for h in fc.hunks for tag, text in h.lines if tag is LineTag.REMOVED]
        added = [text for h in fc.hunks for tag, text in h.lines if tag is LineTag.ADDED]
        files.append(
            EncodedFile(
                removed_ids=_encode_side(removed, vocab_code, cfg),
                added_ids=_encode_side(added, vocab_code, cfg),
            )
        )
    return EncodedPatch(sha=patch.commit.sha, msg_ids=msg_ids, files=files, label=label)


def label_to_int(label: Label) -> int:
    return 1 if label is Label.BUG_FIX else 0


def encode_corpus(labeled_patches, vocab_msg, vocab_code, cfg: EncodeConfig):
    return [
        encode_patch(lp.patch, vocab_msg, vocab_code, cfg, label=label_to_int(lp.label))
        for lp in labeled_patches
    ]


def build_vocabs_from_patches(patches, min_freq_msg: int = 3, min_freq_code: int = 5):
    """Build both vocabularies in one pass over the training patches."""
    msg_streams = []
    code_streams = []
    for p in patches:
        msg_streams.append(tokenize_message(p.commit.message))
        for fc in p.files:
            for h in fc.hunks:
                for tag, text in h.lines:
                    if tag is not LineTag.CONTEXT:
                        code_streams.append(tokenize_code_line(text))
    vocab_msg = build_vocab(msg_streams, VocabKind.MESSAGE, min_freq_msg)
    vocab_code = build_vocab(code_streams, VocabKind.CODE, min_freq_code)
    return vocab_msg, vocab_code


# ---------------------------------------------------------------------------
# Intermediate file: JSON-lines, one encoded patch per line.


def encoded_to_dict(enc: EncodedPatch) -> dict:
    return {
        "sha": enc.sha,
        "msg_ids": enc.msg_ids.tolist(),
        "files": [
            {"removed_ids": f.removed_ids.tolist(), "added_ids": f.added_ids.tolist()}
            for f in enc.files
        ],
        "label": enc.label,
    }


def encoded_from_dict(d: dict) -> EncodedPatch:
    return EncodedPatch(
        sha=d["sha"],
        msg_ids=d["msg_ids"],
        files=[EncodedFile(f["removed_ids"], f["added_ids"]) for f in d["files"]],
        label=d["label"],
    )


def write_encoded(encs, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        for enc in encs:
            fh.write(json.dumps(encoded_to_dict(enc), separators=(",", ":")) + "\n")


def read_encoded(path: str):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(encoded_from_dict(json.loads(line)))
    return out
