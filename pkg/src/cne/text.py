"""Tokenization and the shared token vocabulary."""
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

log = logging.getLogger(__name__)

UNK = "<UNK>"
UNK_ID = 0
DEFAULT_MAX_LEN = 64
# separates the n sub-sequences of a multi-sequence node's attribute text
SEQUENCE_SEPARATOR = "|||"


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> List[str]:
    """Lowercase, split on whitespace, strip punctuation from token edges.

    >>> tokenize("BPA-Free 4oz!")
    ['bpa-free', '4oz']
    """
    out = []
    for raw in text.lower().split():
        lo, hi = 0, len(raw)
        while lo < hi and _is_punct(raw[lo]):
            lo += 1
        while hi > lo and _is_punct(raw[hi - 1]):
            hi -= 1
        if lo < hi:
            out.append(raw[lo:hi])
    return out


class Vocabulary:
    """Token <-> id map with ``<UNK>`` fixed at id 0."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if not tokens or tokens[0] != UNK:
            tokens.insert(0, UNK)
        self.itos: List[str] = tokens
        self.stoi: Dict[str, int] = {t: i for i, t in enumerate(tokens)}
        if len(self.stoi) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, token):
        return self.stoi.get(token, UNK_ID)

    def save(self, path, header=None):
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")  # tokens never start with '#'
            for tok in self.itos:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if not line.startswith("#")]
        if not tokens or tokens[0] != UNK:
            raise ValueError(f"{path}: first line must be {UNK}")
        return cls(tokens)


def build_vocabulary(corpus: Mapping[str, str], max_size: int) -> Vocabulary:
    """Keep the ``max_size`` most frequent tokens (ties: lexicographic)."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts = Counter()
    for text in corpus.values():
        for chunk in text.split(SEQUENCE_SEPARATOR):
            counts.update(tokenize(chunk))
    counts.pop(UNK, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([UNK] + [tok for tok, _ in ranked[:max_size]])


@dataclass(frozen=True)
class TokenSequence:
    node: int
    ids: Tuple[int, ...]

    def __len__(self):
        return len(self.ids)


def encode_ids(vocab: Vocabulary, text: str, max_len: int = DEFAULT_MAX_LEN) -> Tuple[int, ...]:
    ids = [vocab.id(t) for t in tokenize(text)][:max_len]
    return tuple(ids) if ids else (UNK_ID,)


def encode_sequence(vocab: Vocabulary, text: str, node: int = -1, max_len: int = DEFAULT_MAX_LEN):
    """Token ids of ``text``; OOV tokens map to UNK, empty text to ``[UNK]``."""
    return TokenSequence(node, encode_ids(vocab, text, max_len))


def encode_nodes(graph, texts: Mapping[str, str], vocab: Vocabulary, arity=None,
                 max_len: int = DEFAULT_MAX_LEN):
    """Per-node tuple of token-id sequences, indexed by node id.

    ``arity`` maps node type -> number of sequences the node's encoder reads
    (default 1). Multi-sequence text is split on ``|||``. Nodes without
    attribute text get ``[UNK]`` sequences.
    """
    arity = arity or {}
    out = []
    missing = 0
    for v, label in enumerate(graph.labels):
        n = arity.get(graph.node_type[v], 1)
        text = texts.get(label)
        if text is None:
            missing += 1
            out.append(((UNK_ID,),) * n)
            continue
        chunks = text.split(SEQUENCE_SEPARATOR) if n > 1 else [text]
        if len(chunks) != n:
            raise ValueError(f"node {label!r} has {len(chunks)} attribute sequences, its encoder expects {n}")
        out.append(tuple(encode_ids(vocab, c, max_len) for c in chunks))
    if missing:
        log.warning("%d node(s) have no attribute text; using <UNK>", missing)
    return out
