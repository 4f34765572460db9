"""Corpus ingestion: tokenization, vocabulary, document encoding, keyword schema."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

# word characters, optionally chained into a pre-mined phrase with "###"
_TOKEN_RE = re.compile(r"\w+(?:###\w+)*")


class CorpusError(ValueError):
    pass


class SchemaError(ValueError):
    """Raised for malformed or invalid keyword schema files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def tokenize(raw_text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation, keeping ``a###b`` phrases whole."""
    return _TOKEN_RE.findall(raw_text.lower())


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: list[int]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise CorpusError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __getitem__(self, token):
        return self.index[token]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for tok, c in zip(self.tokens, self.counts):
                f.write(f"{tok}\t{c}\n")

    @classmethod
    def load(cls, path):
        tokens, counts = [], []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise CorpusError(f"{path}:{lineno}: expected 'token<TAB>count'")
                tokens.append(parts[0])
                counts.append(int(parts[1]))
        return cls(tokens, counts)


def build_vocabulary(documents: Iterable[Sequence[str]], min_count: int = 3) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times.

    Ids are assigned by descending count, ties broken lexicographically, so the
    result does not depend on document order.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter[str] = Counter()
    for doc in documents:
        counter.update(doc)
    kept = sorted(
        ((tok, c) for tok, c in counter.items() if c >= min_count),
        key=lambda tc: (-tc[1], tc[0]),
    )
    if not kept:
        raise CorpusError(f"empty vocabulary: no token occurs >= {min_count} times")
    return Vocabulary([t for t, _ in kept], [c for _, c in kept])


@dataclass(frozen=True)
class Document:
    doc_id: int
    token_ids: tuple[int, ...]

    @property
    def empty(self) -> bool:
        return len(self.token_ids) == 0

    def __len__(self):
        return len(self.token_ids)


def encode_document(tokens: Sequence[str], vocab: Vocabulary, doc_id: int = 0) -> Document:
    if len(vocab) == 0:
        raise CorpusError("cannot encode against an empty vocabulary")
    index = vocab.index
    return Document(doc_id, tuple(index[t] for t in tokens if t in index))


def read_lines(path) -> list[str]:
    """One review per line; blank lines are kept so line numbers stay aligned."""
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def encode_corpus(texts: Sequence[str], vocab: Vocabulary) -> list[Document]:
    return [encode_document(tokenize(t), vocab, i) for i, t in enumerate(texts)]


# ---------------------------------------------------------------------------
# keyword schema


@dataclass
class TopicSchema:
    aspects: list[str]
    sentiments: list[str]
    aspect_keywords: dict[str, list[str]]
    sentiment_keywords: dict[str, list[str]]

    def __post_init__(self):
        self.validate()

    def validate(self):
        for dim, labels, kws in (
            ("aspects", self.aspects, self.aspect_keywords),
            ("sentiments", self.sentiments, self.sentiment_keywords),
        ):
            if len(labels) < 2:
                raise SchemaError(f"need at least 2 {dim}, got {len(labels)}")
            if len(set(labels)) != len(labels):
                raise SchemaError(f"duplicate label in {dim}")
            seen: dict[str, str] = {}
            for label in labels:
                words = kws.get(label)
                if not words:
                    raise SchemaError(f"label {label!r} in {dim} has no keywords")
                for w in words:
                    if w in seen and seen[w] != label:
                        raise SchemaError(
                            f"keyword {w!r} listed under both {seen[w]!r} and {label!r}"
                        )
                    seen[w] = label
            if "|" in "".join(labels):
                raise SchemaError(f"'|' is reserved in {dim} labels")

    @property
    def joint_names(self) -> list[str]:
        """Joint topic names ``sentiment|aspect``, row-major over (sentiment, aspect)."""
        return [f"{s}|{a}" for s in self.sentiments for a in self.aspects]

    def truncated(self, k: int) -> "TopicSchema":
        if k < 1:
            raise ValueError("keyword count must be >= 1")
        shortest = min(len(v) for v in [*self.aspect_keywords.values(), *self.sentiment_keywords.values()])
        if k > shortest:
            raise ValueError(f"k={k} exceeds the shortest keyword list ({shortest})")
        return TopicSchema(
            list(self.aspects),
            list(self.sentiments),
            {a: v[:k] for a, v in self.aspect_keywords.items()},
            {s: v[:k] for s, v in self.sentiment_keywords.items()},
        )

    def to_text(self) -> str:
        lines = ["[aspects]"]
        lines += [f"{a}: {' '.join(self.aspect_keywords[a])}" for a in self.aspects]
        lines += ["", "[sentiments]"]
        lines += [f"{s}: {' '.join(self.sentiment_keywords[s])}" for s in self.sentiments]
        return "\n".join(lines) + "\n"


def parse_schema(schema_text: str) -> TopicSchema:
    """Parse the ``[aspects]`` / ``[sentiments]`` keyword file.

    Each entry line is ``label: kw1 kw2 ...``. Lines whose first non-blank
    character is ``#`` are comments (inline ``#`` is not special, since
    phrase keywords contain ``###``).
    """
    sections: dict[str, tuple[list[str], dict[str, list[str]]]] = {
        "aspects": ([], {}),
        "sentiments": ([], {}),
    }
    current = None
    for lineno, raw in enumerate(schema_text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            name = line.strip("[] ").lower()
            if not line.endswith("]") or name not in sections:
                raise SchemaError(f"unknown section header {line!r}", lineno)
            current = name
            continue
        if current is None:
            raise SchemaError("entry before any section header", lineno)
        label, sep, rest = line.partition(":")
        label = label.strip()
        if not sep or not label:
            raise SchemaError(f"expected 'label: keywords', got {line!r}", lineno)
        labels, kws = sections[current]
        if label in kws:
            raise SchemaError(f"duplicate label {label!r} in {current}", lineno)
        labels.append(label)
        kws[label] = [t for w in rest.split() for t in tokenize(w)]
    (aspects, akw), (sentiments, skw) = sections["aspects"], sections["sentiments"]
    return TopicSchema(aspects, sentiments, akw, skw)


def load_schema(path) -> TopicSchema:
    with open(path, encoding="utf-8") as f:
        return parse_schema(f.read())


def restrict_schema(schema: TopicSchema, vocab: Vocabulary) -> TopicSchema:
    """Drop out-of-vocabulary keywords; a label left with none is an error."""

    def keep(kind, kws):
        out = {}
        for label, words in kws.items():
            inv = [w for w in words if w in vocab]
            dropped = [w for w in words if w not in vocab]
            if dropped:
                logger.warning("%s %r: dropping OOV keywords %s", kind, label, dropped)
            if not inv:
                raise SchemaError(f"every keyword of {kind} {label!r} is out of vocabulary")
            out[label] = inv
        return out

    return TopicSchema(
        list(schema.aspects),
        list(schema.sentiments),
        keep("aspect", schema.aspect_keywords),
        keep("sentiment", schema.sentiment_keywords),
    )
