"""Fixed vocabularies and conversion between labeled sentences and numeric batches.

Characters are encoded as their 7-bit ASCII codes (interpreted downstream as
one-hot 128-dim vectors). Tags live in a 19-symbol alphabet that includes the
decoder's START/END control symbols; intents are an 8-way set. All ids are
frozen so serialized models stay portable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHAR_DIM = 128

TAG_NAMES = (
    "START", "END", "NONE", "SEPARATOR",
    "BUY", "SELL", "OPEN", "CLOSE", "ADD", "REMOVE", "FILTER",
    "INSTRUMENT", "INDICATOR", "COMPANY",
    "PRICE", "QUANTITY", "NUMBER", "TIMEFRAME", "NEWS_TOPIC",
)
TAG_IDS = {name: i for i, name in enumerate(TAG_NAMES)}
TAG_DIM = len(TAG_NAMES)  # 19

START = TAG_IDS["START"]
END = TAG_IDS["END"]
TAG_NONE = TAG_IDS["NONE"]
SEPARATOR = TAG_IDS["SEPARATOR"]

INTENT_NAMES = (
    "NONE", "OPEN_CHART", "CLOSE_CHART", "ADD_INDICATOR",
    "REMOVE_INDICATOR", "FILTER_NEWS", "BUY", "SELL",
)
INTENT_IDS = {name: i for i, name in enumerate(INTENT_NAMES)}
INTENT_DIM = len(INTENT_NAMES)  # 8

INTENT_NONE = INTENT_IDS["NONE"]


class NonAsciiChar(ValueError):
    def __init__(self, position: int, char: str = ""):
        self.position = position
        self.char = char
        super().__init__(f"non-ASCII character at position {position}: {char!r}")


class IllegalSpecialTag(ValueError):
    pass


class EmptyBatch(ValueError):
    pass


class OutOfRangeId(ValueError):
    pass


@dataclass
class LabeledSentence:
    """Text plus one tag id per character plus an intent id."""

    text: str
    tags: list[int]
    intent: int

    def validate(self) -> "LabeledSentence":
        if len(self.text) < 1:
            raise ValueError("empty sentence")
        if len(self.tags) != len(self.text):
            raise ValueError(
                f"tag/char length mismatch: {len(self.tags)} tags for {len(self.text)} chars"
            )
        for pos, ch in enumerate(self.text):
            if ord(ch) >= CHAR_DIM:
                raise NonAsciiChar(pos, ch)
        if any(t in (START, END) for t in self.tags):
            raise IllegalSpecialTag("START/END must not appear in stored sentences")
        if not all(0 <= t < TAG_DIM for t in self.tags):
            raise OutOfRangeId(f"tag id out of range in {self.tags}")
        if not 0 <= self.intent < INTENT_DIM:
            raise OutOfRangeId(f"intent id out of range: {self.intent}")
        return self


def encode_chars(text: str) -> list[int]:
    """Map each character to its ASCII code; raises NonAsciiChar past 0-127."""
    codes = []
    for pos, ch in enumerate(text):
        code = ord(ch)
        if code >= CHAR_DIM:
            raise NonAsciiChar(pos, ch)
        codes.append(code)
    return codes


def make_decoder_io(tags: list[int]) -> tuple[list[int], list[int]]:
    """Teacher-forcing streams: input = START + tags, target = tags + END."""
    if any(t in (START, END) for t in tags):
        raise IllegalSpecialTag("tags must not contain START/END")
    return [START] + list(tags), list(tags) + [END]


def decode_tags(ids) -> list[str]:
    """Ids back to tag names, truncating at the first END."""
    names = []
    for i in ids:
        i = int(i)
        if not 0 <= i < TAG_DIM:
            raise OutOfRangeId(f"tag id {i} outside 0..{TAG_DIM - 1}")
        if i == END:
            break
        names.append(TAG_NAMES[i])
    return names


@dataclass
class Batch:
    """Padded numeric views of a list of labeled sentences.

    Padding positions hold char 0 / tag NONE and are masked out of every loss
    and accuracy downstream. Decoder rows are one longer than the encoder rows
    (START prefix / END suffix).
    """

    chars: np.ndarray        # [B, T] int
    tags: np.ndarray         # [B, T] int
    dec_input: np.ndarray    # [B, T+1] int
    dec_target: np.ndarray   # [B, T+1] int
    intents: np.ndarray      # [B] int
    mask: np.ndarray         # [B, T] float, 1 for real positions
    dec_mask: np.ndarray     # [B, T+1] float, 1 for positions < length+1
    lengths: np.ndarray      # [B] int

    @property
    def size(self) -> int:
        return self.chars.shape[0]

    @property
    def max_len(self) -> int:
        return self.chars.shape[1]


def make_batch(examples: list[LabeledSentence], order: list[int] | None = None) -> Batch:
    """Assemble a padded batch from examples[i] for i in order (all, if omitted)."""
    if order is None:
        order = list(range(len(examples)))
    rows = [examples[i] for i in order]
    if not rows:
        raise EmptyBatch("cannot batch zero sentences")

    lengths = np.array([len(r.text) for r in rows], dtype=np.int64)
    max_len = int(lengths.max())
    n = len(rows)

    chars = np.zeros((n, max_len), dtype=np.int64)
    tags = np.full((n, max_len), TAG_NONE, dtype=np.int64)
    dec_input = np.full((n, max_len + 1), TAG_NONE, dtype=np.int64)
    dec_target = np.full((n, max_len + 1), TAG_NONE, dtype=np.int64)
    intents = np.zeros(n, dtype=np.int64)
    mask = np.zeros((n, max_len), dtype=np.float64)
    dec_mask = np.zeros((n, max_len + 1), dtype=np.float64)

    for i, row in enumerate(rows):
        codes = encode_chars(row.text)
        L = len(codes)
        if len(row.tags) != L:
            raise ValueError(f"sentence {order[i]}: {len(row.tags)} tags for {L} chars")
        d_in, d_tgt = make_decoder_io(row.tags)
        chars[i, :L] = codes
        tags[i, :L] = row.tags
        dec_input[i, : L + 1] = d_in
        dec_target[i, : L + 1] = d_tgt
        intents[i] = row.intent
        mask[i, :L] = 1.0
        dec_mask[i, : L + 1] = 1.0

    return Batch(chars, tags, dec_input, dec_target, intents, mask, dec_mask, lengths)


def write_vocab_files(directory) -> None:
    """Emit tags.txt / intents.txt (id<TAB>name per line) for cross-checking."""
    import os

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "tags.txt"), "w", encoding="utf-8") as f:
        for i, name in enumerate(TAG_NAMES):
            f.write(f"{i}\t{name}\n")
    with open(os.path.join(directory, "intents.txt"), "w", encoding="utf-8") as f:
        for i, name in enumerate(INTENT_NAMES):
            f.write(f"{i}\t{name}\n")
