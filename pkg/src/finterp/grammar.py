"""Template-grammar corpus synthesis with noise injection and negative examples.

A corpus spec (JSON) declares lexicons, templates, noise settings and an
optional source of out-of-domain negatives. Template patterns use a compact
inline syntax:

    {TAG}              slot tagged TAG, drawing from the lexicon named TAG
    {TAG:lexname}      slot tagged TAG, drawing from lexicon `lexname`
    {=TAG:literal}     literal text carrying tag TAG (spaces allowed inside)
    bare text          NONE-tagged literal

Single spaces between tokens are tagged SEPARATOR; spaces inside a multi-word
slot entry inherit the slot tag, so a multi-word indicator stays one span.

All randomness flows through one numpy PCG64 stream per augment() call, with a
fixed draw order, so a corpus is a pure function of (spec, seed, target).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoding import (
    INTENT_IDS,
    INTENT_NAMES,
    INTENT_NONE,
    SEPARATOR,
    TAG_IDS,
    TAG_NAMES,
    TAG_NONE,
    LabeledSentence,
)

# tags a template is allowed to use (START/END are decoder-internal)
_CONTENT_TAGS = {name: i for name, i in TAG_IDS.items() if name not in ("START", "END")}


class CorpusSpecError(ValueError):
    pass


class UnknownLexicon(CorpusSpecError):
    pass


class UnknownTag(CorpusSpecError):
    pass


class UnknownIntent(CorpusSpecError):
    pass


class EmptyTemplate(CorpusSpecError):
    pass


class NonAsciiEntry(CorpusSpecError):
    pass


class InsufficientSource(ValueError):
    pass


def _check_ascii(text: str, where: str) -> str:
    for ch in text:
        if ord(ch) > 127:
            raise NonAsciiEntry(f"{where}: non-ASCII character {ch!r} in {text!r}")
    return text


@dataclass
class Literal:
    text: str
    tag: int = TAG_NONE


@dataclass
class Slot:
    tag: int
    lexicon: str


@dataclass
class Template:
    intent: int
    pattern: list  # Literal | Slot
    source: str = ""  # original pattern string, for error messages


@dataclass
class LexiconSet:
    entries: dict = field(default_factory=dict)  # name -> list[str]

    def get(self, name: str) -> list[str]:
        if name not in self.entries:
            raise UnknownLexicon(name)
        return self.entries[name]


@dataclass
class NoiseConfig:
    swap_prob: float = 0.0
    drop_prob: float = 0.0
    filler_prob: float = 0.0
    filler_lexicon: str = ""

    def validate(self):
        for label, p in (("swap_prob", self.swap_prob), ("drop_prob", self.drop_prob),
                         ("filler_prob", self.filler_prob)):
            if not 0.0 <= p <= 1.0:
                raise CorpusSpecError(f"{label} must be in [0,1], got {p}")
        return self


@dataclass
class NegativesConfig:
    path: str
    count: int


@dataclass
class CorpusSpec:
    lexicons: LexiconSet
    templates: list
    noise: NoiseConfig
    negatives: NegativesConfig | None = None


def parse_pattern(pattern: str, template_name: str, lexicons: LexiconSet) -> list:
    """Tokenize one pattern string into Literal/Slot tokens.

    Runs of spaces at the top level separate tokens (they become single
    SEPARATOR spaces on expansion); adjacent tokens without a space are
    concatenated without a separator.
    """
    tokens: list = []
    i = 0
    n = len(pattern)
    while i < n:
        ch = pattern[i]
        if ch == " ":
            while i < n and pattern[i] == " ":
                i += 1
            tokens.append(None)  # separator marker
            continue
        if ch == "{":
            close = pattern.find("}", i)
            if close < 0:
                raise CorpusSpecError(f"template {template_name}: unclosed '{{' in {pattern!r}")
            body = pattern[i + 1 : close]
            i = close + 1
            if body.startswith("="):
                tag_name, _, text = body[1:].partition(":")
                if tag_name not in _CONTENT_TAGS:
                    raise UnknownTag(f"template {template_name}: tag {tag_name!r}")
                if not text:
                    raise EmptyTemplate(f"template {template_name}: empty literal in {pattern!r}")
                tokens.append(Literal(_check_ascii(text, f"template {template_name}"),
                                      _CONTENT_TAGS[tag_name]))
            else:
                tag_name, sep, lex_name = body.partition(":")
                if not sep:
                    lex_name = tag_name
                if tag_name not in _CONTENT_TAGS:
                    raise UnknownTag(f"template {template_name}: tag {tag_name!r}")
                if lex_name not in lexicons.entries:
                    raise UnknownLexicon(lex_name)
                tokens.append(Slot(_CONTENT_TAGS[tag_name], lex_name))
            continue
        # bare literal run (NONE-tagged)
        j = i
        while j < n and pattern[j] not in " {":
            j += 1
        tokens.append(Literal(_check_ascii(pattern[i:j], f"template {template_name}")))
        i = j

    # trim leading/trailing separator markers, collapse doubles
    cleaned: list = []
    for tok in tokens:
        if tok is None and (not cleaned or cleaned[-1] is None):
            continue
        cleaned.append(tok)
    while cleaned and cleaned[-1] is None:
        cleaned.pop()
    if not any(tok is not None for tok in cleaned):
        raise EmptyTemplate(f"template {template_name}: pattern has no tokens: {pattern!r}")
    return cleaned


def parse_corpus_spec(document: str) -> CorpusSpec:
    """Parse and validate a JSON corpus spec document."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorpusSpecError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusSpecError("top level must be an object")

    lex_raw = raw.get("lexicons", {})
    if not isinstance(lex_raw, dict):
        raise CorpusSpecError("lexicons must map name -> string array")
    lexicons = LexiconSet()
    for name, entries in lex_raw.items():
        if not isinstance(entries, list) or not entries:
            raise CorpusSpecError(f"lexicon {name}: must be a non-empty array")
        seen = set()
        checked = []
        for entry in entries:
            if not isinstance(entry, str) or not entry:
                raise CorpusSpecError(f"lexicon {name}: empty or non-string entry")
            _check_ascii(entry, f"lexicon {name}")
            if entry in seen:
                raise CorpusSpecError(f"lexicon {name}: duplicate entry {entry!r}")
            seen.add(entry)
            checked.append(entry)
        lexicons.entries[name] = checked

    tmpl_raw = raw.get("templates", [])
    if not isinstance(tmpl_raw, list) or not tmpl_raw:
        raise CorpusSpecError("need at least one template")
    templates = []
    for idx, item in enumerate(tmpl_raw):
        if not isinstance(item, dict) or "intent" not in item or "pattern" not in item:
            raise CorpusSpecError(f"template #{idx}: need intent and pattern")
        intent_name = item["intent"]
        if intent_name not in INTENT_IDS:
            raise UnknownIntent(f"template #{idx}: intent {intent_name!r}")
        pattern = item["pattern"]
        if not isinstance(pattern, str) or not pattern.strip():
            raise EmptyTemplate(f"template #{idx}: empty pattern")
        tokens = parse_pattern(pattern, f"#{idx}", lexicons)
        templates.append(Template(INTENT_IDS[intent_name], tokens, source=pattern))

    noise_raw = raw.get("noise", {})
    noise = NoiseConfig(
        swap_prob=float(noise_raw.get("swap_prob", 0.0)),
        drop_prob=float(noise_raw.get("drop_prob", 0.0)),
        filler_prob=float(noise_raw.get("filler_prob", 0.0)),
        filler_lexicon=noise_raw.get("filler_lexicon", ""),
    ).validate()
    if noise.filler_prob > 0:
        if not noise.filler_lexicon:
            raise CorpusSpecError("filler_prob > 0 requires a filler_lexicon")
        if noise.filler_lexicon not in lexicons.entries:
            raise UnknownLexicon(noise.filler_lexicon)

    negatives = None
    if raw.get("negatives"):
        neg_raw = raw["negatives"]
        if "path" not in neg_raw or "count" not in neg_raw:
            raise CorpusSpecError("negatives needs path and count")
        count = int(neg_raw["count"])
        if count < 0:
            raise CorpusSpecError("negatives count must be >= 0")
        negatives = NegativesConfig(path=str(neg_raw["path"]), count=count)

    return CorpusSpec(lexicons, templates, noise, negatives)


def expand_template(t: Template, lex: LexiconSet, rng: np.random.Generator) -> LabeledSentence:
    """Instantiate one template: slots drawn uniformly, tags per token,
    single SEPARATOR spaces between space-separated tokens."""
    chars: list[str] = []
    tags: list[int] = []
    for tok in t.pattern:
        if tok is None:
            chars.append(" ")
            tags.append(SEPARATOR)
            continue
        if isinstance(tok, Slot):
            entries = lex.get(tok.lexicon)
            text = entries[int(rng.integers(0, len(entries)))]
            tag = tok.tag
        else:
            text = tok.text
            tag = tok.tag
        chars.extend(text)
        tags.extend([tag] * len(text))
    return LabeledSentence("".join(chars), tags, t.intent)


def _word_runs(text: str):
    """Maximal runs of non-space characters as (start, end) offsets."""
    runs = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] == " ":
            i += 1
            continue
        j = i
        while j < n and text[j] != " ":
            j += 1
        runs.append((i, j))
        i = j
    return runs


def inject_noise(s: LabeledSentence, cfg: NoiseConfig, rng: np.random.Generator) -> LabeledSentence:
    """Typo noise per word: maybe transpose two adjacent interior characters
    (both strictly inside the word), maybe delete one interior character with
    its tag. Words shorter than 3 characters are left intact."""
    chars = list(s.text)
    tags = list(s.tags)
    out_chars: list[str] = []
    out_tags: list[int] = []
    cursor = 0
    for start, end in _word_runs(s.text):
        out_chars.extend(chars[cursor:start])
        out_tags.extend(tags[cursor:start])
        w_chars = chars[start:end]
        w_tags = tags[start:end]
        L = len(w_chars)
        if rng.random() < cfg.swap_prob and L >= 4:
            i = int(rng.integers(1, L - 2))  # pair (i, i+1), both interior
            if w_tags[i] == w_tags[i + 1]:
                w_chars[i], w_chars[i + 1] = w_chars[i + 1], w_chars[i]
        if rng.random() < cfg.drop_prob and L >= 3:
            i = int(rng.integers(1, L - 1))
            del w_chars[i]
            del w_tags[i]
        out_chars.extend(w_chars)
        out_tags.extend(w_tags)
        cursor = end
    out_chars.extend(chars[cursor:])
    out_tags.extend(tags[cursor:])
    return LabeledSentence("".join(out_chars), out_tags, s.intent)


def insert_fillers(s: LabeledSentence, filler: list[str], cfg: NoiseConfig,
                   rng: np.random.Generator) -> LabeledSentence:
    """Maybe insert a NONE-tagged filler word (plus a SEPARATOR space) at each
    word boundary: before the first word, after each existing space, and after
    the last word. Original characters and tags are untouched."""
    if not filler:
        raise CorpusSpecError("filler lexicon is empty")
    runs = _word_runs(s.text)
    if not runs:
        return s

    def draw():
        if rng.random() < cfg.filler_prob:
            return filler[int(rng.integers(0, len(filler)))]
        return None

    chars = list(s.text)
    tags = list(s.tags)
    out_chars: list[str] = []
    out_tags: list[int] = []

    word = draw()  # leading boundary
    if word is not None:
        out_chars.extend(word + " ")
        out_tags.extend([TAG_NONE] * len(word) + [SEPARATOR])
    for k, (start, end) in enumerate(runs):
        out_chars.extend(chars[start:end])
        out_tags.extend(tags[start:end])
        if k + 1 < len(runs):
            gap_end = runs[k + 1][0]
            out_chars.extend(chars[end:gap_end])
            out_tags.extend(tags[end:gap_end])
            word = draw()  # boundary after the existing gap
            if word is not None:
                out_chars.extend(word + " ")
                out_tags.extend([TAG_NONE] * len(word) + [SEPARATOR])
    word = draw()  # trailing boundary
    if word is not None:
        out_chars.extend(" " + word)
        out_tags.extend([SEPARATOR] + [TAG_NONE] * len(word))
    return LabeledSentence("".join(out_chars), out_tags, s.intent)


def ascii_normalize(text: str) -> str:
    return "".join(ch if ord(ch) <= 127 else "?" for ch in text)


def sample_negatives(source, n: int, rng: np.random.Generator) -> list[LabeledSentence]:
    """Draw n out-of-domain sentences, intent NONE, every tag NONE."""
    if n == 0:
        return []
    candidates = [ascii_normalize(line.strip()) for line in source if line.strip()]
    if len(candidates) < n:
        raise InsufficientSource(f"need {n} sentences, source has {len(candidates)}")
    picks = rng.choice(len(candidates), size=n, replace=False)
    out = []
    for k in picks:
        text = candidates[int(k)]
        out.append(LabeledSentence(text, [TAG_NONE] * len(text), INTENT_NONE))
    return out


def augment(spec: CorpusSpec, seed: int, target: int,
            negatives_source=None) -> list[LabeledSentence]:
    """Synthesize `target` labeled sentences: round-robin template expansion
    with noise and fillers, negatives appended, everything shuffled by the
    seeded stream. Pure function of (spec, seed, target, negatives text).

    negatives_source: iterable of lines; defaults to reading spec.negatives.path.
    """
    if target < len(spec.templates):
        raise CorpusSpecError(
            f"target {target} is below the template count {len(spec.templates)}"
        )
    neg_count = spec.negatives.count if spec.negatives else 0
    n_expansions = target - neg_count
    if n_expansions < 0:
        raise CorpusSpecError(
            f"negatives count {neg_count} exceeds target {target}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    filler = (
        spec.lexicons.entries.get(spec.noise.filler_lexicon, [])
        if spec.noise.filler_lexicon
        else []
    )

    out: list[LabeledSentence] = []
    for k in range(n_expansions):
        t = spec.templates[k % len(spec.templates)]
        s = expand_template(t, spec.lexicons, rng)
        s = inject_noise(s, spec.noise, rng)
        if spec.noise.filler_prob > 0:
            s = insert_fillers(s, filler, spec.noise, rng)
        out.append(s.validate())

    if neg_count:
        if negatives_source is None:
            with open(spec.negatives.path, "r", encoding="utf-8") as f:
                negatives_source = f.readlines()
        out.extend(s.validate() for s in sample_negatives(negatives_source, neg_count, rng))

    order = rng.permutation(len(out))
    return [out[int(i)] for i in order]


def sentence_to_record(s: LabeledSentence) -> dict:
    return {
        "text": s.text,
        "intent": INTENT_NAMES[s.intent],
        "tags": [TAG_NAMES[t] for t in s.tags],
    }


def record_to_sentence(record: dict) -> LabeledSentence:
    return LabeledSentence(
        record["text"],
        [TAG_IDS[name] for name in record["tags"]],
        INTENT_IDS[record["intent"]],
    ).validate()


def write_corpus(sentences: list[LabeledSentence], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            f.write(json.dumps(sentence_to_record(s)) + "\n")


def read_corpus(path) -> list[LabeledSentence]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(record_to_sentence(json.loads(line)))
    return out


def corpus_bytes(sentences: list[LabeledSentence]) -> bytes:
    """Canonical serialized form, used for determinism checks and fingerprints."""
    return "".join(json.dumps(sentence_to_record(s)) + "\n" for s in sentences).encode()
