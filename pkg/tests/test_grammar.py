"""Corpus synthesis: spec parsing, expansion, noise, fillers, negatives, augment."""

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finterp.encoding import (
    INTENT_IDS,
    INTENT_NONE,
    SEPARATOR,
    TAG_IDS,
    TAG_NONE,
    LabeledSentence,
)
from finterp.grammar import (
    CorpusSpecError,
    EmptyTemplate,
    InsufficientSource,
    Literal,
    NoiseConfig,
    NonAsciiEntry,
    Slot,
    Template,
    UnknownIntent,
    UnknownLexicon,
    UnknownTag,
    augment,
    corpus_bytes,
    expand_template,
    inject_noise,
    insert_fillers,
    parse_corpus_spec,
    read_corpus,
    sample_negatives,
    write_corpus,
)


def rng_of(seed):
    return np.random.Generator(np.random.PCG64(seed))


MINIMAL_SPEC = json.dumps(
    {
        "lexicons": {"INSTRUMENT": ["EURUSD"]},
        "templates": [{"intent": "BUY", "pattern": "{=BUY:buy} {INSTRUMENT}"}],
        "noise": {},
    }
)


# ---- spec parsing ----

def test_parse_minimal_spec():
    spec = parse_corpus_spec(MINIMAL_SPEC)
    assert len(spec.templates) == 1
    assert len(spec.lexicons.entries) == 1
    t = spec.templates[0]
    assert t.intent == INTENT_IDS["BUY"]
    lit, sep, slot = t.pattern
    assert isinstance(lit, Literal) and lit.text == "buy" and lit.tag == TAG_IDS["BUY"]
    assert sep is None
    assert isinstance(slot, Slot) and slot.lexicon == "INSTRUMENT"
    assert slot.tag == TAG_IDS["INSTRUMENT"]


def make_doc(**overrides):
    doc = {
        "lexicons": {"INSTRUMENT": ["EURUSD", "USDJPY"]},
        "templates": [{"intent": "BUY", "pattern": "{=BUY:buy} {INSTRUMENT}"}],
        "noise": {},
    }
    doc.update(overrides)
    return json.dumps(doc)


def test_parse_errors():
    with pytest.raises(UnknownLexicon, match="TICKER"):
        parse_corpus_spec(make_doc(templates=[{"intent": "BUY", "pattern": "{INSTRUMENT:TICKER}"}]))
    with pytest.raises(UnknownTag):
        parse_corpus_spec(make_doc(templates=[{"intent": "BUY", "pattern": "{WIDGET}"}]))
    with pytest.raises(UnknownTag):
        # START/END are decoder-internal, not template vocabulary
        parse_corpus_spec(make_doc(templates=[{"intent": "BUY", "pattern": "{=START:x}"}]))
    with pytest.raises(UnknownIntent):
        parse_corpus_spec(make_doc(templates=[{"intent": "SHORT", "pattern": "x"}]))
    with pytest.raises(EmptyTemplate):
        parse_corpus_spec(make_doc(templates=[{"intent": "BUY", "pattern": "   "}]))
    with pytest.raises(NonAsciiEntry):
        parse_corpus_spec(make_doc(lexicons={"INSTRUMENT": ["café"]}))
    with pytest.raises(CorpusSpecError):
        parse_corpus_spec("not json at all {")
    with pytest.raises(CorpusSpecError, match="duplicate"):
        parse_corpus_spec(make_doc(lexicons={"INSTRUMENT": ["EURUSD", "EURUSD"]}))
    with pytest.raises(CorpusSpecError):
        parse_corpus_spec(make_doc(noise={"swap_prob": 1.5}))
    with pytest.raises(CorpusSpecError):
        # filler_prob without a lexicon to draw from
        parse_corpus_spec(make_doc(noise={"filler_prob": 0.2}))
    with pytest.raises(UnknownLexicon):
        parse_corpus_spec(make_doc(noise={"filler_prob": 0.2, "filler_lexicon": "FILLERS"}))
    with pytest.raises(CorpusSpecError):
        parse_corpus_spec(make_doc(templates=[{"intent": "BUY", "pattern": "{=BUY:buy"}]))
    with pytest.raises(CorpusSpecError):
        parse_corpus_spec(json.dumps({"lexicons": {}, "templates": []}))


# ---- expansion ----

def test_expand_buy_eurusd():
    spec = parse_corpus_spec(MINIMAL_SPEC)
    s = expand_template(spec.templates[0], spec.lexicons, rng_of(0))
    assert s.text == "buy EURUSD"
    assert s.tags == [TAG_IDS["BUY"]] * 3 + [SEPARATOR] + [TAG_IDS["INSTRUMENT"]] * 6
    assert s.intent == INTENT_IDS["BUY"]


def test_expand_multiword_slot_is_one_span():
    doc = make_doc(
        lexicons={"INDICATOR": ["Bollinger Bands"]},
        templates=[{"intent": "ADD_INDICATOR", "pattern": "{=ADD:add} {INDICATOR}"}],
    )
    spec = parse_corpus_spec(doc)
    s = expand_template(spec.templates[0], spec.lexicons, rng_of(1))
    assert s.text == "add Bollinger Bands"
    # all 15 slot characters carry INDICATOR, internal space included
    assert s.tags[4:] == [TAG_IDS["INDICATOR"]] * 15


def test_expand_literal_only_ignores_rng():
    doc = make_doc(templates=[{"intent": "NONE", "pattern": "hello there"}])
    spec = parse_corpus_spec(doc)
    outs = {expand_template(spec.templates[0], spec.lexicons, rng_of(s)).text for s in range(5)}
    assert outs == {"hello there"}


def test_expand_draws_uniformly_across_entries():
    spec = parse_corpus_spec(make_doc())
    rng = rng_of(123)
    seen = {expand_template(spec.templates[0], spec.lexicons, rng).text for _ in range(50)}
    assert seen == {"buy EURUSD", "buy USDJPY"}


# ---- noise ----

def test_forced_swap_hits_word_middle():
    s = LabeledSentence("chart", [TAG_NONE] * 5, 1)
    out = inject_noise(s, NoiseConfig(swap_prob=1.0), rng_of(0))
    assert out.text == "chrat"  # positions (2,3) transposed
    assert out.tags == s.tags
    assert out.intent == 1


def test_forced_drop_removes_char_and_tag():
    tags = [2, 2, 2, 15, 2, 2]
    s = LabeledSentence("please", tags, 1)
    out = inject_noise(s, NoiseConfig(drop_prob=1.0), rng_of(7))
    assert out.text == "plese"
    assert out.tags == [2, 2, 2, 2, 2]  # index 3 removed from both
    assert len(out.tags) == len(out.text)


def test_noise_identity_when_probs_zero():
    s = LabeledSentence("open a chart of apple", [2] * 21, 1)
    out = inject_noise(s, NoiseConfig(), rng_of(3))
    assert out.text == s.text and out.tags == s.tags


def test_noise_skips_short_words():
    # 1-2 char words have no interior: "5" and "ab" must survive any seed
    s = LabeledSentence("5 ab", [16, 3, 2, 2], 6)
    for seed in range(10):
        out = inject_noise(s, NoiseConfig(swap_prob=1.0, drop_prob=1.0), rng_of(seed))
        assert out.text == "5 ab"


def test_swap_skipped_when_tags_differ():
    # interior pair spans a tag boundary in every draw for a 4-char word (only pair is (1,2))
    s = LabeledSentence("abcd", [4, 4, 15, 15], 6)
    out = inject_noise(s, NoiseConfig(swap_prob=1.0), rng_of(0))
    assert out.text == "abcd"


def test_noise_applies_per_word():
    s = LabeledSentence("chart chart", [2] * 11, 1)
    out = inject_noise(s, NoiseConfig(swap_prob=1.0), rng_of(0))
    words = out.text.split(" ")
    assert len(words) == 2
    assert all(sorted(w) == sorted("chart") for w in words)
    assert words[0] == "chrat"  # first word consumes the seed-0 draws


# ---- fillers ----

BUY_EURUSD = LabeledSentence("buy EURUSD", [4] * 3 + [3] + [11] * 6, 6)


def test_filler_at_front():
    out = insert_fillers(BUY_EURUSD, ["please"], NoiseConfig(filler_prob=0.5), rng_of(29))
    assert out.text == "please buy EURUSD"
    assert out.tags[:7] == [TAG_NONE] * 6 + [SEPARATOR]
    assert out.tags[7:] == BUY_EURUSD.tags


def test_filler_identity_at_zero_prob():
    out = insert_fillers(BUY_EURUSD, ["please"], NoiseConfig(filler_prob=0.0), rng_of(0))
    assert out.text == BUY_EURUSD.text and out.tags == BUY_EURUSD.tags


def test_all_insertion_points_firing_length_arithmetic():
    # 3 boundaries (front, after the gap, end), each adds len("please")+1 = 7
    out = insert_fillers(BUY_EURUSD, ["please"], NoiseConfig(filler_prob=1.0), rng_of(0))
    assert out.text == "please buy please EURUSD please"
    assert len(out.text) == 10 + 3 * 7 == 31
    assert len(out.tags) == 31
    want = (
        [TAG_NONE] * 6 + [SEPARATOR]
        + [4, 4, 4] + [SEPARATOR]
        + [TAG_NONE] * 6 + [SEPARATOR]
        + [11] * 6
        + [SEPARATOR] + [TAG_NONE] * 6
    )
    assert out.tags == want


def test_filler_requires_entries():
    with pytest.raises(CorpusSpecError):
        insert_fillers(BUY_EURUSD, [], NoiseConfig(filler_prob=1.0), rng_of(0))


# ---- negatives ----

def test_sample_negatives_labels():
    out = sample_negatives(["what is the weather\n"], 1, rng_of(0))
    s = out[0]
    assert s.text == "what is the weather"
    assert s.intent == INTENT_NONE
    assert s.tags == [TAG_NONE] * 19


def test_sample_negatives_counts_and_errors():
    assert sample_negatives(["a b c\n"], 0, rng_of(0)) == []
    with pytest.raises(InsufficientSource):
        sample_negatives(["one sentence\n", "two sentences\n"], 5, rng_of(0))


def test_sample_negatives_normalizes_non_ascii():
    out = sample_negatives(["café time\n"], 1, rng_of(0))
    assert out[0].text == "caf? time"


# ---- augment ----

AUG_DOC = json.dumps(
    {
        "lexicons": {
            "INSTRUMENT": ["EURUSD", "USDJPY", "GBPUSD"],
            "FILLERS": ["please", "now"],
        },
        "templates": [
            {"intent": "BUY", "pattern": "{=BUY:buy} {INSTRUMENT}"},
            {"intent": "SELL", "pattern": "{=SELL:sell} {INSTRUMENT}"},
        ],
        "noise": {
            "swap_prob": 0.2,
            "drop_prob": 0.2,
            "filler_prob": 0.3,
            "filler_lexicon": "FILLERS",
        },
        "negatives": {"path": "unused.txt", "count": 3},
    }
)

NEG_LINES = ["what is the weather\n", "nice to meet you\n", "the cat sat\n", "hello world\n"]


def test_augment_is_deterministic():
    spec = parse_corpus_spec(AUG_DOC)
    a = augment(spec, seed=5, target=20, negatives_source=NEG_LINES)
    b = augment(spec, seed=5, target=20, negatives_source=NEG_LINES)
    assert corpus_bytes(a) == corpus_bytes(b)
    c = augment(spec, seed=6, target=20, negatives_source=NEG_LINES)
    assert corpus_bytes(a) != corpus_bytes(c)


def test_augment_size_and_negative_mix():
    spec = parse_corpus_spec(AUG_DOC)
    out = augment(spec, seed=5, target=20, negatives_source=NEG_LINES)
    assert len(out) == 20
    negatives = [s for s in out if s.intent == INTENT_NONE]
    assert len(negatives) == 3
    for s in negatives:
        assert all(t == TAG_NONE for t in s.tags)
    for s in out:
        s.validate()


def test_augment_one_expansion_per_template_when_target_matches():
    doc = json.dumps(
        {
            "lexicons": {"INSTRUMENT": ["EURUSD"]},
            "templates": [
                {"intent": "BUY", "pattern": "{=BUY:buy} {INSTRUMENT}"},
                {"intent": "SELL", "pattern": "{=SELL:sell} {INSTRUMENT}"},
            ],
            "noise": {},
        }
    )
    spec = parse_corpus_spec(doc)
    out = augment(spec, seed=0, target=2)
    assert sorted(s.text for s in out) == ["buy EURUSD", "sell EURUSD"]


def test_augment_target_below_template_count_rejected():
    spec = parse_corpus_spec(AUG_DOC)
    with pytest.raises(CorpusSpecError):
        augment(spec, seed=0, target=1, negatives_source=NEG_LINES)


def test_corpus_file_round_trip(tmp_path):
    spec = parse_corpus_spec(AUG_DOC)
    out = augment(spec, seed=9, target=12, negatives_source=NEG_LINES)
    path = tmp_path / "corpus.jsonl"
    write_corpus(out, path)
    back = read_corpus(path)
    assert corpus_bytes(back) == corpus_bytes(out)
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"text", "intent", "tags"}
    assert len(rec["tags"]) == len(rec["text"])
    assert isinstance(rec["tags"][0], str)


# ---- invariants over random specs ----

word = st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=8)


@st.composite
def random_spec(draw):
    entries = draw(st.lists(word, min_size=1, max_size=4, unique=True))
    fillers = draw(st.lists(word, min_size=1, max_size=3, unique=True))
    lit = draw(word)
    doc = {
        "lexicons": {"INSTRUMENT": entries, "FILLERS": fillers},
        "templates": [
            {"intent": "BUY", "pattern": f"{{=BUY:{lit}}} {{INSTRUMENT}}"},
            {"intent": "OPEN_CHART", "pattern": f"open {{INSTRUMENT}} {lit}"},
        ],
        "noise": {
            "swap_prob": draw(st.floats(0, 1)),
            "drop_prob": draw(st.floats(0, 1)),
            "filler_prob": draw(st.floats(0, 1)),
            "filler_lexicon": "FILLERS",
        },
    }
    return parse_corpus_spec(json.dumps(doc))


@settings(max_examples=40, deadline=None)
@given(random_spec(), st.integers(0, 2**31), st.integers(2, 40))
def test_every_produced_sentence_is_valid(spec, seed, target):
    for s in augment(spec, seed, target):
        assert len(s.tags) == len(s.text)
        s.validate()  # ASCII, no START/END, ranges


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_multiword_slot_span_integrity(seed):
    doc = make_doc(
        lexicons={"INDICATOR": ["moving average", "relative strength index"]},
        templates=[{"intent": "ADD_INDICATOR", "pattern": "{=ADD:add} {INDICATOR}"}],
    )
    spec = parse_corpus_spec(doc)
    s = expand_template(spec.templates[0], spec.lexicons, rng_of(seed))
    run = s.tags[4:]
    assert all(t == TAG_IDS["INDICATOR"] for t in run)
    assert s.text[4:] in ("moving average", "relative strength index")


def test_committed_smoke_corpus_is_consistent():
    # the file quoted by the README; regenerating it must be a no-op
    root = Path(__file__).resolve().parent.parent
    corpus = read_corpus(root / "assets" / "smoke_corpus.jsonl")
    assert len(corpus) == 60
    for s in corpus:
        assert len(s.tags) == len(s.text)
        s.validate()
    negatives = [s for s in corpus if s.intent == INTENT_NONE]
    assert len(negatives) == 6
    assert all(set(s.tags) == {TAG_NONE} for s in negatives)

    spec = parse_corpus_spec((root / "assets" / "smoke_spec.json").read_text())
    source = (root / "assets" / "negatives.txt").read_text().splitlines()
    fresh = augment(spec, seed=7, target=60, negatives_source=source)
    assert corpus_bytes(fresh) == corpus_bytes(corpus)
