"""Tag predictions to validated trading commands.

Per-character tags become spans (maximal same-tag runs), spans fill the slots
of the intent's command variant, and surface strings are resolved against a
registry of supported indicators/tickers/companies by case-insensitive
Levenshtein matching with a length-scaled acceptance threshold.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from decimal import Decimal

from .encoding import END, SEPARATOR, START, TAG_IDS, TAG_NAMES, TAG_NONE

INTENT_NONE_ID = 0


class CommandError(ValueError):
    """Base for interpretation failures surfaced in-band by the service."""


class MissingSlot(CommandError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(f"required slot {slot} is missing")


class UnresolvedEntity(CommandError):
    def __init__(self, surface: str, best: str, distance: int):
        self.surface = surface
        self.best = best
        self.distance = distance
        super().__init__(
            f"{surface!r} not recognized (closest {best!r} at distance {distance})"
        )


class MalformedNumber(CommandError):
    pass


class RegistryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spans

@dataclass(frozen=True)
class Span:
    tag: int
    start: int
    end: int  # exclusive
    text: str


def spans_from_tags(text: str, tags: list[int]) -> list[Span]:
    """Maximal runs of one tag id become spans; NONE/SEPARATOR runs dropped.

    A short tag list (greedy decode halted early) is padded with NONE, so the
    untagged tail is simply ignored rather than erroring.
    """
    if len(tags) > len(text):
        raise ValueError(f"{len(tags)} tags for {len(text)} characters")
    padded = list(tags) + [TAG_NONE] * (len(text) - len(tags))
    spans: list[Span] = []
    i = 0
    n = len(text)
    while i < n:
        tag = padded[i]
        j = i + 1
        while j < n and padded[j] == tag:
            j += 1
        if tag not in (TAG_NONE, SEPARATOR, START, END):
            spans.append(Span(tag, i, j, text[i:j]))
        i = j
    return spans


# ---------------------------------------------------------------------------
# fuzzy matching

def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,           # delete from a
                cur[j - 1] + 1,        # insert into a
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


def fuzzy_match(word: str, candidates: list[str]) -> tuple[str, int]:
    """Closest candidate by case-insensitive distance; ties go to the
    lexicographically smaller canonical name."""
    if not candidates:
        raise RegistryError("no candidates to match against")
    w = word.lower()
    best_name = None
    best_dist = -1
    for name in sorted(candidates):
        d = levenshtein(w, name.lower())
        if best_name is None or d < best_dist:
            best_name, best_dist = name, d
    return best_name, best_dist


def default_threshold(word: str) -> int:
    return max(1, math.ceil(len(word) / 4))


# ---------------------------------------------------------------------------
# registry

@dataclass
class Registry:
    indicators: list[str]
    tickers: list[str]
    companies: dict  # company name -> ticker
    max_distance: int | None = None  # None: per-word default_threshold

    def validate(self) -> "Registry":
        for group, names in (
            ("indicators", self.indicators),
            ("tickers", self.tickers),
            ("companies", list(self.companies)),
        ):
            seen = set()
            for name in names:
                if not name or any(ord(ch) > 127 for ch in name):
                    raise RegistryError(f"{group}: empty or non-ASCII name {name!r}")
                key = name.lower()
                if key in seen:
                    raise RegistryError(f"{group}: duplicate name {name!r}")
                seen.add(key)
        for ticker in self.companies.values():
            if ticker not in self.tickers:
                raise RegistryError(f"company alias target {ticker!r} not in tickers")
        if self.max_distance is not None and self.max_distance < 0:
            raise RegistryError("max_distance must be >= 0")
        return self

    def threshold(self, word: str) -> int:
        if self.max_distance is not None:
            return self.max_distance
        return default_threshold(word)

    def resolve(self, surface: str, candidates: list[str]) -> str:
        best, dist = fuzzy_match(surface, candidates)
        if dist > self.threshold(surface):
            raise UnresolvedEntity(surface, best, dist)
        return best

    @classmethod
    def from_json(cls, document: str) -> "Registry":
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise RegistryError(f"registry is not valid JSON: {exc}") from exc
        return cls(
            indicators=list(raw.get("indicators", [])),
            tickers=list(raw.get("tickers", [])),
            companies=dict(raw.get("companies", {})),
            max_distance=raw.get("max_distance"),
        ).validate()


def load_registry(path) -> Registry:
    with open(path, "r", encoding="utf-8") as f:
        return Registry.from_json(f.read())


# ---------------------------------------------------------------------------
# numbers

_NUMBER_RE = re.compile(r"\d*\.?\d+")


def parse_number(text: str) -> Decimal:
    """Dot-decimal only ('295.9', '5', '.5'); anything else is malformed."""
    if not _NUMBER_RE.fullmatch(text):
        raise MalformedNumber(f"not a number: {text!r}")
    return Decimal(text)


def _positive(value: Decimal, what: str) -> Decimal:
    if value <= 0:
        raise MalformedNumber(f"{what} must be positive, got {value}")
    return value


# ---------------------------------------------------------------------------
# commands

@dataclass(frozen=True)
class OpenChart:
    instrument: str


@dataclass(frozen=True)
class CloseChart:
    instrument: str


@dataclass(frozen=True)
class AddIndicator:
    indicator: str
    instrument: str | None = None


@dataclass(frozen=True)
class RemoveIndicator:
    indicator: str
    instrument: str | None = None


@dataclass(frozen=True)
class FilterNews:
    topic: str


@dataclass(frozen=True)
class Buy:
    quantity: Decimal
    instrument: str
    price: Decimal | None = None


@dataclass(frozen=True)
class Sell:
    quantity: Decimal
    instrument: str
    price: Decimal | None = None


@dataclass(frozen=True)
class NoOp:
    pass


Command = OpenChart | CloseChart | AddIndicator | RemoveIndicator | FilterNews | Buy | Sell | NoOp


def command_to_dict(cmd: Command) -> dict:
    """JSON-ready view; Decimal fields become exact strings."""
    out = {"type": type(cmd).__name__}
    for name, value in vars(cmd).items():
        if isinstance(value, Decimal):
            value = str(value)
        out[name] = value
    return out


def _first(spans: list[Span], tag_name: str) -> Span | None:
    tag = TAG_IDS[tag_name]
    for s in spans:
        if s.tag == tag:
            return s
    return None


def _instrument(spans: list[Span], registry: Registry, required: bool) -> str | None:
    """INSTRUMENT span against tickers, else COMPANY span through the alias map."""
    inst = _first(spans, "INSTRUMENT")
    if inst is not None:
        return registry.resolve(inst.text, registry.tickers)
    comp = _first(spans, "COMPANY")
    if comp is not None:
        name = registry.resolve(comp.text, list(registry.companies))
        return registry.companies[name]
    if required:
        raise MissingSlot("INSTRUMENT")
    return None


def _quantity_price(spans: list[Span]):
    qty = _first(spans, "QUANTITY")
    if qty is None:
        raise MissingSlot("QUANTITY")
    quantity = _positive(parse_number(qty.text), "quantity")
    price_span = _first(spans, "PRICE")
    price = None
    if price_span is not None:
        price = _positive(parse_number(price_span.text), "price")
    return quantity, price


def build_command(intent: int, spans: list[Span], registry: Registry) -> Command:
    """Fill the intent's slot table from spans; intent NONE is always NoOp."""
    if intent == INTENT_NONE_ID:
        return NoOp()
    if intent == 1:  # OPEN_CHART
        return OpenChart(instrument=_instrument(spans, registry, required=True))
    if intent == 2:  # CLOSE_CHART
        return CloseChart(instrument=_instrument(spans, registry, required=True))
    if intent in (3, 4):  # ADD_INDICATOR / REMOVE_INDICATOR
        ind = _first(spans, "INDICATOR")
        if ind is None:
            raise MissingSlot("INDICATOR")
        canonical = registry.resolve(ind.text, registry.indicators)
        instrument = _instrument(spans, registry, required=False)
        cls = AddIndicator if intent == 3 else RemoveIndicator
        return cls(indicator=canonical, instrument=instrument)
    if intent == 5:  # FILTER_NEWS
        topic = _first(spans, "NEWS_TOPIC")
        if topic is not None:
            return FilterNews(topic=topic.text)
        comp = _first(spans, "COMPANY")
        if comp is not None:
            name = registry.resolve(comp.text, list(registry.companies))
            return FilterNews(topic=registry.companies[name])
        raise MissingSlot("NEWS_TOPIC")
    if intent in (6, 7):  # BUY / SELL
        quantity, price = _quantity_price(spans)
        instrument = _instrument(spans, registry, required=True)
        cls = Buy if intent == 6 else Sell
        return cls(quantity=quantity, instrument=instrument, price=price)
    raise ValueError(f"intent id {intent} out of range")


def describe_tags(tags: list[int]) -> list[str]:
    return [TAG_NAMES[t] for t in tags]
