"""Mock trading session state and the command application rules.

Everything is immutable: apply_command returns a fresh TradingState and
never touches the input, so an error can simply discard the candidate and
keep serving the old snapshot. Chart instruments stay unique, indicators
stay unique per chart, and order sequence numbers strictly increase.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

from ..interpreter import (
    AddIndicator,
    Buy,
    CloseChart,
    Command,
    FilterNews,
    NoOp,
    OpenChart,
    RemoveIndicator,
    Sell,
)


class UnknownChart(ValueError):
    pass


class AmbiguousChart(ValueError):
    pass


@dataclass(frozen=True)
class Order:
    side: str  # "BUY" | "SELL"
    quantity: Decimal
    price: Decimal | None
    instrument: str
    sequence: int


@dataclass(frozen=True)
class Chart:
    instrument: str
    indicators: tuple[str, ...] = ()


@dataclass(frozen=True)
class TradingState:
    charts: tuple[Chart, ...] = ()
    news_filters: tuple[str, ...] = ()
    orders: tuple[Order, ...] = ()

    def to_dict(self) -> dict:
        return {
            "charts": [
                {"instrument": c.instrument, "indicators": list(c.indicators)}
                for c in self.charts
            ],
            "news_filters": list(self.news_filters),
            "orders": [
                {
                    "side": o.side,
                    "quantity": str(o.quantity),
                    "price": None if o.price is None else str(o.price),
                    "instrument": o.instrument,
                    "sequence": o.sequence,
                }
                for o in self.orders
            ],
        }


def _target_chart(state: TradingState, instrument: str | None) -> Chart:
    """Pick the chart an indicator command refers to.

    A named instrument must match an open chart. With no name, a single open
    chart is unambiguous; zero or several are errors.
    """
    if instrument is not None:
        for c in state.charts:
            if c.instrument == instrument:
                return c
        raise UnknownChart(f"no open chart for {instrument}")
    if len(state.charts) == 1:
        return state.charts[0]
    if not state.charts:
        raise UnknownChart("no chart open")
    names = ", ".join(c.instrument for c in state.charts)
    raise AmbiguousChart(f"several charts open ({names}); name one")


def _swap_chart(state: TradingState, old: Chart, new: Chart) -> TradingState:
    return replace(
        state, charts=tuple(new if c is old else c for c in state.charts)
    )


def apply_command(state: TradingState, cmd: Command) -> TradingState:
    """Pure transition function; raises instead of mutating on bad targets."""
    if isinstance(cmd, NoOp):
        return state

    if isinstance(cmd, OpenChart):
        if any(c.instrument == cmd.instrument for c in state.charts):
            return state  # idempotent
        return replace(state, charts=state.charts + (Chart(cmd.instrument),))

    if isinstance(cmd, CloseChart):
        if not any(c.instrument == cmd.instrument for c in state.charts):
            raise UnknownChart(f"no open chart for {cmd.instrument}")
        kept = tuple(c for c in state.charts if c.instrument != cmd.instrument)
        return replace(state, charts=kept)

    if isinstance(cmd, AddIndicator):
        chart = _target_chart(state, cmd.instrument)
        if cmd.indicator in chart.indicators:
            return state
        new = replace(chart, indicators=chart.indicators + (cmd.indicator,))
        return _swap_chart(state, chart, new)

    if isinstance(cmd, RemoveIndicator):
        chart = _target_chart(state, cmd.instrument)
        if cmd.indicator not in chart.indicators:
            return state  # nothing to remove; not an error
        new = replace(
            chart, indicators=tuple(i for i in chart.indicators if i != cmd.indicator)
        )
        return _swap_chart(state, chart, new)

    if isinstance(cmd, FilterNews):
        if cmd.topic in state.news_filters:
            return state
        return replace(state, news_filters=state.news_filters + (cmd.topic,))

    if isinstance(cmd, (Buy, Sell)):
        seq = max((o.sequence for o in state.orders), default=0) + 1
        order = Order(
            side="BUY" if isinstance(cmd, Buy) else "SELL",
            quantity=cmd.quantity,
            price=cmd.price,
            instrument=cmd.instrument,
            sequence=seq,
        )
        return replace(state, orders=state.orders + (order,))

    raise TypeError(f"not a command: {cmd!r}")
