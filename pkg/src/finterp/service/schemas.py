"""Request/response bodies for the interpretation service.

Decimal quantities and prices travel as strings so "295.9" survives the
round trip exactly; the console renders them verbatim.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class InterpretRequest(BaseModel):
    text: str = Field(min_length=1)


class SpanOut(BaseModel):
    tag: str
    text: str
    start: int
    end: int


class OrderOut(BaseModel):
    side: str
    quantity: str
    price: str | None
    instrument: str
    sequence: int


class ChartOut(BaseModel):
    instrument: str
    indicators: list[str]


class StateOut(BaseModel):
    charts: list[ChartOut]
    news_filters: list[str]
    orders: list[OrderOut]


class ErrorOut(BaseModel):
    type: str
    message: str


class InterpretResponse(BaseModel):
    text: str
    intent: str
    confidence: float
    spans: list[SpanOut]
    command: dict | None
    error: ErrorOut | None
    state: StateOut


class RegistryOut(BaseModel):
    indicators: list[str]
    tickers: list[str]
    companies: dict[str, str]
    max_distance: int | None


class HealthOut(BaseModel):
    status: str
    model_fingerprint: str
