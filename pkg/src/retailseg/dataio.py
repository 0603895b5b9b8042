"""Parsing, cleaning and invoice aggregation for the online-retail ledger."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Sequence

from .errors import ConfigError, ParseError

COLUMNS = (
    "InvoiceNo",
    "StockCode",
    "Description",
    "Quantity",
    "InvoiceDate",
    "UnitPrice",
    "CustomerID",
    "Country",
)

DEFAULT_DATE_FORMATS = ("%m/%d/%Y %H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M")

# spreadsheet exports write numeric ids as floats, e.g. "17850.0"
_FLOAT_ID = re.compile(r"^(\d+)\.0+$")


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    invoice_no: str
    stock_code: str
    description: str | None
    quantity: int
    invoice_date: datetime
    unit_price: Decimal
    customer_id: str | None
    country: str

    @property
    def line_total(self) -> Decimal:
        return self.quantity * self.unit_price

    @property
    def is_cancellation(self) -> bool:
        return self.invoice_no[:1] in ("C", "c")


@dataclass(frozen=True)
class ParseConfig:
    """How to read the ledger CSV.

    ``date_formats`` are tried in order; the first one is also used when
    writing records back out.
    """

    date_formats: tuple[str, ...] = DEFAULT_DATE_FORMATS
    decimal_separator: str = "."
    normalize_customer_id: bool = True
    encoding: str = "utf-8"


@dataclass(frozen=True)
class CleanConfig:
    drop_null_customer: bool = True
    drop_nonpositive_quantity: bool = True
    deduplicate: bool = True


@dataclass
class CleaningReport:
    rows_in: int = 0
    rows_after_null_drop: int = 0
    rows_after_negative_drop: int = 0
    rows_after_dedup: int = 0
    duplicates_removed: int = 0
    negatives_removed: int = 0

    @property
    def nulls_removed(self) -> int:
        return self.rows_in - self.rows_after_null_drop

    def to_dict(self) -> dict:
        out = asdict(self)
        out["nulls_removed"] = self.nulls_removed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class InvoiceSummary:
    invoice_no: str
    line_count: int
    invoice_total: Decimal

    @property
    def invoice_total_2dp(self) -> Decimal:
        return self.invoice_total.quantize(Decimal("0.01"))


@dataclass
class _DateParser:
    formats: Sequence[str]
    _cache: dict = field(default_factory=dict)

    def __call__(self, token: str) -> datetime:
        try:
            return self._cache[token]
        except KeyError:
            pass
        for fmt in self.formats:
            try:
                value = datetime.strptime(token, fmt)
            except ValueError:
                continue
            self._cache[token] = value
            return value
        raise ValueError(token)


def _open_text(source, encoding: str):
    """Return ``(text_stream, release)`` for any supported source."""
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode(encoding)), lambda: None
    if isinstance(source, io.TextIOBase):
        return source, lambda: None
    if hasattr(source, "read"):
        wrapper = io.TextIOWrapper(source, encoding=encoding, newline="")
        return wrapper, wrapper.detach
    fh = open(source, encoding=encoding, newline="")
    return fh, fh.close


def parse_transactions(source, config: ParseConfig | None = None) -> list[TransactionRecord]:
    """Parse a ledger CSV into records, preserving row order.

    ``source`` may be a path, a binary or text stream, or raw bytes. Empty
    ``CustomerID`` / ``Description`` cells become ``None``.
    """
    config = config or ParseConfig()
    parse_date = _DateParser(config.date_formats)
    stream, release = _open_text(source, config.encoding)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("input has no header row")
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise ConfigError(f"missing required column(s): {', '.join(missing)}")
        pos = {name: header.index(name) for name in COLUMNS}
        width = len(header)

        records = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", line=line, column=None)
            records.append(_parse_row(row, pos, line, parse_date, config))
        return records
    finally:
        release()


def _parse_row(row, pos, line, parse_date, config) -> TransactionRecord:
    def cell(name):
        return row[pos[name]]

    qty_token = cell("Quantity").strip()
    try:
        quantity = int(qty_token)
    except ValueError:
        raise ParseError(f"invalid integer {qty_token!r}", line=line, column="Quantity") from None

    price_token = cell("UnitPrice").strip()
    if config.decimal_separator != ".":
        price_token = price_token.replace(config.decimal_separator, ".")
    try:
        unit_price = Decimal(price_token)
    except InvalidOperation:
        raise ParseError(f"invalid decimal {price_token!r}", line=line, column="UnitPrice") from None
    if not unit_price.is_finite():
        raise ParseError(f"invalid decimal {price_token!r}", line=line, column="UnitPrice")

    date_token = cell("InvoiceDate").strip()
    try:
        invoice_date = parse_date(date_token)
    except ValueError:
        raise ParseError(f"unparseable date {date_token!r}", line=line, column="InvoiceDate") from None

    customer = cell("CustomerID").strip() or None
    if customer is not None and config.normalize_customer_id:
        m = _FLOAT_ID.match(customer)
        if m:
            customer = m.group(1)

    invoice_no = cell("InvoiceNo").strip()
    if not invoice_no:
        raise ParseError("empty invoice number", line=line, column="InvoiceNo")

    return TransactionRecord(
        invoice_no=invoice_no,
        stock_code=cell("StockCode"),
        description=cell("Description") or None,
        quantity=quantity,
        invoice_date=invoice_date,
        unit_price=unit_price,
        customer_id=customer,
        country=cell("Country"),
    )


def write_transactions(records: Iterable[TransactionRecord], stream: IO[str],
                       config: ParseConfig | None = None) -> None:
    """Write records as CSV in the input schema (inverse of parse_transactions)."""
    config = config or ParseConfig()
    fmt = config.date_formats[0]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        price = str(r.unit_price)
        if config.decimal_separator != ".":
            price = price.replace(".", config.decimal_separator)
        writer.writerow([
            r.invoice_no,
            r.stock_code,
            r.description or "",
            r.quantity,
            r.invoice_date.strftime(fmt),
            price,
            r.customer_id or "",
            r.country,
        ])


def clean(records: Sequence[TransactionRecord],
          config: CleanConfig | None = None) -> tuple[list[TransactionRecord], CleaningReport]:
    """Run null-drop, non-positive-quantity drop and deduplication, in that order.

    Disabled stages pass rows through unchanged, so their "after" count
    equals the previous stage's.
    """
    config = config or CleanConfig()
    report = CleaningReport(rows_in=len(records))

    rows = list(records)
    if config.drop_null_customer:
        rows = [r for r in rows if r.customer_id is not None]
    report.rows_after_null_drop = len(rows)

    if config.drop_nonpositive_quantity:
        rows = [r for r in rows if r.quantity > 0]
    report.rows_after_negative_drop = len(rows)
    report.negatives_removed = report.rows_after_null_drop - report.rows_after_negative_drop

    if config.deduplicate:
        seen = set()
        kept = []
        for r in rows:
            if r not in seen:
                seen.add(r)
                kept.append(r)
        rows = kept
    report.rows_after_dedup = len(rows)
    report.duplicates_removed = report.rows_after_negative_drop - report.rows_after_dedup
    return rows, report


def aggregate_invoices(records: Iterable[TransactionRecord]) -> list[InvoiceSummary]:
    """One summary per invoice, in order of first appearance."""
    counts: dict[str, int] = {}
    totals: dict[str, Decimal] = {}
    for r in records:
        if r.invoice_no in counts:
            counts[r.invoice_no] += 1
            totals[r.invoice_no] += r.line_total
        else:
            counts[r.invoice_no] = 1
            totals[r.invoice_no] = r.line_total
    return [InvoiceSummary(inv, counts[inv], totals[inv]) for inv in counts]
