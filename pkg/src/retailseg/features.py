"""Per-customer RFM values, rank scores, weighted RFM score and segments."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace
from datetime import datetime
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .dataio import InvoiceSummary, TransactionRecord
from .errors import ConfigError, DataError
from .numeric import FeatureMatrix

FREQUENCY_MODES = ("lines", "distinct_dates", "invoices")
RECENCY_MODES = ("elapsed", "calendar")
CUSTOMER_FEATURES = ("recency", "frequency", "monetary", "r_score", "f_score", "m_score", "rfm_score")
INVOICE_FEATURES = ("line_count", "invoice_total")


class Segment(str, enum.Enum):
    TOP = "Top"
    HIGH = "HighValue"
    MEDIUM = "MediumValue"
    LOW = "LowValue"
    LOST = "Lost"


# display order, worst to best
SEGMENT_ORDER = (Segment.LOST, Segment.LOW, Segment.MEDIUM, Segment.HIGH, Segment.TOP)


@dataclass(frozen=True)
class RfmWeights:
    w_r: float = 0.15
    w_f: float = 0.28
    w_m: float = 0.57
    scale_divisor: float = 20.0

    def __post_init__(self):
        if min(self.w_r, self.w_f, self.w_m) < 0:
            raise ConfigError("RFM weights must be non-negative")
        if not self.scale_divisor > 0:
            raise ConfigError("scale_divisor must be positive")

    def check_sum(self) -> None:
        if self.w_r + self.w_f + self.w_m <= 0:
            raise ConfigError("RFM weights must not all be zero")


@dataclass(frozen=True)
class SegmentThresholds:
    top: float = 4.5
    high: float = 4.0
    medium: float = 3.0
    low: float = 1.6

    def __post_init__(self):
        if not self.top > self.high > self.medium > self.low > 0:
            raise ConfigError("thresholds must satisfy top > high > medium > low > 0")


@dataclass(frozen=True)
class CustomerRFM:
    customer_id: str
    recency: int
    frequency: int
    monetary: Decimal
    r_score: float | None = None
    f_score: float | None = None
    m_score: float | None = None
    rfm_score: float | None = None
    segment: Segment | None = None


def id_sort_key(customer_id: str):
    # numeric ids compare numerically, anything else after them as text
    return (0, int(customer_id), "") if customer_id.isdigit() else (1, 0, customer_id)


def compute_rfm(records: Iterable[TransactionRecord], reference_date: datetime | None = None,
                frequency_mode: str = "lines", recency_mode: str = "elapsed") -> list[CustomerRFM]:
    """Recency, frequency and monetary value per customer, sorted by customer id.

    ``reference_date`` defaults to the latest invoice timestamp in the data.
    With ``recency_mode="elapsed"`` recency is the whole number of days in
    ``reference_date - last_purchase`` (floor of the timedelta); with
    ``"calendar"`` it is the difference between the two calendar dates.

    ``frequency_mode`` counts ledger lines (``lines``), distinct invoice
    dates (``distinct_dates``) or distinct invoices (``invoices``).
    """
    if frequency_mode not in FREQUENCY_MODES:
        raise ConfigError(f"unknown frequency mode {frequency_mode!r}")
    if recency_mode not in RECENCY_MODES:
        raise ConfigError(f"unknown recency mode {recency_mode!r}")

    last: dict[str, datetime] = {}
    lines: Counter = Counter()
    spend: dict[str, Decimal] = {}
    keys: dict[str, set] = {}
    latest = None
    for r in records:
        cid = r.customer_id
        if cid is None:
            raise DataError("records must be cleaned: customer id missing")
        if latest is None or r.invoice_date > latest:
            latest = r.invoice_date
        if cid not in last or r.invoice_date > last[cid]:
            last[cid] = r.invoice_date
        lines[cid] += 1
        spend[cid] = spend.get(cid, Decimal(0)) + r.line_total
        if frequency_mode == "distinct_dates":
            keys.setdefault(cid, set()).add(r.invoice_date.date())
        elif frequency_mode == "invoices":
            keys.setdefault(cid, set()).add(r.invoice_no)

    if latest is None:
        return []
    ref = latest if reference_date is None else reference_date
    if ref < latest:
        raise DataError(f"reference date {ref} precedes the latest invoice {latest}")

    out = []
    for cid in sorted(last, key=id_sort_key):
        if recency_mode == "elapsed":
            recency = (ref - last[cid]).days
        else:
            recency = (ref.date() - last[cid].date()).days
        freq = lines[cid] if frequency_mode == "lines" else len(keys[cid])
        out.append(CustomerRFM(cid, recency, freq, spend[cid]))
    return out


def rank_normalize(values: Sequence[float], direction: str) -> np.ndarray:
    """Average ranks scaled so the best value scores 100.

    ``direction`` is ``higher_is_better`` or ``lower_is_better``.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DataError("cannot rank an empty list")
    if direction == "higher_is_better":
        ranks = rankdata(v, method="average")
    elif direction == "lower_is_better":
        ranks = rankdata(-v, method="average")
    else:
        raise ConfigError(f"unknown direction {direction!r}")
    return ranks / ranks.max() * 100.0


def rfm_score(r_score: float, f_score: float, m_score: float, weights: RfmWeights | None = None,
              ndigits: int | None = 2) -> float:
    w = weights or RfmWeights()
    raw = (w.w_r * r_score + w.w_f * f_score + w.w_m * m_score) / w.scale_divisor
    return raw if ndigits is None else round(raw, ndigits)


def assign_segment(score: float, thresholds: SegmentThresholds | None = None) -> Segment:
    t = thresholds or SegmentThresholds()
    if score > t.top:
        return Segment.TOP
    if score > t.high:
        return Segment.HIGH
    if score > t.medium:
        return Segment.MEDIUM
    if score > t.low:
        return Segment.LOW
    return Segment.LOST


def score_customers(customers: Sequence[CustomerRFM], weights: RfmWeights | None = None,
                    thresholds: SegmentThresholds | None = None) -> list[CustomerRFM]:
    """Fill in rank scores, the 2-dp RFM score and the segment for every customer.

    Segments are assigned from the rounded score.
    """
    if not customers:
        return []
    weights = weights or RfmWeights()
    weights.check_sum()
    r = rank_normalize([c.recency for c in customers], "lower_is_better")
    f = rank_normalize([c.frequency for c in customers], "higher_is_better")
    m = rank_normalize([float(c.monetary) for c in customers], "higher_is_better")
    out = []
    for c, rs, fs, ms in zip(customers, r, f, m):
        score = rfm_score(rs, fs, ms, weights)
        out.append(replace(c, r_score=float(rs), f_score=float(fs), m_score=float(ms),
                           rfm_score=score, segment=assign_segment(score, thresholds)))
    return out


def segment_distribution(segments: Iterable[Segment]) -> dict[Segment, float]:
    """Percentage of customers per segment (all five keys, worst first)."""
    counts = Counter(segments)
    total = sum(counts.values())
    if total == 0:
        raise DataError("no segments to summarise")
    return {s: 100.0 * counts.get(s, 0) / total for s in SEGMENT_ORDER}


def round_percentages(dist: dict) -> dict:
    """Integer percentages summing to exactly 100 (largest remainder)."""
    floors = {k: int(np.floor(v)) for k, v in dist.items()}
    short = 100 - sum(floors.values())
    by_remainder = sorted(dist, key=lambda k: (-(dist[k] - floors[k]), list(dist).index(k)))
    for k in by_remainder[:short]:
        floors[k] += 1
    return floors


def calibration_deviations(customers: Sequence[CustomerRFM], expected: dict[str, float]) -> dict[str, float | None]:
    """Scored minus expected RFM score for each listed customer (None if absent)."""
    by_id = {c.customer_id: c for c in customers}
    out = {}
    for cid, target in expected.items():
        c = by_id.get(cid)
        out[cid] = None if c is None or c.rfm_score is None else round(c.rfm_score - target, 2)
    return out


def build_feature_matrix(source, columns: Sequence[str]) -> FeatureMatrix:
    """Stack the named columns of CustomerRFM or InvoiceSummary rows.

    Rows are ordered by ascending id; ids are recorded on the matrix.
    """
    columns = tuple(columns)
    if not columns:
        raise ConfigError("feature spec is empty")
    unknown = [c for c in columns if c not in CUSTOMER_FEATURES + INVOICE_FEATURES]
    if unknown:
        raise ConfigError(f"unknown feature(s): {', '.join(unknown)}")
    per_invoice = [c in INVOICE_FEATURES for c in columns]
    if any(per_invoice) and not all(per_invoice):
        raise ConfigError("cannot mix customer-level and invoice-level features")
    rows = list(source)
    if not rows:
        raise DataError("no rows to build a feature matrix from")

    if all(per_invoice):
        if not isinstance(rows[0], InvoiceSummary):
            raise ConfigError("invoice features need InvoiceSummary rows")
        rows.sort(key=lambda s: id_sort_key(s.invoice_no))
        ids = [s.invoice_no for s in rows]
    else:
        if not isinstance(rows[0], CustomerRFM):
            raise ConfigError("customer features need CustomerRFM rows")
        rows.sort(key=lambda c: id_sort_key(c.customer_id))
        ids = [c.customer_id for c in rows]
        missing = [c for c in columns if getattr(rows[0], c) is None]
        if missing:
            raise ConfigError(f"customers are not scored yet; missing {', '.join(missing)}")

    data = np.array([[float(getattr(r, c)) for c in columns] for r in rows], dtype=float)
    return FeatureMatrix(data, columns, tuple(ids))


def train_test_split(n_rows: int, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random split of row indices; both halves returned sorted."""
    if not 0 < test_fraction < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_test = int(round(n_rows * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
