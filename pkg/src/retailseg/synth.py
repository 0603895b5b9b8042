"""Seeded generator of small ledgers shaped like the online-retail export.

The output mimics the real file's quirks: guest invoices without a
customer id, cancellation invoices (``C`` prefix, negative quantities),
exact duplicate lines and the occasional zero-price line.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timedelta
from decimal import Decimal

import numpy as np

from .dataio import TransactionRecord, write_transactions

START = datetime(2010, 12, 1, 8, 0)
END = datetime(2011, 12, 9, 12, 50)
COUNTRIES = ("United Kingdom",) * 8 + ("France", "Germany", "EIRE", "Spain", "Netherlands")


def _catalogue(rng: np.random.Generator, size: int = 60):
    items = []
    for i in range(size):
        code = f"{20000 + int(rng.integers(0, 80000)):05d}"
        if rng.random() < 0.2:
            code += "ABC"[int(rng.integers(0, 3))]
        price = Decimal(str(round(float(rng.choice([0.42, 0.85, 1.25, 1.65, 2.1, 2.55, 3.75, 4.95, 7.95, 12.75])), 2)))
        items.append((code, f"ITEM {i:02d} {'RED BLUE GREEN'.split()[i % 3]}", price))
    return items


def generate_ledger(n_rows: int = 1000, seed: int = 0, n_customers: int = 120) -> list[TransactionRecord]:
    """Exactly ``n_rows`` ledger lines, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    items = _catalogue(rng)
    customers = [f"{12346 + 7 * i}" for i in range(n_customers)]
    # heavy-tailed activity: a few customers buy far more often
    activity = rng.pareto(1.2, n_customers) + 0.2
    activity /= activity.sum()
    country = {c: COUNTRIES[int(rng.integers(0, len(COUNTRIES)))] for c in customers}
    span = (END - START).total_seconds() / 60

    rows: list[TransactionRecord] = []
    invoice = 536365
    while len(rows) < n_rows - 1:
        when = START + timedelta(minutes=int(rng.integers(0, int(span))))
        guest = rng.random() < 0.2
        cid = None if guest else customers[int(rng.choice(n_customers, p=activity))]
        where = "United Kingdom" if cid is None else country[cid]
        n_lines = int(rng.integers(1, 12))
        cancel = (not guest) and rng.random() < 0.04
        inv = f"C{invoice}" if cancel else str(invoice)
        invoice += 1
        for _ in range(n_lines):
            code, desc, price = items[int(rng.integers(0, len(items)))]
            qty = int(rng.choice([1, 2, 3, 4, 6, 12, 24])) * (3 if rng.random() < 0.05 else 1)
            if cancel:
                qty = -qty
            if rng.random() < 0.01:
                price = Decimal("0.00")
            rec = TransactionRecord(inv, code, None if guest and rng.random() < 0.3 else desc, qty,
                                    when, price, cid, where)
            rows.append(rec)
            if rng.random() < 0.015:
                rows.append(rec)
    rows = rows[:n_rows - 1]
    # one closing sale pins the latest timestamp, giving recency a known reference
    code, desc, price = items[0]
    rows.append(TransactionRecord(str(invoice), code, desc, 1, END, price, customers[0],
                                  country[customers[0]]))
    return rows[:n_rows]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Write a synthetic retail ledger CSV.")
    ap.add_argument("output", help="destination CSV path, or - for stdout")
    ap.add_argument("--rows", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--customers", type=int, default=120)
    args = ap.parse_args(argv)
    records = generate_ledger(args.rows, args.seed, args.customers)
    if args.output == "-":
        write_transactions(records, sys.stdout)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_transactions(records, fh)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
