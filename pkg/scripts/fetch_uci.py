"""Download the UCI Online Retail workbook and convert it to the CSV the pipeline reads.

    python scripts/fetch_uci.py data/online_retail.csv [--sha256 HEX]

Needs network access plus pandas and openpyxl (``pip install .[fetch]``).
The converted file is checked for the expected row count; pass --sha256 to
also pin the CSV's checksum once you have recorded it.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URLS = (
    "https://archive.ics.uci.edu/static/public/352/online+retail.zip",
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00352/Online%20Retail.xlsx",
)
EXPECTED_ROWS = 541909
COLUMNS = ["InvoiceNo", "StockCode", "Description", "Quantity", "InvoiceDate", "UnitPrice", "CustomerID", "Country"]


def _download() -> bytes:
    last = None
    for url in URLS:
        try:
            with urllib.request.urlopen(url, timeout=120) as resp:
                payload = resp.read()
        except OSError as exc:
            last = exc
            print(f"failed: {url}: {exc}", file=sys.stderr)
            continue
        if url.endswith(".zip"):
            with zipfile.ZipFile(io.BytesIO(payload)) as zf:
                name = next(n for n in zf.namelist() if n.lower().endswith(".xlsx"))
                payload = zf.read(name)
        return payload
    raise SystemExit(f"could not download the workbook: {last}")


def convert(xlsx: bytes, out: Path) -> int:
    import pandas as pd

    df = pd.read_excel(io.BytesIO(xlsx), dtype={"InvoiceNo": str, "StockCode": str, "CustomerID": "Int64"})
    df = df[COLUMNS]
    df["InvoiceDate"] = pd.to_datetime(df["InvoiceDate"]).dt.strftime("%m/%d/%Y %H:%M")
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False)
    return len(df)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output", type=Path)
    ap.add_argument("--xlsx", type=Path, help="use an already downloaded workbook instead of fetching")
    ap.add_argument("--sha256", help="expected checksum of the written CSV")
    args = ap.parse_args(argv)

    xlsx = args.xlsx.read_bytes() if args.xlsx else _download()
    rows = convert(xlsx, args.output)
    digest = hashlib.sha256(args.output.read_bytes()).hexdigest()
    print(f"{args.output}: {rows} rows, sha256 {digest}")
    if rows != EXPECTED_ROWS:
        print(f"row count {rows} != expected {EXPECTED_ROWS}", file=sys.stderr)
        return 1
    if args.sha256 and digest != args.sha256.lower():
        print("checksum mismatch", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
