"""Plot-ready CSVs for the segment, elbow, k-distance and scatter figures.

Every file starts with one ``# columns: ...`` comment line describing its
columns, followed by a normal CSV header. Rendering is left to external
tools.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ConfigError

SCATTER = {"fig5": "kmeans", "fig6": "gmm", "fig7": "dbscan", "fig8": "birch", "fig9": "agglo"}
FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "kdistance")


class MissingStage(ConfigError):
    pass


def _read_csv(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows


def _need(manifest, rel: str, stage: str, fig: str) -> Path:
    if rel not in manifest.artifacts or not (manifest.root / rel).is_file():
        raise MissingStage(f"{fig} needs the '{stage}' stage ({rel} is missing)")
    return manifest.root / rel


def available_figures(manifest) -> list[str]:
    have = set(manifest.artifacts)
    out = []
    if "segments.json" in have:
        out.append("fig3")
    if "curves/elbow.csv" in have:
        out.append("fig4")
    for fig, algo in SCATTER.items():
        if f"labels_{algo}.csv" in have:
            out.append(fig)
    if "curves/kdistance.csv" in have:
        out.append("kdistance")
    return out


def _write(manifest, name: str, comment: str, header, rows) -> Path:
    from .pipeline import write_rows

    path = manifest.root / "plotdata" / name
    write_rows(path, header, rows, comment=comment)
    manifest.add_artifact(path)
    return path


def emit_plot_data(manifest, which: str) -> Path:
    """Write the CSV for one figure and register it in the manifest.

    ``which`` is ``fig3`` (segment shares), ``fig4`` (elbow), ``fig5``-``fig9``
    (k-means, GMM, DBSCAN, BIRCH, agglomerative scatters) or ``kdistance``.
    The manifest file itself is rewritten only by the caller.
    """
    if which not in FIGURES:
        raise ConfigError(f"unknown figure {which!r}; expected one of {FIGURES}")

    if which == "fig3":
        seg = json.loads(_need(manifest, "segments.json", "rfm", which).read_text(encoding="utf-8"))
        rows = [[s, repr(p), seg["percentages_rounded"][s], seg["counts"][s]] for s, p in seg["percentages"].items()]
        return _write(manifest, "fig3_segments.csv",
                      "columns: segment, percentage (exact), percentage_rounded (integers summing to 100), count",
                      ["segment", "percentage", "percentage_rounded", "count"], rows)

    if which == "fig4":
        rows = _read_csv(_need(manifest, "curves/elbow.csv", "elbow", which))
        return _write(manifest, "fig4_elbow.csv", "columns: k (cluster count), inertia (best-of-seeds WCSS)",
                      rows[0], rows[1:])

    if which == "kdistance":
        rows = _read_csv(_need(manifest, "curves/kdistance.csv", "kdistance", which))
        return _write(manifest, "fig7_kdistance.csv",
                      "columns: rank (0-based, ascending), kdist (distance to k-th nearest neighbour)",
                      rows[0], rows[1:])

    algo = SCATTER[which]
    inputs = _read_csv(_need(manifest, f"inputs_{algo}.csv", "cluster", which))
    labels = _read_csv(_need(manifest, f"labels_{algo}.csv", "cluster", which))
    header, data = inputs[0], inputs[1:]
    label_of = {r[0]: r[1] for r in labels[1:]}
    xname = header[1]
    yname = header[2] if len(header) > 2 else None
    rows = [[r[0], r[1], r[2] if yname else "0.0", label_of[r[0]]] for r in data]
    comment = (f"columns: row_id, x ({xname}), y ({yname or 'constant 0, one-dimensional input'}), "
               f"label (-1 = noise)")
    return _write(manifest, f"{which}_{algo}.csv", comment, ["row_id", "x", "y", "label"], rows)
