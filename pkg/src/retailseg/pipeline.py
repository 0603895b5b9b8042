"""End-to-end run: clean -> RFM -> features -> scale/PCA -> cluster -> evaluate."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from functools import cached_property
from pathlib import Path

import numpy as np

from . import plotdata
from .cluster import (
    DbscanParams,
    agglomerative_fit,
    birch_fit,
    dbscan_fit,
    gmm_fit,
    kmeans_fit,
)
from .config import PipelineConfig
from .dataio import CleanConfig, ParseConfig, aggregate_invoices, clean, parse_transactions, write_transactions
from .errors import AlgorithmError, ConfigError, DataError
from .evaluation import inertia_curve, k_distance, silhouette
from .features import (
    RfmWeights,
    SegmentThresholds,
    build_feature_matrix,
    compute_rfm,
    round_percentages,
    score_customers,
    segment_distribution,
)
from .numeric import FeatureMatrix, pca_fit_transform, scale

log = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """Everything needed to audit or repeat a run."""

    config: dict
    output_dir: str
    status: str = "ok"
    stage_counts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def root(self) -> Path:
        return Path(self.output_dir)

    def add_artifact(self, path: Path) -> None:
        rel = Path(path).relative_to(self.root).as_posix()
        if rel not in self.artifacts:
            self.artifacts.append(rel)
            self.artifacts.sort()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def write(self) -> Path:
        path = self.root / "manifest.json"
        if "manifest.json" not in self.artifacts:
            self.artifacts.append("manifest.json")
            self.artifacts.sort()
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        data = json.loads(path.read_text(encoding="utf-8"))
        manifest = cls(**data)
        # resolve relative to where the manifest actually lives
        manifest.output_dir = str(path.parent)
        return manifest


def _fmt(x: float) -> str:
    return repr(float(x))


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_rows(path: Path, header, rows, comment: str | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class _Run:
    """Lazily computed pipeline state shared by the stages."""

    def __init__(self, cfg: PipelineConfig, manifest: RunManifest):
        self.cfg = cfg
        self.manifest = manifest
        self.out = manifest.root
        self.report: dict = {}

    def _timed(self, name):
        run = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.manifest.timings[name] = round(time.perf_counter() - self.t0, 4)

        return _T()

    @cached_property
    def cleaned(self):
        cfg = self.cfg
        with self._timed("parse"):
            records = parse_transactions(cfg.input, ParseConfig(date_formats=tuple(cfg.date_formats)))
        with self._timed("clean"):
            c = cfg.cleaning
            rows, rep = clean(records, CleanConfig(c.drop_null_customer, c.drop_nonpositive_quantity, c.deduplicate))
        self.manifest.stage_counts.update(rep.to_dict())
        self.report["cleaning"] = rep.to_dict()
        dedup = f"removed {rep.duplicates_removed} more" if c.deduplicate else "was disabled"
        self.manifest.notes.append(
            f"cleaning: {rep.rows_in} - {rep.nulls_removed} null-customer - {rep.negatives_removed} "
            f"non-positive quantity = {rep.rows_after_negative_drop}; deduplication {dedup}; final count "
            f"{rep.rows_after_dedup}. A final count equal to {rep.rows_after_negative_drop} is only "
            f"consistent with zero duplicate rows."
        )
        return rows

    @cached_property
    def customers(self):
        r = self.cfg.rfm
        ref = datetime.fromisoformat(r.reference_date) if r.reference_date else None
        with self._timed("rfm"):
            base = compute_rfm(self.cleaned, ref, r.frequency_mode, r.recency_mode)
            scored = score_customers(base, RfmWeights(*r.weights, r.scale_divisor), SegmentThresholds(**r.thresholds))
        self.manifest.stage_counts["customers"] = len(scored)
        return scored

    @cached_property
    def matrix(self) -> FeatureMatrix:
        f = self.cfg.features
        if f.level == "invoice":
            source = aggregate_invoices(self.cleaned)
            self.manifest.stage_counts["invoices"] = len(source)
        else:
            source = self.customers
        fm = build_feature_matrix(source, f.columns)
        self.report["features"] = {"level": f.level, "columns": list(f.columns), "n_rows": len(fm)}
        return fm

    def space(self, algo: str) -> FeatureMatrix:
        opts = getattr(self.cfg, algo)
        fm = scale(self.matrix, opts.scaler)
        if algo == "gmm" and opts.pca_components > 0:
            model, fm = pca_fit_transform(fm, opts.pca_components)
            self.report.setdefault("pca", {}).update(
                eigenvalues=model.eigenvalues.tolist(),
                explained_variance_ratio=model.explained_variance_ratio.tolist(),
                components=model.components.tolist(),
            )
        return fm

    # -- stages ---------------------------------------------------------

    def stage_clean(self):
        rows = self.cleaned
        path = self.out / "cleaning_report.json"
        write_json(path, self.report["cleaning"])
        self.manifest.add_artifact(path)
        if self.cfg.cleaning.write_cleaned_csv:
            path = self.out / "cleaned.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                write_transactions(rows, fh, ParseConfig(date_formats=tuple(self.cfg.date_formats)))
            self.manifest.add_artifact(path)

    def stage_rfm(self):
        customers = self.customers
        path = self.out / "customers.csv"
        write_rows(path, ["customer_id", "recency", "frequency", "monetary", "r_score", "f_score", "m_score",
                          "rfm_score", "segment"],
                   ([c.customer_id, c.recency, c.frequency, f"{c.monetary:.2f}", _fmt(c.r_score), _fmt(c.f_score),
                     _fmt(c.m_score), f"{c.rfm_score:.2f}", c.segment.value] for c in customers))
        self.manifest.add_artifact(path)
        dist = segment_distribution(c.segment for c in customers)
        rounded = round_percentages(dist)
        payload = {
            "n_customers": len(customers),
            "percentages": {s.value: p for s, p in dist.items()},
            "percentages_rounded": {s.value: p for s, p in rounded.items()},
            "counts": {s.value: sum(1 for c in customers if c.segment is s) for s in dist},
        }
        path = self.out / "segments.json"
        write_json(path, payload)
        self.manifest.add_artifact(path)
        self.report["rfm"] = {**payload, "reference": str(max(r.invoice_date for r in self.cleaned))
                              if self.cfg.rfm.reference_date is None else self.cfg.rfm.reference_date}

    def stage_elbow(self):
        e, km = self.cfg.elbow, self.cfg.kmeans
        with self._timed("elbow"):
            curve = inertia_curve(self.space("kmeans"), range(e.k_min, e.k_max + 1), seeds=e.seeds,
                                  seed0=self.cfg.seed, init=km.init)
        self.manifest.seeds["elbow"] = list(range(self.cfg.seed, self.cfg.seed + e.seeds))
        path = self.out / "curves" / "elbow.csv"
        write_rows(path, ["k", "inertia"], ([k, _fmt(v)] for k, v in zip(curve.k_values, curve.inertias)))
        self.manifest.add_artifact(path)
        self.report["elbow"] = {"k_values": list(curve.k_values), "inertias": list(curve.inertias),
                                "chosen_k": curve.chosen_k}
        self.manifest.metrics["elbow_chosen_k"] = curve.chosen_k

    def stage_kdistance(self):
        k = self.cfg.dbscan.min_samples
        X = self.space("dbscan")
        if k >= len(X):
            self.manifest.notes.append(f"kdistance skipped: k={k} needs more than {len(X)} rows")
            return
        with self._timed("kdistance"):
            curve = k_distance(X, k)
        path = self.out / "curves" / "kdistance.csv"
        write_rows(path, ["rank", "kdist"], ([i, _fmt(v)] for i, v in enumerate(curve)))
        self.manifest.add_artifact(path)
        self.report["kdistance"] = {"k": k, "n": len(curve)}

    def stage_cluster(self):
        self.matrix  # input problems are data errors, not algorithm failures
        results = self.report.setdefault("algorithms", {})
        for algo in self.cfg.algorithms:
            with self._timed(f"cluster_{algo}"):
                try:
                    results[algo] = self._run_algorithm(algo)
                except (AlgorithmError, ConfigError, DataError) as exc:
                    log.error("%s failed: %s", algo, exc)
                    self.manifest.failures.append({"algorithm": algo, "error": f"{type(exc).__name__}: {exc}"})
                    results[algo] = {"error": str(exc)}
            entry = results[algo]
            if "silhouette" in entry:
                self.manifest.metrics[f"silhouette_{algo}"] = entry["silhouette"]

    def _silhouette(self, X, labels, noise="exclude"):
        try:
            return silhouette(X, labels, noise=noise).mean_score
        except DataError:
            return None

    def _run_algorithm(self, algo: str) -> dict:
        cfg = self.cfg
        X = self.space(algo)
        seed = cfg.seed
        extra = {}
        if algo == "kmeans":
            o = cfg.kmeans
            model, res = kmeans_fit(X, o.k, init=o.init, seed=seed, max_iter=o.max_iter, tol=o.tol)
            params = {"k": o.k, "init": o.init, "max_iter": o.max_iter, "tol": o.tol}
            model_dict = model.to_dict()
            if o.seed_study_runs:
                seeds = list(range(seed, seed + o.seed_study_runs))
                scores = [self._silhouette(X, kmeans_fit(X, o.k, init="random", seed=s, max_iter=o.max_iter,
                                                         tol=o.tol)[1].labels) for s in seeds]
                scores = [s for s in scores if s is not None]
                extra["seed_study"] = {"init": "random", "seeds": seeds, "silhouettes": scores,
                                       "min": min(scores), "max": max(scores), "mean": float(np.mean(scores)),
                                       "half_range": (max(scores) - min(scores)) / 2}
                self.manifest.seeds["kmeans_seed_study"] = seeds
        elif algo == "gmm":
            o = cfg.gmm
            model, res = gmm_fit(X, o.k, seed=seed, max_iter=o.max_iter, tol=o.tol, reg=o.reg)
            params = {"k": o.k, "pca_components": o.pca_components, "max_iter": o.max_iter, "tol": o.tol,
                      "reg": o.reg}
            model_dict = model.to_dict()
        elif algo == "dbscan":
            o = cfg.dbscan
            res = dbscan_fit(X, DbscanParams(o.eps, o.min_samples))
            params = {"eps": o.eps, "min_samples": o.min_samples}
            model_dict = {"n_core": res.diagnostics["n_core"]}
            extra["silhouette_noise_as_cluster"] = (
                self._silhouette(X, res.labels, noise="as_cluster") if res.n_noise else None)
            if o.eps_grid:
                extra["eps_sweep"] = [self._sweep_point(X, dbscan_fit(X, DbscanParams(e, o.min_samples)), eps=e)
                                      for e in o.eps_grid]
        elif algo == "birch":
            o = cfg.birch
            res = birch_fit(X, o.threshold, o.branching, o.n_clusters)
            params = {"threshold": o.threshold, "branching": o.branching, "n_clusters": o.n_clusters}
            model_dict = {"leaf_entries": res.diagnostics["leaf_entries"]}
            if o.threshold_grid:
                extra["threshold_sweep"] = [
                    self._sweep_point(X, birch_fit(X, t, o.branching, o.n_clusters), threshold=t)
                    for t in o.threshold_grid]
        else:
            o = cfg.agglo
            res, merges = agglomerative_fit(X, o.n_clusters, o.linkage)
            params = {"n_clusters": o.n_clusters, "linkage": o.linkage}
            model_dict = {"merges": [[m.cluster_a, m.cluster_b, m.distance, m.size] for m in merges[-50:]],
                          "merges_total": len(merges)}
        res.check()

        row_ids = X.row_ids or tuple(str(i) for i in range(len(X)))
        path = self.out / f"inputs_{algo}.csv"
        write_rows(path, ["row_id", *X.columns], ([rid, *map(_fmt, row)] for rid, row in zip(row_ids, X.data)))
        self.manifest.add_artifact(path)
        path = self.out / f"labels_{algo}.csv"
        write_rows(path, ["row_id", "label"], zip(row_ids, res.labels.tolist()))
        self.manifest.add_artifact(path)
        path = self.out / f"model_{algo}.json"
        write_json(path, model_dict)
        self.manifest.add_artifact(path)
        self.manifest.seeds[algo] = res.seed

        diagnostics = {k: v for k, v in res.diagnostics.items() if not k.endswith("_history")}
        return {
            "params": params,
            "scaler": getattr(cfg, algo).scaler,
            "seed": res.seed,
            "n_clusters": res.n_clusters,
            "noise_count": res.n_noise,
            "iterations": res.iterations,
            "silhouette": self._silhouette(X, res.labels),
            "diagnostics": diagnostics,
            **extra,
        }

    def _sweep_point(self, X, res, **param):
        return {**param, "n_clusters": res.n_clusters, "noise_count": res.n_noise,
                "silhouette": self._silhouette(X, res.labels)}


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Execute the configured stages and write all artifacts plus ``manifest.json``.

    Raises ConfigError for an invalid config (before anything is written)
    and DataError for unreadable input; after a DataError the manifest is
    still written with status ``"data_error"``. Algorithm failures do not raise:
    they are recorded in ``manifest.failures`` with status
    ``"algorithm_failure"`` and the remaining algorithms still run.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=cfg.to_dict(), output_dir=str(out))
    run = _Run(cfg, manifest)
    stages = set(cfg.stages)
    t0 = time.perf_counter()

    try:
        if "clean" in stages:
            run.stage_clean()
        if "rfm" in stages:
            run.stage_rfm()
        if "elbow" in stages:
            run.stage_elbow()
        if "cluster" in stages:
            run.stage_cluster()
        if "kdistance" in stages:
            run.stage_kdistance()
    except DataError as exc:
        # keep whatever was written accountable before reporting the error
        manifest.status = "data_error"
        manifest.notes.append(f"stopped: {exc}")
        manifest.write()
        raise

    if run.report:
        path = out / "report.json"
        write_json(path, run.report)
        manifest.add_artifact(path)
    if manifest.failures:
        manifest.status = "algorithm_failure"
    if "plotdata" in stages:
        for fig in plotdata.available_figures(manifest):
            plotdata.emit_plot_data(manifest, fig)
    manifest.timings["total"] = round(time.perf_counter() - t0, 4)
    manifest.write()
    return manifest
