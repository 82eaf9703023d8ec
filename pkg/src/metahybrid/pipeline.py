"""Stage-wise pipeline behind the CLI.

Each stage reads the artifacts of earlier stages from the output
directory, writes its own, and registers every file in a content-hash
manifest. Stages mirror the eight-step offline methodology and reuse the
same helpers (and seed derivations) as `evaluation.run_experiment`, so a
staged run and an in-memory run produce identical reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pickle

import numpy as np

from . import context as ctx
from . import data as dat
from . import forest as rf
from . import hybrid as hy
from .config import ExperimentConfig
from .evaluation import (
    _build_report,
    _per_user_eval,
    build_contexts,
    fit_candidates,
)
from .seeding import derive_seed
from .splits import SplitPlan, nested_split, slice_events

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageError(Exception):
    """A stage precondition failed (missing artifact, bad input)."""


def _manifest_path(outdir):
    return os.path.join(outdir, MANIFEST)


def _load_manifest(outdir) -> dict:
    path = _manifest_path(outdir)
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return {"files": {}}


def _register(outdir, name: str):
    manifest = _load_manifest(outdir)
    with open(os.path.join(outdir, name), "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    manifest["files"][name] = digest
    with open(_manifest_path(outdir), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_pickle(outdir, name: str, obj):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "wb") as fh:
        pickle.dump({"format_version": 1, "payload": obj}, fh, protocol=4)
    _register(outdir, name)


def _write_text(outdir, name: str, text: str):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
        fh.write(text)
    _register(outdir, name)


def _read_pickle(outdir, name: str, stage: str):
    path = os.path.join(outdir, name)
    if not os.path.exists(path):
        raise StageError(f"stage '{stage}' requires missing artifact {name}; "
                         f"run the earlier stages first")
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    if blob.get("format_version") != 1:
        raise StageError(f"{name}: unsupported artifact version")
    return blob["payload"]


def stage_ingest(cfg: ExperimentConfig) -> dict:
    if cfg.dataset_format == "movielens":
        dataset = dat.load_movielens(cfg.ratings_path, cfg.users_path, cfg.items_path)
    else:
        dataset = dat.load_generic_ratings(cfg.ratings_path)
    if cfg.metadata_path:
        dataset = dat.enrich_items(dataset, cfg.metadata_path)
    if cfg.cold_start_enabled:
        dataset = dat.induce_cold_start(dataset, derive_seed(cfg.seed, "cold-start"),
                                        cfg.cold_start_min_keep,
                                        cfg.cold_start_max_keep)
    if cfg.min_ratings > 0:
        dataset = dat.filter_min_ratings(dataset, cfg.min_ratings)
    _write_pickle(cfg.output_dir, "dataset.pkl", dataset)
    summary = (f"ingested {len(dataset.ratings)} ratings, "
               f"{len(dataset.users)} users, {len(dataset.items)} items")
    log.info(summary)
    return {"summary": summary, "dataset": dataset}


def stage_split(cfg: ExperimentConfig) -> dict:
    dataset = _read_pickle(cfg.output_dir, "dataset.pkl", "split")
    plan = SplitPlan(outer_ratio=cfg.split.outer_ratio,
                     inner_ratio=cfg.split.inner_ratio,
                     seed=derive_seed(cfg.seed, "split"), mode=cfg.split.mode)
    split = nested_split(dataset, plan)
    _write_pickle(cfg.output_dir, "split.pkl", split)
    summary = (f"outer split {len(split.train_users)}:{len(split.test_users)} users, "
               f"inner ratio {cfg.split.inner_ratio:.2f} ({cfg.split.mode})")
    log.info(summary)
    return {"summary": summary, "split": split}


def stage_fit_candidates(cfg: ExperimentConfig) -> dict:
    dataset = _read_pickle(cfg.output_dir, "dataset.pkl", "fit-candidates")
    split = _read_pickle(cfg.output_dir, "split.pkl", "fit-candidates")
    candidates = cfg.candidate_set()
    fitted_train = fit_candidates(candidates, slice_events(split.train_inner_train),
                                  dataset.items, cfg.seed, "fit-train", cfg.threads)
    fitted_eval = fit_candidates(candidates, slice_events(split.test_inner_train),
                                 dataset.items, cfg.seed, "fit-eval", cfg.threads)
    _write_pickle(cfg.output_dir, "candidates_train.pkl", fitted_train)
    _write_pickle(cfg.output_dir, "candidates_eval.pkl", fitted_eval)
    summary = f"fitted {len(candidates.names)} candidates on both inner-train slices"
    log.info(summary)
    return {"summary": summary}


def stage_label(cfg: ExperimentConfig) -> dict:
    dataset = _read_pickle(cfg.output_dir, "dataset.pkl", "label")
    split = _read_pickle(cfg.output_dir, "split.pkl", "label")
    fitted_train = _read_pickle(cfg.output_dir, "candidates_train.pkl", "label")
    candidates = cfg.candidate_set()
    schema = ctx.build_schema(dataset.items, dataset.users,
                              include_age=cfg.context.include_age,
                              max_keywords=cfg.context.max_keywords,
                              genre_components=cfg.context.genre_components,
                              keyword_components=cfg.context.keyword_components)
    matrix, names, pca_g, pca_k = build_contexts(
        split.train_users, split.train_inner_train, dataset, schema, fit_pcas=True)
    train_items = {uid: {r.item_id for r in evs}
                   for uid, evs in split.train_inner_train.items()}
    labeled = hy.generate_labels(candidates, fitted_train, split.train_users,
                                 matrix, train_items, split.train_inner_test,
                                 n=cfg.label_cutoff, relevance=cfg.relevance)
    bundle = {"labeled": labeled, "schema": schema, "pca_genres": pca_g,
              "pca_keywords": pca_k, "feature_names": names}
    _write_pickle(cfg.output_dir, "labeled.pkl", bundle)
    labeled.export_csv(os.path.join(cfg.output_dir, "labels.csv"))
    _register(cfg.output_dir, "labels.csv")
    ctx.export_matrix(os.path.join(cfg.output_dir, "contexts_train.csv"),
                      matrix, names, split.train_users)
    _register(cfg.output_dir, "contexts_train.csv")
    summary = (f"labeled {len(labeled.labels)} users "
               f"({len(labeled.skipped_users)} skipped, {len(labeled.tied_users)} ties)")
    log.info(summary)
    return {"summary": summary}


def stage_train_meta(cfg: ExperimentConfig) -> dict:
    bundle = _read_pickle(cfg.output_dir, "labeled.pkl", "train-meta")
    fitted_eval = _read_pickle(cfg.output_dir, "candidates_eval.pkl", "train-meta")
    candidates = cfg.candidate_set()
    params = rf.ForestParams(**{**cfg.forest.to_dict(),
                                "seed": derive_seed(cfg.seed, "forest")})
    meta = hy.train_meta(bundle["labeled"], params, candidates, fitted_eval,
                         schema=bundle["schema"], pca_genres=bundle["pca_genres"],
                         pca_keywords=bundle["pca_keywords"],
                         provenance=f"seed={cfg.seed}")
    _write_pickle(cfg.output_dir, "meta.pkl", meta)
    importances = rf.feature_importances(meta.forest, bundle["feature_names"],
                                         bundle["schema"].feature_groups())
    rf.export_importances(os.path.join(cfg.output_dir, "importances.csv"), importances)
    _register(cfg.output_dir, "importances.csv")
    summary = f"trained forest with {params.n_estimators} trees on {len(bundle['labeled'].labels)} labels"
    log.info(summary)
    return {"summary": summary}


def stage_evaluate(cfg: ExperimentConfig) -> dict:
    dataset = _read_pickle(cfg.output_dir, "dataset.pkl", "evaluate")
    split = _read_pickle(cfg.output_dir, "split.pkl", "evaluate")
    fitted_eval = _read_pickle(cfg.output_dir, "candidates_eval.pkl", "evaluate")
    meta = _read_pickle(cfg.output_dir, "meta.pkl", "evaluate")
    bundle = _read_pickle(cfg.output_dir, "labeled.pkl", "evaluate")
    candidates = cfg.candidate_set()

    test_matrix, _, _, _ = build_contexts(
        split.test_users, split.test_inner_train, dataset, meta.schema,
        meta.pca_genres, meta.pca_keywords)
    dispatched = {uid: hy.predict_recommender(meta, test_matrix[row])
                  for row, uid in enumerate(split.test_users)}
    test_items = {uid: {r.item_id for r in evs}
                  for uid, evs in split.test_inner_train.items()}

    per_user = []
    skipped = 0
    for uid in split.test_users:
        row = _per_user_eval(uid, fitted_eval, candidates.names,
                             test_items.get(uid, set()),
                             split.test_inner_test.get(uid, []), cfg.relevance)
        if row is None:
            skipped += 1
            continue
        row["dispatched"] = dispatched[uid]
        row["oracle"] = candidates.names[int(np.argmax(
            [row[f"{n}:nDCG"] for n in candidates.names]))]
        per_user.append(row)

    plan = SplitPlan(outer_ratio=cfg.split.outer_ratio,
                     inner_ratio=cfg.split.inner_ratio,
                     seed=derive_seed(cfg.seed, "split"), mode=cfg.split.mode)
    report = _build_report(per_user, candidates, bundle["labeled"], meta,
                           bundle["feature_names"], bundle["schema"],
                           cfg.relevance, skipped, cfg.seed, plan)
    _write_pickle(cfg.output_dir, "evaluation.pkl", report)
    _write_text(cfg.output_dir, "per_user_metrics.csv", report.per_user_csv())
    summary = f"evaluated {len(per_user)} users ({skipped} skipped)"
    log.info(summary)
    return {"summary": summary, "report": report}


def stage_report(cfg: ExperimentConfig) -> dict:
    report = _read_pickle(cfg.output_dir, "evaluation.pkl", "report")
    _write_text(cfg.output_dir, "report.txt", report.to_text())
    _write_text(cfg.output_dir, "report.json", report.to_json() + "\n")
    return {"summary": "wrote report.txt and report.json", "report": report}


STAGES = {
    "ingest": stage_ingest,
    "split": stage_split,
    "fit-candidates": stage_fit_candidates,
    "label": stage_label,
    "train-meta": stage_train_meta,
    "evaluate": stage_evaluate,
    "report": stage_report,
}

STAGE_ORDER = ("ingest", "split", "fit-candidates", "label", "train-meta",
               "evaluate", "report")


def run_all(cfg: ExperimentConfig) -> dict:
    result = {}
    for name in STAGE_ORDER:
        result = STAGES[name](cfg)
    return result
