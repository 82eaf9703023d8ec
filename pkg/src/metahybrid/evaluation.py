"""Experiment runner: executes the nested-split methodology end to end and
aggregates per-algorithm, meta-hybrid, and oracle rows into a report."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import context as ctx
from . import forest as rf
from . import hybrid as hy
from . import recommenders as rec
from .data import Dataset
from .metrics import RelevanceConfig, ndcg_at, precision_recall_at
from .seeding import derive_seed
from .splits import SplitPlan, nested_split, slice_events

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("P@3", "P@5", "P@10", "R@3", "R@5", "R@10", "nDCG", "RMSE")


@dataclass
class ContextConfig:
    include_age: bool = True
    max_keywords: int = 2000
    genre_components: int = 10
    keyword_components: int = 15


@dataclass
class ExperimentReport:
    rows: dict                      # algorithm/Hybrid/Opt-hybrid -> metric dict
    label_distribution: dict        # training-label histogram (Figure-6 analogue)
    confusion: dict                 # actual best -> {predicted -> count}
    importances: dict               # per_column / per_attribute
    rmse_activity: dict             # candidate -> activity stats where it is RMSE-best
    per_user: list                  # per-user metric dicts, for CSV dumps
    skipped_label_users: int = 0
    skipped_eval_users: int = 0
    seed: int = 0
    inner_ratio: float = 0.8
    candidate_names: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"Experiment report (seed={self.seed}, inner ratio "
            f"{self.inner_ratio:.2f}, {len(self.per_user)} evaluated users)",
            "",
            "%-14s" % "Algorithm" + "".join("%9s" % c for c in METRIC_COLUMNS),
        ]
        for name, row in self.rows.items():
            lines.append("%-14s" % name + "".join(
                "%9.4f" % row[c] for c in METRIC_COLUMNS))
        lines.append("")
        lines.append("Training-label distribution:")
        for name, count in self.label_distribution.items():
            lines.append(f"  {name}: {count}")
        lines.append("")
        lines.append("Classifier confusion (rows = actual best, cols = predicted):")
        names = self.candidate_names
        lines.append("%-14s" % "" + "".join("%14s" % n for n in names))
        for actual in names:
            row = self.confusion.get(actual, {})
            lines.append("%-14s" % actual + "".join(
                "%14d" % row.get(p, 0) for p in names))
        lines.append("")
        lines.append("Top feature importances (summed per attribute):")
        for name, value in list(self.importances.get("per_attribute", {}).items())[:12]:
            lines.append(f"  {name}: {value:.4f}")
        lines.append("")
        lines.append("Activity where each candidate is RMSE-best "
                     "(mean / q25 / q50 / q75 ratings):")
        for name, stats in self.rmse_activity.items():
            lines.append("  %-14s %8.2f %6.1f %6.1f %6.1f (n=%d)" % (
                name, stats["average"], stats["q25"], stats["q50"],
                stats["q75"], stats["n_users"]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "inner_ratio": self.inner_ratio,
            "candidate_names": self.candidate_names,
            "rows": self.rows,
            "label_distribution": self.label_distribution,
            "confusion": self.confusion,
            "importances": self.importances,
            "rmse_activity": self.rmse_activity,
            "skipped_label_users": self.skipped_label_users,
            "skipped_eval_users": self.skipped_eval_users,
            "n_evaluated_users": len(self.per_user),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def per_user_csv(self) -> str:
        if not self.per_user:
            return "user_id\n"
        keys = [k for k in self.per_user[0] if k != "user_id"]
        lines = ["user_id," + ",".join(keys)]
        for row in self.per_user:
            lines.append(str(row["user_id"]) + "," + ",".join(
                repr(row[k]) if isinstance(row[k], float) else str(row[k])
                for k in keys))
        return "\n".join(lines) + "\n"


def fit_candidates(candidates: hy.CandidateSet, train_events, items,
                   master_seed: int, stage: str, threads: int | None = None) -> dict:
    """Fit every candidate on one ratings slice; per-candidate derived seeds."""
    def _fit(name_spec):
        name, spec = name_spec
        seed = derive_seed(master_seed, stage, name)
        return name, rec.fit(spec, train_events, items=items, seed=seed)

    pairs = list(zip(candidates.names, candidates.specs))
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        return dict(pool.map(_fit, pairs))


def build_contexts(user_ids, inner_train: dict, dataset: Dataset,
                   schema: ctx.ContextSchema, pca_genres=None, pca_keywords=None,
                   fit_pcas: bool = False):
    """Raw features per user from the inner-train slice, assembled with the
    given (or freshly fitted) PCA models."""
    raws = [ctx.extract_raw(uid, inner_train.get(uid, []), dataset.items,
                            dataset.users.get(uid))
            for uid in user_ids]
    if fit_pcas:
        pca_genres, pca_keywords = ctx.fit_histogram_pcas(raws, schema)
    matrix, names = ctx.assemble_matrix(raws, pca_genres, pca_keywords, schema)
    return matrix, names, pca_genres, pca_keywords


def _per_user_eval(uid, fitted: dict, candidate_names, train_items, holdout_events,
                   relevance: RelevanceConfig):
    """All candidate metrics for one user against the holdout, or None when
    the holdout is empty."""
    holdout = {r.item_id: r.rating for r in holdout_events}
    if not holdout:
        return None
    relevant = {iid for iid, r in holdout.items() if r >= relevance.threshold}
    top_n = max(max(relevance.cutoffs), relevance.ndcg_cutoff)
    out = {"user_id": uid, "n_train": len(train_items)}
    for name in candidate_names:
        model = fitted[name]
        ranked = model.recommend_top_n(uid, top_n, exclude=train_items)
        for k in relevance.cutoffs:
            p, r = precision_recall_at(ranked, relevant, k)
            out[f"{name}:P@{k}"] = p
            out[f"{name}:R@{k}"] = r
        out[f"{name}:nDCG"] = ndcg_at(ranked, holdout, relevance.ndcg_cutoff, relevance)
        sq = [(model.predict_rating(uid, iid) - rating) ** 2
              for iid, rating in sorted(holdout.items())]
        out[f"{name}:RMSE"] = math.sqrt(sum(sq) / len(sq))
    return out


def run_experiment(dataset: Dataset, candidates: hy.CandidateSet,
                   plan: SplitPlan, forest_params: rf.ForestParams,
                   relevance: RelevanceConfig = RelevanceConfig(),
                   context_config: ContextConfig = ContextConfig(),
                   master_seed: int = 0, threads: int | None = None,
                   label_cutoff: int = 10):
    """Execute the full eight-step methodology and build the report.

    Returns (report, artifacts) where artifacts carries the split, fitted
    models, labeled set, and meta model for reuse or serialization.
    """
    plan = SplitPlan(outer_ratio=plan.outer_ratio, inner_ratio=plan.inner_ratio,
                     seed=derive_seed(master_seed, "split"), mode=plan.mode)
    split = nested_split(dataset, plan)

    schema = ctx.build_schema(
        dataset.items, dataset.users, include_age=context_config.include_age,
        max_keywords=context_config.max_keywords,
        genre_components=context_config.genre_components,
        keyword_components=context_config.keyword_components)

    # step 3: fit candidates on TRh inner-train
    fitted_train = fit_candidates(candidates, slice_events(split.train_inner_train),
                                  dataset.items, master_seed, "fit-train", threads)

    # step 4: label TRh users by best nDCG on their inner holdout
    train_matrix, feature_names, pca_g, pca_k = build_contexts(
        split.train_users, split.train_inner_train, dataset, schema, fit_pcas=True)
    train_items_tr = {uid: {r.item_id for r in evs}
                      for uid, evs in split.train_inner_train.items()}
    labeled = hy.generate_labels(candidates, fitted_train, split.train_users,
                                 train_matrix, train_items_tr,
                                 split.train_inner_test, n=label_cutoff,
                                 relevance=relevance)

    # step 5: train the selection forest
    params = rf.ForestParams(**{**forest_params.to_dict(),
                                "seed": derive_seed(master_seed, "forest")})
    # step 7: serving models, fitted on the TEh inner-train slice
    fitted_eval = fit_candidates(candidates, slice_events(split.test_inner_train),
                                 dataset.items, master_seed, "fit-eval", threads)
    meta = hy.train_meta(labeled, params, candidates, fitted_eval, schema=schema,
                         pca_genres=pca_g, pca_keywords=pca_k,
                         provenance=f"seed={master_seed}")

    # step 6: TEh contexts with the TRh-fitted PCA models, then dispatch
    test_matrix, _, _, _ = build_contexts(split.test_users, split.test_inner_train,
                                          dataset, schema, pca_g, pca_k)
    dispatched = {uid: hy.predict_recommender(meta, test_matrix[row])
                  for row, uid in enumerate(split.test_users)}

    # step 8: score candidates, hybrid, and oracle against TEh inner-test
    test_items_tr = {uid: {r.item_id for r in evs}
                     for uid, evs in split.test_inner_train.items()}

    def _eval_user(uid):
        return _per_user_eval(uid, fitted_eval, candidates.names,
                              test_items_tr.get(uid, set()),
                              split.test_inner_test.get(uid, []), relevance)

    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        evaluated = list(pool.map(_eval_user, split.test_users))
    per_user = []
    skipped_eval = 0
    for uid, row in zip(split.test_users, evaluated):
        if row is None:
            skipped_eval += 1
            continue
        row["dispatched"] = dispatched[uid]
        names = candidates.names
        row["oracle"] = names[int(np.argmax([row[f"{n}:nDCG"] for n in names]))]
        per_user.append(row)

    report = _build_report(per_user, candidates, labeled, meta, feature_names,
                           schema, relevance, skipped_eval, master_seed, plan)
    artifacts = {"split": split, "schema": schema, "fitted_train": fitted_train,
                 "fitted_eval": fitted_eval, "labeled": labeled, "meta": meta,
                 "feature_names": feature_names, "dispatched": dispatched,
                 "test_matrix": test_matrix}
    return report, artifacts


def _build_report(per_user, candidates, labeled, meta, feature_names, schema,
                  relevance, skipped_eval, master_seed, plan) -> ExperimentReport:
    names = candidates.names

    def row_for(picker) -> dict:
        row = {}
        for col in METRIC_COLUMNS:
            vals = [u[f"{picker(u)}:{col}"] for u in per_user]
            row[col] = float(np.mean(vals)) if vals else 0.0
        return row

    rows = {}
    for name in names:
        rows[name] = row_for(lambda u, n=name: n)
    rows["Hybrid"] = row_for(lambda u: u["dispatched"])
    rows["Opt. hybrid"] = row_for(lambda u: u["oracle"])

    label_dist = {n: labeled.labels.count(n) for n in names}

    confusion: dict = {}
    for u in per_user:
        confusion.setdefault(u["oracle"], {})
        confusion[u["oracle"]][u["dispatched"]] = \
            confusion[u["oracle"]].get(u["dispatched"], 0) + 1

    importances = rf.feature_importances(meta.forest, feature_names,
                                         schema.feature_groups())

    rmse_activity = {}
    for name in names:
        counts = [u["n_train"] for u in per_user
                  if name == min(names, key=lambda n: (u[f"{n}:RMSE"], names.index(n)))]
        if counts:
            arr = np.array(counts, dtype=float)
            rmse_activity[name] = {
                "average": float(arr.mean()),
                "q25": float(np.percentile(arr, 25)),
                "q50": float(np.percentile(arr, 50)),
                "q75": float(np.percentile(arr, 75)),
                "n_users": len(counts),
            }
        else:
            rmse_activity[name] = {"average": 0.0, "q25": 0.0, "q50": 0.0,
                                   "q75": 0.0, "n_users": 0}

    return ExperimentReport(
        rows=rows, label_distribution=label_dist, confusion=confusion,
        importances=importances, rmse_activity=rmse_activity, per_user=per_user,
        skipped_label_users=len(labeled.skipped_users),
        skipped_eval_users=skipped_eval, seed=master_seed,
        inner_ratio=plan.inner_ratio, candidate_names=list(names))
