"""Common contract for the rating predictors.

Every algorithm fits on a ratings slice (plus the item catalog where it
needs content features), predicts ratings clamped to [1,5] with a shared
cold-case fallback chain, and ranks the catalog for Top-N recommendation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

# algorithm name -> default params (Table-2-style defaults where the source
# pins them, house defaults otherwise)
PARAM_DEFAULTS = {
    "BaselineOnly": {"epochs": 20, "learn_rate": 0.005, "reg": 0.02},
    "SlopeOne": {},
    "CoClustering": {"user_clusters": 7, "item_clusters": 5, "epochs": 30},
    "SvdMf": {"factors": 20, "epochs": 30, "learn_rate": 0.005, "reg": 0.02,
              "init_std": 0.1},
    "KnnBasic": {"k": 50, "similarity": "cosine", "user_based": True,
                 "min_support": 1},
    "ContentBased": {"use_keywords": True},
    "WarpHybrid": {"components": 30, "epochs": 30, "learn_rate": 0.05,
                   "margin": 1.0, "max_trials": 100, "positive_threshold": 4},
}

ALGORITHMS = tuple(PARAM_DEFAULTS)


@dataclass(frozen=True)
class RecommenderSpec:
    algorithm: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in PARAM_DEFAULTS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"expected one of {sorted(PARAM_DEFAULTS)}")
        unknown = set(self.params) - set(PARAM_DEFAULTS[self.algorithm])
        if unknown:
            raise ValueError(f"{self.algorithm}: unknown params {sorted(unknown)}")

    def resolved_params(self) -> dict:
        merged = dict(PARAM_DEFAULTS[self.algorithm])
        merged.update(self.params)
        return merged

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "RecommenderSpec":
        extra = set(d) - {"algorithm", "params"}
        if extra:
            raise ValueError(f"unknown spec keys {sorted(extra)}")
        return cls(algorithm=d["algorithm"], params=dict(d.get("params", {})))


def train_fingerprint(spec: RecommenderSpec, train, seed: int) -> str:
    h = hashlib.sha256()
    h.update(repr((spec.algorithm, sorted(spec.resolved_params().items()), seed)).encode())
    for r in sorted(train, key=lambda r: (r.user_id, r.item_id)):
        h.update(f"{r.user_id}|{r.item_id}|{r.rating}|{r.timestamp}\n".encode())
    return h.hexdigest()


class FittedRecommender:
    """Base class holding the training-slice statistics and the fallback chain."""

    def __init__(self, spec: RecommenderSpec, train, items, seed: int):
        if not train:
            raise ValueError(f"{spec.algorithm}: empty training set")
        self.spec = spec
        self.params = spec.resolved_params()
        self.seed = seed
        self.fingerprint = train_fingerprint(spec, train, seed)
        self.fallback_count = 0

        self.item_ids = sorted(items) if items else sorted({r.item_id for r in train})
        self.iidx = {iid: j for j, iid in enumerate(self.item_ids)}
        self.user_ids = sorted({r.user_id for r in train})
        self.uidx = {uid: j for j, uid in enumerate(self.user_ids)}

        self.global_mean = float(np.mean([r.rating for r in train]))
        usum, ucnt, isum, icnt = {}, {}, {}, {}
        self.rated_by_user: dict = {}
        for r in train:
            usum[r.user_id] = usum.get(r.user_id, 0.0) + r.rating
            ucnt[r.user_id] = ucnt.get(r.user_id, 0) + 1
            isum[r.item_id] = isum.get(r.item_id, 0.0) + r.rating
            icnt[r.item_id] = icnt.get(r.item_id, 0) + 1
            self.rated_by_user.setdefault(r.user_id, set()).add(r.item_id)
        self.user_means = {u: usum[u] / ucnt[u] for u in usum}
        self.item_means = {i: isum[i] / icnt[i] for i in isum}

    # -- algorithm hooks -------------------------------------------------

    def _estimate(self, user, item):
        """Algorithm-specific rating estimate, or None when undefined."""
        raise NotImplementedError

    def _rank_score(self, user, item) -> float:
        """Score used for Top-N ordering; defaults to the predicted rating."""
        return self.predict_rating(user, item)

    # -- public contract -------------------------------------------------

    def predict_rating(self, user, item) -> float:
        est = self._estimate(user, item)
        if est is None:
            self.fallback_count += 1
            est = self._fallback(user, item)
        return float(min(5.0, max(1.0, est)))

    def _fallback(self, user, item) -> float:
        if item in self.item_means:
            return self.item_means[item]
        if user in self.user_means:
            return self.user_means[user]
        if np.isfinite(self.global_mean):
            return self.global_mean
        return 3.0

    def recommend_top_n(self, user, n: int, exclude=frozenset()) -> list:
        """Top-n catalog items by descending score, ties by ascending item id."""
        if n < 1:
            raise ValueError("n must be >= 1")
        scored = [(-self._rank_score(user, iid), iid)
                  for iid in self.item_ids if iid not in exclude]
        scored.sort()
        return [iid for _, iid in scored[:n]]
