"""Experimental protocols: holdout error, learning curves, LOOCV over cluster count.

Error is always the utility loss a held-out user incurs by following the
strategy of the prototype the question tree assigns her, measured at one
history.  Every protocol is a deterministic function of (database, model,
parameters, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import hac
from .model import DecisionModel
from .tree import answer, build_tree, classify
from .utility import UtilityDatabase, pairwise_distances


@dataclass(frozen=True)
class EvalPoint:
    x: float  # train size, cluster count, or train fraction
    mean_error: float
    samples: tuple[float, ...] = field(repr=False)


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    history_id: int
    params: dict
    points: tuple[EvalPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("a report needs at least one data point")
        for p in self.points:
            if not 0.0 <= p.mean_error <= 1.0:
                raise ValueError(f"mean error {p.mean_error} outside [0, 1] at x={p.x}")
            if len(p.samples) < 1:
                raise ValueError(f"point x={p.x} has no samples")

    @property
    def mean_error(self) -> float:
        return float(np.mean([p.mean_error for p in self.points]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["protocol", "history_id", "x", "mean_error", "n_samples"])
            for p in self.points:
                writer.writerow([self.protocol, self.history_id, repr(float(p.x)),
                                 repr(p.mean_error), len(p.samples)])

    def summary(self) -> str:
        lines = [f"protocol: {self.protocol}",
                 f"history:  {self.history_id}",
                 f"params:   {self.params}"]
        for p in self.points:
            lines.append(f"  x={p.x:g}  mean UL error={p.mean_error:.6f}  (n={len(p.samples)})")
        return "\n".join(lines)


class _Scorer:
    """Caches the per-history EU table so held-out losses are O(1) lookups."""

    def __init__(self, db: UtilityDatabase, model: DecisionModel, h: int):
        self.db = db
        self.model = model
        self.h = h
        eus = db.matrix() @ model.prob[:, h, :].T  # (N, S)
        self.eus = eus
        self.starred = np.argmax(eus, axis=1)
        self.best = eus[np.arange(len(db)), self.starred]
        self.index_of = {f.id: i for i, f in enumerate(db)}
        self.distances = pairwise_distances(model, db, h)

    def loss_against(self, test_index: int, prototype_id: str) -> float:
        proto_star = self.starred[self.index_of[prototype_id]]
        return float(self.best[test_index] - self.eus[test_index, proto_star])

    def episode(self, train_idx: np.ndarray, test_idx: np.ndarray,
                k: int, gamma: float) -> list[float]:
        """Cluster + tree on the train split, classify each test function truthfully."""
        train_db = self.db.subset(train_idx)
        sub = self.distances[np.ix_(train_idx, train_idx)]
        clustering = hac(train_db, self.model, self.h, k, base_distances=sub)
        tree = build_tree(train_db, clustering, self.model, gamma)
        losses = []
        for t in test_idx:
            u = self.db[int(t)]
            result = classify(tree, lambda q: answer(q, u))
            losses.append(self.loss_against(int(t), result.prototype_id))
        return losses


def holdout_error(db: UtilityDatabase, model: DecisionModel, h: int, k: int,
                  gamma: float, train_fraction: float, runs: int, seed: int) -> EvalReport:
    """Random train/test splits; per-run mean loss on the test side."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must lie in (0, 1), got {train_fraction}")
    if runs < 1:
        raise ValueError(f"run count must be >= 1, got {runs}")
    n = len(db)
    train_size = int(round(train_fraction * n))
    point = _holdout_point(db, model, h, k, gamma, train_size, runs,
                           np.random.default_rng(seed))
    return EvalReport("holdout", h,
                      {"k": k, "gamma": gamma, "train_fraction": train_fraction,
                       "train_size": train_size, "runs": runs, "seed": seed},
                      (point,))


def _holdout_point(db, model, h, k, gamma, train_size, runs, rng) -> EvalPoint:
    n = len(db)
    if train_size < k:
        raise ValueError(f"train size {train_size} is smaller than cluster count {k}")
    if train_size >= n:
        raise ValueError(f"train size {train_size} leaves no test functions (N={n})")
    scorer = _Scorer(db, model, h)
    run_means = []
    for _ in range(runs):
        perm = rng.permutation(n)
        losses = scorer.episode(perm[:train_size], perm[train_size:], k, gamma)
        run_means.append(float(np.mean(losses)))
    return EvalPoint(x=float(train_size), mean_error=float(np.mean(run_means)),
                     samples=tuple(run_means))


def learning_curve(db: UtilityDatabase, model: DecisionModel, h: int, k: int,
                   gamma: float, train_sizes, runs: int, seed: int) -> EvalReport:
    """Holdout error as a function of the training-set size."""
    if runs < 1:
        raise ValueError(f"run count must be >= 1, got {runs}")
    sizes = [int(s) for s in train_sizes]
    if not sizes:
        raise ValueError("at least one train size is required")
    rng = np.random.default_rng(seed)
    points = [_holdout_point(db, model, h, k, gamma, size, runs, rng) for size in sizes]
    return EvalReport("learning_curve", h,
                      {"k": k, "gamma": gamma, "train_sizes": sizes,
                       "runs": runs, "seed": seed},
                      tuple(points))


def loocv_over_k(db: UtilityDatabase, model: DecisionModel, h: int,
                 k_range, gamma: float) -> EvalReport:
    """Leave-one-out error for each candidate cluster count (no randomness)."""
    n = len(db)
    ks = [int(k) for k in k_range]
    if not ks:
        raise ValueError("at least one cluster count is required")
    for k in ks:
        if not 1 <= k <= n - 1:
            raise ValueError(f"cluster count {k} outside valid range [1, {n - 1}]")
    scorer = _Scorer(db, model, h)
    points = []
    for k in ks:
        fold_losses = []
        for i in range(n):
            train_idx = np.concatenate([np.arange(i), np.arange(i + 1, n)])
            losses = scorer.episode(train_idx, np.array([i]), k, gamma)
            fold_losses.extend(losses)
        points.append(EvalPoint(x=float(k), mean_error=float(np.mean(fold_losses)),
                                samples=tuple(fold_losses)))
    return EvalReport("loocv_over_k", h, {"k_range": ks, "gamma": gamma}, tuple(points))
