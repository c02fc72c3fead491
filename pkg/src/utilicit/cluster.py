"""Group-average agglomerative clustering of a utility database.

Clustering is per history: the dissimilarity between two utility functions
is their symmetrized utility loss at that history.  Merging maintains
inter-cluster distances with the size-weighted group-average recurrence,
so after merging clusters R and S the distance from the union to any other
cluster equals the mean of all its cross-pair base distances.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DecisionModel
from .utility import UtilityDatabase, pairwise_distances, utility_loss


@dataclass(frozen=True)
class Cluster:
    member_ids: tuple[str, ...]
    prototype_id: str
    prototype_score: float
    member_indices: tuple[int, ...] = field(repr=False)
    prototype_index: int = field(repr=False)


@dataclass(frozen=True)
class Clustering:
    history_id: int
    k_requested: int
    clusters: tuple[Cluster, ...]
    base_distances: np.ndarray = field(repr=False)

    def labels(self) -> dict[str, int]:
        """Map every member id to the index of its cluster."""
        out = {}
        for label, cluster in enumerate(self.clusters):
            for fid in cluster.member_ids:
                out[fid] = label
        return out

    def to_dict(self) -> dict:
        return {
            "history_id": self.history_id,
            "k": self.k_requested,
            "clusters": [
                {
                    "members": list(c.member_ids),
                    "prototype": c.prototype_id,
                    "prototype_score": c.prototype_score,
                }
                for c in self.clusters
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def merge_order_clusters(dist: np.ndarray, k: int) -> list[list[int]]:
    """Agglomerate indices 0..N-1 down to k groups under group-average linkage."""
    return agglomerate(dist, k)[0]


def agglomerate(dist: np.ndarray, k: int) -> tuple[list[list[int]], np.ndarray]:
    """Group-average agglomeration, also exposing the final linkage distances.

    ``dist`` is the symmetric base matrix.  Each round merges the pair at
    the global minimum inter-cluster distance; among exact ties the pair
    whose (smallest member, smallest member) representatives sort first is
    taken, which makes the procedure a deterministic function of the input
    order.  Returns the k groups (sorted by smallest member) and the k x k
    matrix of recurrence-maintained inter-group distances.
    """
    n = dist.shape[0]
    if k < 1:
        raise ValueError(f"cluster count must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"cluster count {k} exceeds database size {n}")
    work = dist.astype(np.float64).copy()
    np.fill_diagonal(work, np.inf)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    reps = np.arange(n)  # reps[i] = smallest member index of cluster rooted at i
    active = np.ones(n, dtype=bool)

    while len(members) > k:
        masked = np.where(active[:, None] & active[None, :], work, np.inf)
        lowest = masked.min()
        ties = np.argwhere(masked == lowest)
        ties = ties[ties[:, 0] < ties[:, 1]]
        keys = np.stack([np.minimum(reps[ties[:, 0]], reps[ties[:, 1]]),
                         np.maximum(reps[ties[:, 0]], reps[ties[:, 1]])], axis=1)
        pick = np.lexsort((keys[:, 1], keys[:, 0]))[0]
        r, s = int(ties[pick, 0]), int(ties[pick, 1])

        size_r, size_s = len(members[r]), len(members[s])
        merged = work[r] * size_r + work[s] * size_s
        work[r] = merged / (size_r + size_s)
        work[:, r] = work[r]
        work[r, r] = np.inf
        active[s] = False
        members[r] = members[r] + members[s]
        reps[r] = min(reps[r], reps[s])
        del members[s]

    roots = sorted(members, key=lambda root: min(members[root]))
    groups = [sorted(members[root]) for root in roots]
    linkage = work[np.ix_(roots, roots)].copy()
    np.fill_diagonal(linkage, 0.0)
    return groups, linkage


def select_prototype(member_indices, model: DecisionModel, h: int,
                     db: UtilityDatabase) -> tuple[int, float]:
    """Pick the member whose advice costs the rest of the cluster the least.

    Scores each candidate by the summed loss its best strategy inflicts on
    every member; returns (database index, score).  Ties go to the member
    earliest in database order.
    """
    member_indices = list(member_indices)
    if not member_indices:
        raise ValueError("cannot select a prototype for an empty cluster")
    best_idx, best_score = None, None
    for cand in member_indices:
        score = sum(utility_loss(model, db[j], db[cand], h) for j in member_indices)
        if best_score is None or score < best_score:
            best_idx, best_score = cand, score
    return best_idx, best_score


def hac(db: UtilityDatabase, model: DecisionModel, h: int, k: int,
        base_distances: np.ndarray | None = None) -> Clustering:
    """Cluster the database at history ``h`` into exactly k groups (for k <= N).

    ``base_distances`` lets callers that already hold the pairwise matrix
    (evaluation loops slice one big matrix per fold) skip recomputing it.
    """
    model.check_history(h)
    if len(db) < 1:
        raise ValueError("cannot cluster an empty database")
    if db.num_outcomes != model.num_outcomes:
        raise ValueError(
            f"database dimension {db.num_outcomes} != model outcomes {model.num_outcomes}")
    if base_distances is None:
        base_distances = pairwise_distances(model, db, h)
    groups = merge_order_clusters(base_distances, k)
    clusters = []
    for group in groups:
        proto_idx, score = select_prototype(group, model, h, db)
        clusters.append(Cluster(
            member_ids=tuple(db[i].id for i in group),
            prototype_id=db[proto_idx].id,
            prototype_score=score,
            member_indices=tuple(group),
            prototype_index=proto_idx,
        ))
    return Clustering(history_id=h, k_requested=k, clusters=tuple(clusters),
                      base_distances=base_distances)


def label_database(db: UtilityDatabase, clustering: Clustering) -> list[int]:
    """Cluster label of every function, in database order."""
    by_id = clustering.labels()
    labels = []
    for f in db:
        if f.id not in by_id:
            raise KeyError(f"function {f.id!r} is not covered by the clustering")
        labels.append(by_id[f.id])
    return labels


class ClusterCache:
    """Memoizes per-history clusterings keyed by (db, model, history, k).

    Readers go straight to the dict (safe under the GIL for immutable
    values); builders serialize on a lock so a given key is computed once.
    """

    def __init__(self):
        self._store: dict[tuple, Clustering] = {}
        self._lock = threading.Lock()

    def get_or_build(self, db: UtilityDatabase, model: DecisionModel,
                     h: int, k: int) -> Clustering:
        key = (db.content_hash(), model.content_hash(), h, k)
        hit = self._store.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._store.get(key)
            if hit is None:
                hit = hac(db, model, h, k)
                self._store[key] = hit
            return hit

    def __len__(self):
        return len(self._store)
