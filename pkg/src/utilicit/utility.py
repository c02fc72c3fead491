"""Utility vectors, normalization, and the decision-theoretic loss measures.

The central quantity is the utility loss: how much expected utility a user
forfeits by following the strategy that is optimal for someone else's
utility function instead of her own.  Averaging the two directions gives a
symmetric dissimilarity that drives the clustering; it is deliberately not
a metric (the triangle inequality can fail).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .model import DecisionModel, best_strategy


@dataclass(frozen=True)
class UtilityFunction:
    """A named vector of utilities, one entry per outcome.

    The container itself is permissive about ranges so that scaled or
    unnormalized vectors can flow through the loss computations; anchor
    and [0,1] discipline is enforced where databases are built
    (``normalize``, the corpus loader, the generator).
    """

    id: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"utility values must be a 1-d vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"utility function {self.id!r} has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


class UtilityDatabase:
    """An ordered collection of same-dimension utility functions."""

    def __init__(self, functions, metadata=None):
        functions = list(functions)
        if not functions:
            raise ValueError("utility database is empty")
        dims = {len(f) for f in functions}
        if len(dims) != 1:
            raise ValueError(f"utility functions disagree on dimension: {sorted(dims)}")
        ids = [f.id for f in functions]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate utility function ids: {dupes}")
        self.functions = tuple(functions)
        self.metadata = dict(metadata or {})

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i) -> UtilityFunction:
        return self.functions[i]

    @property
    def num_outcomes(self):
        return len(self.functions[0])

    @property
    def ids(self):
        return [f.id for f in self.functions]

    def index_of(self, fid: str) -> int:
        for i, f in enumerate(self.functions):
            if f.id == fid:
                return i
        raise KeyError(f"no utility function with id {fid!r}")

    def matrix(self) -> np.ndarray:
        """All utility vectors stacked as an (N, D) array."""
        return np.stack([f.values for f in self.functions])

    def subset(self, indices, metadata=None) -> "UtilityDatabase":
        return UtilityDatabase([self.functions[i] for i in indices],
                               metadata=metadata or self.metadata)

    def content_hash(self) -> str:
        hasher = hashlib.sha256()
        for f in self.functions:
            hasher.update(f.id.encode())
            hasher.update(f.values.tobytes())
        return hasher.hexdigest()


def normalize(raw, best_anchor: int, worst_anchor: int, fid: str = "u") -> tuple[UtilityFunction, list[int]]:
    """Affinely rescale ``raw`` so the anchors land exactly on 1 and 0.

    Residual values outside [0, 1] (possible when some entry dominates an
    anchor) are clamped; the indices that needed clamping are returned so
    callers can warn about them.  Raises if the anchors coincide or are
    inverted, in which case no increasing linear map can normalize.
    """
    raw = np.asarray(raw, dtype=np.float64)
    top, bottom = raw[best_anchor], raw[worst_anchor]
    if top <= bottom:
        raise ValueError(
            f"cannot normalize: best anchor value {top} must exceed worst anchor value {bottom}")
    scaled = (raw - bottom) / (top - bottom)
    clamped = np.flatnonzero((scaled < 0.0) | (scaled > 1.0))
    scaled = np.clip(scaled, 0.0, 1.0)
    scaled[best_anchor] = 1.0
    scaled[worst_anchor] = 0.0
    return UtilityFunction(fid, scaled), clamped.tolist()


def utility_loss(model: DecisionModel, u_true, u_proto, h: int) -> float:
    """Expected-utility shortfall from acting on ``u_proto``'s best strategy.

    Both candidate strategies are evaluated under ``u_true``; the result is
    nonnegative by construction (the reference term is the maximum of the
    same EU table the other term is read from) and asymmetric in its
    arguments.
    """
    eus_true = model.eu_table(getattr(u_true, "values", u_true), h)
    s_proto, _ = best_strategy(model, u_proto, h)
    return float(eus_true.max() - eus_true[s_proto])


def distance(model: DecisionModel, u_i, u_j, h: int) -> float:
    """Symmetrized utility loss between two utility functions at one history."""
    return (utility_loss(model, u_i, u_j, h) + utility_loss(model, u_j, u_i, h)) / 2.0


def averaged_distance(model: DecisionModel, u_i, u_j) -> float:
    """Distance averaged over histories, weighted by the history priors."""
    priors = model.history_priors
    return float(sum(priors[h] * distance(model, u_i, u_j, h)
                     for h in range(model.num_histories)))


def pairwise_distances(model: DecisionModel, db: UtilityDatabase, h: int) -> np.ndarray:
    """Full N x N symmetrized-loss matrix for one history.

    Vectorized: one (N, D) @ (D, S) product gives every function's EU for
    every strategy, after which each directed loss is a difference of two
    entries in the same row.
    """
    values = db.matrix()
    eus = values @ model.prob[:, h, :].T  # (N, S)
    starred = np.argmax(eus, axis=1)
    best = eus[np.arange(len(db)), starred]
    losses = best[:, None] - eus[:, starred]  # losses[i, j] = UL(u_i, u_j | h)
    return (losses + losses.T) / 2.0
