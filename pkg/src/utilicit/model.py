"""Decision model: outcomes, histories, strategies and P(outcome | strategy, history).

The model is a plain conditional probability table rather than any richer
graphical structure; every algorithm downstream only ever consumes the
distribution over outcomes induced by a (strategy, history) pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Outcome:
    id: int
    label: str
    question_text: str


@dataclass(frozen=True)
class History:
    id: int
    label: str
    prior: float


@dataclass(frozen=True)
class Strategy:
    id: int
    label: str
    description: str


class ModelError(ValueError):
    """Raised when a model file or table violates a structural invariant."""


class DecisionModel:
    """Immutable decision problem: P(o|s,h) plus the two utility anchors.

    ``prob`` is indexed ``[strategy][history][outcome]``.  Rows within
    ``ROW_SUM_TOL`` of summing to 1 are renormalized exactly on
    construction; anything further off is rejected.
    """

    def __init__(self, outcomes, histories, strategies, prob, best_anchor, worst_anchor):
        self.outcomes = tuple(outcomes)
        self.histories = tuple(histories)
        self.strategies = tuple(strategies)
        prob = np.array(prob, dtype=np.float64)
        self.best_anchor = int(best_anchor)
        self.worst_anchor = int(worst_anchor)
        self._validate(prob)
        sums = prob.sum(axis=2, keepdims=True)
        self.prob = prob / sums
        self.prob.setflags(write=False)

    def _validate(self, prob):
        for seq, name in ((self.outcomes, "outcome"), (self.histories, "history"),
                          (self.strategies, "strategy")):
            ids = [item.id for item in seq]
            if ids != list(range(len(seq))):
                raise ModelError(f"{name} ids must be dense 0..{len(seq) - 1}, got {ids}")
        if len(self.strategies) < 2:
            raise ModelError("a decision model needs at least 2 strategies")
        expected = (len(self.strategies), len(self.histories), len(self.outcomes))
        if prob.shape != expected:
            raise ModelError(f"prob table shape {prob.shape} != (S,H,D) {expected}")
        if np.any(prob < 0):
            s, h, o = np.argwhere(prob < 0)[0]
            raise ModelError(f"negative probability at (strategy={s}, history={h}, outcome={o})")
        sums = prob.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            s, h = bad[0]
            raise ModelError(
                f"P(o|s,h) must sum to 1: got {sums[s, h]:.12f} at (strategy={s}, history={h})")
        priors = np.array([h.prior for h in self.histories])
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > ROW_SUM_TOL:
            raise ModelError(f"history priors must be nonnegative and sum to 1, got {priors}")
        D = len(self.outcomes)
        for anchor, name in ((self.best_anchor, "best_anchor"), (self.worst_anchor, "worst_anchor")):
            if not 0 <= anchor < D:
                raise ModelError(f"{name}={anchor} is not a valid outcome id (0..{D - 1})")
        if self.best_anchor == self.worst_anchor:
            raise ModelError("best_anchor and worst_anchor must differ")

    @property
    def num_outcomes(self):
        return len(self.outcomes)

    @property
    def num_strategies(self):
        return len(self.strategies)

    @property
    def num_histories(self):
        return len(self.histories)

    @property
    def history_priors(self):
        return np.array([h.prior for h in self.histories])

    def check_history(self, h):
        if not 0 <= h < self.num_histories:
            raise ModelError(f"unknown history id {h}")

    def check_strategy(self, s):
        if not 0 <= s < self.num_strategies:
            raise ModelError(f"unknown strategy id {s}")

    def eu_table(self, values, h):
        """Expected utility of every strategy for utility vector ``values`` at history ``h``.

        Returns a length-S array; the workhorse behind best_strategy and the
        pairwise loss computations (one matvec instead of S dot products).
        """
        self.check_history(h)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.num_outcomes,):
            raise ModelError(
                f"utility vector has {values.shape} entries, model has {self.num_outcomes} outcomes")
        return self.prob[:, h, :] @ values

    def content_hash(self):
        import hashlib

        hasher = hashlib.sha256()
        hasher.update(self.prob.tobytes())
        hasher.update(np.array([h.prior for h in self.histories]).tobytes())
        hasher.update(f"{self.best_anchor},{self.worst_anchor}".encode())
        return hasher.hexdigest()

    def to_dict(self):
        return {
            "outcomes": [{"id": o.id, "label": o.label, "question_text": o.question_text}
                         for o in self.outcomes],
            "histories": [{"id": h.id, "label": h.label, "prior": h.prior}
                          for h in self.histories],
            "strategies": [{"id": s.id, "label": s.label, "description": s.description}
                           for s in self.strategies],
            "prob": self.prob.tolist(),
            "best_anchor": self.best_anchor,
            "worst_anchor": self.worst_anchor,
        }


def expected_utility(model: DecisionModel, u, s: int, h: int) -> float:
    """EU of strategy ``s`` at history ``h``: the probability-weighted sum of utilities."""
    model.check_strategy(s)
    return float(model.eu_table(_values_of(u), h)[s])


def best_strategy(model: DecisionModel, u, h: int) -> tuple[int, float]:
    """Strategy maximizing expected utility, ties broken by lowest strategy id."""
    eus = model.eu_table(_values_of(u), h)
    s = int(np.argmax(eus))  # argmax returns the first (lowest-id) maximum
    return s, float(eus[s])


def _values_of(u):
    # accept either a UtilityFunction or a bare vector
    return getattr(u, "values", u)


def model_from_dict(doc: dict) -> DecisionModel:
    try:
        outcomes = [Outcome(int(o["id"]), str(o["label"]), str(o["question_text"]))
                    for o in doc["outcomes"]]
        histories = [History(int(h["id"]), str(h["label"]), float(h["prior"]))
                     for h in doc["histories"]]
        strategies = [Strategy(int(s["id"]), str(s["label"]), str(s["description"]))
                      for s in doc["strategies"]]
        prob = doc["prob"]
        best = doc["best_anchor"]
        worst = doc["worst_anchor"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc
    return DecisionModel(outcomes, histories, strategies, prob, best, worst)


def load_model(path) -> DecisionModel:
    """Load and validate a JSON model file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"cannot parse model file {path}: {exc}") from exc
    return model_from_dict(doc)


def save_model(model: DecisionModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))
