"""Induction of the yes/no question tree and classification of answer sequences.

Two question kinds are supported.  A preference question compares two
outcomes directly ("is A preferred to B?") and is true when the utility of
the first strictly exceeds the second.  A feature question compares one
outcome against a fixed lottery between the anchor outcomes; under
normalized utilities that lottery's expected utility is exactly its win
probability, so the question is a strict threshold on a single utility
value.  Indifference answers "no" in both cases.

Thresholds are placed mid-gap between consecutive observed values, and
gaps narrower than ``gamma`` yield no question at all, so users are never
asked to resolve a comparison close to their own indifference point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import Clustering, label_database
from .model import DecisionModel
from .utility import UtilityDatabase, UtilityFunction

DEFAULT_GAMMA = 0.05
GAIN_EPS = 1e-12  # split only on gains decisively above float dust

PREFERENCE = "preference"
FEATURE = "feature"


@dataclass(frozen=True)
class SplitQuestion:
    kind: str
    outcome_i: int
    outcome_j: int | None = None
    threshold: float | None = None
    text: str = ""

    def __post_init__(self):
        if self.kind == PREFERENCE:
            if self.outcome_j is None or self.outcome_i == self.outcome_j:
                raise ValueError("preference question needs two distinct outcomes")
        elif self.kind == FEATURE:
            if self.threshold is None or not 0.0 < self.threshold < 1.0:
                raise ValueError(f"feature threshold must lie strictly in (0,1), got {self.threshold}")
        else:
            raise ValueError(f"unknown question kind {self.kind!r}")


@dataclass(frozen=True)
class LeafNode:
    label: int
    prototype_id: str
    counts: dict[int, int]

    @property
    def is_leaf(self):
        return True


@dataclass(frozen=True)
class InternalNode:
    question: SplitQuestion
    yes: "TreeNode"
    no: "TreeNode"

    @property
    def is_leaf(self):
        return False


TreeNode = LeafNode | InternalNode


@dataclass(frozen=True)
class ElicitationTree:
    history_id: int
    root: TreeNode
    k: int
    gamma: float
    db_hash: str

    @property
    def depth(self) -> int:
        return _depth(self.root)

    def to_dict(self) -> dict:
        return {
            "history_id": self.history_id,
            "k": self.k,
            "gamma": self.gamma,
            "db_hash": self.db_hash,
            "max_depth": self.depth,
            "root": _node_to_dict(self.root),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


@dataclass(frozen=True)
class ClassificationResult:
    label: int
    prototype_id: str
    transcript: tuple[tuple[SplitQuestion, bool], ...]

    @property
    def questions_asked(self) -> int:
        return len(self.transcript)


def answer(split: SplitQuestion, u: UtilityFunction | np.ndarray) -> bool:
    """Truthful answer to a question for a fully known utility function."""
    values = getattr(u, "values", u)
    if split.kind == PREFERENCE:
        return bool(values[split.outcome_i] > values[split.outcome_j])
    return bool(values[split.outcome_i] > split.threshold)


def entropy(counts) -> float:
    """Shannon entropy of a label-count vector, in bits."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("label counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty node is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def gain(labels, answers) -> float:
    """Entropy reduction from routing examples by their yes/no answers."""
    labels = np.asarray(labels)
    answers = np.asarray(answers, dtype=bool)
    if labels.size == 0:
        raise ValueError("gain of an empty node is undefined")
    uniq, encoded = np.unique(labels, return_inverse=True)
    parent = np.bincount(encoded, minlength=len(uniq))
    yes = np.bincount(encoded[answers], minlength=len(uniq))
    no = parent - yes
    total = parent.sum()
    value = entropy(parent)
    for side in (yes, no):
        n_side = side.sum()
        if n_side > 0:
            value -= (n_side / total) * entropy(side)
    return float(value)


def render_question(model: DecisionModel, kind: str, outcome_i: int,
                    outcome_j: int | None = None, threshold: float | None = None) -> SplitQuestion:
    """Build a SplitQuestion with user-facing text from the model's outcome phrasing."""
    qi = model.outcomes[outcome_i].question_text
    if kind == PREFERENCE:
        qj = model.outcomes[outcome_j].question_text
        text = f"Is “{qi}” preferred to “{qj}”?"
        return SplitQuestion(PREFERENCE, outcome_i, outcome_j, None, text)
    best = model.outcomes[model.best_anchor].question_text
    worst = model.outcomes[model.worst_anchor].question_text
    c = threshold
    text = (f"Is “{qi}” preferred to a lottery giving “{best}” "
            f"with probability {c:.6g} and “{worst}” with probability {1.0 - c:.6g}?")
    return SplitQuestion(FEATURE, outcome_i, None, c, text)


def feature_thresholds(column, gamma: float) -> list[float]:
    """Mid-gap thresholds for one feature: midpoints of gaps at least ``gamma`` wide."""
    if gamma < 0:
        raise ValueError(f"gap threshold must be >= 0, got {gamma}")
    distinct = np.unique(np.asarray(column, dtype=np.float64))
    out = []
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        if hi - lo >= gamma:
            mid = (lo + hi) / 2.0
            if 0.0 < mid < 1.0:
                out.append(float(mid))
    return out


def candidate_splits(values: np.ndarray, model: DecisionModel,
                     gamma: float = DEFAULT_GAMMA) -> list[SplitQuestion]:
    """All candidate questions for the examples at a node.

    Every unordered outcome pair contributes one preference question;
    every feature contributes one question per sufficiently wide gap in
    its observed values.  The list order (preference pairs first, in
    (i, j) order, then features by (outcome, threshold)) doubles as the
    tie-breaking order during induction.
    """
    values = np.asarray(values, dtype=np.float64)
    D = model.num_outcomes
    splits = [render_question(model, PREFERENCE, i, j)
              for i in range(D) for j in range(i + 1, D)]
    for d in range(D):
        for c in feature_thresholds(values[:, d], gamma):
            splits.append(render_question(model, FEATURE, d, threshold=c))
    return splits


def _answer_matrix(values: np.ndarray, splits: list[SplitQuestion]) -> np.ndarray:
    cols = []
    for q in splits:
        if q.kind == PREFERENCE:
            cols.append(values[:, q.outcome_i] > values[:, q.outcome_j])
        else:
            cols.append(values[:, q.outcome_i] > q.threshold)
    return np.stack(cols, axis=1) if cols else np.zeros((values.shape[0], 0), dtype=bool)


def _gains(answers: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Entropy gain of every candidate at once (columns of ``answers``)."""
    n = onehot.shape[0]
    parent_counts = onehot.sum(axis=0)
    parent_entropy = entropy(parent_counts)
    yes_counts = answers.T.astype(np.float64) @ onehot  # (m, L)
    no_counts = parent_counts[None, :] - yes_counts
    out = np.full(answers.shape[1], parent_entropy)
    for counts in (yes_counts, no_counts):
        totals = counts.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = counts / totals[:, None]
            plogp = np.where(counts > 0, p * np.log2(p), 0.0)
        side_entropy = -plogp.sum(axis=1)
        weight = totals / n
        out -= np.where(totals > 0, weight * side_entropy, 0.0)
    return out


def build_tree(db: UtilityDatabase, clustering: Clustering, model: DecisionModel,
               gamma: float = DEFAULT_GAMMA) -> ElicitationTree:
    """Grow the question tree greedily by entropy gain.

    Recursion stops at pure nodes; when no candidate question achieves
    positive gain (identical answer patterns with mixed labels) the node
    becomes a majority leaf, ties going to the lowest label.
    """
    labels = np.asarray(label_database(db, clustering), dtype=np.intp)
    if labels.size == 0:
        raise ValueError("cannot build a tree from an empty training set")
    values = db.matrix()
    num_labels = int(labels.max()) + 1
    prototypes = {i: c.prototype_id for i, c in enumerate(clustering.clusters)}

    def grow(indices: np.ndarray) -> TreeNode:
        node_labels = labels[indices]
        counts = np.bincount(node_labels, minlength=num_labels)
        present = np.flatnonzero(counts)
        if len(present) == 1:
            label = int(present[0])
            return LeafNode(label, prototypes[label], {label: int(counts[label])})
        node_values = values[indices]
        splits = candidate_splits(node_values, model, gamma)
        answers = _answer_matrix(node_values, splits)
        onehot = np.zeros((len(indices), num_labels))
        onehot[np.arange(len(indices)), node_labels] = 1.0
        gains = _gains(answers, onehot)
        best = int(np.argmax(gains)) if gains.size else 0
        if gains.size == 0 or gains[best] <= GAIN_EPS:
            label = int(np.argmax(counts))  # majority, first max = lowest label
            return LeafNode(label, prototypes[label],
                            {int(l): int(counts[l]) for l in present})
        mask = answers[:, best]
        question = splits[best]
        return InternalNode(question, grow(indices[mask]), grow(indices[~mask]))

    root = grow(np.arange(len(db)))
    return ElicitationTree(history_id=clustering.history_id, root=root,
                           k=clustering.k_requested, gamma=gamma,
                           db_hash=db.content_hash())


def classify(tree: ElicitationTree, oracle) -> ClassificationResult:
    """Walk the tree, asking ``oracle(question) -> bool`` until a leaf is reached."""
    node = tree.root
    transcript = []
    while not node.is_leaf:
        reply = bool(oracle(node.question))
        transcript.append((node.question, reply))
        node = node.yes if reply else node.no
    return ClassificationResult(node.label, node.prototype_id, tuple(transcript))


def _depth(node: TreeNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(_depth(node.yes), _depth(node.no))


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {
            "label": node.label,
            "prototype": node.prototype_id,
            "counts": {str(k): v for k, v in sorted(node.counts.items())},
        }
    q = node.question
    question = {"kind": q.kind, "outcome_i": q.outcome_i, "text": q.text}
    if q.kind == PREFERENCE:
        question["outcome_j"] = q.outcome_j
    else:
        question["threshold"] = q.threshold
    return {"question": question, "yes": _node_to_dict(node.yes), "no": _node_to_dict(node.no)}


def _node_from_dict(doc: dict) -> TreeNode:
    if "label" in doc:
        return LeafNode(int(doc["label"]), str(doc["prototype"]),
                        {int(k): int(v) for k, v in doc["counts"].items()})
    q = doc["question"]
    if q["kind"] == PREFERENCE:
        question = SplitQuestion(PREFERENCE, int(q["outcome_i"]), int(q["outcome_j"]),
                                 None, q.get("text", ""))
    else:
        question = SplitQuestion(FEATURE, int(q["outcome_i"]), None,
                                 float(q["threshold"]), q.get("text", ""))
    return InternalNode(question, _node_from_dict(doc["yes"]), _node_from_dict(doc["no"]))


def tree_from_dict(doc: dict) -> ElicitationTree:
    return ElicitationTree(
        history_id=int(doc["history_id"]),
        root=_node_from_dict(doc["root"]),
        k=int(doc["k"]),
        gamma=float(doc["gamma"]),
        db_hash=str(doc.get("db_hash", "")),
    )


def load_tree(path) -> ElicitationTree:
    return tree_from_dict(json.loads(Path(path).read_text()))
