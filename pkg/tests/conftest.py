import warnings

import numpy as np
import pytest

from utilicit.cli import bundled_path
from utilicit.corpus import generate, load_spec
from utilicit.model import DecisionModel, History, Outcome, Strategy, load_model


def make_model(prob, priors=None, best_anchor=0, worst_anchor=None, labels=None):
    """Small helper to assemble a DecisionModel from a bare (S, H, D) table."""
    prob = np.asarray(prob, dtype=np.float64)
    S, H, D = prob.shape
    if worst_anchor is None:
        worst_anchor = D - 1
    if priors is None:
        priors = [1.0 / H] * H
    labels = labels or [chr(ord("A") + i) for i in range(D)]
    outcomes = [Outcome(i, labels[i], f"outcome {labels[i]}") for i in range(D)]
    histories = [History(i, f"h{i}", priors[i]) for i in range(H)]
    strategies = [Strategy(i, f"s{i}", f"plan {i}") for i in range(S)]
    return DecisionModel(outcomes, histories, strategies, prob, best_anchor, worst_anchor)


@pytest.fixture(scope="session")
def tri_model():
    """3 outcomes, 2 strategies, 1 history; the worked fixture used throughout."""
    prob = [[[0.5, 0.5, 0.0]], [[0.8, 0.0, 0.2]]]
    return make_model(prob)


def random_model(rng, D=None, S=None, H=None):
    """A random valid model: Dirichlet-ish rows, anchors 0 and D-1."""
    D = D or int(rng.integers(3, 7))
    S = S or int(rng.integers(2, 6))
    H = H or int(rng.integers(1, 4))
    prob = rng.random((S, H, D)) + 0.05
    prob /= prob.sum(axis=2, keepdims=True)
    priors = rng.random(H) + 0.1
    priors /= priors.sum()
    return make_model(prob, priors=priors.tolist())


def random_normalized_values(rng, D, best_anchor=0, worst_anchor=None):
    worst_anchor = D - 1 if worst_anchor is None else worst_anchor
    v = rng.random(D)
    v[best_anchor] = 1.0
    v[worst_anchor] = 0.0
    return v


@pytest.fixture(scope="session")
def mini_model():
    return load_model(bundled_path("mini_panda.json"))


@pytest.fixture(scope="session")
def clean_corpus():
    """The bundled well-separated corpus: (db, ground-truth archetype per row)."""
    return generate(load_spec(bundled_path("corpus_4type.json")))


@pytest.fixture(scope="session")
def noisy_corpus():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return generate(load_spec(bundled_path("corpus_4type_noisy.json")))
