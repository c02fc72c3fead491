"""Author the bundled illustrative model and synthetic corpora.

Builds a stylized prenatal-testing decision model (22 outcomes, 18
conditional test plans, 4 age-group histories) by exact enumeration of
each plan's event tree, plus four utility archetypes used by the bundled
corpus generator specs.  Probabilities and utilities are synthetic and
exaggerated for clean separation; they are illustrative, not clinical.

Running this script regenerates src/utilicit/data/*.json and prints the
calibration report whose numbers are frozen into the test suite.  It
fails loudly if any separation margin needed by the test suite does not
hold.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from utilicit.model import DecisionModel, History, Outcome, Strategy, save_model
from utilicit.corpus import GeneratorSpec, generate
from utilicit.cluster import hac, label_database
from utilicit.tree import FEATURE, answer, build_tree, classify
from utilicit.evaluate import holdout_error, learning_curve, loocv_over_k
from utilicit.utility import UtilityDatabase, UtilityFunction, pairwise_distances

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "utilicit" / "data"

# ---------------------------------------------------------------------------
# outcome space
# ---------------------------------------------------------------------------

OUTCOMES = [
    # (label, question_text)
    ("healthy birth, no testing", "a healthy child born with no prenatal testing"),
    ("healthy birth, early all-clear", "a healthy child born after a reassuring early test"),
    ("healthy birth, late all-clear", "a healthy child born after a reassuring late test"),
    ("healthy birth, scare resolved", "a healthy child born after a positive result was overturned by a follow-up test"),
    ("healthy birth, positive unresolved", "a healthy child born after a positive result that was never followed up"),
    ("healthy birth, double all-clear", "a healthy child born after two reassuring tests"),
    ("affected birth, no testing", "a child born with the condition, with no warning"),
    ("affected birth, early false negative", "a child born with the condition after a falsely reassuring early test"),
    ("affected birth, late false negative", "a child born with the condition after a falsely reassuring late test"),
    ("affected birth, known early", "a child born with the condition that was known early in the pregnancy"),
    ("affected birth, known late", "a child born with the condition that was known late in the pregnancy"),
    ("miscarriage of healthy fetus after early test", "losing a healthy pregnancy to a complication of the early test"),
    ("miscarriage of healthy fetus after late test", "losing a healthy pregnancy to a complication of the late test"),
    ("miscarriage of healthy fetus after second test", "losing a healthy pregnancy to a complication of a second test"),
    ("miscarriage of affected fetus after early test", "losing an affected pregnancy to a complication of the early test"),
    ("miscarriage of affected fetus after late test", "losing an affected pregnancy to a complication of the late test"),
    ("miscarriage of affected fetus after second test", "losing an affected pregnancy to a complication of a second test"),
    ("termination of affected pregnancy, early", "ending an affected pregnancy early, on one positive test"),
    ("termination of affected pregnancy, late", "ending an affected pregnancy late, on one positive test"),
    ("termination of healthy pregnancy on false positive", "ending a pregnancy that was actually healthy because of a false positive"),
    ("termination of affected pregnancy, confirmed", "ending an affected pregnancy after two positive tests"),
    ("death of the mother from a procedure", "the mother dying from a complication of a procedure"),
]

BEST_ANCHOR = 1
WORST_ANCHOR = 21

# outcome indices, named for the simulator
(B_H_NOTEST, B_H_EARLY, B_H_LATE, B_H_SCARE, B_H_UNRES, B_H_DOUBLE,
 B_A_NOTEST, B_A_FN_EARLY, B_A_FN_LATE, B_A_KNOWN_E, B_A_KNOWN_L,
 SAB_H_EARLY, SAB_H_LATE, SAB_H_SECOND, SAB_A_EARLY, SAB_A_LATE, SAB_A_SECOND,
 TAB_A_EARLY, TAB_A_LATE, TAB_H_FP, TAB_A_CONF, DEATH) = range(22)

# ---------------------------------------------------------------------------
# histories and tests (stylized rates)
# ---------------------------------------------------------------------------

HISTORIES = [("TEEN", 0.15, 0.04), ("25YO", 0.35, 0.08),
             ("35YO", 0.35, 0.16), ("45YO", 0.15, 0.32)]

TESTS = {
    # name: (sensitivity, false positive rate, miscarriage risk, death risk)
    "EARLY": (0.95, 0.06, 0.07, 0.002),
    "LATE": (0.99, 0.02, 0.05, 0.001),
}

# ---------------------------------------------------------------------------
# strategies: conditional plans over at most two tests
# ---------------------------------------------------------------------------

TERM, CONT = "term", "cont"


def plan(first, on_pos, on_neg):
    """A plan: first test (or None), and actions on each result.

    Actions are 'term', 'cont', or ('LATE', pos2_action) meaning take the
    late test next and act on its result (negatives always continue).
    """
    return {"first": first, "pos": on_pos, "neg": on_neg}


def describe_action(act, verb_ctx):
    if act == TERM:
        return "terminate"
    if act == CONT:
        return "continue the pregnancy"
    _, then = act
    follow = "terminate" if then == TERM else "continue either way"
    return f"take the late test and {follow} if it is positive" if then == TERM else \
        f"take the late test for confirmation and {follow}"


STRATEGIES = [("no testing", plan(None, None, None))]
_pos_actions = [TERM, CONT, ("LATE", TERM), ("LATE", CONT)]
_neg_actions = [CONT, ("LATE", TERM), ("LATE", CONT)]
for on_pos in _pos_actions:
    for on_neg in _neg_actions:
        STRATEGIES.append((None, plan("EARLY", on_pos, on_neg)))
for on_pos in _pos_actions:
    STRATEGIES.append((None, plan("LATE", on_pos, CONT)))
STRATEGIES.append((None, plan("LATE", TERM, ("LATE", TERM))))

assert len(STRATEGIES) == 18


def strategy_label(p):
    if p["first"] is None:
        return "no testing"
    first = "early test" if p["first"] == "EARLY" else "late test"

    def act(a):
        if a == TERM:
            return "terminate"
        if a == CONT:
            return "continue"
        return "retest, terminate if positive" if a[1] == TERM else "retest, continue either way"

    return f"{first}; if positive: {act(p['pos'])}; if negative: {act(p['neg'])}"


def strategy_description(p):
    if p["first"] is None:
        return "Take no prenatal test and carry the pregnancy to term."
    first = "early" if p["first"] == "EARLY" else "late"

    def act(a):
        if a == TERM:
            return "terminate the pregnancy"
        if a == CONT:
            return "continue the pregnancy"
        what = "terminate" if a[1] == TERM else "continue either way"
        return (f"take the late test as well, then {what} if it is positive"
                if a[1] == TERM else "take the late test as well and continue either way")

    return (f"Take the {first} test first. If the result is positive, {act(p['pos'])}. "
            f"If the result is negative, {act(p['neg'])}.")


# ---------------------------------------------------------------------------
# exact event-tree enumeration
# ---------------------------------------------------------------------------


def run_test(name, affected):
    """Yield (probability, event) for one administered test."""
    sens, fpr, sab, death = TESTS[name]
    yield death, "death"
    alive = 1.0 - death
    yield alive * sab, "sab"
    ok = alive * (1.0 - sab)
    p_pos = sens if affected else fpr
    yield ok * p_pos, "pos"
    yield ok * (1.0 - p_pos), "neg"


def birth_outcome(affected, seen, positives):
    """Map the test history of a carried-to-term pregnancy to an outcome."""
    if not seen:
        return B_A_NOTEST if affected else B_H_NOTEST
    last = seen[-1]
    if affected:
        if positives == 0:
            return B_A_FN_EARLY if last == ("EARLY", "neg") and len(seen) == 1 else B_A_FN_LATE
        if seen[-1][1] == "neg":  # a positive was later contradicted
            return B_A_FN_LATE
        return B_A_KNOWN_E if seen[0] == ("EARLY", "pos") else B_A_KNOWN_L
    if positives == 0:
        if len(seen) == 1:
            return B_H_EARLY if last[0] == "EARLY" else B_H_LATE
        return B_H_DOUBLE
    if seen[-1][1] == "neg":
        return B_H_SCARE
    return B_H_UNRES


def sab_outcome(affected, second):
    if second:
        return SAB_A_SECOND if affected else SAB_H_SECOND
    return SAB_A_EARLY if affected else SAB_H_EARLY


def tab_outcome(affected, positives, first_test):
    if not affected:
        return TAB_H_FP
    if positives >= 2:
        return TAB_A_CONF
    return TAB_A_EARLY if first_test == "EARLY" else TAB_A_LATE


def enumerate_plan(p, affected):
    """Yield (probability, outcome index) pairs for one plan and fetal status."""
    if p["first"] is None:
        yield 1.0, birth_outcome(affected, [], 0)
        return
    first = p["first"]
    for prob1, ev1 in run_test(first, affected):
        if ev1 == "death":
            yield prob1, DEATH
        elif ev1 == "sab":
            yield prob1, sab_outcome(affected, second=False) if first == "EARLY" else \
                (SAB_A_LATE if affected else SAB_H_LATE)
        else:
            action = p["pos"] if ev1 == "pos" else p["neg"]
            seen = [(first, ev1)]
            positives = 1 if ev1 == "pos" else 0
            if action == TERM:
                yield prob1, tab_outcome(affected, positives, first)
            elif action == CONT:
                yield prob1, birth_outcome(affected, seen, positives)
            else:
                _, then = action
                for prob2, ev2 in run_test("LATE", affected):
                    prob = prob1 * prob2
                    if ev2 == "death":
                        yield prob, DEATH
                    elif ev2 == "sab":
                        yield prob, sab_outcome(affected, second=True)
                    else:
                        seen2 = seen + [("LATE", ev2)]
                        pos2 = positives + (1 if ev2 == "pos" else 0)
                        if ev2 == "pos" and then == TERM:
                            yield prob, tab_outcome(affected, pos2, first)
                        else:
                            yield prob, birth_outcome(affected, seen2, pos2)


def build_model() -> DecisionModel:
    outcomes = [Outcome(i, label, q) for i, (label, q) in enumerate(OUTCOMES)]
    histories = [History(i, label, prior) for i, (label, prior, _) in enumerate(HISTORIES)]
    strategies = []
    for i, (label, p) in enumerate(STRATEGIES):
        strategies.append(Strategy(i, label or strategy_label(p), strategy_description(p)))
    prob = np.zeros((len(strategies), len(histories), len(outcomes)))
    for s, (_, p) in enumerate(STRATEGIES):
        for h, (_, _, p_aff) in enumerate(HISTORIES):
            for affected, weight in ((True, p_aff), (False, 1.0 - p_aff)):
                for q, o in enumerate_plan(p, affected):
                    prob[s, h, o] += weight * q
    return DecisionModel(outcomes, histories, strategies, prob, BEST_ANCHOR, WORST_ANCHOR)


# ---------------------------------------------------------------------------
# archetypes
# ---------------------------------------------------------------------------
# A0  "declines testing": condition acceptable, interventions and their
#     risks are not.
# A1  "wants early information, trusts the first result": values knowing,
#     would keep an affected pregnancy, will not retest.
# A2  "wants early information, verifies": like A1 but a positive must be
#     confirmed; indifferent about how an affected pregnancy resolves.
# A3  "acts on the condition": condition unacceptable, terminates on a
#     confirmed positive.
# A1 and A2 are deliberately close in preference ORDER (no clean
# preference question tells them apart) while differing in level on
# several coordinates, so separating them requires a lottery question.

ARCHETYPES = {
    "A0": [0.99, 1.0, 0.90, 0.84, 0.30, 0.83,
           0.80, 0.75, 0.74, 0.82, 0.81,
           0.24, 0.22, 0.20, 0.30, 0.28, 0.26,
           0.14, 0.12, 0.06, 0.10, 0.0],
    "A1": [0.57, 1.0, 0.60, 0.575, 0.61, 0.615,
           0.19, 0.18, 0.165, 0.615, 0.61,
           0.09, 0.08, 0.07, 0.175, 0.16, 0.15,
           0.04, 0.035, 0.03, 0.045, 0.0],
    "A2": [0.50, 1.0, 0.45, 0.65, 0.45, 0.60,
           0.18, 0.15, 0.13, 0.50, 0.45,
           0.06, 0.055, 0.05, 0.47, 0.46, 0.46,
           0.04, 0.035, 0.02, 0.03, 0.0],
    "A3": [0.45, 1.0, 0.88, 0.90, 0.20, 0.95,
           0.02, 0.05, 0.04, 0.15, 0.12,
           0.50, 0.52, 0.48, 0.80, 0.82, 0.78,
           0.90, 0.86, 0.35, 0.93, 0.0],
}

SIGMA_CLEAN = 0.02
SIGMA_NOISY = 0.12
N_SAMPLES = 60
SEED_CLEAN = 20273
SEED_NOISY = 77001


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


def check_margins(model, archetypes, sigma):
    """For every archetype and history: no +/-sigma perturbation can change the argmax.

    Sufficient condition: for the best strategy s* and every rival s,
    EU(s*) - EU(s) > sigma * ||P(.|s*) - P(.|s)||_1.  Returns the best
    strategies and the worst slack seen.
    """
    names = list(archetypes)
    bests = {}
    worst = np.inf
    worst_at = None
    for name in names:
        u = np.array(archetypes[name])
        for h in range(model.num_histories):
            eus = model.eu_table(u, h)
            star = int(np.argmax(eus))
            bests[(name, h)] = star
            for s in range(model.num_strategies):
                if s == star:
                    continue
                gap = eus[star] - eus[s]
                tv = np.abs(model.prob[star, h] - model.prob[s, h]).sum()
                slack = gap - sigma * tv
                if slack < worst:
                    worst, worst_at = slack, (name, h, s, gap, sigma * tv)
    return bests, worst, worst_at


def check_distinct(bests, names, num_h):
    collisions = []
    for h in range(num_h):
        chosen = [bests[(n, h)] for n in names]
        if len(set(chosen)) != len(chosen):
            collisions.append((h, chosen))
    return collisions


def check_preference_closeness(a1, a2, clean_gap=0.045):
    """Pairs answering oppositely AND cleanly for both archetypes (should be none)."""
    bad = []
    D = len(a1)
    for i in range(D):
        for j in range(i + 1, D):
            g1, g2 = a1[i] - a1[j], a2[i] - a2[j]
            if g1 * g2 < 0 and abs(g1) >= clean_gap and abs(g2) >= clean_gap:
                bad.append((i, j, g1, g2))
    return bad


def max_coordinate_gap(a1, a2):
    diffs = np.abs(np.array(a1) - np.array(a2))
    return float(diffs.max()), int(diffs.argmax())


def tree_has_feature_split(node):
    if node.is_leaf:
        return False
    if node.question.kind == FEATURE:
        return True
    return tree_has_feature_split(node.yes) or tree_has_feature_split(node.no)


def main():
    model = build_model()
    print(f"model: {model.num_outcomes} outcomes, {model.num_strategies} strategies, "
          f"{model.num_histories} histories")
    names = list(ARCHETYPES)

    bests, worst, worst_at = check_margins(model, ARCHETYPES, SIGMA_CLEAN)
    print("\nbest strategies per (archetype, history):")
    for name in names:
        row = [bests[(name, h)] for h in range(model.num_histories)]
        print(f"  {name}: {row}")
    print(f"worst flip slack at sigma={SIGMA_CLEAN}: {worst:.6f} at {worst_at}")
    collisions = check_distinct(bests, names, model.num_histories)
    print(f"best-strategy collisions: {collisions}")

    bad_pairs = check_preference_closeness(ARCHETYPES["A1"], ARCHETYPES["A2"])
    print(f"clean opposite preference pairs A1 vs A2 (want none): {bad_pairs}")
    gap, coord = max_coordinate_gap(ARCHETYPES["A1"], ARCHETYPES["A2"])
    print(f"max A1-A2 coordinate gap: {gap:.3f} at outcome {coord}")

    ok = worst > 0 and not collisions and not bad_pairs and gap >= 0.10
    if not ok:
        print("\nCONSTRAINTS VIOLATED - adjust archetypes/model")
        return 1

    DATA_DIR.mkdir(parents=True, exist_ok=True)
    save_model(model, DATA_DIR / "mini_panda.json")

    arch_matrix = np.array([ARCHETYPES[n] for n in names])
    weights = np.full(len(names), 1.0 / len(names))
    spec_clean = GeneratorSpec(arch_matrix, weights, SIGMA_CLEAN, N_SAMPLES, SEED_CLEAN,
                               BEST_ANCHOR, WORST_ANCHOR)
    spec_noisy = GeneratorSpec(arch_matrix, weights, SIGMA_NOISY, N_SAMPLES, SEED_NOISY,
                               BEST_ANCHOR, WORST_ANCHOR)
    spec_clean.save(DATA_DIR / "corpus_4type.json")
    spec_noisy.save(DATA_DIR / "corpus_4type_noisy.json")

    # --- empirical checks on the frozen corpora -------------------------
    # reload everything through the files so the numbers below match what a
    # test that reads the bundled data will compute, bit for bit
    from utilicit.model import load_model
    from utilicit.corpus import load_spec

    model = load_model(DATA_DIR / "mini_panda.json")
    spec_clean = load_spec(DATA_DIR / "corpus_4type.json")
    spec_noisy = load_spec(DATA_DIR / "corpus_4type_noisy.json")

    db, truth = generate(spec_clean)
    counts = np.bincount(truth, minlength=4)
    print(f"\nclean corpus archetype counts: {counts.tolist()} (min {counts.min()})")
    if counts.min() <= 12:
        print("an archetype could vanish from a 48-sample train split - pick another seed")
        return 1

    for h in range(model.num_histories):
        clustering = hac(db, model, h, 4)
        labels = label_database(db, clustering)
        groups = {}
        for lab, t in zip(labels, truth):
            groups.setdefault(lab, set()).add(t)
        pure = all(len(v) == 1 for v in groups.values()) and len(groups) == 4
        print(f"  history {h}: exact recovery = {pure}")
        if not pure:
            return 1

    feature_hist = []
    depths = []
    for h in range(model.num_histories):
        clustering = hac(db, model, h, 4)
        tree = build_tree(db, clustering, model)
        depths.append(tree.depth)
        if tree_has_feature_split(tree.root):
            feature_hist.append(h)
        # training consistency + question counts
        labels = label_database(db, clustering)
        asked = []
        for idx, f in enumerate(db):
            res = classify(tree, lambda q: answer(q, f))
            assert res.label == labels[idx], (h, f.id)
            asked.append(res.questions_asked)
        print(f"  history {h}: depth={tree.depth} mean questions={np.mean(asked):.3f} "
              f"max={max(asked)}")
    print(f"histories whose tree contains a feature split: {feature_hist}")
    if not feature_hist:
        return 1

    rep = holdout_error(db, model, h=0, k=4, gamma=0.05, train_fraction=0.8,
                        runs=1000, seed=4242)
    print(f"\nholdout (clean, h=0, 1000 runs) mean UL: {rep.points[0].mean_error!r}")

    db_noisy, _ = generate(spec_noisy)
    for h in range(model.num_histories):
        loocv = loocv_over_k(db_noisy, model, h, [1, 4, N_SAMPLES - 1], gamma=0.05)
        errs = {int(p.x): p.mean_error for p in loocv.points}
        shape_ok = errs[4] <= errs[1] and errs[4] <= errs[N_SAMPLES - 1]
        print(f"noisy loocv h={h}: k=1 {errs[1]:.5f}  k=4 {errs[4]:.5f}  "
              f"k=59 {errs[59]:.5f}  U-endpoints={shape_ok}")

    curve = learning_curve(db_noisy, model, h=3, k=4, gamma=0.05,
                           train_sizes=[8, 16, 24, 32, 40, 48], runs=1000, seed=999)
    for p in curve.points:
        print(f"noisy learning curve h=3 size={int(p.x)}: {p.mean_error:.6f}")

    return 0


if __name__ == "__main__":
    sys.exit(main())
