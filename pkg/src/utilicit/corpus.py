"""Synthetic utility databases and CSV ingestion.

The generator draws each sample from one of a handful of archetype
vectors plus independent uniform noise, standing in for a study database
of elicited utility functions.  CSV files use one row per function with a
header of outcome ids; rows with missing cells are dropped on load (no
imputation), and the anchor columns may be omitted entirely since their
values are forced anyway.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DecisionModel
from .utility import UtilityDatabase, UtilityFunction


@dataclass(frozen=True)
class GeneratorSpec:
    archetypes: np.ndarray  # (k*, D), anchor-respecting
    weights: np.ndarray  # (k*,), sums to 1
    noise: float
    samples: int
    seed: int
    best_anchor: int
    worst_anchor: int

    def __post_init__(self):
        archetypes = np.array(self.archetypes, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if archetypes.ndim != 2:
            raise ValueError("archetypes must be a (k, D) matrix")
        if weights.shape != (archetypes.shape[0],):
            raise ValueError(
                f"{archetypes.shape[0]} archetypes but {weights.shape[0]} weights")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {weights}")
        if self.noise < 0:
            raise ValueError(f"noise scale must be >= 0, got {self.noise}")
        if self.samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.samples}")
        if np.any(archetypes < 0) or np.any(archetypes > 1):
            raise ValueError("archetype values must lie in [0, 1]")
        for a in archetypes:
            if a[self.best_anchor] != 1.0 or a[self.worst_anchor] != 0.0:
                raise ValueError("archetypes must pin the anchors to 1 and 0")
        archetypes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "archetypes", archetypes)
        object.__setattr__(self, "weights", weights)

    @property
    def num_archetypes(self):
        return self.archetypes.shape[0]

    @property
    def num_outcomes(self):
        return self.archetypes.shape[1]

    def separation(self) -> float:
        """Smallest best-coordinate gap between any two archetypes.

        For each pair this takes the single coordinate that separates them
        most; the minimum over pairs is the scale the noise must stay well
        under for samples to remain attributable.
        """
        k = self.num_archetypes
        gaps = [np.max(np.abs(self.archetypes[i] - self.archetypes[j]))
                for i in range(k) for j in range(i + 1, k)]
        return float(min(gaps)) if gaps else np.inf

    def to_dict(self) -> dict:
        return {
            "archetypes": self.archetypes.tolist(),
            "weights": self.weights.tolist(),
            "noise": self.noise,
            "samples": self.samples,
            "seed": self.seed,
            "best_anchor": self.best_anchor,
            "worst_anchor": self.worst_anchor,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def spec_from_dict(doc: dict) -> GeneratorSpec:
    return GeneratorSpec(
        archetypes=np.array(doc["archetypes"], dtype=np.float64),
        weights=np.array(doc["weights"], dtype=np.float64),
        noise=float(doc["noise"]),
        samples=int(doc["samples"]),
        seed=int(doc["seed"]),
        best_anchor=int(doc["best_anchor"]),
        worst_anchor=int(doc["worst_anchor"]),
    )


def load_spec(path) -> GeneratorSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def generate(spec: GeneratorSpec) -> tuple[UtilityDatabase, list[int]]:
    """Sample a database from the spec; returns it with the true archetype of each row."""
    if spec.num_archetypes > 1 and spec.noise >= spec.separation() / 4.0:
        warnings.warn(
            f"noise scale {spec.noise} is large relative to the archetype "
            f"separation {spec.separation():.4f}; samples may not be attributable",
            stacklevel=2)
    rng = np.random.default_rng(spec.seed)
    assignments = rng.choice(spec.num_archetypes, size=spec.samples, p=spec.weights)
    noise = rng.uniform(-spec.noise, spec.noise, size=(spec.samples, spec.num_outcomes))
    samples = np.clip(spec.archetypes[assignments] + noise, 0.0, 1.0)
    samples[:, spec.best_anchor] = 1.0
    samples[:, spec.worst_anchor] = 0.0
    width = max(3, len(str(spec.samples - 1)))
    functions = [UtilityFunction(f"u{i:0{width}d}", samples[i])
                 for i in range(spec.samples)]
    db = UtilityDatabase(functions, metadata={"source": "generator", "seed": spec.seed,
                                              "noise": spec.noise})
    return db, [int(a) for a in assignments]


def save_database(db: UtilityDatabase, path) -> None:
    """Write the database as CSV: an id column plus one column per outcome id."""
    D = db.num_outcomes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [str(d) for d in range(D)])
        for f in db:
            writer.writerow([f.id] + [repr(v) for v in f.values.tolist()])


def load_database(path, model: DecisionModel | None = None) -> UtilityDatabase:
    """Read a CSV utility database, dropping rows with missing values.

    The header names outcome ids; columns may appear in any order.  When a
    model is supplied the anchor columns may be absent (they are injected
    at 1 and 0) and the dimension is checked against it.  The number of
    dropped rows is recorded in the database metadata.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # ignore blank lines
    if not rows:
        raise ValueError(f"{path}: empty database file")
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "id":
        raise ValueError(f"{path}: first header column must be 'id', got {header[:1]}")
    try:
        columns = [int(c) for c in header[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: outcome columns must be integer ids: {exc}") from exc
    if len(set(columns)) != len(columns):
        raise ValueError(f"{path}: duplicate outcome columns")

    if model is not None:
        D = model.num_outcomes
        anchors = {model.best_anchor: 1.0, model.worst_anchor: 0.0}
        required = set(range(D)) - set(anchors)
    else:
        D = max(columns) + 1 if columns else 0
        anchors = {}
        required = set(range(D))
    missing_cols = required - set(columns)
    if missing_cols:
        raise ValueError(f"{path}: header lacks outcome columns {sorted(missing_cols)}")
    unknown = set(columns) - set(range(D))
    if unknown:
        raise ValueError(f"{path}: outcome columns {sorted(unknown)} exceed model dimension {D}")

    functions, dropped = [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        fid, cells = row[0], [c.strip() for c in row[1:]]
        if any(c == "" for c in cells):
            dropped += 1
            continue
        values = np.full(D, np.nan)
        for col, cell in zip(columns, cells):
            try:
                values[col] = float(cell)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value {cell!r}: {exc}") from exc
        for idx, pinned in anchors.items():
            if np.isnan(values[idx]):
                values[idx] = pinned
        if np.any(np.isnan(values)):
            raise ValueError(f"{path}:{lineno}: incomplete row after column mapping")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError(f"{path}:{lineno}: utilities must lie in [0, 1]")
        for idx, pinned in anchors.items():
            if values[idx] != pinned:
                raise ValueError(
                    f"{path}:{lineno}: anchor outcome {idx} must be {pinned}, got {values[idx]}")
        functions.append(UtilityFunction(fid, values))
    if not functions:
        raise ValueError(f"{path}: no complete rows (dropped {dropped})")
    return UtilityDatabase(functions, metadata={
        "source": str(path), "rows_total": len(rows) - 1, "rows_dropped": dropped})
