"""Schema-compatible stand-in for the 139-patient neurosurgical cohort.

The real records are not redistributed. ``build_fixture`` produces a
deterministic table with the same twelve columns, the reference histology
counts, 40 KPS deteriorations, right-skewed age and length of stay, and a
KPS/Landriel Pearson correlation of about 0.57 with every other pair weak.
"""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ColumnSpec, Kind, Schema, Table, load_table

N_PATIENTS = 139
FIXTURE_SEED = 20180101
TARGET_KPS_LANDRIEL_R = 0.57

HISTOLOGY_COUNTS = {
    "Adenocarcinoma": 1,
    "Adenoma": 15,
    "Angioleiomyoma": 1,
    "Astrocytoma": 1,
    "Cavernous angioma": 2,
    "Chordoma": 4,
    "Craniopharyngioma": 3,
    "Epidermoid cyst": 2,
    "Glioblastoma": 37,
    "Gliosarcoma": 2,
    "Hemangioblastoma": 1,
    "Lymphoma": 3,
    "Meningioma": 47,
    "Metastasis": 11,
    "Not decisive": 2,
    "Oligodendroglioma": 1,
    "Radionecrosis": 1,
    "Schwannoma": 2,
    "Squamous cell carcinoma": 1,
    "Subependymoma": 2,
}

LANDRIEL_COUNTS = (62, 38, 22, 12, 5)
KPS_POSITIVES = 40

YES_NO = ("0", "1")

FIXTURE_SCHEMA = Schema((
    ColumnSpec("Age", Kind.CONTINUOUS, "years", (65, 100)),
    ColumnSpec("Sex", Kind.BINARY, categories=("M", "F")),
    ColumnSpec("BMI", Kind.CONTINUOUS, "kg/m2", (10, 60)),
    ColumnSpec("ASA", Kind.ORDINAL, bounds=(1, 6)),
    ColumnSpec("HeartDisease", Kind.BINARY, categories=YES_NO),
    ColumnSpec("Diabetes", Kind.BINARY, categories=YES_NO),
    ColumnSpec("PriorRadiotherapy", Kind.BINARY, categories=YES_NO),
    ColumnSpec("Histology", Kind.CATEGORICAL, categories=tuple(HISTOLOGY_COUNTS)),
    ColumnSpec("MCS", Kind.ORDINAL, bounds=(0, 8)),
    ColumnSpec("LOS", Kind.CONTINUOUS, "days", (1, 365)),
    ColumnSpec("KPSDeterioration", Kind.BINARY, categories=YES_NO),
    ColumnSpec("Landriel", Kind.ORDINAL, bounds=(0, 4)),
))


def _positives_per_grade(target: float) -> tuple[int, ...]:
    """Split the KPS positives over Landriel grades so Pearson r is closest to ``target``.

    Only splits whose deterioration rate does not fall with grade are considered.
    """
    counts = np.array(LANDRIEL_COUNTS)
    grades = np.arange(len(counts))
    n = counts.sum()
    p = KPS_POSITIVES / n
    mean_l = (grades * counts).sum() / n
    sd_l = np.sqrt((counts * (grades - mean_l) ** 2).sum() / n)
    sd_k = np.sqrt(p * (1 - p))
    best, best_gap = None, np.inf
    for split in itertools.product(*(range(c + 1) for c in LANDRIEL_COUNTS[1:])):
        rest = KPS_POSITIVES - sum(split)
        if not 0 <= rest <= LANDRIEL_COUNTS[0]:
            continue
        per = np.array((rest,) + split)
        if np.any(np.diff(per / counts) < 0):
            continue
        r = ((per * grades).sum() / n - p * mean_l) / (sd_k * sd_l)
        gap = abs(r - target)
        if gap < best_gap - 1e-12:
            best, best_gap = tuple(int(k) for k in per), gap
    return best


def _shuffled(rng: np.random.Generator, counts, labels) -> list:
    return rng.permutation(np.repeat(np.array(labels, dtype=object), counts)).tolist()


def build_fixture(seed: int = FIXTURE_SEED) -> Table:
    rng = np.random.default_rng(seed)
    n = N_PATIENTS

    age = 65 + np.round(rng.gamma(1.2, 6.0, n))
    age = np.clip(age, 65, 95)
    bmi = np.clip(np.round(rng.normal(26.2, 4.1, n), 2), 16.5, 41.0)
    los = np.clip(np.round(rng.lognormal(1.9, 0.6, n)), 1, 90)

    sex = _shuffled(rng, (74, 65), ["M", "F"])
    asa = _shuffled(rng, (6, 62, 64, 7), [1, 2, 3, 4])
    heart = _shuffled(rng, (97, 42), YES_NO)
    diabetes = _shuffled(rng, (114, 25), YES_NO)
    radio = _shuffled(rng, (125, 14), YES_NO)
    histology = _shuffled(rng, list(HISTOLOGY_COUNTS.values()), list(HISTOLOGY_COUNTS))
    mcs = _shuffled(rng, (18, 34, 37, 26, 14, 7, 2, 1, 0), list(range(9)))

    per_grade = _positives_per_grade(TARGET_KPS_LANDRIEL_R)
    landriel, kps = [], []
    for grade, (count, pos) in enumerate(zip(LANDRIEL_COUNTS, per_grade)):
        landriel += [grade] * count
        kps += ["1"] * pos + ["0"] * (count - pos)
    order = rng.permutation(n)
    landriel = [landriel[i] for i in order]
    kps = [kps[i] for i in order]

    return Table.from_columns(FIXTURE_SCHEMA, {
        "Age": age, "Sex": sex, "BMI": bmi, "ASA": asa, "HeartDisease": heart,
        "Diabetes": diabetes, "PriorRadiotherapy": radio, "Histology": histology,
        "MCS": mcs, "LOS": los, "KPSDeterioration": kps, "Landriel": landriel,
    })


def fixture_path() -> Path:
    return Path(str(resources.files("tabsynth") / "resources" / "fixture.csv"))


def fixture_schema_path() -> Path:
    return Path(str(resources.files("tabsynth") / "resources" / "fixture_schema.json"))


def load_fixture() -> Table:
    """The shipped fixture CSV, identical to ``build_fixture()``."""
    return load_table(fixture_path(), FIXTURE_SCHEMA)
