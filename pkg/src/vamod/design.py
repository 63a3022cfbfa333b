"""Mapping raw pupil fields to model terms.

Prior attainment is banded into 34 groups, each identified by a
representative fine-grade value; categorical characteristics become
reference-coded dummy blocks. Two fixed specifications exist: ``base``
(intercept + prior-attainment bands, 34 coefficients) and ``adjusted``
(base plus seven pupil characteristics, 78 coefficients).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categories import PUPIL_FACTORS, SCHOOL_FACTORS, Factor
from .cohort import KS2_MAX, KS2_MIN, KS2_RAW_MAX, KS2_RAW_MIN, Cohort
from .errors import InvalidKs2, UnknownSpec

# Representative KS2 fine-grade value for each of the 34 bands: three coarse
# low bands, then a 0.1-point ladder from 2.8 to 5.8.
KS2_GROUP_VALUES = np.array([x / 10 for x in (15, 20, 25, *range(28, 59))])
N_KS2_GROUPS = 34

KS2_FACTOR = Factor(
    "ks2",
    tuple(f"g{g}" for g in range(1, N_KS2_GROUPS + 1)),
    tuple(f"ks2_g{g}" for g in range(2, N_KS2_GROUPS + 1)),
)

INTERCEPT_LABEL = "const"


@dataclass(frozen=True, slots=True)
class Ks2Band:
    """One prior-attainment band: 1-based group number and its representative value."""

    group: int
    representative_value: float


@dataclass(frozen=True)
class ModelSpec:
    """A fixed model specification: ordered factors, reference-coded, with intercept."""

    name: str
    factors: tuple[Factor, ...]

    @property
    def column_labels(self) -> tuple[str, ...]:
        labels = [INTERCEPT_LABEL]
        for factor in self.factors:
            labels.extend(factor.labels)
        return tuple(labels)

    @property
    def n_coefficients(self) -> int:
        return 1 + sum(len(f.labels) for f in self.factors)


@dataclass(frozen=True)
class DesignMatrix:
    """Dense 0/1 design with an all-ones intercept column and labelled columns."""

    values: np.ndarray
    column_labels: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


def ks2_groups_of(ks2: np.ndarray) -> np.ndarray:
    """Vectorised banding: 0-based group indices for an array of KS2 scores.

    Scores are clamped to the representative range and mapped to the nearest
    representative value; exact midpoints go to the lower band.
    """
    ks2 = np.asarray(ks2, dtype=float)
    bad = ~np.isfinite(ks2) | (ks2 < KS2_RAW_MIN) | (ks2 > KS2_RAW_MAX)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise InvalidKs2(f"row {row + 1}: ks2 = {ks2[row]!r} is not a finite value in [0, 6]")
    clamped = np.clip(ks2, KS2_MIN, KS2_MAX)
    hi = np.searchsorted(KS2_GROUP_VALUES, clamped, side="left")
    hi = np.clip(hi, 0, N_KS2_GROUPS - 1)
    lo = np.maximum(hi - 1, 0)
    # tie -> lower group
    take_lo = (clamped - KS2_GROUP_VALUES[lo]) <= (KS2_GROUP_VALUES[hi] - clamped)
    return np.where(take_lo, lo, hi)


def ks2_band_of(ks2: float) -> Ks2Band:
    """Band a single KS2 score; raises InvalidKs2 for NaN or values outside [0, 6]."""
    idx = int(ks2_groups_of(np.array([ks2]))[0])
    return Ks2Band(group=idx + 1, representative_value=float(KS2_GROUP_VALUES[idx]))


def model_spec(name: str) -> ModelSpec:
    """Return the ``base`` or ``adjusted`` specification."""
    if name == "base":
        return ModelSpec("base", (KS2_FACTOR,))
    if name == "adjusted":
        return ModelSpec("adjusted", (KS2_FACTOR, *PUPIL_FACTORS.values()))
    raise UnknownSpec(f"unknown model spec {name!r}; expected 'base' or 'adjusted'")


def pupil_category_tokens(cohort: Cohort, name: str) -> list[str]:
    """Per-pupil category token for a pupil or (inherited) school characteristic."""
    if name in PUPIL_FACTORS:
        if name == "idaci_decile":
            return [str(p.idaci_decile) for p in cohort.pupils]
        return [getattr(p, name) for p in cohort.pupils]
    if name in SCHOOL_FACTORS:
        if name == "school_idaci_decile":
            return [str(cohort.schools[p.school_id].school_idaci_decile) for p in cohort.pupils]
        return [getattr(cohort.schools[p.school_id], name) for p in cohort.pupils]
    raise KeyError(name)


def _category_indices(cohort: Cohort, factor: Factor) -> np.ndarray:
    if factor.name == "ks2":
        return ks2_groups_of(np.array([p.ks2 for p in cohort.pupils]))
    lookup = {c: i for i, c in enumerate(factor.categories)}
    tokens = pupil_category_tokens(cohort, factor.name)
    return np.array([lookup[t] for t in tokens], dtype=np.intp)


def dummy_block(indices: np.ndarray, n_categories: int) -> np.ndarray:
    """Reference-coded dummies: column c-1 is 1 where index == c (c >= 1)."""
    n = indices.shape[0]
    block = np.zeros((n, n_categories - 1))
    rows = np.nonzero(indices > 0)[0]
    block[rows, indices[rows] - 1] = 1.0
    return block


def build_design(
    cohort: Cohort, spec: ModelSpec
) -> tuple[DesignMatrix, np.ndarray, list[str]]:
    """Design matrix, raw attainment response and pupil-parallel school ids.

    Row order matches the cohort's pupil order; column order is the spec's
    fixed label order, so coefficient tables are comparable across runs.
    """
    n = cohort.n_pupils
    blocks = [np.ones((n, 1))]
    for factor in spec.factors:
        blocks.append(dummy_block(_category_indices(cohort, factor), len(factor.categories)))
    values = np.hstack(blocks)
    y = np.array([p.attainment8 for p in cohort.pupils], dtype=float)
    return DesignMatrix(values=values, column_labels=spec.column_labels), y, cohort.school_ids()
