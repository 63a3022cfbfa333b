"""Accountability outputs: five-band classification, transitions, ranks, gaps.

Band assignment follows the published five-band rule on (score,
significance); the floor standard is exactly band 1. Rank comparisons use
competition ranking (rank 1 = best, ties share the minimum rank) and group
gaps are tested with a school-clustered Wald ANOVA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .categories import PUPIL_FACTORS, SCHOOL_FACTORS
from .cohort import Cohort
from .design import dummy_block, pupil_category_tokens
from .errors import (
    EmptyInput,
    LengthMismatch,
    SingleCategory,
    UnknownCharacteristic,
)
from .regression import (
    cluster_robust_cov,
    fit_ols,
    pearson_corr,
    rank_competition,
    spearman_corr,
    wald_test,
)
from .valueadded import SchoolScore

DEFAULT_RANK_THRESHOLDS = (500, 1000)


class Band(IntEnum):
    WELL_BELOW = 1
    BELOW = 2
    AVERAGE = 3
    ABOVE = 4
    WELL_ABOVE = 5

    @property
    def token(self) -> str:
        return self.name.lower()


@dataclass(frozen=True, slots=True)
class BandedSchool:
    school_id: str
    band: Band

    @property
    def below_floor(self) -> bool:
        return self.band is Band.WELL_BELOW


def band_of(score: float, significant: bool) -> Band:
    """Five-band classification of a school score.

    Not-significant scores are always average; significant ones band by
    magnitude, with the +/-0.5 boundaries inclusive towards the extremes
    and an exactly-zero significant score treated as average.
    """
    if not math.isfinite(score):
        raise ValueError(f"band_of needs a finite score, got {score!r}")
    if not significant:
        return Band.AVERAGE
    if score >= 0.5:
        return Band.WELL_ABOVE
    if score > 0.0:
        return Band.ABOVE
    if score == 0.0:
        return Band.AVERAGE
    if score >= -0.5:
        return Band.BELOW
    return Band.WELL_BELOW


def band_school(score: SchoolScore) -> BandedSchool:
    return BandedSchool(score.school_id, band_of(score.score, score.significant))


@dataclass(frozen=True)
class TransitionTable:
    """5x5 cross-tabulation of bandings under measure A (rows) vs measure B."""

    counts: np.ndarray
    row_totals: np.ndarray
    col_totals: np.ndarray
    grand_total: int
    row_percentages: np.ndarray
    n_changed: int

    @property
    def share_changed(self) -> float:
        return self.n_changed / self.grand_total if self.grand_total else 0.0


def transition_table(bands_a, bands_b) -> TransitionTable:
    """Count schools by (band under A, band under B); rows sum to A's band counts."""
    bands_a = list(bands_a)
    bands_b = list(bands_b)
    if len(bands_a) != len(bands_b):
        raise LengthMismatch(f"{len(bands_a)} vs {len(bands_b)} bandings")
    counts = np.zeros((5, 5), dtype=int)
    for a, b in zip(bands_a, bands_b):
        counts[int(a) - 1, int(b) - 1] += 1
    row_totals = counts.sum(axis=1)
    col_totals = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        row_pct = np.where(
            row_totals[:, None] > 0, 100.0 * counts / row_totals[:, None], 0.0
        )
    n_changed = int(counts.sum() - np.trace(counts))
    return TransitionTable(
        counts=counts,
        row_totals=row_totals,
        col_totals=col_totals,
        grand_total=int(counts.sum()),
        row_percentages=row_pct,
        n_changed=n_changed,
    )


@dataclass(frozen=True)
class RankReport:
    """Rank movement between two measures over the same schools."""

    rank_a: np.ndarray
    rank_b: np.ndarray
    delta: np.ndarray
    threshold_counts: dict[int, int]
    pearson: float
    spearman: float


def rank_movement(scores_a, scores_b, thresholds=DEFAULT_RANK_THRESHOLDS) -> RankReport:
    """Competition ranks under both measures, their deltas and movement counts.

    ``delta = rank_a - rank_b``; positive means the school climbs the table
    under measure B. Correlations are of the raw score vectors.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("rank_movement needs nonempty score vectors")
    if a.shape != b.shape:
        raise LengthMismatch(f"score vectors have shapes {a.shape} and {b.shape}")
    rank_a = rank_competition(a)
    rank_b = rank_competition(b)
    delta = rank_a - rank_b
    counts = {int(t): int(np.sum(np.abs(delta) >= t)) for t in thresholds}
    return RankReport(
        rank_a=rank_a,
        rank_b=rank_b,
        delta=delta,
        threshold_counts=counts,
        pearson=pearson_corr(a, b),
        spearman=spearman_corr(a, b),
    )


@dataclass(frozen=True, slots=True)
class CategoryGap:
    category: str
    n_pupils: int
    mean_score: float


@dataclass(frozen=True)
class GroupGapReport:
    """Per-category mean progress plus a school-clustered Wald ANOVA."""

    characteristic: str
    categories: tuple[CategoryGap, ...]
    statistic: float
    df1: int
    df2: int
    p_value: float

    @property
    def gap(self) -> float:
        """Spread between the best and worst category means."""
        means = [c.mean_score for c in self.categories]
        return max(means) - min(means)


def group_gaps(pupil_scores, cohort: Cohort, characteristic: str) -> GroupGapReport:
    """Mean progress by category of a pupil or school characteristic.

    Categories are reported sorted by mean score, descending. The test
    regresses pupil scores on category dummies and refers the joint Wald
    statistic, with school-clustered covariance, to F(C-1, M-1).
    """
    factor = PUPIL_FACTORS.get(characteristic) or SCHOOL_FACTORS.get(characteristic)
    if factor is None:
        raise UnknownCharacteristic(
            f"{characteristic!r} is not a pupil or school characteristic"
        )
    scores = np.asarray(pupil_scores, dtype=float)
    if scores.size != cohort.n_pupils:
        raise LengthMismatch(f"{scores.size} scores for {cohort.n_pupils} pupils")

    tokens = pupil_category_tokens(cohort, characteristic)
    present = [c for c in factor.categories if any(t == c for t in tokens)]
    if len(present) < 2:
        raise SingleCategory(
            f"characteristic {characteristic!r} has fewer than 2 nonempty categories"
        )

    lookup = {c: i for i, c in enumerate(present)}
    idx = np.array([lookup[t] for t in tokens], dtype=np.intp)
    n_by_cat = np.bincount(idx, minlength=len(present))
    mean_by_cat = np.bincount(idx, weights=scores, minlength=len(present)) / n_by_cat

    labels = ["const"] + [f"{characteristic}_{c}" for c in present[1:]]
    design = np.hstack([np.ones((scores.size, 1)), dummy_block(idx, len(present))])
    fit = fit_ols(design, scores, labels=labels)
    cov = cluster_robust_cov(fit, design, cohort.school_ids())
    test = wald_test(fit, cov, labels[1:])

    order = np.argsort(-mean_by_cat, kind="stable")
    cats = tuple(
        CategoryGap(present[i], int(n_by_cat[i]), float(mean_by_cat[i])) for i in order
    )
    return GroupGapReport(
        characteristic=characteristic,
        categories=cats,
        statistic=test.statistic,
        df1=test.df1,
        df2=test.df2,
        p_value=test.p_value,
    )
