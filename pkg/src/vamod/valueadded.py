"""The two-stage value-added pipeline.

Stage one fits pupil attainment on the model terms; stage two converts
residuals to progress scores in grade units (10 attainment points per
grade) and averages them per school, attaching a 95% confidence interval
based on the single national pupil-score SD. An empirical-Bayes moment
estimator optionally shrinks small-school means towards zero.

Unit convention: coefficient tables are in attainment points throughout;
every progress output (pupil scores, school scores, shrinkage variances)
is in grade units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .cohort import Cohort
from .design import DesignMatrix, build_design, model_spec
from .errors import (
    DegenerateWithin,
    EmptyCategoryWarning,
    LengthMismatch,
    TooFewSchools,
    ZeroVariance,
)
from .regression import FittedModel, fit_ols

POINTS_PER_GRADE = 10.0
CONFIDENCE_Z = 1.96  # fixed 95% normal interval


@dataclass(frozen=True, slots=True)
class PupilProgress:
    pupil_id: str
    score: float


@dataclass(frozen=True, slots=True)
class SchoolScore:
    """A school's mean pupil progress with its uncertainty band."""

    school_id: str
    n_pupils: int
    score: float
    se: float
    ci_low: float
    ci_high: float
    significant: bool


@dataclass(frozen=True)
class ShrinkageEstimates:
    """Moment-estimator variance components and per-school shrunk scores.

    ``lam`` holds the per-school shrinkage weight
    sigma2_between / (sigma2_between + sigma2_within / n); arrays are
    parallel to ``school_ids`` and sorted by descending raw score.
    """

    sigma2_between: float
    sigma2_within: float
    school_ids: tuple[str, ...]
    n_pupils: np.ndarray
    raw: np.ndarray
    lam: np.ndarray
    shrunk: np.ndarray

    def shrunk_by_school(self) -> dict[str, float]:
        return {sid: float(s) for sid, s in zip(self.school_ids, self.shrunk)}


@dataclass(frozen=True)
class PipelineResult:
    """Everything one model run produces."""

    spec_name: str
    fit: FittedModel
    pupil_scores: np.ndarray
    school_scores: list[SchoolScore]
    national_sd: float

    def pupil_progress(self, cohort: Cohort) -> list[PupilProgress]:
        return [
            PupilProgress(p.pupil_id, float(s))
            for p, s in zip(cohort.pupils, self.pupil_scores)
        ]


def drop_empty_columns(design: DesignMatrix) -> DesignMatrix:
    """Remove all-zero dummy columns (categories with no pupils), warning once."""
    nonzero = design.values.any(axis=0)
    if nonzero.all():
        return design
    dropped = [lab for lab, keep in zip(design.column_labels, nonzero) if not keep]
    warnings.warn(
        f"dropping empty design column(s): {', '.join(dropped)}",
        EmptyCategoryWarning,
        stacklevel=3,
    )
    keep_idx = np.nonzero(nonzero)[0]
    return DesignMatrix(
        values=design.values[:, keep_idx],
        column_labels=tuple(design.column_labels[i] for i in keep_idx),
    )


def school_scores(pupil_scores, school_assignment, national_sd: float) -> list[SchoolScore]:
    """Per-school mean progress with se = national_sd / sqrt(n), sorted descending.

    The confidence interval is score -/+ 1.96 se; a school is significant
    when the interval excludes zero.
    """
    scores = np.asarray(pupil_scores, dtype=float)
    if len(school_assignment) != scores.size:
        raise LengthMismatch(
            f"{len(school_assignment)} school assignments for {scores.size} pupil scores"
        )
    # sd 0 only occurs for noiseless cohorts; intervals then degenerate to points
    if not national_sd >= 0:
        raise ZeroVariance(f"national_sd must be nonnegative, got {national_sd!r}")

    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for sid, s in zip(school_assignment, scores):
        sums[sid] = sums.get(sid, 0.0) + float(s)
        counts[sid] = counts.get(sid, 0) + 1

    out = []
    for sid in sums:
        n = counts[sid]
        mean = sums[sid] / n
        se = national_sd / np.sqrt(n)
        half = CONFIDENCE_Z * se
        out.append(
            SchoolScore(
                school_id=sid,
                n_pupils=n,
                score=mean,
                se=float(se),
                ci_low=float(mean - half),
                ci_high=float(mean + half),
                significant=bool(abs(mean) > half),
            )
        )
    out.sort(key=lambda s: -s.score)
    return out


def run_pipeline(cohort: Cohort, spec_name: str) -> PipelineResult:
    """Fit a spec on the cohort and derive pupil and school progress scores.

    Empty categories drop their dummy column with a warning instead of
    failing; genuine rank deficiency still raises.
    """
    spec = model_spec(spec_name)
    design, y, school_ids = build_design(cohort, spec)
    design = drop_empty_columns(design)
    fit = fit_ols(design, y)
    pupil_scores = fit.residuals / POINTS_PER_GRADE
    national_sd = float(np.std(pupil_scores, ddof=1))
    schools = school_scores(pupil_scores, school_ids, national_sd)
    return PipelineResult(
        spec_name=spec_name,
        fit=fit,
        pupil_scores=pupil_scores,
        school_scores=schools,
        national_sd=national_sd,
    )


def shrink_school_scores(pupil_scores, school_assignment) -> ShrinkageEstimates:
    """Empirical-Bayes shrinkage of raw school means towards zero.

    Variance components come from the unbalanced one-way ANOVA moment
    estimator: sigma2_within is the pooled within-school variance,
    sigma2_between = max(0, (MSB - sigma2_within) / n0) with
    n0 = (N - sum n_j^2 / N) / (M - 1).
    """
    scores = np.asarray(pupil_scores, dtype=float)
    if len(school_assignment) != scores.size:
        raise LengthMismatch(
            f"{len(school_assignment)} school assignments for {scores.size} pupil scores"
        )
    codes: dict[str, int] = {}
    idx = np.empty(scores.size, dtype=np.intp)
    for i, sid in enumerate(school_assignment):
        idx[i] = codes.setdefault(sid, len(codes))
    m = len(codes)
    if m < 2:
        raise TooFewSchools("shrinkage needs at least 2 schools")
    n_total = scores.size
    if n_total == m:
        raise DegenerateWithin("all schools have a single pupil; no within-school variance")

    n_j = np.bincount(idx, minlength=m).astype(float)
    sums = np.bincount(idx, weights=scores, minlength=m)
    means = sums / n_j

    ssw = float(np.sum((scores - means[idx]) ** 2))
    sigma2_within = ssw / (n_total - m)
    if sigma2_within <= 0.0:
        raise DegenerateWithin("pooled within-school variance is zero")

    grand = float(scores.mean())
    msb = float(np.sum(n_j * (means - grand) ** 2)) / (m - 1)
    n0 = (n_total - float(np.sum(n_j**2)) / n_total) / (m - 1)
    sigma2_between = max(0.0, (msb - sigma2_within) / n0)

    lam = sigma2_between / (sigma2_between + sigma2_within / n_j)
    shrunk = lam * means

    order = np.argsort(-means, kind="stable")
    ids = list(codes)
    return ShrinkageEstimates(
        sigma2_between=sigma2_between,
        sigma2_within=sigma2_within,
        school_ids=tuple(ids[i] for i in order),
        n_pupils=n_j[order].astype(int),
        raw=means[order],
        lam=lam[order],
        shrunk=shrunk[order],
    )


class ProgressModel(BaseEstimator, TransformerMixin):
    """Scikit-learn style front end for the value-added pipeline.

    Parameters
    ----------
    spec : {"base", "adjusted"}
        Which model specification to fit.

    After ``fit(cohort)`` the fitted state lives in ``result_``,
    ``pupil_scores_`` (grade units, cohort order), ``school_scores_`` and
    ``national_sd_``. ``transform`` scores a cohort against the fitted
    national coefficients; ``predict`` returns expected attainment points.
    """

    def __init__(self, spec: str = "base"):
        self.spec = spec

    def fit(self, cohort: Cohort, y=None):
        result = run_pipeline(cohort, self.spec)
        self.result_ = result
        self.fit_ = result.fit
        self.pupil_scores_ = result.pupil_scores
        self.school_scores_ = result.school_scores
        self.national_sd_ = result.national_sd
        return self

    def _design_for(self, cohort: Cohort) -> np.ndarray:
        design, _, _ = build_design(cohort, model_spec(self.spec))
        cols = [design.column_labels.index(lab) for lab in self.fit_.labels]
        return design.values[:, cols]

    def predict(self, cohort: Cohort) -> np.ndarray:
        """Expected attainment points for each pupil under the fitted model."""
        self._check_fitted()
        return self._design_for(cohort) @ self.fit_.coefficients

    def transform(self, cohort: Cohort) -> np.ndarray:
        """Progress scores (grade units) for a cohort, fitted coefficients held fixed."""
        self._check_fitted()
        y = np.array([p.attainment8 for p in cohort.pupils], dtype=float)
        return (y - self.predict(cohort)) / POINTS_PER_GRADE

    def shrink(self, cohort: Cohort) -> ShrinkageEstimates:
        """Shrinkage estimates for the fitted cohort's school means."""
        self._check_fitted()
        return shrink_school_scores(self.pupil_scores_, cohort.school_ids())

    def _check_fitted(self) -> None:
        if not hasattr(self, "fit_"):
            raise RuntimeError("this ProgressModel instance is not fitted yet")
