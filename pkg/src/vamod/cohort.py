"""Domain types for pupils, schools and cohorts, with validation.

All types are immutable after construction and safe to share across
threads. ``validate_cohort`` is the single entry point that promotes raw
record lists to a :class:`Cohort` satisfying every invariant; downstream
modules assume validated input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import categories
from .errors import DanglingSchoolRef, DuplicateId, EmptyInput, OutOfRangeField

KS2_MIN, KS2_MAX = 1.5, 5.8
KS2_RAW_MIN, KS2_RAW_MAX = 0.0, 6.0
ATTAINMENT8_MIN, ATTAINMENT8_MAX = 0.0, 90.0


@dataclass(frozen=True, slots=True)
class PupilRecord:
    """One pupil: prior attainment, outcome score and background characteristics."""

    pupil_id: str
    school_id: str
    ks2: float
    attainment8: float
    month: str
    gender: str
    ethnicity: str
    language: str
    sen: str
    fsm: str
    idaci_decile: int


@dataclass(frozen=True, slots=True)
class SchoolRecord:
    """One school and its published characteristics."""

    school_id: str
    region: str
    school_type: str
    admissions: str
    age_range: str
    school_gender: str
    religion: str
    school_idaci_decile: int


@dataclass(frozen=True)
class Cohort:
    """A validated set of pupils plus the schools they attend.

    ``pupils`` preserves input order; every pupil's ``school_id`` resolves in
    ``schools`` and no school is pupil-free.
    """

    pupils: tuple[PupilRecord, ...]
    schools: dict[str, SchoolRecord]

    @property
    def n_pupils(self) -> int:
        return len(self.pupils)

    @property
    def n_schools(self) -> int:
        return len(self.schools)

    def school_ids(self) -> list[str]:
        """Pupil-parallel list of school identifiers."""
        return [p.school_id for p in self.pupils]


@dataclass(frozen=True, slots=True)
class SummaryStats:
    """Sample summary of a score distribution (sd uses the N-1 denominator)."""

    n: int
    mean: float
    sd: float
    minimum: float
    p10: float
    p25: float
    p50: float
    p75: float
    p90: float
    maximum: float


def _check_pupil(pupil: PupilRecord, row: int) -> None:
    ks2 = pupil.ks2
    if not (np.isfinite(ks2) and KS2_RAW_MIN <= ks2 <= KS2_RAW_MAX):
        raise OutOfRangeField(f"row {row}: ks2 = {ks2!r} outside [{KS2_RAW_MIN}, {KS2_RAW_MAX}]")
    a8 = pupil.attainment8
    if not (np.isfinite(a8) and ATTAINMENT8_MIN <= a8 <= ATTAINMENT8_MAX):
        raise OutOfRangeField(
            f"row {row}: attainment8 = {a8!r} outside [{ATTAINMENT8_MIN}, {ATTAINMENT8_MAX}]"
        )
    if not (isinstance(pupil.idaci_decile, int) and 1 <= pupil.idaci_decile <= 10):
        raise OutOfRangeField(f"row {row}: idaci_decile = {pupil.idaci_decile!r} outside 1..10")
    for field, allowed in (
        ("month", categories.MONTHS),
        ("gender", categories.GENDERS),
        ("ethnicity", categories.ETHNICITIES),
        ("language", categories.LANGUAGES),
        ("sen", categories.SEN_STATUSES),
        ("fsm", categories.FSM_STATUSES),
    ):
        value = getattr(pupil, field)
        if value not in allowed:
            raise OutOfRangeField(f"row {row}: {field} = {value!r} is not a known category")


def _check_school(school: SchoolRecord, row: int) -> None:
    if not (isinstance(school.school_idaci_decile, int) and 1 <= school.school_idaci_decile <= 10):
        raise OutOfRangeField(
            f"school row {row}: school_idaci_decile = {school.school_idaci_decile!r} outside 1..10"
        )
    for field, allowed in (
        ("region", categories.REGIONS),
        ("school_type", categories.SCHOOL_TYPES),
        ("admissions", categories.ADMISSIONS),
        ("age_range", categories.AGE_RANGES),
        ("school_gender", categories.SCHOOL_GENDERS),
        ("religion", categories.RELIGIONS),
    ):
        value = getattr(school, field)
        if value not in allowed:
            raise OutOfRangeField(f"school row {row}: {field} = {value!r} is not a known category")


def validate_cohort(pupils, schools) -> Cohort:
    """Validate raw records and assemble a :class:`Cohort`.

    Parameters
    ----------
    pupils : iterable of PupilRecord
    schools : iterable of SchoolRecord, or a school_id -> SchoolRecord mapping

    Schools with no pupils are dropped with a warning rather than an error,
    since real extracts routinely contain them. Validating an already valid
    cohort's records returns an equal cohort.

    Raises
    ------
    DuplicateId, DanglingSchoolRef, OutOfRangeField
    """
    pupils = tuple(pupils)
    if isinstance(schools, dict):
        school_list = list(schools.values())
    else:
        school_list = list(schools)

    by_id: dict[str, SchoolRecord] = {}
    for row, school in enumerate(school_list, start=1):
        _check_school(school, row)
        if school.school_id in by_id:
            raise DuplicateId(f"school_id {school.school_id!r} occurs more than once")
        by_id[school.school_id] = school

    seen_pupils: set[str] = set()
    used_schools: set[str] = set()
    for row, pupil in enumerate(pupils, start=1):
        _check_pupil(pupil, row)
        if pupil.pupil_id in seen_pupils:
            raise DuplicateId(f"pupil_id {pupil.pupil_id!r} occurs more than once")
        seen_pupils.add(pupil.pupil_id)
        if pupil.school_id not in by_id:
            raise DanglingSchoolRef(
                f"pupil {pupil.pupil_id!r} references unknown school {pupil.school_id!r}"
            )
        used_schools.add(pupil.school_id)

    n_empty = len(by_id) - len(used_schools)
    if n_empty:
        warnings.warn(f"dropped {n_empty} school(s) with no pupils", stacklevel=2)
    kept = {sid: rec for sid, rec in by_id.items() if sid in used_schools}
    return Cohort(pupils=pupils, schools=kept)


def summary_stats(values) -> SummaryStats:
    """Mean, sample sd, extremes and the 10/25/50/75/90 percentiles.

    Percentiles interpolate linearly between order statistics at rank
    p*(N-1)+1; a single observation has sd 0 by convention. Values are
    sorted before any reduction, so results are exactly permutation
    invariant.
    """
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        raise EmptyInput("summary_stats needs at least one value")
    x = np.sort(x)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    p10, p25, p50, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    return SummaryStats(
        n=int(x.size),
        mean=float(np.mean(x)),
        sd=sd,
        minimum=float(np.min(x)),
        p10=float(p10),
        p25=float(p25),
        p50=float(p50),
        p75=float(p75),
        p90=float(p90),
        maximum=float(np.max(x)),
    )
