import time

import pytest

from vamod.cohort import PupilRecord, SchoolRecord, validate_cohort
from vamod.synth import GroupConcentration, default_config, generate_cohort
from vamod.valueadded import run_pipeline


def make_pupil(pupil_id="p1", school_id="S1", **overrides):
    """A pupil sitting in every reference category unless overridden."""
    fields = dict(
        pupil_id=pupil_id,
        school_id=school_id,
        ks2=1.5,
        attainment8=20.0,
        month="september",
        gender="male",
        ethnicity="white_british",
        language="english_first",
        sen="none",
        fsm="not_eligible",
        idaci_decile=1,
    )
    fields.update(overrides)
    return PupilRecord(**fields)


def make_school(school_id="S1", **overrides):
    fields = dict(
        school_id=school_id,
        region="london",
        school_type="community",
        admissions="comprehensive",
        age_range="11-18",
        school_gender="mixed",
        religion="none",
        school_idaci_decile=1,
    )
    fields.update(overrides)
    return SchoolRecord(**fields)


def make_cohort(pupils, school_ids=None):
    if school_ids is None:
        school_ids = sorted({p.school_id for p in pupils})
    return validate_cohort(pupils, [make_school(sid) for sid in school_ids])


@pytest.fixture(scope="session")
def recovery_data():
    """The ~100k pupil / 600 school cohort used by acceptance criteria 3 and 4.

    Yields (config, cohort, base_result, adjusted_result, elapsed) where
    elapsed covers generation plus both fits.
    """
    config = default_config(n_schools=600, seed=20_16)
    start = time.perf_counter()
    cohort = generate_cohort(config)
    base = run_pipeline(cohort, "base")
    adjusted = run_pipeline(cohort, "adjusted")
    elapsed = time.perf_counter() - start
    return config, cohort, base, adjusted, elapsed


@pytest.fixture(scope="session")
def concentration_data():
    """Cohort with a +0.4-grade group concentrated in 20% of schools (criteria 10/11)."""
    config = default_config(
        n_schools=300,
        seed=77,
        coefficient_overrides={"language_english_additional": 4.0},
        concentration=GroupConcentration(
            characteristic="language",
            category="english_additional",
            school_share=0.2,
            prob_in=0.8,
            prob_out=0.05,
        ),
    )
    cohort = generate_cohort(config)
    base = run_pipeline(cohort, "base")
    adjusted = run_pipeline(cohort, "adjusted")
    return config, cohort, base, adjusted
