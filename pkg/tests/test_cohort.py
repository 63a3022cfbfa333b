import numpy as np
import pytest

from conftest import make_cohort, make_pupil, make_school
from vamod.cohort import summary_stats, validate_cohort
from vamod.errors import DanglingSchoolRef, DuplicateId, EmptyInput, OutOfRangeField


class TestValidateCohort:
    def test_identity_case(self):
        pupils = [make_pupil("p1"), make_pupil("p2")]
        cohort = validate_cohort(pupils, [make_school("S1")])
        assert cohort.n_pupils == 2
        assert cohort.n_schools == 1
        assert cohort.pupils == tuple(pupils)

    def test_dangling_school_ref(self):
        with pytest.raises(DanglingSchoolRef, match="p1.*X"):
            validate_cohort([make_pupil("p1", school_id="X")], [make_school("S1")])

    def test_out_of_range_idaci(self):
        with pytest.raises(OutOfRangeField, match="idaci_decile"):
            validate_cohort([make_pupil(idaci_decile=11)], [make_school()])

    def test_out_of_range_attainment(self):
        with pytest.raises(OutOfRangeField, match="attainment8"):
            validate_cohort([make_pupil(attainment8=90.5)], [make_school()])

    def test_bad_category_token(self):
        with pytest.raises(OutOfRangeField, match="ethnicity"):
            validate_cohort([make_pupil(ethnicity="martian")], [make_school()])

    def test_duplicate_pupil_id(self):
        with pytest.raises(DuplicateId, match="p1"):
            validate_cohort([make_pupil("p1"), make_pupil("p1")], [make_school()])

    def test_duplicate_school_id(self):
        with pytest.raises(DuplicateId, match="S1"):
            validate_cohort([make_pupil()], [make_school(), make_school()])

    def test_zero_pupil_school_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="dropped 1 school"):
            cohort = validate_cohort([make_pupil()], [make_school("S1"), make_school("S2")])
        assert set(cohort.schools) == {"S1"}

    def test_idempotent(self):
        cohort = make_cohort([make_pupil("p1"), make_pupil("p2", school_id="S2")])
        again = validate_cohort(cohort.pupils, cohort.schools)
        assert again == cohort


class TestSummaryStats:
    def test_basic(self):
        s = summary_stats([1, 2, 3, 4, 5])
        assert s.mean == 3
        assert s.p50 == 3
        assert s.minimum == 1
        assert s.maximum == 5

    def test_constant_list(self):
        s = summary_stats([7, 7, 7])
        assert s.sd == 0
        assert s.p10 == s.p25 == s.p50 == s.p75 == s.p90 == 7

    def test_interpolated_percentile(self):
        # rank p*(N-1)+1 convention: p25 of 1..4 sits at rank 1.75
        assert summary_stats([1, 2, 3, 4]).p25 == pytest.approx(1.75)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            summary_stats([])

    def test_monte_carlo_median_of_uniforms(self):
        # analytic quantile of U(0,1) at 0.5 is 0.5
        rng = np.random.default_rng(1234)
        s = summary_stats(rng.random(10_001))
        assert abs(s.p50 - 0.5) < 0.02

    def test_percentiles_ordered(self):
        rng = np.random.default_rng(7)
        s = summary_stats(rng.normal(size=997))
        assert (
            s.minimum <= s.p10 <= s.p25 <= s.p50 <= s.p75 <= s.p90 <= s.maximum
        )

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=200)
        shuffled = values.copy()
        rng.shuffle(shuffled)
        assert summary_stats(values) == summary_stats(shuffled)

    def test_sd_matches_welford_single_pass(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            values = rng.normal(loc=rng.uniform(-50, 50), scale=rng.uniform(0.1, 30),
                                size=rng.integers(2, 400))
            mean = 0.0
            m2 = 0.0
            for i, x in enumerate(values, start=1):
                delta = x - mean
                mean += delta / i
                m2 += delta * (x - mean)
            welford_sd = np.sqrt(m2 / (len(values) - 1))
            sd = summary_stats(values).sd
            assert abs(sd - welford_sd) <= 1e-10 * max(sd, welford_sd)

    def test_single_value(self):
        s = summary_stats([4.2])
        assert s.sd == 0.0
        assert s.mean == 4.2
