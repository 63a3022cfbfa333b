import numpy as np
import pytest

from conftest import make_cohort, make_pupil, make_school
from vamod.accountability import (
    Band,
    band_of,
    band_school,
    group_gaps,
    rank_movement,
    transition_table,
)
from vamod.cohort import validate_cohort
from vamod.errors import (
    EmptyInput,
    LengthMismatch,
    SingleCategory,
    UnknownCharacteristic,
)
from vamod.valueadded import SchoolScore


class TestBandOf:
    @pytest.mark.parametrize(
        "score, significant, expected",
        [
            (0.6, True, Band.WELL_ABOVE),
            (0.5, True, Band.WELL_ABOVE),   # boundary inclusive
            (0.49, True, Band.ABOVE),
            (0.01, True, Band.ABOVE),
            (0.0, True, Band.AVERAGE),      # degenerate significant zero
            (-0.01, True, Band.BELOW),
            (-0.5, True, Band.BELOW),       # boundary inclusive towards zero
            (-0.51, True, Band.WELL_BELOW),
            (0.3, False, Band.AVERAGE),
            (0.9, False, Band.AVERAGE),
            (-0.9, False, Band.AVERAGE),
        ],
    )
    def test_assignments(self, score, significant, expected):
        assert band_of(score, significant) is expected

    def test_monotone_in_score_when_significant(self):
        grid = np.linspace(-1.5, 1.5, 601)
        bands = [int(band_of(s, True)) for s in grid]
        assert all(a <= b for a, b in zip(bands, bands[1:]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            band_of(float("nan"), True)

    def test_below_floor_is_band_one(self):
        score = SchoolScore("A", 50, -0.9, 0.1, -1.096, -0.704, True)
        banded = band_school(score)
        assert banded.band is Band.WELL_BELOW
        assert banded.below_floor
        ok = band_school(SchoolScore("B", 50, -0.4, 0.1, -0.596, -0.204, True))
        assert not ok.below_floor


class TestTransitionTable:
    def test_identical_vectors_diagonal(self):
        bands = [Band(b) for b in (1, 2, 3, 4, 5, 3, 3)]
        table = transition_table(bands, bands)
        assert np.all(table.counts == np.diag(np.diag(table.counts)))
        assert table.n_changed == 0

    def test_hand_counted_example(self):
        a = [Band.WELL_ABOVE, Band.WELL_ABOVE, Band.WELL_BELOW]
        b = [Band.WELL_ABOVE, Band.ABOVE, Band.WELL_BELOW]
        table = transition_table(a, b)
        assert table.counts[4, 4] == 1
        assert table.counts[4, 3] == 1
        assert table.counts[0, 0] == 1
        assert table.n_changed == 1
        assert table.grand_total == 3

    def test_conservation_property(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            a = rng.integers(1, 6, n)
            b = rng.integers(1, 6, n)
            table = transition_table(a, b)
            assert table.grand_total == n
            assert table.row_totals.tolist() == [int((a == k).sum()) for k in range(1, 6)]
            assert table.col_totals.tolist() == [int((b == k).sum()) for k in range(1, 6)]
            nonempty = table.row_totals > 0
            assert np.allclose(table.row_percentages[nonempty].sum(axis=1), 100.0, atol=0.1)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            transition_table([Band.AVERAGE], [])


class TestRankMovement:
    def test_identical_scores(self):
        report = rank_movement([0.5, 0.1, -0.2], [0.5, 0.1, -0.2])
        assert np.all(report.delta == 0)
        assert report.pearson == pytest.approx(1.0)
        assert report.spearman == pytest.approx(1.0)

    def test_swap_top_two(self):
        a = [5.0, 4.0, 3.0, 2.0, 1.0]
        b = [4.0, 5.0, 3.0, 2.0, 1.0]
        report = rank_movement(a, b)
        assert sorted(report.delta.tolist()) == [-1, 0, 0, 0, 1]
        assert np.sum(np.abs(report.delta) == 1) == 2

    def test_reversed_ten_schools(self):
        a = list(np.linspace(1.0, 2.0, 10))
        b = a[::-1]
        report = rank_movement(a, b)
        assert np.max(np.abs(report.delta)) == 9
        assert report.spearman == pytest.approx(-1.0)

    def test_threshold_counts(self):
        a = np.arange(100.0)
        rng = np.random.default_rng(2)
        b = a.copy()
        rng.shuffle(b)
        report = rank_movement(a, b, thresholds=(5, 20))
        assert report.threshold_counts[5] == int(np.sum(np.abs(report.delta) >= 5))
        assert report.threshold_counts[20] == int(np.sum(np.abs(report.delta) >= 20))

    def test_deltas_sum_to_zero_when_tie_free(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            a = rng.permutation(n).astype(float)
            b = rng.permutation(n).astype(float)
            assert rank_movement(a, b).delta.sum() == 0

    def test_monotone_transform_leaves_ranks_and_spearman(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=30)
        b = rng.normal(size=30)
        r1 = rank_movement(a, b)
        r2 = rank_movement(np.exp(a), np.exp(b))
        assert np.array_equal(r1.delta, r2.delta)
        assert r1.spearman == pytest.approx(r2.spearman, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            rank_movement([], [])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            rank_movement([1.0], [1.0, 2.0])


def _gap_cohort(rng, n_schools=40, pupils_per_school=250, p_additional=0.128):
    """Cohort whose 'language' attribute drives a constructed progress gap."""
    pupils = []
    for j in range(n_schools):
        sid = f"S{j:03d}"
        for i in range(pupils_per_school):
            lang = "english_additional" if rng.random() < p_additional else "english_first"
            pupils.append(make_pupil(f"{sid}-{i}", school_id=sid, language=lang))
    return make_cohort(pupils)


def _gap_scores(cohort, rng, offset_additional, offset_first, school_sd=0.15, noise_sd=0.3):
    effects = {sid: rng.normal(0, school_sd) for sid in cohort.schools}
    offsets = {"english_additional": offset_additional, "english_first": offset_first}
    return np.array(
        [offsets[p.language] + effects[p.school_id] + rng.normal(0, noise_sd)
         for p in cohort.pupils]
    )


class TestGroupGaps:
    def test_constructed_two_category_gap(self):
        rng = np.random.default_rng(18)
        cohort = _gap_cohort(rng)
        scores = _gap_scores(cohort, rng, offset_additional=0.4, offset_first=-0.1)
        report = group_gaps(scores, cohort, "language")
        assert report.categories[0].category == "english_additional"
        assert report.gap == pytest.approx(0.5, abs=0.02)
        assert report.p_value < 0.001

    def test_weighted_category_means_average_to_overall(self):
        rng = np.random.default_rng(19)
        cohort = _gap_cohort(rng, n_schools=10, pupils_per_school=50)
        scores = rng.normal(size=cohort.n_pupils)
        report = group_gaps(scores, cohort, "language")
        weighted = sum(c.n_pupils * c.mean_score for c in report.categories)
        assert weighted / cohort.n_pupils == pytest.approx(scores.mean(), abs=1e-9)

    def test_school_characteristic_groups_pupils_via_school(self):
        pupils = [make_pupil(f"p{i}", school_id=f"S{i % 4}") for i in range(40)]
        schools = [
            make_school(f"S{j}", admissions="grammar" if j < 2 else "comprehensive")
            for j in range(4)
        ]
        cohort = validate_cohort(pupils, schools)
        rng = np.random.default_rng(20)
        scores = rng.normal(size=40)
        report = group_gaps(scores, cohort, "admissions")
        assert {c.category for c in report.categories} == {"grammar", "comprehensive"}
        assert sum(c.n_pupils for c in report.categories) == 40

    def test_sorted_by_mean_descending(self):
        rng = np.random.default_rng(21)
        cohort = _gap_cohort(rng, n_schools=8, pupils_per_school=40)
        scores = rng.normal(size=cohort.n_pupils)
        report = group_gaps(scores, cohort, "language")
        means = [c.mean_score for c in report.categories]
        assert means == sorted(means, reverse=True)

    def test_single_category(self):
        cohort = make_cohort([make_pupil(f"p{i}", school_id=f"S{i%2}") for i in range(8)])
        with pytest.raises(SingleCategory):
            group_gaps(np.zeros(8), cohort, "gender")

    def test_unknown_characteristic(self):
        cohort = make_cohort([make_pupil("p1"), make_pupil("p2", school_id="S2")])
        with pytest.raises(UnknownCharacteristic):
            group_gaps(np.zeros(2), cohort, "shoe_size")

    def test_null_dgp_rejection_rate_calibrated(self):
        # fixed school-level characteristic, scores resampled under the null
        rng = np.random.default_rng(22)
        n_schools, per_school = 100, 20
        pupils = [
            make_pupil(f"p{j}-{i}", school_id=f"S{j}")
            for j in range(n_schools)
            for i in range(per_school)
        ]
        schools = [
            make_school(f"S{j}", school_gender="boys" if rng.random() < 0.5 else "girls")
            for j in range(n_schools)
        ]
        cohort = validate_cohort(pupils, schools)
        school_ids = np.array([p.school_id for p in cohort.pupils])
        unique_ids = [f"S{j}" for j in range(n_schools)]
        rejections = 0
        n_sims = 1000
        for _ in range(n_sims):
            effects = dict(zip(unique_ids, rng.normal(0, 0.5, n_schools)))
            scores = np.array([effects[sid] for sid in school_ids])
            scores += rng.normal(0, 1.0, scores.size)
            report = group_gaps(scores, cohort, "school_gender")
            rejections += report.p_value < 0.05
        assert 0.03 <= rejections / n_sims <= 0.07
