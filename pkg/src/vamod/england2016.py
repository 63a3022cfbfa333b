"""Reference data from the published 2016 England key stage 4 cohort.

Pupil and school counts by characteristic, and the adjusted-model
coefficient estimates (attainment points, reference-coded), as released
for the 502,851-pupil / 3,098-school national cohort. The synthetic
generator uses the count tables as default sampling marginals and the
coefficient table as its default data-generating truth.
"""

from __future__ import annotations

N_PUPILS = 502_851
N_SCHOOLS = 3_098
MEDIAN_SCHOOL_SIZE = 162

# National pupil counts per KS2 band, groups 1..34.
KS2_GROUP_COUNTS = (
    960, 1164, 7692, 3133, 2413, 2417, 3287, 3359, 4757, 5228,
    6357, 7499, 8337, 10041, 12033, 13679, 16026, 19589, 23473, 25852,
    29549, 30450, 30669, 31371, 30990, 29952, 28983, 27346, 24938, 21913,
    18167, 12225, 6505, 2497,
)

# Pupil counts by characteristic, category order matching vamod.categories.
PUPIL_COUNTS: dict[str, dict[str, int]] = {
    "month": {
        "september": 43346, "october": 41981, "november": 41113,
        "december": 42700, "january": 42124, "february": 38949,
        "march": 42158, "april": 40458, "may": 42601, "june": 40983,
        "july": 43493, "august": 42945,
    },
    "gender": {"male": 253733, "female": 249118},
    "ethnicity": {
        "white_british": 380949,
        "white_irish": 1606,
        "traveller_of_irish_heritage": 104,
        "gypsy_roma": 659,
        "any_other_white_background": 17129,
        "black_african": 14379,
        "black_caribbean": 6650,
        "any_other_black_background": 2690,
        "indian": 12426,
        "pakistani": 18722,
        "bangladeshi": 7709,
        "any_other_asian_background": 6900,
        "chinese": 1585,
        "white_and_black_african": 2390,
        "white_and_black_caribbean": 6873,
        "white_and_asian": 4656,
        "any_other_mixed_background": 6983,
        "any_other_ethnic_group": 6198,
        "information_not_yet_obtained": 2098,
        "refused": 2145,
    },
    "language": {"english_first": 438585, "english_additional": 64266},
    "sen": {"none": 436229, "support": 55601, "statement": 11021},
    "fsm": {"not_eligible": 369147, "eligible": 133704},
    "idaci_decile": {
        "1": 50289, "2": 51790, "3": 49086, "4": 51072, "5": 50340,
        "6": 49321, "7": 50172, "8": 50853, "9": 49761, "10": 50167,
    },
}

# School counts by characteristic.
SCHOOL_COUNTS: dict[str, dict[str, int]] = {
    "region": {
        "london": 431, "south_east": 474, "south_west": 309,
        "west_midlands": 373, "north_west": 447, "north_east": 152,
        "yorkshire_and_humber": 298, "east_midlands": 269,
        "east_of_england": 345,
    },
    "school_type": {
        "community": 538, "foundation": 275, "voluntary_aided": 273,
        "voluntary_controlled": 34, "city_technology_college": 3,
        "sponsored_academy": 560, "converter_academy": 1320,
        "free_school": 27, "studio_school": 30,
        "university_technical_college": 26, "further_education_college": 12,
    },
    "admissions": {"comprehensive": 2819, "grammar": 162, "secondary_modern": 117},
    "age_range": {"11-18": 1881, "11-16": 971, "14-18": 135, "4-18": 83, "4-16": 28},
    "school_gender": {"mixed": 2738, "boys": 151, "girls": 209},
    "religion": {
        "none": 2524, "church_of_england": 176, "roman_catholic": 310,
        "other_christian_faith": 68, "jewish": 11, "muslim": 8, "sikh": 1,
    },
    "school_idaci_decile": {
        "1": 288, "2": 329, "3": 313, "4": 303, "5": 325,
        "6": 332, "7": 327, "8": 320, "9": 289, "10": 272,
    },
}

# Adjusted-model coefficients (attainment points), reference-coded.
ADJUSTED_COEFFICIENTS: dict[str, float] = {
    "const": 19.74,
    "ks2_g2": 5.52, "ks2_g3": 6.73, "ks2_g4": 7.71, "ks2_g5": 9.29,
    "ks2_g6": 9.86, "ks2_g7": 10.84, "ks2_g8": 11.67, "ks2_g9": 13.04,
    "ks2_g10": 13.63, "ks2_g11": 14.75, "ks2_g12": 16.03, "ks2_g13": 17.22,
    "ks2_g14": 18.48, "ks2_g15": 20.09, "ks2_g16": 21.24, "ks2_g17": 22.72,
    "ks2_g18": 24.18, "ks2_g19": 25.86, "ks2_g20": 27.38, "ks2_g21": 28.89,
    "ks2_g22": 30.76, "ks2_g23": 32.53, "ks2_g24": 34.40, "ks2_g25": 36.18,
    "ks2_g26": 37.87, "ks2_g27": 39.94, "ks2_g28": 41.92, "ks2_g29": 43.93,
    "ks2_g30": 46.11, "ks2_g31": 48.27, "ks2_g32": 50.69, "ks2_g33": 52.90,
    "ks2_g34": 54.91,
    "month_october": 0.15, "month_november": 0.35, "month_december": 0.42,
    "month_january": 0.59, "month_february": 0.78, "month_march": 0.99,
    "month_april": 1.12, "month_may": 1.21, "month_june": 1.30,
    "month_july": 1.49, "month_august": 1.62,
    "gender_female": 2.44,
    "ethnicity_white_irish": 2.02,
    "ethnicity_traveller_of_irish_heritage": -6.92,
    "ethnicity_gypsy_roma": -5.63,
    "ethnicity_any_other_white_background": 3.90,
    "ethnicity_black_african": 5.42,
    "ethnicity_black_caribbean": 1.80,
    "ethnicity_any_other_black_background": 3.75,
    "ethnicity_indian": 4.16,
    "ethnicity_pakistani": 1.93,
    "ethnicity_bangladeshi": 4.49,
    "ethnicity_any_other_asian_background": 4.71,
    "ethnicity_chinese": 6.26,
    "ethnicity_white_and_black_african": 2.46,
    "ethnicity_white_and_black_caribbean": 0.04,
    "ethnicity_white_and_asian": 2.08,
    "ethnicity_any_other_mixed_background": 2.32,
    "ethnicity_any_other_ethnic_group": 5.67,
    "ethnicity_information_not_yet_obtained": -0.14,
    "ethnicity_refused": 1.36,
    "language_english_additional": 2.55,
    "sen_support": -4.42,
    "sen_statement": -6.88,
    "fsm_eligible": -4.01,
    "idaci_d2": -0.22, "idaci_d3": -0.79, "idaci_d4": -1.28,
    "idaci_d5": -1.87, "idaci_d6": -2.66, "idaci_d7": -2.99,
    "idaci_d8": -3.43, "idaci_d9": -3.82, "idaci_d10": -4.52,
}

# Published score summaries (grade units) the generator calibrates against.
PUPIL_PROGRESS_SD = 1.06
SCHOOL_PROGRESS_SD = 0.40


def _normalise(counts: dict[str, int]) -> dict[str, float]:
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def ks2_group_probabilities() -> tuple[float, ...]:
    total = sum(KS2_GROUP_COUNTS)
    return tuple(c / total for c in KS2_GROUP_COUNTS)


def pupil_marginals() -> dict[str, dict[str, float]]:
    """Default per-characteristic category probabilities for pupils."""
    return {name: _normalise(counts) for name, counts in PUPIL_COUNTS.items()}


def school_marginals() -> dict[str, dict[str, float]]:
    """Default per-characteristic category probabilities for schools."""
    return {name: _normalise(counts) for name, counts in SCHOOL_COUNTS.items()}
