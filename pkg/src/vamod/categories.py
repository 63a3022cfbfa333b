"""Fixed category vocabulary for pupil and school characteristics.

Category tokens are lowercase snake_case strings and double as the CSV
vocabulary. The first category of every factor is its reference category;
dummy-column labels cover the remaining categories in listed order, so the
ordering here fixes both report layout and design-matrix column order.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Factor:
    """One categorical characteristic: ordered categories plus dummy labels."""

    name: str
    categories: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.categories) - 1:
            raise ValueError(f"factor {self.name}: need one label per non-reference category")

    @property
    def reference(self) -> str:
        return self.categories[0]

    def index_of(self, category: str) -> int:
        return self.categories.index(category)


def _factor(name: str, categories: tuple[str, ...], prefix: str | None = None) -> Factor:
    prefix = name if prefix is None else prefix
    return Factor(name, categories, tuple(f"{prefix}_{c}" for c in categories[1:]))


# Academic-year order; September is the reference month.
MONTHS = (
    "september", "october", "november", "december", "january", "february",
    "march", "april", "may", "june", "july", "august",
)

GENDERS = ("male", "female")

ETHNICITIES = (
    "white_british",
    "white_irish",
    "traveller_of_irish_heritage",
    "gypsy_roma",
    "any_other_white_background",
    "black_african",
    "black_caribbean",
    "any_other_black_background",
    "indian",
    "pakistani",
    "bangladeshi",
    "any_other_asian_background",
    "chinese",
    "white_and_black_african",
    "white_and_black_caribbean",
    "white_and_asian",
    "any_other_mixed_background",
    "any_other_ethnic_group",
    "information_not_yet_obtained",
    "refused",
)

LANGUAGES = ("english_first", "english_additional")

SEN_STATUSES = ("none", "support", "statement")

FSM_STATUSES = ("not_eligible", "eligible")

# IDACI deciles run 1 (least deprived) .. 10; stored as int, tokenised as str.
IDACI_DECILES = tuple(str(d) for d in range(1, 11))

REGIONS = (
    "london",
    "south_east",
    "south_west",
    "west_midlands",
    "north_west",
    "north_east",
    "yorkshire_and_humber",
    "east_midlands",
    "east_of_england",
)

SCHOOL_TYPES = (
    "community",
    "foundation",
    "voluntary_aided",
    "voluntary_controlled",
    "city_technology_college",
    "sponsored_academy",
    "converter_academy",
    "free_school",
    "studio_school",
    "university_technical_college",
    "further_education_college",
)

ADMISSIONS = ("comprehensive", "grammar", "secondary_modern")

AGE_RANGES = ("11-18", "11-16", "14-18", "4-18", "4-16")

SCHOOL_GENDERS = ("mixed", "boys", "girls")

RELIGIONS = (
    "none",
    "church_of_england",
    "roman_catholic",
    "other_christian_faith",
    "jewish",
    "muslim",
    "sikh",
)

# Model-term order for pupil characteristics (also the report order).
PUPIL_FACTORS: dict[str, Factor] = {
    f.name: f
    for f in (
        _factor("month", MONTHS),
        _factor("gender", GENDERS),
        _factor("ethnicity", ETHNICITIES),
        _factor("language", LANGUAGES),
        _factor("sen", SEN_STATUSES),
        _factor("fsm", FSM_STATUSES),
        Factor("idaci_decile", IDACI_DECILES, tuple(f"idaci_d{d}" for d in range(2, 11))),
    )
}

SCHOOL_FACTORS: dict[str, Factor] = {
    f.name: f
    for f in (
        _factor("region", REGIONS),
        _factor("school_type", SCHOOL_TYPES),
        _factor("admissions", ADMISSIONS),
        _factor("age_range", AGE_RANGES),
        _factor("school_gender", SCHOOL_GENDERS),
        _factor("religion", RELIGIONS),
        Factor(
            "school_idaci_decile",
            IDACI_DECILES,
            tuple(f"school_idaci_d{d}" for d in range(2, 11)),
        ),
    )
}
