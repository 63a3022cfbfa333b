"""Deterministic synthetic-cohort generator calibrated to the 2016 cohort.

Schools and pupils are sampled from configurable marginals with a
configurable coefficient vector as the data-generating truth:

    attainment8 = X beta + 10 * u_school + eps,   clamped to [0, 90],

with u_school ~ N(0, sigma_u) in grades and eps ~ N(0, sigma_e) in points.
All randomness comes from counter-based streams keyed on (seed, school
index), with pupil draws laid out by pupil index inside fixed-shape
blocks, so output is byte-identical regardless of generation order or
thread count.

``default_config`` additionally calibrates two things against the
published national summaries: (a) the variance split between school
effects, characteristic composition and pupil noise, so the base-measure
pupil SD, school SD and R-squared land on their published values; and
(b) an ``intake_gradient`` coupling that lets each characteristic's
category mix vary smoothly across prior-attainment bands while holding
every configured marginal exactly (iterative proportional fitting). With
``intake_gradient = 0`` characteristics are drawn independently of the
prior-attainment band.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import england2016
from .categories import PUPIL_FACTORS, SCHOOL_FACTORS
from .cohort import Cohort, PupilRecord, SchoolRecord, validate_cohort
from .design import KS2_GROUP_VALUES, N_KS2_GROUPS
from .errors import Infeasible, InvalidConfig

_MASK64 = (1 << 64) - 1
_PROB_TOL = 1e-9


@dataclass(frozen=True)
class SizeDistribution:
    """Lognormal-shaped school size: round(median * exp(sigma * z)), floored."""

    median: float = 162.0
    sigma: float = 0.45
    minimum: int = 5


@dataclass(frozen=True)
class GroupConcentration:
    """Concentrate one category of one pupil characteristic in a school subset.

    In a ``school_share`` fraction of schools the category is drawn with
    probability ``prob_in``, elsewhere ``prob_out``; the characteristic's
    other categories keep their relative proportions. Used to construct
    cohorts where intake composition differs across schools.
    """

    characteristic: str
    category: str
    school_share: float
    prob_in: float
    prob_out: float


@dataclass(frozen=True)
class SynthConfig:
    """Full description of one synthetic cohort."""

    n_schools: int = 600
    seed: int = 0
    sigma_u: float = 0.0  # school-effect SD, grades
    sigma_e: float = 1.0  # pupil noise SD, points
    school_size: SizeDistribution = field(default_factory=SizeDistribution)
    ks2_probs: tuple[float, ...] = field(default_factory=england2016.ks2_group_probabilities)
    pupil_marginals: dict[str, dict[str, float]] = field(
        default_factory=england2016.pupil_marginals
    )
    school_marginals: dict[str, dict[str, float]] = field(
        default_factory=england2016.school_marginals
    )
    coefficients: dict[str, float] = field(
        default_factory=lambda: dict(england2016.ADJUSTED_COEFFICIENTS)
    )
    intake_gradient: float = 0.0
    concentration: GroupConcentration | None = None

    def validate(self) -> None:
        if self.n_schools < 2:
            raise InvalidConfig(f"n_schools must be >= 2, got {self.n_schools}")
        if not (-(1 << 63) <= int(self.seed) < (1 << 64)):
            raise InvalidConfig("seed must fit in 64 bits")
        if not self.sigma_u >= 0:
            raise InvalidConfig(f"sigma_u must be >= 0, got {self.sigma_u}")
        if not self.sigma_e >= 0:
            raise InvalidConfig(f"sigma_e must be >= 0, got {self.sigma_e}")
        if self.school_size.minimum < 1 or self.school_size.median < 1:
            raise InvalidConfig("school sizes must be at least 1")
        if len(self.ks2_probs) != N_KS2_GROUPS:
            raise InvalidConfig(f"ks2_probs needs {N_KS2_GROUPS} entries")
        if abs(sum(self.ks2_probs) - 1.0) > _PROB_TOL or min(self.ks2_probs) < 0:
            raise InvalidConfig("ks2_probs must be nonnegative and sum to 1")
        for name, factor_map, marginals in (
            ("pupil", PUPIL_FACTORS, self.pupil_marginals),
            ("school", SCHOOL_FACTORS, self.school_marginals),
        ):
            if set(marginals) != set(factor_map):
                raise InvalidConfig(f"{name} marginals must cover exactly {sorted(factor_map)}")
            for fname, cats in marginals.items():
                factor = factor_map[fname]
                if set(cats) != set(factor.categories):
                    raise InvalidConfig(f"{name} marginal {fname!r} has wrong categories")
                probs = list(cats.values())
                if abs(sum(probs) - 1.0) > _PROB_TOL or min(probs) < 0:
                    raise InvalidConfig(f"{name} marginal {fname!r} must sum to 1")
        if self.concentration is not None:
            c = self.concentration
            if c.characteristic not in PUPIL_FACTORS:
                raise InvalidConfig(f"unknown concentration characteristic {c.characteristic!r}")
            if c.category not in PUPIL_FACTORS[c.characteristic].categories:
                raise InvalidConfig(f"unknown concentration category {c.category!r}")
            for label, p in (("school_share", c.school_share), ("prob_in", c.prob_in),
                             ("prob_out", c.prob_out)):
                if not 0.0 <= p <= 1.0:
                    raise InvalidConfig(f"concentration {label} must be in [0, 1], got {p}")


def calibrate_variances(
    target_pupil_sd: float, target_school_sd: float, typical_n: int
) -> tuple[float, float]:
    """Solve the two moment identities for (sigma_u, sigma_e = 10 * s).

    target_school_sd^2 = sigma_u^2 + s^2 / typical_n and
    target_pupil_sd^2 = sigma_u^2 + s^2, where s is the within-school
    pupil progress SD in grades. Raises Infeasible when no nonnegative
    solution exists.
    """
    if typical_n < 2:
        raise InvalidConfig(f"typical_n must be >= 2, got {typical_n}")
    tp2 = target_pupil_sd**2
    ts2 = target_school_sd**2
    if not 0 < ts2 < tp2:
        raise Infeasible(
            f"need 0 < school sd < pupil sd, got ({target_pupil_sd}, {target_school_sd})"
        )
    s2 = (tp2 - ts2) * typical_n / (typical_n - 1)
    su2 = ts2 - s2 / typical_n
    if su2 < -1e-12 * tp2:
        raise Infeasible(
            "school-sd target is below the sampling noise implied by the pupil-sd target"
        )
    return float(np.sqrt(max(su2, 0.0))), float(10.0 * np.sqrt(s2))


# --- characteristic/attainment coupling ---------------------------------------


def _coef_array(coefficients: dict[str, float], factor) -> np.ndarray:
    """Per-category coefficient values (reference category = 0)."""
    return np.array([0.0, *(coefficients.get(lab, 0.0) for lab in factor.labels)])


def _ks2_coef_array(coefficients: dict[str, float]) -> np.ndarray:
    return np.array(
        [0.0, *(coefficients.get(f"ks2_g{g}", 0.0) for g in range(2, N_KS2_GROUPS + 1))]
    )


def conditional_tables(config: SynthConfig) -> dict[str, np.ndarray]:
    """Per-characteristic conditional category probabilities given KS2 band.

    Rows index the 34 bands. With ``intake_gradient = 0`` every row equals
    the configured marginal. Otherwise rows are exponentially tilted
    towards higher-coefficient categories in higher bands and repaired by
    iterative proportional fitting so that each row sums to one and the
    band-weighted column sums reproduce the configured marginals exactly.
    """
    q = np.asarray(config.ks2_probs)
    z = _ks2_coef_array(config.coefficients)
    z = z - float(q @ z)
    tables: dict[str, np.ndarray] = {}
    for name, factor in PUPIL_FACTORS.items():
        marg = np.array([config.pupil_marginals[name][c] for c in factor.categories])
        if config.intake_gradient == 0.0:
            tables[name] = np.tile(marg, (N_KS2_GROUPS, 1))
            continue
        beta = _coef_array(config.coefficients, factor)
        beta = beta - float(marg @ beta)
        w = marg[None, :] * np.exp(config.intake_gradient * np.outer(z, beta))
        for _ in range(500):
            w /= w.sum(axis=1, keepdims=True)
            implied = q @ w
            if np.max(np.abs(implied - marg)) < 1e-13:
                break
            w *= np.where(implied > 0, marg / implied, 1.0)[None, :]
        w /= w.sum(axis=1, keepdims=True)
        tables[name] = w
    return tables


def characteristic_moments(config: SynthConfig) -> tuple[np.ndarray, float, float]:
    """Exact moments of the characteristic contribution to attainment.

    Returns ``(m, within_var, explained_var)`` where ``m[g]`` is the mean
    characteristic effect in band g (points), ``within_var`` the
    band-weighted within-band variance of the characteristic effect, and
    ``explained_var`` the variance over bands of the band-conditional mean
    attainment (what the base model can explain).
    """
    q = np.asarray(config.ks2_probs)
    tables = conditional_tables(config)
    m = np.zeros(N_KS2_GROUPS)
    within = 0.0
    for name, factor in PUPIL_FACTORS.items():
        beta = _coef_array(config.coefficients, factor)
        mean_g = tables[name] @ beta
        mean_sq_g = tables[name] @ (beta**2)
        m += mean_g
        within += float(q @ (mean_sq_g - mean_g**2))
    cond_mean = _ks2_coef_array(config.coefficients) + m
    explained = float(q @ cond_mean**2 - (q @ cond_mean) ** 2)
    return m, within, explained


def _solve_intake_gradient(config: SynthConfig, explained_target: float) -> float:
    """Find the tilt strength whose explained variance hits the target."""

    def explained(theta: float) -> float:
        return characteristic_moments(replace(config, intake_gradient=theta))[2]

    if explained(0.0) >= explained_target:
        return 0.0
    lo, hi = 0.0, 0.004
    for _ in range(20):
        if explained(hi) >= explained_target:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise Infeasible("explained-variance target unreachable by intake coupling")
    for _ in range(60):
        mid = (lo + hi) / 2.0
        if explained(mid) < explained_target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def default_config(
    n_schools: int = 600,
    seed: int = 0,
    *,
    target_pupil_sd: float = england2016.PUPIL_PROGRESS_SD,
    target_school_sd: float = england2016.SCHOOL_PROGRESS_SD,
    target_base_r2: float = 0.570,
    typical_school_size: int = england2016.MEDIAN_SCHOOL_SIZE,
    coefficient_overrides: dict[str, float] | None = None,
    concentration: GroupConcentration | None = None,
) -> SynthConfig:
    """A fully calibrated configuration reproducing the published scale structure.

    The moment solve fixes the school-effect SD and the total within-school
    progress SD; the intake coupling is tuned so the base model explains
    ``target_base_r2`` of attainment variance; the deterministic
    characteristic contribution is then subtracted from the within-school
    budget, leaving ``sigma_e`` as pure pupil noise.
    """
    coefficients = dict(england2016.ADJUSTED_COEFFICIENTS)
    if coefficient_overrides:
        coefficients.update(coefficient_overrides)
    sigma_u, sigma_e_total = calibrate_variances(
        target_pupil_sd, target_school_sd, typical_school_size
    )
    config = SynthConfig(
        n_schools=n_schools,
        seed=seed,
        sigma_u=sigma_u,
        sigma_e=1.0,
        coefficients=coefficients,
        concentration=concentration,
    )
    base_resid_var = 100.0 * target_pupil_sd**2
    explained_target = base_resid_var * target_base_r2 / (1.0 - target_base_r2)
    theta = _solve_intake_gradient(config, explained_target)
    config = replace(config, intake_gradient=theta)
    within_char = characteristic_moments(config)[1]
    noise_var = sigma_e_total**2 - within_char
    if noise_var <= 0:
        raise Infeasible(
            "characteristic variance exceeds the calibrated within-school budget"
        )
    config = replace(config, sigma_e=float(np.sqrt(noise_var)))
    config.validate()
    return config


# --- generation ----------------------------------------------------------------


def _cumulative(probs: np.ndarray) -> np.ndarray:
    c = np.cumsum(probs)
    c[-1] = 1.0
    return c


def _draw(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)


def _draw_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-row categorical draw: row i uses cumulative distribution cum_rows[i]."""
    idx = (cum_rows <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def _concentrated_rows(marginal: np.ndarray, cat_idx: int, p_target: float) -> np.ndarray:
    """Replace one category's probability, rescaling the rest proportionally."""
    rest = 1.0 - marginal[cat_idx]
    out = marginal * ((1.0 - p_target) / rest if rest > 0 else 0.0)
    out[cat_idx] = p_target
    if rest <= 0:
        out[:] = 0.0
        out[cat_idx] = 1.0
    return np.tile(_cumulative(out), (N_KS2_GROUPS, 1))


def generate_cohort(config: SynthConfig) -> Cohort:
    """Generate a validated cohort; byte-identical for identical configs."""
    config.validate()
    seed = int(config.seed) & _MASK64

    school_factors = list(SCHOOL_FACTORS.values())
    school_cums = [
        _cumulative(np.array([config.school_marginals[f.name][c] for c in f.categories]))
        for f in school_factors
    ]
    ks2_cum = _cumulative(np.asarray(config.ks2_probs))
    tables = conditional_tables(config)
    pupil_factors = list(PUPIL_FACTORS.values())
    factor_cums = {
        f.name: np.cumsum(tables[f.name], axis=1) for f in pupil_factors
    }
    for cum in factor_cums.values():
        cum[:, -1] = 1.0

    conc = config.concentration
    conc_cums = None
    if conc is not None:
        factor = PUPIL_FACTORS[conc.characteristic]
        marg = np.array([config.pupil_marginals[conc.characteristic][c] for c in factor.categories])
        cat_idx = factor.index_of(conc.category)
        conc_cums = (
            _concentrated_rows(marg, cat_idx, conc.prob_in),
            _concentrated_rows(marg, cat_idx, conc.prob_out),
        )

    ks2_coefs = _ks2_coef_array(config.coefficients)
    const = config.coefficients.get("const", 0.0)
    factor_coefs = {f.name: _coef_array(config.coefficients, f) for f in pupil_factors}

    size = config.school_size
    pupils: list[PupilRecord] = []
    schools: list[SchoolRecord] = []
    for j in range(config.n_schools):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, j], dtype=np.uint64))
        )
        # fixed draw layout: school attributes, concentration flag, size,
        # school effect, then one uniform block + one noise block for pupils
        u_attr = rng.random(len(school_factors) + 1)
        attrs = {
            f.name: f.categories[int(_draw(cum, np.array([u]))[0])]
            for f, cum, u in zip(school_factors, school_cums, u_attr)
        }
        concentrated = u_attr[-1] < (conc.school_share if conc is not None else 0.0)
        n_j = max(size.minimum, int(np.rint(size.median * np.exp(size.sigma * rng.standard_normal()))))
        u_school = config.sigma_u * rng.standard_normal()
        u_block = rng.random((n_j, 1 + len(pupil_factors)))
        eps = config.sigma_e * rng.standard_normal(n_j)

        school_id = f"S{j + 1:04d}"
        schools.append(
            SchoolRecord(
                school_id=school_id,
                region=attrs["region"],
                school_type=attrs["school_type"],
                admissions=attrs["admissions"],
                age_range=attrs["age_range"],
                school_gender=attrs["school_gender"],
                religion=attrs["religion"],
                school_idaci_decile=int(attrs["school_idaci_decile"]),
            )
        )

        groups = _draw(ks2_cum, u_block[:, 0])
        xb = const + ks2_coefs[groups] + 10.0 * u_school + eps
        cat_indices: dict[str, np.ndarray] = {}
        for col, factor in enumerate(pupil_factors, start=1):
            if conc is not None and factor.name == conc.characteristic:
                cum_rows = conc_cums[0] if concentrated else conc_cums[1]
            else:
                cum_rows = factor_cums[factor.name]
            idx = _draw_rows(cum_rows[groups], u_block[:, col])
            cat_indices[factor.name] = idx
            xb = xb + factor_coefs[factor.name][idx]
        a8 = np.clip(xb, 0.0, 90.0)

        month_cats = PUPIL_FACTORS["month"].categories
        gender_cats = PUPIL_FACTORS["gender"].categories
        eth_cats = PUPIL_FACTORS["ethnicity"].categories
        lang_cats = PUPIL_FACTORS["language"].categories
        sen_cats = PUPIL_FACTORS["sen"].categories
        fsm_cats = PUPIL_FACTORS["fsm"].categories
        for i in range(n_j):
            pupils.append(
                PupilRecord(
                    pupil_id=f"{school_id}-{i + 1:04d}",
                    school_id=school_id,
                    ks2=float(KS2_GROUP_VALUES[groups[i]]),
                    attainment8=float(a8[i]),
                    month=month_cats[cat_indices["month"][i]],
                    gender=gender_cats[cat_indices["gender"][i]],
                    ethnicity=eth_cats[cat_indices["ethnicity"][i]],
                    language=lang_cats[cat_indices["language"][i]],
                    sen=sen_cats[cat_indices["sen"][i]],
                    fsm=fsm_cats[cat_indices["fsm"][i]],
                    idaci_decile=int(cat_indices["idaci_decile"][i]) + 1,
                )
            )
    return validate_cohort(pupils, schools)


# --- flat key=value serialisation ------------------------------------------------


def config_to_items(config: SynthConfig) -> dict[str, str]:
    """Flatten a config to the key=value vocabulary (floats via repr, exact)."""
    items: dict[str, str] = {
        "n_schools": str(config.n_schools),
        "seed": str(config.seed),
        "sigma_u": repr(float(config.sigma_u)),
        "sigma_e": repr(float(config.sigma_e)),
        "intake_gradient": repr(float(config.intake_gradient)),
        "size.median": repr(float(config.school_size.median)),
        "size.sigma": repr(float(config.school_size.sigma)),
        "size.min": str(config.school_size.minimum),
    }
    for g, p in enumerate(config.ks2_probs, start=1):
        items[f"ks2.g{g}"] = repr(float(p))
    for fname, cats in config.pupil_marginals.items():
        for cat, p in cats.items():
            items[f"marginal.{fname}.{cat}"] = repr(float(p))
    for fname, cats in config.school_marginals.items():
        for cat, p in cats.items():
            items[f"school.{fname}.{cat}"] = repr(float(p))
    for label, value in config.coefficients.items():
        items[f"coef.{label}"] = repr(float(value))
    if config.concentration is not None:
        c = config.concentration
        items["concentrate.characteristic"] = c.characteristic
        items["concentrate.category"] = c.category
        items["concentrate.school_share"] = repr(float(c.school_share))
        items["concentrate.prob_in"] = repr(float(c.prob_in))
        items["concentrate.prob_out"] = repr(float(c.prob_out))
    return items


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InvalidConfig(f"config key {key!r}: {value!r} is not a number") from None


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise InvalidConfig(f"config key {key!r}: {value!r} is not an integer") from None


def config_from_items(items: dict[str, str]) -> SynthConfig:
    """Build a config from key=value items; unspecified keys keep defaults.

    Defaults are the plain published marginals and coefficients with
    independent draws; use ``default_config`` for the calibrated generator.
    """
    base = SynthConfig()
    n_schools = base.n_schools
    seed = base.seed
    sigma_u, sigma_e, gradient = base.sigma_u, base.sigma_e, base.intake_gradient
    size = base.school_size
    ks2 = list(base.ks2_probs)
    pupil_marg = {f: dict(cats) for f, cats in base.pupil_marginals.items()}
    school_marg = {f: dict(cats) for f, cats in base.school_marginals.items()}
    coefficients = dict(base.coefficients)
    conc_fields: dict[str, str] = {}

    for key, value in items.items():
        if key == "n_schools":
            n_schools = _parse_int(key, value)
        elif key == "seed":
            seed = _parse_int(key, value)
        elif key == "sigma_u":
            sigma_u = _parse_float(key, value)
        elif key == "sigma_e":
            sigma_e = _parse_float(key, value)
        elif key == "intake_gradient":
            gradient = _parse_float(key, value)
        elif key == "size.median":
            size = replace(size, median=_parse_float(key, value))
        elif key == "size.sigma":
            size = replace(size, sigma=_parse_float(key, value))
        elif key == "size.min":
            size = replace(size, minimum=_parse_int(key, value))
        elif key.startswith("ks2.g"):
            g = _parse_int(key, key.removeprefix("ks2.g"))
            if not 1 <= g <= N_KS2_GROUPS:
                raise InvalidConfig(f"config key {key!r}: no such KS2 group")
            ks2[g - 1] = _parse_float(key, value)
        elif key.startswith("marginal."):
            _set_marginal(pupil_marg, key, key.removeprefix("marginal."), value)
        elif key.startswith("school."):
            _set_marginal(school_marg, key, key.removeprefix("school."), value)
        elif key.startswith("coef."):
            coefficients[key.removeprefix("coef.")] = _parse_float(key, value)
        elif key.startswith("concentrate."):
            conc_fields[key.removeprefix("concentrate.")] = value
        else:
            raise InvalidConfig(f"unknown config key {key!r}")

    concentration = None
    if conc_fields:
        missing = {"characteristic", "category", "school_share", "prob_in", "prob_out"} - set(
            conc_fields
        )
        if missing:
            raise InvalidConfig(f"concentration is missing keys: {sorted(missing)}")
        concentration = GroupConcentration(
            characteristic=conc_fields["characteristic"],
            category=conc_fields["category"],
            school_share=_parse_float("concentrate.school_share", conc_fields["school_share"]),
            prob_in=_parse_float("concentrate.prob_in", conc_fields["prob_in"]),
            prob_out=_parse_float("concentrate.prob_out", conc_fields["prob_out"]),
        )

    config = SynthConfig(
        n_schools=n_schools,
        seed=seed,
        sigma_u=sigma_u,
        sigma_e=sigma_e,
        school_size=size,
        ks2_probs=tuple(ks2),
        pupil_marginals=pupil_marg,
        school_marginals=school_marg,
        coefficients=coefficients,
        intake_gradient=gradient,
        concentration=concentration,
    )
    config.validate()
    return config


def _set_marginal(store: dict[str, dict[str, float]], key: str, rest: str, value: str) -> None:
    fname, _, cat = rest.partition(".")
    if fname not in store or cat not in store[fname]:
        raise InvalidConfig(f"unknown config key {key!r}")
    store[fname][cat] = _parse_float(key, value)
