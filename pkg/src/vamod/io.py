"""CSV ingestion and emission, flat config files, and report assembly.

Input schemas are strict: headers must match exactly and category tokens
must match the fixed vocabulary byte-for-byte (silent coercion of
category data is the classic failure mode in school data pipelines).
Cohort files carry floats at full precision (repr) so write -> read is
the identity; report files use fixed 6-decimal formatting so golden-file
comparisons are exact across platforms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import categories
from .accountability import (
    DEFAULT_RANK_THRESHOLDS,
    BandedSchool,
    GroupGapReport,
    RankReport,
    TransitionTable,
    band_school,
    group_gaps,
    rank_movement,
    transition_table,
)
from .cohort import Cohort, PupilRecord, SchoolRecord, validate_cohort
from .errors import (
    BadNumber,
    BadToken,
    DegenerateWithin,
    InvalidConfig,
    SchemaMismatch,
    SingleCategory,
    SingularSubmatrix,
)
from .valueadded import (
    PipelineResult,
    ShrinkageEstimates,
    run_pipeline,
    shrink_school_scores,
)

PUPIL_HEADER = (
    "pupil_id", "school_id", "ks2", "attainment8", "month", "gender",
    "ethnicity", "language", "sen", "fsm", "idaci_decile",
)
SCHOOL_HEADER = (
    "school_id", "region", "school_type", "admissions", "age_range",
    "school_gender", "religion", "school_idaci_decile",
)
SCORES_HEADER = ("school_id", "score", "significant")

_PUPIL_TOKENS = {
    "month": categories.MONTHS,
    "gender": categories.GENDERS,
    "ethnicity": categories.ETHNICITIES,
    "language": categories.LANGUAGES,
    "sen": categories.SEN_STATUSES,
    "fsm": categories.FSM_STATUSES,
}
_SCHOOL_TOKENS = {
    "region": categories.REGIONS,
    "school_type": categories.SCHOOL_TYPES,
    "admissions": categories.ADMISSIONS,
    "age_range": categories.AGE_RANGES,
    "school_gender": categories.SCHOOL_GENDERS,
    "religion": categories.RELIGIONS,
}


def _fmt6(x: float) -> str:
    return f"{float(x):.6f}"


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


def _check_header(found: list[str], expected: tuple[str, ...], path) -> None:
    if tuple(found) == expected:
        return
    missing = [c for c in expected if c not in found]
    extra = [c for c in found if c not in expected]
    detail = []
    if missing:
        detail.append(f"missing column(s): {', '.join(missing)}")
    if extra:
        detail.append(f"unexpected column(s): {', '.join(extra)}")
    if not detail:
        detail.append(f"column order must be exactly: {', '.join(expected)}")
    raise SchemaMismatch(f"{path}: {'; '.join(detail)}")


def _rows(path, expected_header: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: file is empty") from None
        _check_header(header, expected_header, path)
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(expected_header):
                raise SchemaMismatch(
                    f"{path} row {row_no}: {len(row)} fields, expected {len(expected_header)}"
                )
            yield row_no, row


def _token(path, row_no: int, column: str, value: str, allowed: tuple[str, ...]) -> str:
    if value not in allowed:
        raise BadToken(f"{path} row {row_no}: column {column!r} has unknown token {value!r}")
    return value


def _number(path, row_no: int, column: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise BadNumber(f"{path} row {row_no}: column {column!r}: {value!r} is not a number") from None


def _integer(path, row_no: int, column: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise BadNumber(
            f"{path} row {row_no}: column {column!r}: {value!r} is not an integer"
        ) from None


def load_cohort(pupil_path, school_path) -> Cohort:
    """Parse and validate a cohort from its two CSV files.

    All diagnostics carry 1-based data-row numbers. Parsing is strict;
    validation errors from the cohort layer propagate unchanged.
    """
    schools = []
    for row_no, row in _rows(school_path, SCHOOL_HEADER):
        rec = dict(zip(SCHOOL_HEADER, row))
        schools.append(
            SchoolRecord(
                school_id=rec["school_id"],
                region=_token(school_path, row_no, "region", rec["region"], categories.REGIONS),
                school_type=_token(
                    school_path, row_no, "school_type", rec["school_type"], categories.SCHOOL_TYPES
                ),
                admissions=_token(
                    school_path, row_no, "admissions", rec["admissions"], categories.ADMISSIONS
                ),
                age_range=_token(
                    school_path, row_no, "age_range", rec["age_range"], categories.AGE_RANGES
                ),
                school_gender=_token(
                    school_path, row_no, "school_gender", rec["school_gender"],
                    categories.SCHOOL_GENDERS,
                ),
                religion=_token(
                    school_path, row_no, "religion", rec["religion"], categories.RELIGIONS
                ),
                school_idaci_decile=_integer(
                    school_path, row_no, "school_idaci_decile", rec["school_idaci_decile"]
                ),
            )
        )

    pupils = []
    for row_no, row in _rows(pupil_path, PUPIL_HEADER):
        rec = dict(zip(PUPIL_HEADER, row))
        pupils.append(
            PupilRecord(
                pupil_id=rec["pupil_id"],
                school_id=rec["school_id"],
                ks2=_number(pupil_path, row_no, "ks2", rec["ks2"]),
                attainment8=_number(pupil_path, row_no, "attainment8", rec["attainment8"]),
                month=_token(pupil_path, row_no, "month", rec["month"], categories.MONTHS),
                gender=_token(pupil_path, row_no, "gender", rec["gender"], categories.GENDERS),
                ethnicity=_token(
                    pupil_path, row_no, "ethnicity", rec["ethnicity"], categories.ETHNICITIES
                ),
                language=_token(
                    pupil_path, row_no, "language", rec["language"], categories.LANGUAGES
                ),
                sen=_token(pupil_path, row_no, "sen", rec["sen"], categories.SEN_STATUSES),
                fsm=_token(pupil_path, row_no, "fsm", rec["fsm"], categories.FSM_STATUSES),
                idaci_decile=_integer(pupil_path, row_no, "idaci_decile", rec["idaci_decile"]),
            )
        )
    return validate_cohort(pupils, schools)


def write_cohort(cohort: Cohort, pupil_path, school_path) -> None:
    """Emit a cohort in the input schemas; floats at full precision."""
    with open(school_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCHOOL_HEADER)
        for s in cohort.schools.values():
            writer.writerow(
                [
                    s.school_id, s.region, s.school_type, s.admissions,
                    s.age_range, s.school_gender, s.religion,
                    str(s.school_idaci_decile),
                ]
            )
    with open(pupil_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PUPIL_HEADER)
        for p in cohort.pupils:
            writer.writerow(
                [
                    p.pupil_id, p.school_id, repr(p.ks2), repr(p.attainment8),
                    p.month, p.gender, p.ethnicity, p.language, p.sen, p.fsm,
                    str(p.idaci_decile),
                ]
            )


# --- flat key = value config files -------------------------------------------


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and #-comments are skipped."""
    items: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, eq, value = stripped.partition("=")
            if not eq:
                raise InvalidConfig(f"{path} line {line_no}: expected 'key = value'")
            key = key.strip()
            if key in items:
                raise InvalidConfig(f"{path} line {line_no}: duplicate key {key!r}")
            items[key] = value.strip()
    return items


def write_config_file(items: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {value}\n")


# --- run reports ---------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Everything a full run produces, in base-measure descending-score order."""

    cohort: Cohort
    base: PipelineResult
    adjusted: PipelineResult
    school_ids: tuple[str, ...]
    bands_base: tuple[BandedSchool, ...]
    bands_adjusted: tuple[BandedSchool, ...]
    rank: RankReport
    transitions: TransitionTable
    shrink_base: ShrinkageEstimates | None
    shrink_adjusted: ShrinkageEstimates | None
    gaps: dict[str, GroupGapReport]


def build_run_report(
    cohort: Cohort,
    *,
    shrinkage: bool = True,
    thresholds=DEFAULT_RANK_THRESHOLDS,
    gap_characteristics=None,
) -> RunReport:
    """Fit both specs and derive every accountability output."""
    base = run_pipeline(cohort, "base")
    adjusted = run_pipeline(cohort, "adjusted")

    order = [s.school_id for s in base.school_scores]
    adj_by_id = {s.school_id: s for s in adjusted.school_scores}
    base_scores = [s for s in base.school_scores]
    adj_scores = [adj_by_id[sid] for sid in order]

    bands_base = tuple(band_school(s) for s in base_scores)
    bands_adjusted = tuple(band_school(s) for s in adj_scores)
    rank = rank_movement(
        [s.score for s in base_scores], [s.score for s in adj_scores], thresholds
    )
    transitions = transition_table(
        [b.band for b in bands_base], [b.band for b in bands_adjusted]
    )

    shrink_b = shrink_a = None
    if shrinkage:
        try:
            shrink_b = shrink_school_scores(base.pupil_scores, cohort.school_ids())
            shrink_a = shrink_school_scores(adjusted.pupil_scores, cohort.school_ids())
        except DegenerateWithin:
            pass  # leave shrunk columns empty for degenerate cohorts

    if gap_characteristics is None:
        gap_characteristics = list(categories.PUPIL_FACTORS) + list(categories.SCHOOL_FACTORS)
    gaps = {}
    for name in gap_characteristics:
        try:
            gaps[name] = group_gaps(base.pupil_scores, cohort, name)
        except (SingleCategory, SingularSubmatrix):
            continue  # one category only, or too few clusters to test it
    return RunReport(
        cohort=cohort,
        base=base,
        adjusted=adjusted,
        school_ids=tuple(order),
        bands_base=bands_base,
        bands_adjusted=bands_adjusted,
        rank=rank,
        transitions=transitions,
        shrink_base=shrink_b,
        shrink_adjusted=shrink_a,
        gaps=gaps,
    )


_SCHOOLS_REPORT_HEADER = (
    "school_id", "n_pupils",
    "score_base", "ci_low_base", "ci_high_base", "significant_base", "band_base",
    "score_adjusted", "ci_low_adjusted", "ci_high_adjusted", "significant_adjusted",
    "band_adjusted",
    "shrunk_base", "shrunk_adjusted",
    "rank_base", "rank_adjusted", "rank_delta",
    "below_floor_base", "below_floor_adjusted",
)


def _write_schools_csv(report: RunReport, path) -> None:
    base_by_id = {s.school_id: s for s in report.base.school_scores}
    adj_by_id = {s.school_id: s for s in report.adjusted.school_scores}
    shrunk_b = report.shrink_base.shrunk_by_school() if report.shrink_base else {}
    shrunk_a = report.shrink_adjusted.shrunk_by_school() if report.shrink_adjusted else {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SCHOOLS_REPORT_HEADER)
        for i, sid in enumerate(report.school_ids):
            b = base_by_id[sid]
            a = adj_by_id[sid]
            bb = report.bands_base[i]
            ba = report.bands_adjusted[i]
            writer.writerow(
                [
                    sid, str(b.n_pupils),
                    _fmt6(b.score), _fmt6(b.ci_low), _fmt6(b.ci_high),
                    _fmt_bool(b.significant), bb.band.token,
                    _fmt6(a.score), _fmt6(a.ci_low), _fmt6(a.ci_high),
                    _fmt_bool(a.significant), ba.band.token,
                    _fmt6(shrunk_b[sid]) if sid in shrunk_b else "",
                    _fmt6(shrunk_a[sid]) if sid in shrunk_a else "",
                    str(int(report.rank.rank_a[i])), str(int(report.rank.rank_b[i])),
                    str(int(report.rank.delta[i])),
                    _fmt_bool(bb.below_floor), _fmt_bool(ba.below_floor),
                ]
            )


_BAND_TOKENS = ("well_below", "below", "average", "above", "well_above")


def write_transitions_csv(table: TransitionTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["band_base", *_BAND_TOKENS, "total", *(f"pct_{t}" for t in _BAND_TOKENS)]
        )
        for i, token in enumerate(_BAND_TOKENS):
            writer.writerow(
                [
                    token,
                    *(str(int(c)) for c in table.counts[i]),
                    str(int(table.row_totals[i])),
                    *(_fmt6(p) for p in table.row_percentages[i]),
                ]
            )
        writer.writerow(
            ["total", *(str(int(c)) for c in table.col_totals), str(table.grand_total)]
            + [""] * 5
        )


def write_gaps_csv(gap: GroupGapReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["category", "n_pupils", "mean_score", "f_statistic", "df1", "df2", "p_value"]
        )
        for cat in gap.categories:
            writer.writerow(
                [
                    cat.category, str(cat.n_pupils), _fmt6(cat.mean_score),
                    _fmt6(gap.statistic), str(gap.df1), str(gap.df2), _fmt6(gap.p_value),
                ]
            )


def _round_floats(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_round_floats(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _band_counts(bands) -> dict[str, int]:
    counts = dict.fromkeys(_BAND_TOKENS, 0)
    for b in bands:
        counts[b.band.token] += 1
    return counts


def summary_payload(report: RunReport) -> dict:
    """The machine-readable key/value tree mirroring the CSV outputs."""

    def model_block(result: PipelineResult) -> dict:
        return {
            "r_squared": result.fit.r_squared,
            "adj_r_squared": result.fit.adj_r_squared,
            "rmse_points": result.fit.rmse,
            "n_params": result.fit.n_params,
        }

    def school_sd(result: PipelineResult) -> float:
        return float(np.std([s.score for s in result.school_scores], ddof=1))

    payload = {
        "n_pupils": report.cohort.n_pupils,
        "n_schools": report.cohort.n_schools,
        "models": {
            "base": model_block(report.base),
            "adjusted": model_block(report.adjusted),
        },
        "scores": {
            "pupil_sd": {
                "base": report.base.national_sd,
                "adjusted": report.adjusted.national_sd,
            },
            "school_sd": {
                "base": school_sd(report.base),
                "adjusted": school_sd(report.adjusted),
            },
        },
        "correlations": {"pearson": report.rank.pearson, "spearman": report.rank.spearman},
        "bands": {
            "base": _band_counts(report.bands_base),
            "adjusted": _band_counts(report.bands_adjusted),
        },
        "floor": {
            "base": sum(b.below_floor for b in report.bands_base),
            "adjusted": sum(b.below_floor for b in report.bands_adjusted),
        },
        "transition": {
            "counts": report.transitions.counts.tolist(),
            "row_percentages": report.transitions.row_percentages.tolist(),
            "n_changed": report.transitions.n_changed,
            "share_changed": report.transitions.share_changed,
        },
        "rank_movement": {str(t): n for t, n in report.rank.threshold_counts.items()},
    }
    if report.shrink_base is not None and report.shrink_adjusted is not None:
        payload["shrinkage"] = {
            "base": {
                "sigma2_between": report.shrink_base.sigma2_between,
                "sigma2_within": report.shrink_base.sigma2_within,
            },
            "adjusted": {
                "sigma2_between": report.shrink_adjusted.sigma2_between,
                "sigma2_within": report.shrink_adjusted.sigma2_within,
            },
        }
    return payload


def write_run_report(report: RunReport, out_dir) -> list[Path]:
    """Write schools.csv, transitions.csv, gaps_*.csv and summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "schools.csv"
    _write_schools_csv(report, path)
    written.append(path)

    path = out / "transitions.csv"
    write_transitions_csv(report.transitions, path)
    written.append(path)

    for name, gap in report.gaps.items():
        path = out / f"gaps_{name}.csv"
        write_gaps_csv(gap, path)
        written.append(path)

    path = out / "summary.json"
    write_json(summary_payload(report), path)
    written.append(path)
    return written


# --- generic score files (compare) ---------------------------------------------


def read_scores_csv(path) -> tuple[list[str], np.ndarray, list[bool]]:
    """Read a generic score file: school_id, score, significant."""
    ids: list[str] = []
    scores: list[float] = []
    significant: list[bool] = []
    for row_no, row in _rows(path, SCORES_HEADER):
        ids.append(row[0])
        scores.append(_number(path, row_no, "score", row[1]))
        token = row[2]
        if token not in ("true", "false"):
            raise BadToken(
                f"{path} row {row_no}: column 'significant' must be true/false, got {token!r}"
            )
        significant.append(token == "true")
    return ids, np.array(scores), significant


def read_schools_report(path) -> dict[str, list]:
    """Read back the columns of schools.csv needed for comparisons."""
    columns: dict[str, list] = {name: [] for name in _SCHOOLS_REPORT_HEADER}
    for _, row in _rows(path, _SCHOOLS_REPORT_HEADER):
        for name, value in zip(_SCHOOLS_REPORT_HEADER, row):
            columns[name].append(value)
    return columns
