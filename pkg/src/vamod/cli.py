"""Command-line interface: validate, synth, run, compare, gaps.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
failure. VAMOD_THREADS optionally caps worker parallelism; it never
changes results, and BLAS pools are pinned to a single thread below --
before numpy loads -- so report bytes are reproducible regardless of the
host's threading defaults.
"""

from __future__ import annotations

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys
from pathlib import Path

from .accountability import DEFAULT_RANK_THRESHOLDS, band_school, rank_movement, transition_table
from .errors import NumericalError, ValidationError
from .io import (
    build_run_report,
    load_cohort,
    read_config_file,
    read_schools_report,
    read_scores_csv,
    write_cohort,
    write_json,
    write_run_report,
    write_transitions_csv,
    write_gaps_csv,
)
from .synth import config_from_items, default_config, generate_cohort
from .valueadded import SchoolScore, run_pipeline

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _threads_cap(parser: argparse.ArgumentParser) -> int | None:
    raw = os.environ.get("VAMOD_THREADS")
    if raw is None:
        return None
    try:
        cap = int(raw)
        if cap < 1:
            raise ValueError
    except ValueError:
        parser.error(f"VAMOD_THREADS must be a positive integer, got {raw!r}")
    return cap


def _parse_thresholds(parser: argparse.ArgumentParser, raw: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in raw.split(","))
        if not values or any(v < 1 for v in values):
            raise ValueError
    except ValueError:
        parser.error(f"--thresholds must be comma-separated positive integers, got {raw!r}")
    return values


def cmd_validate(args, parser) -> int:
    cohort = load_cohort(args.pupils, args.schools)
    print(f"ok: {cohort.n_pupils} pupils in {cohort.n_schools} schools")
    return EXIT_OK


def cmd_synth(args, parser) -> int:
    if args.config is not None:
        items = read_config_file(args.config)
        if args.seed is not None:
            items["seed"] = str(args.seed)
        config = config_from_items(items)
    else:
        config = default_config(seed=args.seed if args.seed is not None else 0)
    cohort = generate_cohort(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_cohort(cohort, out / "pupils.csv", out / "schools.csv")
    print(
        f"wrote {cohort.n_pupils} pupils in {cohort.n_schools} schools to {out}/pupils.csv"
        f" and {out}/schools.csv"
    )
    return EXIT_OK


def cmd_run(args, parser) -> int:
    cohort = load_cohort(args.pupils, args.schools)
    report = build_run_report(
        cohort,
        shrinkage=not args.no_shrinkage,
        thresholds=_parse_thresholds(parser, args.thresholds),
    )
    written = write_run_report(report, args.out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _compare_payload(scores_a, scores_b, significant_a, significant_b, thresholds):
    rank = rank_movement(scores_a, scores_b, thresholds)
    bands_a = [band_school(s) for s in _as_school_scores(scores_a, significant_a)]
    bands_b = [band_school(s) for s in _as_school_scores(scores_b, significant_b)]
    table = transition_table([b.band for b in bands_a], [b.band for b in bands_b])
    return {
        "correlations": {"pearson": rank.pearson, "spearman": rank.spearman},
        "rank_movement": {str(t): n for t, n in rank.threshold_counts.items()},
        "transition": {
            "counts": table.counts.tolist(),
            "n_changed": table.n_changed,
            "share_changed": table.share_changed,
        },
    }, table


def _as_school_scores(scores, significant) -> list[SchoolScore]:
    return [
        SchoolScore(
            school_id=str(i), n_pupils=0, score=float(s), se=0.0,
            ci_low=0.0, ci_high=0.0, significant=bool(sig),
        )
        for i, (s, sig) in enumerate(zip(scores, significant))
    ]


def cmd_compare(args, parser) -> int:
    thresholds = _parse_thresholds(parser, args.thresholds)
    if args.scores_a or args.scores_b:
        if not (args.scores_a and args.scores_b):
            parser.error("--scores-a and --scores-b must be given together")
        ids_a, scores_a, sig_a = read_scores_csv(args.scores_a)
        ids_b, scores_b, sig_b = read_scores_csv(args.scores_b)
        lookup = {sid: i for i, sid in enumerate(ids_b)}
        missing = [sid for sid in ids_a if sid not in lookup]
        if missing or len(ids_a) != len(ids_b):
            raise ValidationError(
                f"score files cover different schools (e.g. {missing[:3]!r})"
            )
        order = [lookup[sid] for sid in ids_a]
        scores_b = scores_b[order]
        sig_b = [sig_b[i] for i in order]
        out_dir = Path(args.out) if args.out else None
    else:
        if not args.out:
            parser.error("compare needs --out DIR (after run) or two score files")
        columns = read_schools_report(Path(args.out) / "schools.csv")
        scores_a = [float(v) for v in columns["score_base"]]
        scores_b = [float(v) for v in columns["score_adjusted"]]
        sig_a = [v == "true" for v in columns["significant_base"]]
        sig_b = [v == "true" for v in columns["significant_adjusted"]]
        out_dir = Path(args.out)

    payload, table = _compare_payload(scores_a, scores_b, sig_a, sig_b, thresholds)
    print(f"pearson   = {payload['correlations']['pearson']:.6f}")
    print(f"spearman  = {payload['correlations']['spearman']:.6f}")
    for t, n in payload["rank_movement"].items():
        print(f"|rank move| >= {t}: {n} schools")
    print(f"changed banding: {table.n_changed} schools ({100 * table.share_changed:.1f}%)")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(payload, out_dir / "compare.json")
        write_transitions_csv(table, out_dir / "compare_transitions.csv")
        print(f"wrote {out_dir / 'compare.json'} and {out_dir / 'compare_transitions.csv'}")
    return EXIT_OK


def cmd_gaps(args, parser) -> int:
    from .accountability import group_gaps
    from .categories import PUPIL_FACTORS, SCHOOL_FACTORS

    if args.characteristic not in PUPIL_FACTORS and args.characteristic not in SCHOOL_FACTORS:
        known = ", ".join([*PUPIL_FACTORS, *SCHOOL_FACTORS])
        parser.error(f"unknown characteristic {args.characteristic!r}; expected one of: {known}")
    cohort = load_cohort(args.pupils, args.schools)
    result = run_pipeline(cohort, args.spec)
    gap = group_gaps(result.pupil_scores, cohort, args.characteristic)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"gaps_{args.characteristic}.csv"
    write_gaps_csv(gap, path)
    print(f"wrote {path}")
    print(
        f"{args.characteristic}: spread {gap.gap:.3f} grades, "
        f"F({gap.df1}, {gap.df2}) = {gap.statistic:.2f}, p = {gap.p_value:.2e}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vamod",
        description="School value-added analytics: scoring, banding and comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a pupil/school CSV pair")
    p.add_argument("--pupils", required=True)
    p.add_argument("--schools", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="fit both specs and write all reports")
    p.add_argument("--pupils", required=True)
    p.add_argument("--schools", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-shrinkage", action="store_true")
    p.add_argument("--thresholds", default=",".join(str(t) for t in DEFAULT_RANK_THRESHOLDS))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare two measures' scores and bandings")
    p.add_argument("--out", default=None, help="report directory produced by run")
    p.add_argument("--scores-a", default=None)
    p.add_argument("--scores-b", default=None)
    p.add_argument("--thresholds", default=",".join(str(t) for t in DEFAULT_RANK_THRESHOLDS))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gaps", help="group-gap report for one characteristic")
    p.add_argument("--pupils", required=True)
    p.add_argument("--schools", required=True)
    p.add_argument("--characteristic", required=True)
    p.add_argument("--spec", choices=("base", "adjusted"), default="base")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gaps)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _threads_cap(parser)
    try:
        return args.func(args, parser)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
