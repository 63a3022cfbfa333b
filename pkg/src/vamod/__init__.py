"""School value-added analytics.

Two-stage progress scoring (base and background-adjusted), school-level
aggregation with confidence bands, five-band classification, rank and
banding comparison between measures, group-gap analysis with
school-clustered tests, empirical-Bayes shrinkage, and a calibrated
synthetic-cohort generator.

Submodules import lazily so the command-line entry point can configure
threading before any numerical library loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # cohort
    "Cohort": "cohort",
    "PupilRecord": "cohort",
    "SchoolRecord": "cohort",
    "SummaryStats": "cohort",
    "validate_cohort": "cohort",
    "summary_stats": "cohort",
    # design
    "Ks2Band": "design",
    "ModelSpec": "design",
    "DesignMatrix": "design",
    "ks2_band_of": "design",
    "model_spec": "design",
    "build_design": "design",
    # regression
    "FittedModel": "regression",
    "ClusterRobustCov": "regression",
    "fit_ols": "regression",
    "cluster_robust_cov": "regression",
    "wald_test": "regression",
    "pearson_corr": "regression",
    "spearman_corr": "regression",
    "rank_competition": "regression",
    # valueadded
    "ProgressModel": "valueadded",
    "PipelineResult": "valueadded",
    "SchoolScore": "valueadded",
    "ShrinkageEstimates": "valueadded",
    "run_pipeline": "valueadded",
    "school_scores": "valueadded",
    "shrink_school_scores": "valueadded",
    # accountability
    "Band": "accountability",
    "BandedSchool": "accountability",
    "TransitionTable": "accountability",
    "RankReport": "accountability",
    "GroupGapReport": "accountability",
    "band_of": "accountability",
    "transition_table": "accountability",
    "rank_movement": "accountability",
    "group_gaps": "accountability",
    # synth
    "SynthConfig": "synth",
    "GroupConcentration": "synth",
    "generate_cohort": "synth",
    "calibrate_variances": "synth",
    "default_config": "synth",
    # io
    "load_cohort": "io",
    "write_cohort": "io",
    "build_run_report": "io",
    "write_run_report": "io",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name: str):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    return getattr(import_module(f".{module}", __name__), name)
