"""Streaming data selection: scoring, percentile selection and the incremental training harness."""

from ._core import (
    ClassPrototypes,
    Dataset,
    ExperimentData,
    IDSConfig,
    LinearSoftmaxModel,
    Method,
    ParseError,
    PrototypeSource,
    ReplaySampling,
    RunError,
    RunResult,
    SyntheticSourceSpec,
    auto_delta,
    cli_main,
    compute_prototypes,
    cosine_similarity,
    exact_logit_delta,
    jaccard,
    load_embeddings,
    noise_audit,
    percentile_rank,
    prediction_error,
    rank_correlation_experiment,
    read_run,
    run,
    sample_probe_pool,
    save_embeddings,
    score,
    score_exact_delta,
    score_peaks,
    score_peaks_v,
    softmax,
    spearman,
    synth_build,
    tail_acceptance_rate,
    usage_histogram,
    write_run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
