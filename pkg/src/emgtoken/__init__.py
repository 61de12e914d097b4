"""Discrete muscle-state tokens for multichannel surface EMG."""

from . import exceptions
from .codebook import (
    Codebook,
    KMeansCodebook,
    TokenSequence,
    assign_token,
    load_codebook,
    order_tokens,
    save_codebook,
    tokenize_recording,
    train_codebook,
)
from .config import PipelineConfig
from .consistency import (
    align_labels,
    cohens_kappa,
    overlap_rate,
    run_consistency_experiment,
    tolerant_agreement,
)
from .features import (
    FEATURE_NAMES,
    FeatureVector,
    Normalizer,
    SegmentFeatures,
    apply_normalizer,
    ar_coefficient,
    extract_feature_vector,
    fit_normalizer,
    recording_features,
    spectral_features,
    time_domain_features,
)
from .preprocess import Segment, bandpass_filter, segment_channel
from .quality import (
    ActionTokenMatrix,
    dtw_distance,
    encode_action,
    replication_pad,
    report_centroid_distances,
    similarity_score,
    token_statistics,
    transition_matrix,
)
from .recording import Recording, load_recording, save_recording
from .selection import KSweepReport, compute_pnmi, compute_sse, sweep_k
from .synth import ActivationProfile, ChannelProfile, generate, load_profile

__version__ = "0.1.0"

__all__ = [
    "ActionTokenMatrix",
    "ActivationProfile",
    "ChannelProfile",
    "Codebook",
    "FEATURE_NAMES",
    "FeatureVector",
    "KMeansCodebook",
    "KSweepReport",
    "Normalizer",
    "PipelineConfig",
    "Recording",
    "Segment",
    "SegmentFeatures",
    "TokenSequence",
    "align_labels",
    "apply_normalizer",
    "ar_coefficient",
    "assign_token",
    "bandpass_filter",
    "cohens_kappa",
    "compute_pnmi",
    "compute_sse",
    "dtw_distance",
    "encode_action",
    "extract_feature_vector",
    "fit_normalizer",
    "generate",
    "load_codebook",
    "load_profile",
    "load_recording",
    "order_tokens",
    "overlap_rate",
    "recording_features",
    "replication_pad",
    "report_centroid_distances",
    "run_consistency_experiment",
    "save_codebook",
    "save_recording",
    "segment_channel",
    "similarity_score",
    "spectral_features",
    "sweep_k",
    "time_domain_features",
    "token_statistics",
    "tokenize_recording",
    "tolerant_agreement",
    "train_codebook",
    "transition_matrix",
    "exceptions",
]
