"""Copy-influence estimation from activity feeds with preference-matched strangers."""
from ._version import __version__
from .estimation import (EstimateSummary, OverlapRecord, bootstrap_se, estimate_many, estimate_user,
                         network_estimate, per_user_se, susceptibility_by_activity)
from .feed import FeedModel, FeedSnapshot, feed_before, overlap, overlap_counts
from .ingest import DataError, DatasetManifest, DatasetStats, dataset_stats, load_dataset, write_dataset
from .kernels import BACKEND
from .matching import MatchAssignment, MatchConfig, check_assignment, match_all, match_strangers
from .model import (Action, ActivityLog, SocialGraph, SplitConfig, core_users, eligible_users, split_at,
                    time_quantile)
from .pipeline import PipelineConfig, PipelineResult, run_pme
from .similarity import PreferenceProfile, ProfileStore, cosine, jaccard, top_k_similar
from .synthgen import SynthProcess, SynthRun, generate, generate_network, validation_run

__all__ = [
    "__version__", "BACKEND",
    "Action", "ActivityLog", "SocialGraph", "SplitConfig", "split_at", "core_users", "eligible_users",
    "time_quantile",
    "DataError", "DatasetManifest", "DatasetStats", "load_dataset", "write_dataset", "dataset_stats",
    "PreferenceProfile", "ProfileStore", "jaccard", "cosine", "top_k_similar",
    "MatchConfig", "MatchAssignment", "match_strangers", "match_all", "check_assignment",
    "FeedModel", "FeedSnapshot", "feed_before", "overlap", "overlap_counts",
    "OverlapRecord", "EstimateSummary", "estimate_many", "estimate_user", "network_estimate",
    "bootstrap_se", "per_user_se", "susceptibility_by_activity",
    "PipelineConfig", "PipelineResult", "run_pme",
    "SynthProcess", "SynthRun", "generate", "generate_network", "validation_run",
]
