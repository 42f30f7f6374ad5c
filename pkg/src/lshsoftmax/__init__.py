"""Training engine for softmax classifiers with very large output spaces.

The expensive last layer is approximated by computing softmax
cross-entropy over a small active set per input: the true labels plus
negatives drawn in constant time from hash tables built over the class
weight vectors. Baseline samplers (uniform, log-uniform, frequency,
top-k, full) and a benchmark harness are included.
"""

from lshsoftmax.bench import (AdaptivityReport, adaptivity_probe, brute_force_similar,
                              query_cost_scaling, tv_distance)
from lshsoftmax.data import (Batch, XcDataset, batches, build_skipgram,
                             class_frequencies, parse_xc, write_xc)
from lshsoftmax.errors import ConfigError, DegenerateInputError, ParseError
from lshsoftmax.hashes import (DwtaFamily, SimHashFamily, densify, dwta_codes,
                               retrieval_prob, simhash_codes, simhash_collision_prob)
from lshsoftmax.metrics import (MetricsRecord, MetricsWriter, emit_metrics,
                                precision_at_k, read_metrics)
from lshsoftmax.network import (AdamState, NetworkParams, Trainer, UpdateSchedule,
                                backward_update, forward_embedding,
                                forward_output_active, maybe_update_tables,
                                softmax_ce_active)
from lshsoftmax.samplers import (ActiveSet, FrequencyTable, NegativeSampler,
                                 SamplerKind, finalize_active_set, sample_frequency,
                                 sample_lns_embedding, sample_lns_label,
                                 sample_log_uniform, sample_uniform, top_k_candidates)
from lshsoftmax.tables import LshTables
from lshsoftmax.vectors import SparseVector, cosine

__version__ = "0.1.0"

__all__ = [
    "ActiveSet", "AdamState", "AdaptivityReport", "Batch", "ConfigError",
    "DegenerateInputError", "DwtaFamily", "FrequencyTable", "LshTables",
    "MetricsRecord", "MetricsWriter", "NegativeSampler", "NetworkParams",
    "ParseError", "SamplerKind", "SimHashFamily", "SparseVector", "Trainer",
    "UpdateSchedule", "XcDataset", "adaptivity_probe", "backward_update",
    "batches", "brute_force_similar", "build_skipgram", "class_frequencies",
    "cosine", "densify", "dwta_codes", "emit_metrics", "finalize_active_set",
    "forward_embedding", "forward_output_active", "maybe_update_tables",
    "parse_xc", "precision_at_k", "query_cost_scaling", "read_metrics",
    "retrieval_prob", "sample_frequency", "sample_lns_embedding",
    "sample_lns_label", "sample_log_uniform", "sample_uniform",
    "simhash_codes", "simhash_collision_prob", "softmax_ce_active",
    "top_k_candidates", "tv_distance", "write_xc",
]
