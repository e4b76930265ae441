"""Compaction of long training sequences onto frequency-pruned suffix trees,
with average-common-length classification and a sliding-window evaluation
harness."""

from .classify import (FeatureSet, MatchProfile, SimilarityReport, TrainStats,
                       avg_test_length, avg_train_length, match_profile,
                       similarity, sort_tests, train_stats)
from .compaction import (CompactedTree, CompactionParams, compact,
                         pruned_mass_bound, threshold)
from .errors import (AclTreeError, AlphabetError, DepthExceededError,
                     FormatError, UndefinedAverageError)
from .evaluation import (EvalParams, EvalReport, SynthSpec, error_rate,
                         gen_synthetic, sweep, window_eval)
from .index import EmpiricalProb, SuffixIndex, build_index
from .sequences import (Alphabet, Sequence, context_at, load_sequence,
                        load_sequences, parse_sequences, windows, write_fasta,
                        write_plain)

__version__ = "0.1.0"
