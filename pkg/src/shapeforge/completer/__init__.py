"""Grammar-constrained sequence completion for partial designs."""

from .decoding import Completion, complete, score_completion
from .model import CompleterConfig, CompleterModel, load_completer, save_completer
from .training import (
    PairSampler,
    SequenceSplit,
    TrainingPair,
    make_training_pairs,
    train_completer,
)
from .vocab import (
    BOS,
    EOS,
    PAD,
    PARAM_BUCKETS,
    TokenVocab,
    TokenizeError,
    detokenize,
    tokenize,
)

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "PARAM_BUCKETS",
    "Completion",
    "CompleterConfig",
    "CompleterModel",
    "PairSampler",
    "SequenceSplit",
    "TokenVocab",
    "TokenizeError",
    "TrainingPair",
    "complete",
    "detokenize",
    "load_completer",
    "make_training_pairs",
    "save_completer",
    "score_completion",
    "tokenize",
    "train_completer",
]
