"""Language-model backends: numpy LSTM with exact gradients, k-gram counts."""

from .checkpoint import CheckpointError, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from .model import (
    KGRAM,
    LSTM,
    RANDOM_LSTM,
    AdaptConfig,
    KGramHyper,
    LstmHyper,
    ModelSnapshot,
    TokenSurprisals,
    adapt,
    analytic_gradients,
    empty_kgram,
    forward,
    gradient_check,
    kgram_model,
    mean_surprisal,
    random_init,
    stream_loss,
    surprisal,
    surprisals,
    train,
)
from .vocab import EOS, UNK, Vocabulary

__all__ = [
    "AdaptConfig", "CheckpointError", "EOS", "KGRAM", "KGramHyper", "LSTM", "LstmHyper",
    "ModelSnapshot", "RANDOM_LSTM", "TokenSurprisals", "UNK", "Vocabulary", "adapt",
    "analytic_gradients", "empty_kgram", "forward", "from_bytes", "gradient_check", "kgram_model",
    "load_checkpoint", "mean_surprisal", "random_init", "save_checkpoint", "stream_loss",
    "surprisal", "surprisals", "to_bytes", "train",
]
