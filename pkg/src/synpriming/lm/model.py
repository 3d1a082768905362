"""Model snapshots and the operations on them: train, adapt, score."""

from __future__ import annotations

import copy
import hashlib
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kgram, lstm
from .vocab import EOS, Vocabulary

logger = logging.getLogger(__name__)

LSTM = "lstm"
RANDOM_LSTM = "random-init-lstm"
KGRAM = "kgram"
BACKENDS = (LSTM, RANDOM_LSTM, KGRAM)
LN2 = np.log(2.0)


@dataclass(frozen=True)
class LstmHyper:
    nhid: int = 100
    nlayers: int = 2
    emb_dim: int | None = None  # None: same as nhid
    learning_rate: float = 20.0
    bptt_len: int = 35
    epochs: int = 3
    seed: int = 0
    corpus_tokens: int = 0
    batch_size: int = 32
    init_scale: float = 0.1
    clip: float = 0.25

    def __post_init__(self):
        for name in ("nhid", "nlayers", "bptt_len", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.emb_dim is not None and self.emb_dim <= 0:
            raise ValueError("emb_dim must be positive")
        if self.learning_rate < 0 or self.epochs < 0 or self.init_scale < 0:
            raise ValueError("learning_rate, epochs and init_scale must be non-negative")

    @property
    def embedding_dim(self) -> int:
        return self.emb_dim or self.nhid


@dataclass(frozen=True)
class KGramHyper:
    order: int = 2
    alpha: float = 0.1
    corpus_tokens: int = 0

    def __post_init__(self):
        if self.order < 1 or self.alpha <= 0:
            raise ValueError("order must be >= 1 and alpha > 0")


@dataclass(frozen=True)
class AdaptConfig:
    """Continued training on a handful of sentences.

    For the LSTM this is one SGD step per sentence (gradient norm clipped
    at ``clip``).  For the k-gram backend every n-gram occurrence adds
    ``learning_rate`` to its count.
    """

    learning_rate: float = 2.0
    clip: float = 0.25
    shuffle: bool = False


@dataclass
class ModelSnapshot:
    backend: str
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    hyper: LstmHyper | KGramHyper
    provenance: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def is_lstm(self) -> bool:
        return self.backend in (LSTM, RANDOM_LSTM)

    def copy(self) -> "ModelSnapshot":
        return ModelSnapshot(self.backend, {k: v.copy() for k, v in self.params.items()}, self.vocab,
                             self.hyper, copy.deepcopy(self.provenance))

    def astype(self, dtype) -> "ModelSnapshot":
        out = self.copy()
        if self.is_lstm:
            out.params = {k: v.astype(dtype) for k, v in out.params.items()}
        return out

    def check_shapes(self) -> None:
        if not self.is_lstm:
            return
        h = self.hyper
        want = lstm.param_shapes(len(self.vocab), h.embedding_dim, h.nhid, h.nlayers)
        if set(want) != set(self.params):
            raise ValueError(f"parameter names {sorted(self.params)} do not match hyper")
        for k, shape in want.items():
            if self.params[k].shape != shape:
                raise ValueError(f"{k}: shape {self.params[k].shape} != {shape} from hyper")

    def counts(self) -> kgram.CountIndex:
        if "index" not in self._cache:
            self._cache["index"] = kgram.CountIndex(self.params["ngrams"], self.params["counts"],
                                                    len(self.vocab), self.hyper.alpha)
        return self._cache["index"]


def corpus_id(tokens: Sequence[str]) -> str:
    h = hashlib.sha1()
    for t in tokens:
        h.update(t.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# construction


def random_init(hyper: LstmHyper, vocab: Vocabulary, seed: int | None = None,
                dtype=np.float32) -> ModelSnapshot:
    """Untrained LSTM: every parameter drawn from N(0, init_scale^2)."""
    seed = hyper.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    shapes = lstm.param_shapes(len(vocab), hyper.embedding_dim, hyper.nhid, hyper.nlayers)
    params = {name: rng.normal(0.0, hyper.init_scale, shapes[name]).astype(dtype)
              for name in lstm.param_names(hyper.nlayers)}
    return ModelSnapshot(RANDOM_LSTM, params, vocab, hyper,
                         {"init_seed": int(seed), "corpus": None, "adaptations": []})


def kgram_model(corpus: Sequence[str], hyper: KGramHyper = KGramHyper(),
                vocab: Vocabulary | None = None) -> ModelSnapshot:
    from ..corpus import split_sentences

    vocab = vocab or Vocabulary.build(corpus)
    sents = [vocab.encode(s) for s in split_sentences(corpus)]
    counts = kgram.count_sentences(sents, hyper.order, vocab.eos_id)
    ngrams, values = kgram.to_arrays(counts, hyper.order)
    return ModelSnapshot(KGRAM, {"ngrams": ngrams, "counts": values}, vocab, hyper,
                         {"corpus": corpus_id(corpus), "n_tokens": len(corpus), "adaptations": []})


def empty_kgram(vocab: Vocabulary, hyper: KGramHyper = KGramHyper()) -> ModelSnapshot:
    ngrams, values = kgram.to_arrays({}, hyper.order)
    return ModelSnapshot(KGRAM, {"ngrams": ngrams, "counts": values}, vocab, hyper,
                         {"corpus": None, "adaptations": []})


def _stream_batches(ids: np.ndarray, batch_size: int, bptt: int):
    n = len(ids) // batch_size
    if n < 2:
        batch_size, n = 1, len(ids)
    data = ids[:n * batch_size].reshape(batch_size, n)
    for i in range(0, n - 1, bptt):
        L = min(bptt, n - 1 - i)
        yield data[:, i:i + L], data[:, i + 1:i + 1 + L]


def stream_loss(snapshot: ModelSnapshot, ids: np.ndarray, batch_size: int = 16, bptt: int = 50) -> float:
    """Mean next-token cross-entropy (nats) over a contiguous id stream."""
    total, count, state = 0.0, 0, None
    for inp, tgt in _stream_batches(ids, batch_size, bptt):
        logits, state, _ = lstm.forward(snapshot.params, inp, state)
        B, T, V = logits.shape
        logp = lstm.log_softmax(logits.astype(np.float64)).reshape(B * T, V)
        total -= logp[np.arange(B * T), tgt.reshape(-1)].sum()
        count += B * T
    return total / count


def train(corpus: Sequence[str], hyper: LstmHyper, vocab: Vocabulary | None = None,
          valid_fraction: float = 0.1) -> ModelSnapshot:
    """Truncated-BPTT SGD on a token stream, learning rate /4 on validation plateau.

    The last ``valid_fraction`` of the stream is held out for the plateau
    check and never trained on.
    """
    if len(corpus) <= hyper.bptt_len:
        raise ValueError(f"corpus ({len(corpus)} tokens) smaller than bptt_len={hyper.bptt_len}")
    vocab = vocab or Vocabulary.build(corpus)
    ids = vocab.encode(corpus)
    n_valid = max(hyper.bptt_len + 1, int(len(ids) * valid_fraction))
    train_ids, valid_ids = ids[:-n_valid], ids[-n_valid:]
    if len(train_ids) <= hyper.bptt_len:
        raise ValueError("corpus too small once the validation slice is held out")

    snap = random_init(hyper, vocab)
    params = snap.params
    lr = hyper.learning_rate
    history = [stream_loss(snap, valid_ids)]
    best = history[0]
    for epoch in range(hyper.epochs):
        state = None
        for inp, tgt in _stream_batches(train_ids, hyper.batch_size, hyper.bptt_len):
            if state is not None and state[0][0].shape[0] != inp.shape[0]:
                state = None
            _, grads, state = lstm.loss_and_grads(params, inp, tgt, state=state)
            lstm.clip_grads(grads, hyper.clip)
            for k, g in grads.items():
                params[k] -= params[k].dtype.type(lr) * g
        val = stream_loss(snap, valid_ids)
        history.append(val)
        logger.info("epoch %d lr %.4g valid loss %.4f", epoch + 1, lr, val)
        if val < best:
            best = val
        else:
            lr /= 4.0
    snap.backend = LSTM if hyper.epochs > 0 else RANDOM_LSTM
    snap.provenance.update({
        "corpus": corpus_id(corpus), "n_tokens": len(corpus), "n_valid": int(n_valid),
        "valid_loss": [round(float(v), 6) for v in history], "hyper": asdict(hyper),
    })
    return snap


# ---------------------------------------------------------------------------
# scoring


@dataclass
class TokenSurprisals:
    values: np.ndarray  # bits, one per token
    mask: np.ndarray  # True where the token is unknown and excluded

    def __post_init__(self):
        if len(self.values) != len(self.mask):
            raise ValueError("mask length differs from token count")


def forward(snapshot: ModelSnapshot, token_ids: Sequence[int]) -> np.ndarray:
    """Next-token distributions after each prefix ``token_ids[:t+1]``, shape (T, V)."""
    ids = np.asarray(token_ids, dtype=np.int64)
    V = len(snapshot.vocab)
    if ids.size and (ids.min() < 0 or ids.max() >= V):
        raise ValueError("token id outside the vocabulary")
    if snapshot.is_lstm:
        snapshot.check_shapes()
        logits, _, _ = lstm.forward(snapshot.params, ids[None, :])
        return np.exp(lstm.log_softmax(logits[0].astype(np.float64)))
    idx = snapshot.counts()
    k = snapshot.hyper.order
    padded = [snapshot.vocab.eos_id] * (k - 1) + ids.tolist()
    return np.stack([idx.distribution(tuple(padded[t + 1:t + k])) for t in range(len(ids))]) \
        if len(ids) else np.zeros((0, V))


def _targets(snapshot, tokens):
    if len(tokens) == 0:
        raise ValueError("empty sentence")
    return snapshot.vocab.encode(tokens)


def surprisal(snapshot: ModelSnapshot, tokens: Sequence[str]) -> TokenSurprisals:
    """Per-token surprisal in bits, conditioned on a leading ``<eos>``."""
    return surprisals(snapshot, [tokens])[0]


def surprisals(snapshot: ModelSnapshot, sentences: Sequence[Sequence[str]],
               batch_size: int = 128) -> list[TokenSurprisals]:
    vocab = snapshot.vocab
    targets = [_targets(snapshot, s) for s in sentences]
    out: list[TokenSurprisals] = []
    if not snapshot.is_lstm:
        idx = snapshot.counts()
        k = snapshot.hyper.order
        for tgt in targets:
            vals = np.array([-np.log2(idx.prob(g[:-1], g[-1]))
                             for g in kgram.sentence_ngrams(tgt, k, vocab.eos_id)])
            out.append(TokenSurprisals(vals, tgt == vocab.unk_id))
        return out

    snapshot.check_shapes()
    for start in range(0, len(targets), batch_size):
        chunk = targets[start:start + batch_size]
        T = max(len(t) for t in chunk)
        inp = np.full((len(chunk), T), vocab.eos_id, dtype=np.int64)
        tgt = np.full((len(chunk), T), vocab.eos_id, dtype=np.int64)
        for b, t in enumerate(chunk):
            inp[b, 1:len(t)] = t[:-1]
            tgt[b, :len(t)] = t
        logits, _, _ = lstm.forward(snapshot.params, inp)
        B, _, V = logits.shape
        logp = lstm.log_softmax(logits.astype(np.float64))
        nll = -np.take_along_axis(logp, tgt[..., None], axis=-1)[..., 0] / LN2
        for b, t in enumerate(chunk):
            out.append(TokenSurprisals(np.maximum(nll[b, :len(t)], 0.0), t == vocab.unk_id))
    return out


def mean_surprisal(ts: TokenSurprisals) -> float:
    keep = ~np.asarray(ts.mask, dtype=bool)
    if not keep.any():
        raise ValueError("every position is masked")
    return float(np.asarray(ts.values)[keep].mean())


# ---------------------------------------------------------------------------
# adaptation


def adapt(snapshot: ModelSnapshot, sentences: Sequence[Sequence[str]], config: AdaptConfig = AdaptConfig(),
          set_id: str | None = None, rng: np.random.Generator | None = None) -> ModelSnapshot:
    """Copy of ``snapshot`` after one ordered pass over ``sentences``."""
    if len(sentences) == 0:
        raise ValueError("no adaptation sentences")
    order = list(range(len(sentences)))
    if config.shuffle:
        rng = rng if rng is not None else np.random.default_rng(0)
        order = [int(i) for i in rng.permutation(len(sentences))]
    out = snapshot.copy()
    vocab = out.vocab
    encoded = [_targets(out, sentences[i]) for i in order]

    if out.is_lstm:
        params = out.params
        for tgt in encoded:
            inp = np.concatenate([[vocab.eos_id], tgt[:-1]])
            _, grads, _ = lstm.loss_and_grads(params, inp[None, :], tgt[None, :])
            lstm.clip_grads(grads, config.clip)
            for k, g in grads.items():
                params[k] -= params[k].dtype.type(config.learning_rate) * g
    else:
        current = kgram.from_arrays(out.params["ngrams"], out.params["counts"])
        for g, c in kgram.count_sentences(encoded, out.hyper.order, vocab.eos_id,
                                          config.learning_rate).items():
            current[g] = current.get(g, 0.0) + c
        ngrams, values = kgram.to_arrays(current, out.hyper.order)
        out.params = {"ngrams": ngrams, "counts": values}
    out.provenance.setdefault("adaptations", []).append(set_id)
    return out


# ---------------------------------------------------------------------------
# gradient checking


def _split_batch(batch):
    batch = np.asarray(batch, dtype=np.int64)
    if batch.ndim == 1:
        batch = batch[None, :]
    return batch[:, :-1], batch[:, 1:]


def gradient_check(snapshot: ModelSnapshot, batch, h: float = 1e-5, per_tensor: int = 12,
                   seed: int = 0, floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences.

    ``batch`` is an int array (B, T+1) of token ids; inputs are the first T
    columns and targets the last T.  Runs in float64 regardless of the
    snapshot's dtype, over ``per_tensor`` sampled entries of each tensor.
    The error is ``|a - f| / max(|a| + |f|, floor)``: central differences
    carry roundoff near ``1e-10``, which would swamp gradients near 1e-8.
    """
    snap = snapshot.astype(np.float64)
    params = snap.params
    inp, tgt = _split_batch(batch)
    _, grads, _ = lstm.loss_and_grads(params, inp, tgt)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in lstm.param_names(lstm.n_layers(params)):
        p = params[name]
        flat = p.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_tensor, flat.size), replace=False)
        for i in picks:
            old = flat[i]
            flat[i] = old + h
            up = lstm.loss(params, inp, tgt)
            flat[i] = old - h
            down = lstm.loss(params, inp, tgt)
            flat[i] = old
            fd = (up - down) / (2 * h)
            an = grads[name].reshape(-1)[i]
            worst = max(worst, abs(an - fd) / max(abs(an) + abs(fd), floor))
    return worst


def analytic_gradients(snapshot: ModelSnapshot, batch) -> dict[str, np.ndarray]:
    inp, tgt = _split_batch(batch)
    return lstm.loss_and_grads(snapshot.params, inp, tgt)[1]
