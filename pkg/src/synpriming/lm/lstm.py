"""Multi-layer LSTM language model: forward pass and exact backprop in numpy.

Parameters live in a flat ``dict[str, ndarray]``; the order returned by
:func:`param_names` is also the on-disk order.  Gate columns of the
``weight_ih``/``weight_hh``/``bias`` tensors are stacked as
input, forget, cell, output.  All arithmetic runs in the parameters' dtype.
"""

from __future__ import annotations

import numpy as np


def param_names(nlayers: int) -> list[str]:
    names = ["embedding"]
    for layer in range(nlayers):
        names += [f"lstm.{layer}.weight_ih", f"lstm.{layer}.weight_hh", f"lstm.{layer}.bias"]
    return names + ["decoder.weight", "decoder.bias"]


def param_shapes(vocab_size: int, emb_dim: int, nhid: int, nlayers: int) -> dict[str, tuple]:
    shapes = {"embedding": (vocab_size, emb_dim)}
    for layer in range(nlayers):
        n_in = emb_dim if layer == 0 else nhid
        shapes[f"lstm.{layer}.weight_ih"] = (n_in, 4 * nhid)
        shapes[f"lstm.{layer}.weight_hh"] = (nhid, 4 * nhid)
        shapes[f"lstm.{layer}.bias"] = (4 * nhid,)
    shapes["decoder.weight"] = (nhid, vocab_size)
    shapes["decoder.bias"] = (vocab_size,)
    return shapes


def n_layers(params) -> int:
    return sum(1 for k in params if k.endswith(".weight_hh"))


def sigmoid(x):
    # tanh form: no overflow and keeps float32 inputs in float32
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _layer_forward(x, w_ih, w_hh, b, h0, c0):
    B, T, _ = x.shape
    H = w_hh.shape[0]
    xz = x @ w_ih + b
    hs = np.empty((B, T, H), dtype=x.dtype)
    cs = np.empty((B, T, H), dtype=x.dtype)
    gates = np.empty((B, T, 4 * H), dtype=x.dtype)
    h, c = h0, c0
    for t in range(T):
        z = xz[:, t] + h @ w_hh
        a = sigmoid(z)
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        c = a[:, H:2 * H] * c + a[:, :H] * a[:, 2 * H:3 * H]
        h = a[:, 3 * H:] * np.tanh(c)
        gates[:, t] = a
        cs[:, t] = c
        hs[:, t] = h
    return hs, cs, gates


def _layer_backward(dhs, cache, w_ih, w_hh):
    x, h0, c0, hs, cs, gates = cache
    B, T, H = hs.shape
    dz = np.empty((B, T, 4 * H), dtype=hs.dtype)
    dh_next = np.zeros((B, H), dtype=hs.dtype)
    dc_next = np.zeros((B, H), dtype=hs.dtype)
    for t in range(T - 1, -1, -1):
        a = gates[:, t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        c_prev = cs[:, t - 1] if t > 0 else c0
        tc = np.tanh(cs[:, t])
        dh = dhs[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d = dz[:, t]
        d[:, :H] = dc * g * i * (1.0 - i)
        d[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        d[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ w_hh.T
    h_prev = np.concatenate([h0[:, None], hs[:, :-1]], axis=1)
    flat = dz.reshape(B * T, 4 * H)
    g_ih = x.reshape(B * T, -1).T @ flat
    g_hh = h_prev.reshape(B * T, H).T @ flat
    g_b = flat.sum(axis=0)
    dx = dz @ w_ih.T
    return dx, g_ih, g_hh, g_b


def zero_state(params, batch: int):
    out = []
    for layer in range(n_layers(params)):
        H = params[f"lstm.{layer}.weight_hh"].shape[0]
        dtype = params[f"lstm.{layer}.weight_hh"].dtype
        out.append((np.zeros((batch, H), dtype), np.zeros((batch, H), dtype)))
    return out


def forward(params, inputs, state=None, keep_cache=False):
    """Logits for every position of ``inputs`` (B, T).

    Returns ``(logits, final_state, caches)``; ``caches`` is None unless
    ``keep_cache``.
    """
    inputs = np.asarray(inputs)
    B = inputs.shape[0]
    if state is None:
        state = zero_state(params, B)
    x = params["embedding"][inputs]
    caches, new_state = [], []
    for layer in range(n_layers(params)):
        w_ih = params[f"lstm.{layer}.weight_ih"]
        w_hh = params[f"lstm.{layer}.weight_hh"]
        b = params[f"lstm.{layer}.bias"]
        if w_ih.shape[0] != x.shape[-1] or w_hh.shape[1] != 4 * w_hh.shape[0]:
            raise ValueError(f"layer {layer}: parameter shapes do not match")
        h0, c0 = state[layer]
        hs, cs, gates = _layer_forward(x, w_ih, w_hh, b, h0, c0)
        if keep_cache:
            caches.append((x, h0, c0, hs, cs, gates))
        new_state.append((hs[:, -1].copy(), cs[:, -1].copy()))
        x = hs
    logits = x @ params["decoder.weight"] + params["decoder.bias"]
    return logits, new_state, (caches if keep_cache else None)


def loss_and_grads(params, inputs, targets, mask=None, state=None):
    """Mean negative log-likelihood (nats) over unmasked targets and its gradient."""
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    logits, new_state, caches = forward(params, inputs, state, keep_cache=True)
    B, T, V = logits.shape
    dtype = logits.dtype
    mask = np.ones((B, T), dtype) if mask is None else np.asarray(mask, dtype)
    n = mask.sum()
    logp = log_softmax(logits)
    flat_t = targets.reshape(-1)
    rows = np.arange(B * T)
    nll = -logp.reshape(B * T, V)[rows, flat_t]
    loss = float((nll * mask.reshape(-1)).sum() / n)

    dlogits = np.exp(logp).reshape(B * T, V)
    dlogits[rows, flat_t] -= 1.0
    dlogits *= (mask.reshape(-1) / n)[:, None]

    grads = {}
    h_top = caches[-1][3].reshape(B * T, -1)
    grads["decoder.weight"] = h_top.T @ dlogits
    grads["decoder.bias"] = dlogits.sum(axis=0)
    dh = (dlogits @ params["decoder.weight"].T).reshape(B, T, -1)
    for layer in range(len(caches) - 1, -1, -1):
        dh, g_ih, g_hh, g_b = _layer_backward(dh, caches[layer], params[f"lstm.{layer}.weight_ih"],
                                              params[f"lstm.{layer}.weight_hh"])
        grads[f"lstm.{layer}.weight_ih"] = g_ih
        grads[f"lstm.{layer}.weight_hh"] = g_hh
        grads[f"lstm.{layer}.bias"] = g_b
    g_emb = np.zeros_like(params["embedding"])
    np.add.at(g_emb, inputs.reshape(-1), dh.reshape(B * T, -1))
    grads["embedding"] = g_emb
    return loss, grads, new_state


def loss(params, inputs, targets, mask=None, state=None) -> float:
    logits, _, _ = forward(params, inputs, state)
    B, T, V = logits.shape
    logp = log_softmax(logits).reshape(B * T, V)
    nll = -logp[np.arange(B * T), np.asarray(targets).reshape(-1)]
    m = np.ones(B * T) if mask is None else np.asarray(mask, dtype=float).reshape(-1)
    return float((nll * m).sum() / m.sum())


def clip_grads(grads, max_norm: float) -> float:
    """Scale gradients in place to global L2 norm ``max_norm``; returns the pre-clip norm."""
    norm = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values())))
    if max_norm and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale
    return norm
