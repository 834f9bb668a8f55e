"""Two-layer LSTM quantile regressor in plain numpy.

The encoder consumes ``L`` input rows (scaled metrics followed by calendar
features). The top hidden state feeds a linear head of width ``d * |P|`` that
predicts the next step; decoding then runs ``K - 1`` more cell steps, each fed
with the previous step's median prediction plus the calendar features of that
step. Gradients are taken by hand-written backpropagation through time,
including the median feedback path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .loss import pinball_array, pinball_grad

PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wo", "bo")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_params(n_metrics: int, n_features: int, hidden: int, n_quantiles: int, rng) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    n_in = n_metrics + n_features
    shapes = {
        "W1": (n_in + hidden, 4 * hidden),
        "W2": (2 * hidden, 4 * hidden),
        "Wo": (hidden, n_metrics * n_quantiles),
    }
    params = {}
    for w, b in (("W1", "b1"), ("W2", "b2"), ("Wo", "bo")):
        fan_in, fan_out = shapes[w]
        bound = 1.0 / np.sqrt(fan_in)
        params[w] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[b] = rng.uniform(-bound, bound, size=fan_out)
    return params


def _cell_forward(x, h_prev, c_prev, W, b, H):
    xh = np.concatenate([x, h_prev], axis=1)
    z = xh @ W + b
    i = _sigmoid(z[:, :H])
    f = _sigmoid(z[:, H : 2 * H])
    g = np.tanh(z[:, 2 * H : 3 * H])
    o = _sigmoid(z[:, 3 * H :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (xh, i, f, g, o, c_prev, tc)


def _cell_backward(dh, dc, cache, W, dW, db, n_x):
    xh, i, f, g, o, c_prev, tc = cache
    do = dh * tc
    dct = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [
            dct * g * i * (1.0 - i),
            dct * c_prev * f * (1.0 - f),
            dct * i * (1.0 - g * g),
            do * o * (1.0 - o),
        ],
        axis=1,
    )
    dW += xh.T @ dz
    db += dz.sum(axis=0)
    dxh = dz @ W.T
    return dxh[:, :n_x], dxh[:, n_x:], dct * f


@dataclass
class ForwardCache:
    cells1: list
    cells2: list
    masks: list
    tops: list
    dims: tuple


def forward(params, enc_x, dec_feat, n_metrics, n_quantiles, median_index,
            dropout=0.0, rng=None, keep_cache=False):
    """Run the encoder/decoder.

    enc_x: (B, L, d + f); dec_feat: (B, K - 1, f).
    Returns predictions of shape (B, K, d, P) and, if requested, the cache
    needed by :func:`backward`.
    """
    W1, b1, W2, b2, Wo, bo = (params[n] for n in PARAM_NAMES)
    B, L, _ = enc_x.shape
    K = dec_feat.shape[1] + 1
    H = W2.shape[0] // 2
    d, P = n_metrics, n_quantiles
    h1 = np.zeros((B, H))
    c1 = np.zeros((B, H))
    h2 = np.zeros((B, H))
    c2 = np.zeros((B, H))
    cache = ForwardCache([], [], [], [], (B, L, K, H, d, P, median_index)) if keep_cache else None
    outputs = []
    scale = 1.0 / (1.0 - dropout) if dropout > 0 else 1.0
    for t in range(L + K - 1):
        if t < L:
            x = enc_x[:, t]
        else:
            x = np.concatenate([outputs[-1][:, :, median_index], dec_feat[:, t - L]], axis=1)
        h1, c1, cc1 = _cell_forward(x, h1, c1, W1, b1, H)
        if dropout > 0:
            mask = (rng.random((B, H)) >= dropout) * scale
            inp2 = h1 * mask
        else:
            mask = None
            inp2 = h1
        h2, c2, cc2 = _cell_forward(inp2, h2, c2, W2, b2, H)
        if t >= L - 1:
            outputs.append((h2 @ Wo + bo).reshape(B, d, P))
        if keep_cache:
            cache.cells1.append(cc1)
            cache.cells2.append(cc2)
            cache.masks.append(mask)
            cache.tops.append(h2)
    return np.stack(outputs, axis=1), cache


def backward(params, cache: ForwardCache, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given its derivative w.r.t. the outputs (B, K, d, P)."""
    W1, W2, Wo = params["W1"], params["W2"], params["Wo"]
    B, L, K, H, d, P, med = cache.dims
    grads = {n: np.zeros_like(params[n]) for n in PARAM_NAMES}
    n_x1 = W1.shape[0] - H
    dh1 = np.zeros((B, H))
    dc1 = np.zeros((B, H))
    dh2 = np.zeros((B, H))
    dc2 = np.zeros((B, H))
    d_feedback = None  # gradient flowing into the median of the output at t
    for t in range(L + K - 2, -1, -1):
        if t >= L - 1:
            k = t - (L - 1)
            dy = d_out[:, k].copy()
            if d_feedback is not None:
                dy[:, :, med] += d_feedback
            dy = dy.reshape(B, d * P)
            grads["Wo"] += cache.tops[t].T @ dy
            grads["bo"] += dy.sum(axis=0)
            dh2 = dh2 + dy @ Wo.T
        dinp2, dh2, dc2 = _cell_backward(dh2, dc2, cache.cells2[t], W2, grads["W2"], grads["b2"], H)
        mask = cache.masks[t]
        dh1 = dh1 + (dinp2 * mask if mask is not None else dinp2)
        dx, dh1, dc1 = _cell_backward(dh1, dc1, cache.cells1[t], W1, grads["W1"], grads["b1"], n_x1)
        d_feedback = dx[:, :d] if t >= L else None
    return grads


def loss_and_grads(params, enc_x, dec_feat, y, quantiles, median_index,
                   dropout=0.0, rng=None):
    """Mean pinball loss over (B, K, d, P) and its parameter gradients."""
    rho = np.asarray(quantiles, dtype=np.float64)
    d = y.shape[2]
    pred, cache = forward(params, enc_x, dec_feat, d, len(rho), median_index,
                          dropout=dropout, rng=rng, keep_cache=True)
    target = y[..., None]
    loss = float(pinball_array(target, pred, rho).mean())
    d_out = pinball_grad(target, pred, rho) / pred.size
    return loss, backward(params, cache, d_out), pred


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm
