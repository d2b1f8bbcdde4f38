"""Recurrent cells: a 1D ConvLSTM with peephole connections, and pointwise
LSTM/GRU cells used by the non-spatial baselines.

The ConvLSTM step computes, with * the same-padding 1D convolution over
positions and ⊙ the Hadamard product:

    i_t = sigmoid(W_xi * x_t + W_hi * h_{t-1} + w_ci ⊙ c_{t-1} + b_i)
    f_t = sigmoid(W_xf * x_t + W_hf * h_{t-1} + w_cf ⊙ c_{t-1} + b_f)
    c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(W_xc * x_t + W_hc * h_{t-1} + b_c)
    o_t = sigmoid(W_xo * x_t + W_ho * h_{t-1} + w_co ⊙ c_t + b_o)
    h_t = o_t ⊙ tanh(c_t)

Peephole weights are kept (many reimplementations drop them) and are shaped
per channel per position, congruent to the cell state.

The pointwise cells apply the standard (peephole-free) LSTM and GRU gate
equations independently at every spatial position with shared weights, by
treating the position axis as extra batch:

    LSTM: i,f,o = sigmoid(W x + U h + b); g = tanh(W x + U h + b)
          c' = f ⊙ c + i ⊙ g; h' = o ⊙ tanh(c')
    GRU:  z,r = sigmoid(W x + U h + b)
          n = tanh(W_n x + U_n (r ⊙ h) + b_n); h' = (1 - z) ⊙ n + z ⊙ h
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import UsageError


@dataclass
class CellState:
    """Hidden and cell activations, each shaped (..., channels, positions)."""
    h: Tensor
    c: Tensor


def _uniform(rng, shape, fan_in, name):
    bound = 1.0 / np.sqrt(fan_in)
    return ad.parameter(rng.uniform(-bound, bound, size=shape), name)


@dataclass
class ConvLSTMCellParams:
    """All learnable arrays of one ConvLSTM layer.

    Input kernels map in_channels -> hidden over an odd-width window; hidden
    kernels map hidden -> hidden; peepholes are (hidden, positions) arrays.
    """
    w_xi: Tensor
    w_xf: Tensor
    w_xc: Tensor
    w_xo: Tensor
    w_hi: Tensor
    w_hf: Tensor
    w_hc: Tensor
    w_ho: Tensor
    w_ci: Tensor
    w_cf: Tensor
    w_co: Tensor
    b_i: Tensor
    b_f: Tensor
    b_c: Tensor
    b_o: Tensor

    @classmethod
    def init(cls, rng, in_channels: int, hidden: int, width: int, positions: int,
             prefix: str = "cell"):
        fan_x = in_channels * width
        fan_h = hidden * width
        kw = {}
        for gate in "ifco":
            kw[f"w_x{gate}"] = _uniform(rng, (hidden, in_channels, width), fan_x,
                                        f"{prefix}.w_x{gate}")
        for gate in "ifco":
            kw[f"w_h{gate}"] = _uniform(rng, (hidden, hidden, width), fan_h,
                                        f"{prefix}.w_h{gate}")
        for gate in ("i", "f", "o"):
            kw[f"w_c{gate}"] = _uniform(rng, (hidden, positions), hidden,
                                        f"{prefix}.w_c{gate}")
        for gate in "ifco":
            kw[f"b_{gate}"] = _uniform(rng, (hidden,), fan_x, f"{prefix}.b_{gate}")
        return cls(**kw)

    @property
    def hidden(self) -> int:
        return self.w_xi.data.shape[0]

    @property
    def in_channels(self) -> int:
        return self.w_xi.data.shape[1]

    @property
    def width(self) -> int:
        return self.w_xi.data.shape[2]

    @property
    def positions(self) -> int:
        return self.w_ci.data.shape[1]

    def parameters(self):
        for field in ("w_xi", "w_xf", "w_xc", "w_xo", "w_hi", "w_hf", "w_hc",
                      "w_ho", "w_ci", "w_cf", "w_co", "b_i", "b_f", "b_c", "b_o"):
            t = getattr(self, field)
            yield t.name, t

    def stacked(self):
        """Gate-stacked kernels (i, f, c, o order) built once per forward pass."""
        wx = ad.concat([self.w_xi, self.w_xf, self.w_xc, self.w_xo], axis=0)
        bx = ad.concat([self.b_i, self.b_f, self.b_c, self.b_o], axis=0)
        wh = ad.concat([self.w_hi, self.w_hf, self.w_hc, self.w_ho], axis=0)
        return wx, bx, wh


def convlstm_step(x: Tensor, prev: CellState, params: ConvLSTMCellParams,
                  _stacked=None) -> CellState:
    """One ConvLSTM update; x is (..., in_channels, positions)."""
    wx, bx, wh = params.stacked() if _stacked is None else _stacked
    hidden = params.hidden
    pre = ad.add(ad.conv1d(x, wx, bx), ad.conv1d(prev.h, wh))
    axis = pre.data.ndim - 2
    pre_i = ad.narrow(pre, axis, 0, hidden)
    pre_f = ad.narrow(pre, axis, hidden, hidden)
    pre_c = ad.narrow(pre, axis, 2 * hidden, hidden)
    pre_o = ad.narrow(pre, axis, 3 * hidden, hidden)

    i = ad.sigmoid(ad.add(pre_i, ad.mul_broadcast(prev.c, params.w_ci)))
    f = ad.sigmoid(ad.add(pre_f, ad.mul_broadcast(prev.c, params.w_cf)))
    c = ad.add(ad.mul(f, prev.c), ad.mul(i, ad.tanh(pre_c)))
    o = ad.sigmoid(ad.add(pre_o, ad.mul_broadcast(c, params.w_co)))
    h = ad.mul(o, ad.tanh(c))
    return CellState(h=h, c=c)


@dataclass
class LSTMCellParams:
    """Pointwise LSTM layer: gate-stacked (i, f, g, o) weight matrices."""
    w_x: Tensor  # (4*hidden, in_channels)
    w_h: Tensor  # (4*hidden, hidden)
    b: Tensor    # (4*hidden,)

    @classmethod
    def init(cls, rng, in_channels: int, hidden: int, prefix: str = "lstm"):
        return cls(
            w_x=_uniform(rng, (4 * hidden, in_channels), in_channels, f"{prefix}.w_x"),
            w_h=_uniform(rng, (4 * hidden, hidden), hidden, f"{prefix}.w_h"),
            b=_uniform(rng, (4 * hidden,), in_channels, f"{prefix}.b"),
        )

    @property
    def hidden(self) -> int:
        return self.w_h.data.shape[1]

    @property
    def in_channels(self) -> int:
        return self.w_x.data.shape[1]

    def parameters(self):
        for field in ("w_x", "w_h", "b"):
            t = getattr(self, field)
            yield t.name, t


def lstm_step(x: Tensor, prev: CellState, params: LSTMCellParams) -> CellState:
    """One LSTM update applied independently per position.

    x is (..., in_channels, positions); every position sees only its own
    channel vector.
    """
    hidden = params.hidden
    pre = ad.add(ad.channel_linear(x, params.w_x, params.b),
                 ad.channel_linear(prev.h, params.w_h))
    axis = pre.data.ndim - 2
    i = ad.sigmoid(ad.narrow(pre, axis, 0, hidden))
    f = ad.sigmoid(ad.narrow(pre, axis, hidden, hidden))
    g = ad.tanh(ad.narrow(pre, axis, 2 * hidden, hidden))
    o = ad.sigmoid(ad.narrow(pre, axis, 3 * hidden, hidden))
    c = ad.add(ad.mul(f, prev.c), ad.mul(i, g))
    h = ad.mul(o, ad.tanh(c))
    return CellState(h=h, c=c)


@dataclass
class GRUCellParams:
    """Pointwise GRU layer: (z, r, n)-stacked input map, split hidden maps."""
    w_x: Tensor   # (3*hidden, in_channels)
    w_hzr: Tensor  # (2*hidden, hidden)
    w_hn: Tensor   # (hidden, hidden)
    b: Tensor      # (3*hidden,)

    @classmethod
    def init(cls, rng, in_channels: int, hidden: int, prefix: str = "gru"):
        return cls(
            w_x=_uniform(rng, (3 * hidden, in_channels), in_channels, f"{prefix}.w_x"),
            w_hzr=_uniform(rng, (2 * hidden, hidden), hidden, f"{prefix}.w_hzr"),
            w_hn=_uniform(rng, (hidden, hidden), hidden, f"{prefix}.w_hn"),
            b=_uniform(rng, (3 * hidden,), in_channels, f"{prefix}.b"),
        )

    @property
    def hidden(self) -> int:
        return self.w_hn.data.shape[1]

    @property
    def in_channels(self) -> int:
        return self.w_x.data.shape[1]

    def parameters(self):
        for field in ("w_x", "w_hzr", "w_hn", "b"):
            t = getattr(self, field)
            yield t.name, t


def gru_step(x: Tensor, prev_h: Tensor, params: GRUCellParams) -> Tensor:
    """One GRU update applied independently per position."""
    hidden = params.hidden
    pre_x = ad.channel_linear(x, params.w_x, params.b)
    pre_zr = ad.channel_linear(prev_h, params.w_hzr)
    axis = pre_x.data.ndim - 2
    z = ad.sigmoid(ad.add(ad.narrow(pre_x, axis, 0, hidden),
                          ad.narrow(pre_zr, axis, 0, hidden)))
    r = ad.sigmoid(ad.add(ad.narrow(pre_x, axis, hidden, hidden),
                          ad.narrow(pre_zr, axis, hidden, hidden)))
    n = ad.tanh(ad.add(ad.narrow(pre_x, axis, 2 * hidden, hidden),
                       ad.channel_linear(ad.mul(r, prev_h), params.w_hn)))
    one_minus_z = ad.add(ad.neg(z), ad.constant(np.ones_like(z.data)))
    return ad.add(ad.mul(one_minus_z, n), ad.mul(z, prev_h))


def zero_state(params, batch_shape: tuple, positions: int) -> CellState | Tensor:
    """All-zero initial state matching the cell kind and batch shape."""
    shape = tuple(batch_shape) + (params.hidden, positions)
    if isinstance(params, GRUCellParams):
        return ad.constant(np.zeros(shape))
    return CellState(h=ad.constant(np.zeros(shape)), c=ad.constant(np.zeros(shape)))


def unroll(params, inputs) -> list[Tensor]:
    """Thread a cell over a sequence of inputs from a zero state.

    inputs is a non-empty list of (..., channels, positions) tensors; the
    return value is the hidden tensor at each of the len(inputs) steps.
    """
    inputs = list(inputs)
    if not inputs:
        raise UsageError("unroll: empty input sequence")
    batch_shape = inputs[0].data.shape[:-2]
    positions = inputs[0].data.shape[-1]
    state = zero_state(params, batch_shape, positions)
    hiddens = []
    if isinstance(params, ConvLSTMCellParams):
        stacked = params.stacked()
        for x in inputs:
            state = convlstm_step(x, state, params, _stacked=stacked)
            hiddens.append(state.h)
    elif isinstance(params, LSTMCellParams):
        for x in inputs:
            state = lstm_step(x, state, params)
            hiddens.append(state.h)
    elif isinstance(params, GRUCellParams):
        for x in inputs:
            state = gru_step(x, state, params)
            hiddens.append(state)
    else:
        raise UsageError(f"unroll: unsupported cell params {type(params).__name__}")
    return hiddens
