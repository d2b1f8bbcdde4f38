"""Shared scalar-equation oracles used by both unit and acceptance tests.

Each oracle is an independent transcription of the cell equations using
plain floats, kept deliberately separate from the package implementation.
"""

import math


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def convlstm_scalar_oracle(x, h, c, p):
    """ConvLSTM update for 1 channel, 1 position, width-1 kernels.

    p maps parameter names (wxi, whi, wci, bi, ...) to floats.
    Returns (h_new, c_new).
    """
    i = sigmoid(p["wxi"] * x + p["whi"] * h + p["wci"] * c + p["bi"])
    f = sigmoid(p["wxf"] * x + p["whf"] * h + p["wcf"] * c + p["bf"])
    c_new = f * c + i * math.tanh(p["wxc"] * x + p["whc"] * h + p["bc"])
    o = sigmoid(p["wxo"] * x + p["who"] * h + p["wco"] * c_new + p["bo"])
    h_new = o * math.tanh(c_new)
    return h_new, c_new


def lstm_scalar_oracle(x, h, c, p):
    """Standard LSTM update (no peepholes) for scalar shapes."""
    i = sigmoid(p["wxi"] * x + p["whi"] * h + p["bi"])
    f = sigmoid(p["wxf"] * x + p["whf"] * h + p["bf"])
    g = math.tanh(p["wxg"] * x + p["whg"] * h + p["bg"])
    o = sigmoid(p["wxo"] * x + p["who"] * h + p["bo"])
    c_new = f * c + i * g
    h_new = o * math.tanh(c_new)
    return h_new, c_new


def gru_scalar_oracle(x, h, p):
    """Standard GRU update for scalar shapes."""
    z = sigmoid(p["wxz"] * x + p["whz"] * h + p["bz"])
    r = sigmoid(p["wxr"] * x + p["whr"] * h + p["br"])
    n = math.tanh(p["wxn"] * x + p["whn"] * (r * h) + p["bn"])
    return (1.0 - z) * n + z * h
