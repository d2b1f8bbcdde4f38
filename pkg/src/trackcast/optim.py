"""Adam optimizer with bias correction, operating on named parameter lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError


@dataclass
class AdamState:
    """Optimizer state: step count and per-parameter moment estimates.

    Moments are keyed by parameter name and created lazily as zeros, so a
    fresh state satisfies the step-0 contract without knowing shapes.
    """

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState):
    """One Adam update applied in place.

    params and grads are parallel lists of (name, ndarray). Returns the
    mutated (params, state) pair for call-site convenience.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for (name, p), (gname, g) in zip(params, grads):
        if name != gname or p.shape != np.shape(g):
            raise DimensionError(f"adam_step: parameter/gradient mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"adam_step: non-finite gradient for parameter {name!r}")
        m = state.first_moment.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        else:
            v = state.second_moment[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / corr1
        v_hat = v / corr2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state
