"""Central finite-difference verification of analytic gradients.

The checker perturbs sampled entries of each parameter in place, re-runs a
caller-supplied forward closure, and compares the two-sided difference
quotient against the gradient from one reverse pass. Relative error uses a
magnitude floor so that near-zero gradients are judged on an absolute
scale where finite differences lose significance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    checked: int

    def ok(self, tol: float) -> bool:
        return self.max_rel_error < tol


def finite_difference_check(build_loss, params, rng=None, samples_per_param=2,
                            step=1e-5, floor=1e-6) -> GradCheckResult:
    """Compare analytic gradients of a scalar loss against central differences.

    build_loss: zero-argument callable re-running the forward pass and
        returning the loss Tensor (it must read the current .data of params).
    params: list of (name, Tensor) leaves to check.
    samples_per_param: entries sampled per parameter array; None checks all.

    Relative error per entry is |a - f| / max(|a|, |f|, floor).
    """
    for _, p in params:
        p.zero_grad()
    loss = build_loss()
    autodiff.backward(loss)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params}

    worst = 0.0
    worst_name = ""
    checked = 0
    for name, p in params:
        flat = p.data.reshape(-1)
        if samples_per_param is None or samples_per_param >= flat.size:
            idxs = np.arange(flat.size)
        else:
            idxs = rng.choice(flat.size, size=samples_per_param, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            up = float(build_loss().data)
            flat[i] = orig - step
            down = float(build_loss().data)
            flat[i] = orig
            fd = (up - down) / (2.0 * step)
            a = analytic[name].reshape(-1)[i]
            rel = abs(a - fd) / max(abs(a), abs(fd), floor)
            checked += 1
            if rel > worst:
                worst = rel
                worst_name = f"{name}[{i}]"
    return GradCheckResult(max_rel_error=worst, worst_param=worst_name, checked=checked)
