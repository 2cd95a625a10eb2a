"""RMSprop over a dict of named arrays."""

from __future__ import annotations

import numpy as np


def rmsprop_step(params: dict, grads: dict, state: dict | None = None, lr: float = 0.01,
                 decay: float = 0.9, eps: float = 1e-8) -> tuple[dict, dict]:
    """Update ``params`` in place and return ``(params, state)``.

    ``state`` holds the running mean of squared gradients per array and is
    created on first use.
    """
    if state is None:
        state = {}
    for name, g in grads.items():
        v = state.get(name)
        if v is None:
            v = state[name] = np.zeros_like(g)
        v *= decay
        v += (1.0 - decay) * g * g
        params[name] -= lr * g / (np.sqrt(v) + eps)
    return params, state
