"""Adam over a dict of numpy tensors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..errors import DomainError
from ..encoder.network import EncoderWeights


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_update(
    weights: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    t: int,
    lr: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam step ``t`` (1-based); returns new tensors and moments."""
    if t < 1:
        raise DomainError(f"Adam step index starts at 1, got {t}")
    new_w: Dict[str, np.ndarray] = {}
    new_state = AdamState(t=t)
    for name, w in weights.items():
        g = grads[name]
        m = beta1 * state.m.get(name, np.zeros_like(w)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(w)) + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_w[name] = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_state.m[name] = m
        new_state.v[name] = v
    return new_w, new_state


class Adam:
    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def step(self, weights: EncoderWeights, grads: Dict[str, np.ndarray]) -> None:
        """Update ``weights`` in place and invalidate caches made under the old version."""
        t = self.state.t + 1
        weights.params, self.state = adam_update(
            weights.params, grads, self.state, t, self.lr, self.beta1, self.beta2, self.eps
        )
        weights.version += 1
