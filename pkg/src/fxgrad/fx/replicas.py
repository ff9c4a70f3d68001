"""
Replica bookkeeping for perturbed evaluations of stateful effects.

A batch slot owns one nominal instance plus one (plus, minus) pair per
perturbation direction: one pair for SPSA (3 instances), P pairs for
two-sided finite differences (2P + 1 instances). Every member processes the
same input frame on every call, so their input histories never diverge; only
the parameters differ.
"""
from __future__ import annotations

from concurrent.futures import Executor
from typing import Callable, List, Optional, Sequence, Tuple

from .base import AudioFrame, BlackboxFx


class ReplicaSet:
    def __init__(self, factory: Callable[[], BlackboxFx], n_pairs: int = 1):
        if n_pairs < 1:
            raise ValueError("a replica set needs at least one perturbation pair")
        self.nominal = factory()
        self.pairs: List[Tuple[BlackboxFx, BlackboxFx]] = [(factory(), factory()) for _ in range(n_pairs)]

    @property
    def plus(self) -> BlackboxFx:
        return self.pairs[0][0]

    @property
    def minus(self) -> BlackboxFx:
        return self.pairs[0][1]

    @property
    def n_params(self) -> int:
        return self.nominal.n_params

    def members(self) -> List[BlackboxFx]:
        out = [self.nominal]
        for p, m in self.pairs:
            out.extend((p, m))
        return out

    def __len__(self) -> int:
        return 1 + 2 * len(self.pairs)

    def reset(self) -> None:
        for fx in self.members():
            fx.reset()


def replica_process(
    r: ReplicaSet,
    x: AudioFrame,
    theta_nom: Sequence[float],
    theta_plus: Sequence[float],
    theta_minus: Sequence[float],
    executor: Optional[Executor] = None,
) -> Tuple[AudioFrame, AudioFrame, AudioFrame]:
    """Feed the same frame to the nominal, plus and minus replicas."""
    jobs = [(r.nominal, theta_nom), (r.plus, theta_plus), (r.minus, theta_minus)]
    if executor is None:
        outs = [fx.process(x, th) for fx, th in jobs]
    else:
        futures = [executor.submit(fx.process, x, th) for fx, th in jobs]
        outs = [f.result() for f in futures]
    return outs[0], outs[1], outs[2]
