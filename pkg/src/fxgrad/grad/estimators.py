"""
Zeroth-order gradients through a black-box effect.

Each estimator runs in two phases. The forward phase feeds the frame to every
replica of a slot and returns a tape with the nominal output and the perturbed
outputs; the caller computes its loss on the nominal output and then asks the
tape for the vector-Jacobian product with the upstream gradient ``v``. No
gradient with respect to the input audio is produced.

SPSA costs two perturbed ``process`` calls per frame for any P; two-sided
finite differences cost 2P.
"""
from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ContractError
from ..fx.base import AudioFrame, ParamVector, as_param_vector, clip_params
from ..fx.replicas import ReplicaSet, replica_process
from .perturbation import PerturbationConfig, sample_perturbation


def _upstream(v: Sequence[float], n: int) -> np.ndarray:
    vec = np.asarray(v, dtype=np.float64).reshape(-1)
    if vec.shape[0] != n:
        raise ContractError(f"upstream gradient has length {vec.shape[0]}, expected {n}")
    return vec


@dataclass
class SpsaTape:
    nominal: AudioFrame
    plus: AudioFrame
    minus: AudioFrame
    delta: np.ndarray
    epsilon: float

    def vjp(self, v: Sequence[float]) -> ParamVector:
        vec = _upstream(v, self.nominal.shape[0])
        # 1 / delta_i == delta_i for +/-1 entries
        return self.delta * (float(np.dot(vec, self.plus - self.minus)) / (2.0 * self.epsilon))


@dataclass
class FdTape:
    nominal: AudioFrame
    plus: np.ndarray  # (P, N)
    minus: np.ndarray
    epsilon: float

    def vjp(self, v: Sequence[float]) -> ParamVector:
        vec = _upstream(v, self.nominal.shape[0])
        return (self.plus - self.minus) @ vec / (2.0 * self.epsilon)


GradientTape = Union[SpsaTape, FdTape]


def spsa_forward(
    r: ReplicaSet,
    x: AudioFrame,
    theta: Sequence[float],
    rng: np.random.Generator,
    epsilon: float,
    executor: Optional[Executor] = None,
    delta: Optional[np.ndarray] = None,
) -> SpsaTape:
    """``delta`` pins the sign vector; otherwise one is drawn from ``rng``."""
    vec = as_param_vector(theta, r.n_params)
    if delta is None:
        delta = sample_perturbation(vec.shape[0], rng)
    else:
        delta = as_param_vector(delta, vec.shape[0])
    nominal, plus, minus = replica_process(
        r, x, vec, clip_params(vec + epsilon * delta), clip_params(vec - epsilon * delta), executor
    )
    return SpsaTape(nominal=nominal, plus=plus, minus=minus, delta=delta, epsilon=epsilon)


def fd_forward(
    r: ReplicaSet,
    x: AudioFrame,
    theta: Sequence[float],
    epsilon: float,
    executor: Optional[Executor] = None,
) -> FdTape:
    vec = as_param_vector(theta, r.n_params)
    n_params = vec.shape[0]
    if len(r.pairs) != n_params:
        raise ContractError(f"finite differences need {n_params} replica pairs, got {len(r.pairs)}")
    jobs = [(r.nominal, vec)]
    for i, (fx_plus, fx_minus) in enumerate(r.pairs):
        step = np.zeros(n_params)
        step[i] = epsilon
        jobs += [(fx_plus, clip_params(vec + step)), (fx_minus, clip_params(vec - step))]
    if executor is None:
        outs: List[AudioFrame] = [fx.process(x, th) for fx, th in jobs]
    else:
        outs = [f.result() for f in [executor.submit(fx.process, x, th) for fx, th in jobs]]
    return FdTape(
        nominal=outs[0],
        plus=np.stack(outs[1::2]),
        minus=np.stack(outs[2::2]),
        epsilon=epsilon,
    )


def estimate_forward(
    r: ReplicaSet,
    x: AudioFrame,
    theta: Sequence[float],
    cfg: PerturbationConfig,
    rng: np.random.Generator,
    executor: Optional[Executor] = None,
) -> GradientTape:
    if cfg.estimator == "fd":
        return fd_forward(r, x, theta, cfg.epsilon, executor)
    return spsa_forward(r, x, theta, rng, cfg.epsilon, executor)


def spsa_vjp(
    r: ReplicaSet,
    x: AudioFrame,
    theta: Sequence[float],
    v: Sequence[float],
    cfg: PerturbationConfig,
    rng: np.random.Generator,
) -> Tuple[AudioFrame, ParamVector]:
    tape = spsa_forward(r, x, theta, rng, cfg.epsilon)
    return tape.nominal, tape.vjp(v)


def fd_vjp(
    r: ReplicaSet,
    x: AudioFrame,
    theta: Sequence[float],
    v: Sequence[float],
    cfg: PerturbationConfig,
) -> Tuple[AudioFrame, ParamVector]:
    tape = fd_forward(r, x, theta, cfg.epsilon)
    return tape.nominal, tape.vjp(v)


def replica_pairs_for(cfg: PerturbationConfig, n_params: int) -> int:
    return n_params if cfg.estimator == "fd" else 1
